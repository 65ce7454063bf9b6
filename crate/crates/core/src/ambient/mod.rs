//! The ambient graph (BIT model), orbit types, and copy handles.
//!
//! For `u < v`, `u ~ v` iff bit `u` of `v` is set. This realizes every finite
//! adjacency pattern, so it is a Rado graph with a closed-form extension witness.

mod greedy;
mod handle;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};

pub use greedy::{monochromatic_copy_greedy, GreedyOutcome, DEFAULT_BACKTRACK_BUDGET};
pub use handle::{orbit_copy, remove_finite, CopyHandle, CopyKind, VertexPredicate};
pub use verify::{verify_copy, CopyReport, PatternCheck, MAX_PATTERN_DEPTH};

/// Default number of vertices a witness search may examine.
pub const DEFAULT_SEARCH_BOUND: usize = 10_000;

/// Adjacency in the ambient graph.
pub fn adjacent(u: Vertex, v: Vertex) -> bool {
    let (lo, hi) = if u.0 < v.0 { (u.0, v.0) } else { (v.0, u.0) };
    lo != hi && lo < 64 && (hi >> lo) & 1 == 1
}

/// An orbit type `(H, K)` with `K ⊆ H`: the vertices outside `H` adjacent to
/// exactly `K` among `H`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawOrbit", into = "RawOrbit")]
pub struct OrbitType {
    h: FinSet,
    k: FinSet,
}

#[derive(Serialize, Deserialize)]
struct RawOrbit {
    #[serde(rename = "H")]
    h: FinSet,
    #[serde(rename = "K")]
    k: FinSet,
}

impl TryFrom<RawOrbit> for OrbitType {
    type Error = Error;

    fn try_from(raw: RawOrbit) -> Result<Self> {
        OrbitType::new(raw.h, raw.k)
    }
}

impl From<OrbitType> for RawOrbit {
    fn from(o: OrbitType) -> Self {
        RawOrbit { h: o.h, k: o.k }
    }
}

impl std::fmt::Display for OrbitType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.h, self.k)
    }
}

impl OrbitType {
    pub fn new(h: FinSet, k: FinSet) -> Result<Self> {
        if !k.is_subset(&h) {
            return Err(Error::precondition(format!(
                "orbit type needs K ⊆ H, got H = {h}, K = {k}"
            )));
        }
        Ok(OrbitType { h, k })
    }

    /// Convenience constructor from raw indices; panics if `K ⊄ H`.
    pub fn of(h: &[u64], k: &[u64]) -> Self {
        OrbitType::new(FinSet::of(h), FinSet::of(k)).expect("K must be a subset of H")
    }

    /// `(∅, ∅)`, the whole graph.
    pub fn whole() -> Self {
        OrbitType {
            h: FinSet::new(),
            k: FinSet::new(),
        }
    }

    pub fn h(&self) -> &FinSet {
        &self.h
    }

    pub fn k(&self) -> &FinSet {
        &self.k
    }

    /// Whether `v` realizes the pattern in the ambient graph.
    pub fn admits(&self, v: Vertex) -> bool {
        let ks = self.k.as_slice();
        let mut ki = 0;
        for h in self.h.iter() {
            if h == v {
                return false;
            }
            let in_k = ki < ks.len() && ks[ki] == h;
            if in_k {
                ki += 1;
            }
            if adjacent(v, h) != in_k {
                return false;
            }
        }
        true
    }
}

/// `v ∈ within`, `v ∉ H`, adjacent to all of `K` and to none of `H ∖ K`.
pub fn orbit_member(v: Vertex, o: &OrbitType, within: &CopyHandle) -> bool {
    o.admits(v) && within.contains(v)
}

/// The least member of `o` in `within` at or above `from`, scanning at most
/// `search_bound` vertices of the enumeration.
pub fn least_orbit_member(o: &OrbitType, from: Vertex, within: &CopyHandle, search_bound: usize) -> Result<Vertex> {
    least_orbit_member_where(o, from, within, search_bound, |_| true)
}

/// As [`least_orbit_member`], with an extra admissibility filter.
pub fn least_orbit_member_where(
    o: &OrbitType,
    from: Vertex,
    within: &CopyHandle,
    search_bound: usize,
    mut extra: impl FnMut(Vertex) -> bool,
) -> Result<Vertex> {
    if search_bound == 0 {
        return Err(Error::precondition("search_bound must be positive"));
    }
    within
        .scan(from, search_bound)
        .find(|&v| o.admits(v) && extra(v))
        .ok_or_else(|| {
            Error::exhausted(
                format!("no member of {o} in {} from {from}", within.describe()),
                search_bound,
            )
        })
}

fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Closed-form member of `o` above `strictly_above`:
/// `Σ_{k∈K} 2^k + 2^t` with `t = 1 + max(H ∪ {bitlen(strictly_above)})`.
///
/// `None` when the value does not fit in a `u64`.
pub fn constructive_witness(o: &OrbitType, strictly_above: Vertex) -> Option<Vertex> {
    let top =
        o.h.largest()
            .map_or(0, |m| m.0)
            .max(u64::from(bit_length(strictly_above.0)));
    let t = top.checked_add(1)?;
    if t >= 64 {
        return None;
    }
    let low: u64 = o.k.iter().map(|k| 1u64 << k.0).sum();
    Some(Vertex(low + (1u64 << t)))
}
