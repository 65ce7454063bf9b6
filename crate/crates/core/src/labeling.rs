//! Labelings: a partition of a copy into finite levels `L_n` with a witness
//! map `(n, K) ↦ q(n, K)` placing one vertex in every orbit `(⋃_{i<n} L_i, K)`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::ambient::{least_orbit_member_where, orbit_copy, CopyHandle, CopyKind, OrbitType, VertexPredicate};
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};

/// Deepest level that can be fully materialized (`m_4 = 2^2059`).
pub const MAX_DEPTH: usize = 3;

/// Largest prefix a materialized level may range over (`2^20` nodes).
const MAX_GROUND: usize = 20;

/// `m_0 = 1`, `m_n = 2^(Σ_{i<n} m_i)`. Exact for `n ≤ 4`.
pub fn m_sequence(n: usize) -> Result<BigUint> {
    if n > 4 {
        return Err(Error::precondition(format!(
            "m_{n} is too large to materialize (n ≤ 4)"
        )));
    }
    let mut sum = 0u32;
    let mut m = BigUint::from(1u32);
    for _ in 0..n {
        sum += u32::try_from(&m).expect("partial sums fit");
        m = BigUint::from(1u32) << sum;
    }
    Ok(m)
}

/// `m_n` as a machine integer, for the levels that can be materialized.
pub fn level_size(n: usize) -> Option<u64> {
    m_sequence(n).ok().and_then(|m| u64::try_from(m).ok())
}

/// A request for the witness of node `(level, k)`.
pub struct WitnessRequest<'a> {
    pub level: usize,
    /// `unions[j] = ⋃_{i<j} L_i` for `j ≤ level`.
    pub unions: &'a [FinSet],
    pub k: &'a FinSet,
    pub base: &'a CopyHandle,
    pub search_bound: usize,
}

impl WitnessRequest<'_> {
    pub fn prefix(&self) -> &FinSet {
        &self.unions[self.level]
    }

    pub fn orbit(&self) -> OrbitType {
        OrbitType::new(self.prefix().clone(), self.k.clone()).expect("validated by the caller")
    }
}

/// A witness-selection rule. The returned vertex must lie in the requested
/// orbit of the base; labelings reject anything else.
pub trait WitnessChooser: Send + Sync {
    fn choose(&self, req: &WitnessRequest<'_>) -> Result<Vertex>;
}

/// The default rule: least orbit member under the enumeration of the base,
/// with `first` (if any) moved to the front.
#[derive(Debug, Clone, Default)]
pub struct LeastWitness {
    pub first: Option<Vertex>,
}

impl WitnessChooser for LeastWitness {
    fn choose(&self, req: &WitnessRequest<'_>) -> Result<Vertex> {
        let orbit = req.orbit();
        if let Some(f) = self.first {
            if orbit.admits(f) && req.base.contains(f) {
                return Ok(f);
            }
        }
        least_orbit_member_where(&orbit, Vertex(0), req.base, req.search_bound, |v| Some(v) != self.first)
    }
}

/// One entry of the witness map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: FinSet,
    pub q: Vertex,
}

/// The serializable content of a labeling, used for equality and JSON.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelingSnapshot {
    pub variant: usize,
    pub seeds: usize,
    pub levels: Vec<FinSet>,
    pub witness: Vec<WitnessEntry>,
}

/// Levels `L_0..L_d` with their witness map. Levels below `seeds` are given
/// (not generated) and carry no witnesses.
pub struct Labeling {
    base: CopyHandle,
    variant: usize,
    seeds: usize,
    levels: Vec<FinSet>,
    /// `unions[n] = ⋃_{i<n} L_i`, for `n ≤ depth + 1`.
    unions: Vec<FinSet>,
    /// Witnesses of generated levels, indexed by the mask of `K` over `unions[n]`.
    nodes: Vec<Vec<Vertex>>,
    all: FinSet,
    owner: HashMap<Vertex, (usize, u64)>,
    sparse_cap: usize,
    chooser: Arc<dyn WitnessChooser>,
    search_bound: usize,
    sparse: Mutex<BTreeMap<FinSet, Vertex>>,
}

impl std::fmt::Debug for Labeling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Labeling")
            .field("base", &self.base)
            .field("seeds", &self.seeds)
            .field("levels", &self.levels)
            .finish_non_exhaustive()
    }
}

/// Builds the standard labeling of `c` to `depth` (at most 3).
///
/// `variant = s` moves the `s`-th member of `c` to the front of the
/// enumeration, so `L_0 = {c[s]}`. A custom chooser replaces the default
/// least-member rule (and ignores the variant).
pub fn label(
    c: &CopyHandle,
    depth: usize,
    variant: usize,
    chooser: Option<Arc<dyn WitnessChooser>>,
    search_bound: usize,
) -> Result<Labeling> {
    if depth > MAX_DEPTH {
        return Err(Error::precondition(format!(
            "depth {depth} exceeds the cap {MAX_DEPTH}"
        )));
    }
    let chooser = match chooser {
        Some(ch) => ch,
        None => {
            let first = if variant > 0 {
                Some(c.nth(variant, search_bound)?)
            } else {
                None
            };
            Arc::new(LeastWitness { first })
        }
    };
    Labeling::build(c.clone(), Vec::new(), depth + 1, variant, chooser, search_bound)
}

impl Labeling {
    /// Generates `generated` levels on top of the given seed levels.
    pub fn build(
        base: CopyHandle,
        seed_levels: Vec<FinSet>,
        generated: usize,
        variant: usize,
        chooser: Arc<dyn WitnessChooser>,
        search_bound: usize,
    ) -> Result<Labeling> {
        if generated == 0 && seed_levels.is_empty() {
            return Err(Error::precondition("a labeling needs at least one level"));
        }
        let seeds = seed_levels.len();
        let mut unions = vec![FinSet::new()];
        for level in &seed_levels {
            let u = unions.last().unwrap().union(level);
            unions.push(u);
        }
        let mut levels = seed_levels;
        let mut nodes = vec![Vec::new(); seeds];
        for n in seeds..seeds + generated {
            let prefix = unions[n].clone();
            if prefix.len() > MAX_GROUND {
                return Err(Error::precondition(format!(
                    "level {n} ranges over {} vertices, too many to materialize",
                    prefix.len()
                )));
            }
            let mut row = Vec::with_capacity(1 << prefix.len());
            for k in prefix.subsets() {
                let req = WitnessRequest {
                    level: n,
                    unions: &unions,
                    k: &k,
                    base: &base,
                    search_bound,
                };
                row.push(checked_choice(chooser.as_ref(), &req)?);
            }
            let level: FinSet = row.iter().copied().collect();
            unions.push(prefix.union(&level));
            levels.push(level);
            nodes.push(row);
        }
        let depth = levels.len() - 1;
        Ok(Labeling::assemble(
            base,
            variant,
            seeds,
            levels,
            nodes,
            depth + 1,
            chooser,
            search_bound,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        base: CopyHandle,
        variant: usize,
        seeds: usize,
        levels: Vec<FinSet>,
        nodes: Vec<Vec<Vertex>>,
        sparse_cap: usize,
        chooser: Arc<dyn WitnessChooser>,
        search_bound: usize,
    ) -> Labeling {
        let mut unions = vec![FinSet::new()];
        for level in &levels {
            let u = unions.last().unwrap().union(level);
            unions.push(u);
        }
        let all = unions.last().unwrap().clone();
        let mut owner = HashMap::new();
        for (n, row) in nodes.iter().enumerate() {
            for (mask, &v) in row.iter().enumerate() {
                owner.entry(v).or_insert((n, mask as u64));
            }
        }
        Labeling {
            base,
            variant,
            seeds,
            levels,
            unions,
            nodes,
            all,
            owner,
            sparse_cap,
            chooser,
            search_bound,
            sparse: Mutex::new(BTreeMap::new()),
        }
    }

    /// Reassembles a labeling from its parts without validating it (use
    /// [`verify_labeling`] for that). Every node of every generated level
    /// needs a witness entry.
    pub fn from_parts(
        base: CopyHandle,
        variant: usize,
        seeds: usize,
        levels: Vec<FinSet>,
        witness: &[WitnessEntry],
        search_bound: usize,
    ) -> Result<Labeling> {
        if levels.is_empty() || seeds > levels.len() {
            return Err(Error::precondition("a labeling needs at least one level"));
        }
        let mut unions = vec![FinSet::new()];
        for level in &levels {
            let u = unions.last().unwrap().union(level);
            unions.push(u);
        }
        let mut nodes: Vec<Vec<Option<Vertex>>> = (0..levels.len())
            .map(|n| {
                if n < seeds || unions[n].len() > MAX_GROUND {
                    Vec::new()
                } else {
                    vec![None; 1 << unions[n].len()]
                }
            })
            .collect();
        for e in witness {
            let row = nodes
                .get_mut(e.n)
                .filter(|r| !r.is_empty())
                .ok_or_else(|| Error::precondition(format!("witness entry at level {} has no row", e.n)))?;
            let mask = unions[e.n]
                .mask_of(&e.k)
                .ok_or_else(|| Error::precondition(format!("K = {} ⊄ prefix of level {}", e.k, e.n)))?;
            row[mask as usize] = Some(e.q);
        }
        let nodes = nodes
            .into_iter()
            .enumerate()
            .map(|(n, row)| {
                row.into_iter()
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::precondition(format!("missing witness entries at level {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let first = if variant > 0 {
            base.nth(variant, search_bound).ok()
        } else {
            None
        };
        let cap = levels.len();
        Ok(Labeling::assemble(
            base,
            variant,
            seeds,
            levels,
            nodes,
            cap,
            Arc::new(LeastWitness { first }),
            search_bound,
        ))
    }

    pub fn base(&self) -> &CopyHandle {
        &self.base
    }

    pub fn variant(&self) -> usize {
        self.variant
    }

    pub fn seeds(&self) -> usize {
        self.seeds
    }

    /// Index of the last materialized level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Highest level whose nodes can be computed on demand.
    pub fn sparse_cap(&self) -> usize {
        self.sparse_cap
    }

    pub fn search_bound(&self) -> usize {
        self.search_bound
    }

    pub fn levels(&self) -> &[FinSet] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> Option<&FinSet> {
        self.levels.get(n)
    }

    /// `⋃_{i<n} L_i`, for `n ≤ depth + 1`.
    pub fn prefix(&self, n: usize) -> Option<&FinSet> {
        self.unions.get(n)
    }

    /// Every materialized vertex.
    pub fn vertices(&self) -> &FinSet {
        &self.all
    }

    pub fn vertices_from(&self, from: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        let s = self.all.as_slice();
        s[s.partition_point(|&v| v < from)..].iter().copied()
    }

    pub fn contains_vertex(&self, v: Vertex) -> bool {
        self.all.contains(v) || self.sparse.lock().unwrap().values().any(|&w| w == v)
    }

    fn check_prefix(&self, n: usize, k: &FinSet) -> Result<()> {
        let prefix = self
            .unions
            .get(n)
            .ok_or_else(|| Error::precondition(format!("level {n} is beyond depth + 1")))?;
        if !k.is_subset(prefix) {
            return Err(Error::precondition(format!("K = {k} ⊄ ⋃_{{i<{n}}} L_i")));
        }
        Ok(())
    }

    /// The witness `q(n, K)`. Levels up to `depth` are looked up; level
    /// `depth + 1` is computed on demand and memoized.
    pub fn node_vertex(&self, n: usize, k: &FinSet) -> Result<Vertex> {
        if n < self.seeds {
            return Err(Error::precondition(format!(
                "level {n} is a seed level without witnesses"
            )));
        }
        self.check_prefix(n, k)?;
        if n <= self.depth() {
            let mask = self.unions[n].mask_of(k).expect("checked subset");
            return Ok(self.nodes[n][mask as usize]);
        }
        if n > self.sparse_cap {
            return Err(Error::precondition(format!(
                "level {n} is beyond the sparse cap {}",
                self.sparse_cap
            )));
        }
        let mut memo = self.sparse.lock().unwrap();
        if let Some(&v) = memo.get(k) {
            return Ok(v);
        }
        let req = WitnessRequest {
            level: n,
            unions: &self.unions,
            k,
            base: &self.base,
            search_bound: self.search_bound,
        };
        let v = checked_choice(self.chooser.as_ref(), &req)?;
        memo.insert(k.clone(), v);
        Ok(v)
    }

    /// The node `(n, K)` a materialized vertex realizes.
    pub fn node_of(&self, v: Vertex) -> Option<(usize, FinSet)> {
        let &(n, mask) = self.owner.get(&v)?;
        Some((n, self.unions[n].subset_from_mask(mask)))
    }

    /// A member of `o` read off the witness map: the node `(n, K)` at the
    /// first generated level whose prefix covers `H`.
    pub fn structural_witness(&self, o: &OrbitType) -> Result<Vertex> {
        let n = (self.seeds..=self.sparse_cap)
            .find(|&n| o.h().is_subset(&self.unions[n]))
            .ok_or_else(|| Error::precondition(format!("H = {} is not covered by the labeling", o.h())))?;
        self.node_vertex(n, o.k())
    }

    /// The materialized witness map, level by level in mask order.
    pub fn witness_entries(&self) -> Vec<WitnessEntry> {
        let mut out = Vec::new();
        for (n, row) in self.nodes.iter().enumerate() {
            for (mask, &q) in row.iter().enumerate() {
                out.push(WitnessEntry {
                    n,
                    k: self.unions[n].subset_from_mask(mask as u64),
                    q,
                });
            }
        }
        out
    }

    pub fn data(&self) -> LabelingSnapshot {
        LabelingSnapshot {
            variant: self.variant,
            seeds: self.seeds,
            levels: self.levels.clone(),
            witness: self.witness_entries(),
        }
    }

    pub fn to_json(&self) -> Result<LabelingJson> {
        Ok(LabelingJson {
            base: HandleSpec::from_handle(&self.base)?,
            variant: self.variant,
            seeds: self.seeds,
            levels: self.levels.clone(),
            witness: self.witness_entries(),
        })
    }
}

fn checked_choice(chooser: &dyn WitnessChooser, req: &WitnessRequest<'_>) -> Result<Vertex> {
    let v = chooser.choose(req)?;
    if !(req.orbit().admits(v) && req.base.contains(v)) {
        return Err(Error::precondition(format!(
            "chooser returned {v}, not in orbit {} of the base",
            req.orbit()
        )));
    }
    Ok(v)
}

/// JSON description of a copy handle. Custom predicates have no JSON form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HandleSpec {
    Ambient,
    Orbit {
        base: Box<HandleSpec>,
        orbit: OrbitType,
    },
    Filtered {
        base: Box<HandleSpec>,
        predicate: VertexPredicate,
    },
    Labeled {
        labeling: Box<LabelingJson>,
    },
}

impl HandleSpec {
    pub fn from_handle(c: &CopyHandle) -> Result<HandleSpec> {
        Ok(match c.kind() {
            CopyKind::Ambient => HandleSpec::Ambient,
            CopyKind::OrbitRestricted { base, orbit } => HandleSpec::Orbit {
                base: Box::new(HandleSpec::from_handle(base)?),
                orbit: orbit.clone(),
            },
            CopyKind::Filtered { base, predicate } => {
                if !predicate.is_declarative() {
                    return Err(Error::precondition(format!("predicate {predicate} has no JSON form")));
                }
                HandleSpec::Filtered {
                    base: Box::new(HandleSpec::from_handle(base)?),
                    predicate: predicate.clone(),
                }
            }
            CopyKind::Labeled(lab) => HandleSpec::Labeled {
                labeling: Box::new(lab.to_json()?),
            },
        })
    }

    pub fn to_handle(&self, search_bound: usize) -> Result<CopyHandle> {
        Ok(match self {
            HandleSpec::Ambient => CopyHandle::ambient(),
            HandleSpec::Orbit { base, orbit } => orbit_copy(&base.to_handle(search_bound)?, orbit),
            HandleSpec::Filtered { base, predicate } => {
                CopyHandle::filtered(&base.to_handle(search_bound)?, predicate.clone())
            }
            HandleSpec::Labeled { labeling } => CopyHandle::labeled(Arc::new(labeling.to_labeling(search_bound)?)),
        })
    }
}

/// JSON form of a labeling:
/// `{"base": …, "levels": [[…], …], "witness": [{"n": …, "K": […], "q": …}, …]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingJson {
    pub base: HandleSpec,
    #[serde(default)]
    pub variant: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub seeds: usize,
    pub levels: Vec<FinSet>,
    pub witness: Vec<WitnessEntry>,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl LabelingJson {
    pub fn to_labeling(&self, search_bound: usize) -> Result<Labeling> {
        Labeling::from_parts(
            self.base.to_handle(search_bound)?,
            self.variant,
            self.seeds,
            self.levels.clone(),
            &self.witness,
            search_bound,
        )
    }
}

/// A violated labeling axiom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "axiom")]
pub enum Violation {
    /// (L1): a vertex in two levels.
    Overlap {
        vertex: Vertex,
        first: usize,
        second: usize,
    },
    /// (L2)/(L3): the witness map at a level is not a bijection onto it.
    NotBijective { level: usize, detail: String },
    /// `|L_n|` differs from `2^|⋃_{i<n} L_i|` (which is `m_n` for standard labelings).
    SizeMismatch { level: usize, expected: u64, actual: usize },
    /// (L4): a witness outside its orbit.
    OrbitViolation { level: usize, k: FinSet, vertex: Vertex },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LabelingReport {
    pub violations: Vec<Violation>,
}

impl LabelingReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks (L1)–(L4) and the level sizes on the materialized levels.
pub fn verify_labeling(lab: &Labeling) -> LabelingReport {
    let mut violations = Vec::new();
    let mut seen: HashMap<Vertex, usize> = HashMap::new();
    for (n, level) in lab.levels.iter().enumerate() {
        for v in level.iter() {
            if let Some(&first) = seen.get(&v) {
                violations.push(Violation::Overlap {
                    vertex: v,
                    first,
                    second: n,
                });
            } else {
                seen.insert(v, n);
            }
        }
    }
    for n in lab.seeds..lab.levels.len() {
        let row = &lab.nodes[n];
        let image: FinSet = row.iter().copied().collect();
        if image.len() != row.len() {
            violations.push(Violation::NotBijective {
                level: n,
                detail: format!("{} nodes share {} vertices", row.len(), image.len()),
            });
        }
        if image != lab.levels[n] {
            violations.push(Violation::NotBijective {
                level: n,
                detail: format!("witness image {image} differs from L_{n} = {}", lab.levels[n]),
            });
        }
        let expected = 1u64 << lab.unions[n].len();
        if lab.levels[n].len() as u64 != expected {
            violations.push(Violation::SizeMismatch {
                level: n,
                expected,
                actual: lab.levels[n].len(),
            });
        }
        if lab.seeds == 0 && level_size(n) != Some(expected) {
            violations.push(Violation::SizeMismatch {
                level: n,
                expected: level_size(n).unwrap_or(u64::MAX),
                actual: lab.levels[n].len(),
            });
        }
        for (mask, &q) in row.iter().enumerate() {
            let k = lab.unions[n].subset_from_mask(mask as u64);
            let orbit = OrbitType::new(lab.unions[n].clone(), k.clone()).expect("subset");
            if !(orbit.admits(q) && lab.base.contains(q)) {
                violations.push(Violation::OrbitViolation { level: n, k, vertex: q });
            }
        }
    }
    LabelingReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::{adjacent, remove_finite, DEFAULT_SEARCH_BOUND};
    use proptest::prelude::*;

    fn ambient(depth: usize) -> Labeling {
        label(&CopyHandle::ambient(), depth, 0, None, DEFAULT_SEARCH_BOUND).unwrap()
    }

    fn idx(s: &FinSet) -> Vec<u64> {
        s.indices()
    }

    #[test]
    fn m_sequence_values() {
        let small: Vec<u64> = (0..4).map(|n| level_size(n).unwrap()).collect();
        assert_eq!(small, vec![1, 2, 8, 2048]);
        assert_eq!(m_sequence(4).unwrap(), BigUint::from(1u32) << 2059u32);
        assert_eq!(m_sequence(4).unwrap().to_string().len(), 620);
        assert!(m_sequence(5).is_err());
    }

    #[test]
    fn ambient_depth_two() {
        let lab = ambient(2);
        let levels: Vec<Vec<u64>> = lab.levels().iter().map(idx).collect();
        assert_eq!(levels, vec![vec![0], vec![1, 2], (3..=10).collect()]);
        assert!(verify_labeling(&lab).is_ok());
    }

    /// Independent recomputation: each witness is the least vertex outside
    /// the prefix whose bits over the prefix spell out K.
    #[test]
    fn witnesses_are_minimal() {
        let lab = ambient(3);
        for e in lab.witness_entries() {
            let prefix = lab.prefix(e.n).unwrap();
            let expected = (0u64..)
                .find(|&v| {
                    !prefix.contains(Vertex(v))
                        && prefix.iter().all(|h| {
                            let bit = if h.0 < v { v >> h.0 & 1 == 1 } else { h.0 >> v & 1 == 1 };
                            bit == e.k.contains(h)
                        })
                })
                .unwrap();
            assert_eq!(e.q.0, expected, "node ({}, {})", e.n, e.k);
        }
        let sizes: Vec<usize> = lab.levels().iter().map(FinSet::len).collect();
        assert_eq!(sizes, vec![1, 2, 8, 2048]);
        assert_eq!(lab.vertices().len(), 2059);
        assert!(verify_labeling(&lab).is_ok());
    }

    #[test]
    fn variants() {
        let amb = CopyHandle::ambient();
        let lab = label(&amb, 0, 5, None, 100).unwrap();
        assert_eq!(idx(&lab.levels()[0]), vec![5]);
        let firsts: Vec<FinSet> = (0..3)
            .map(|s| label(&amb, 1, s, None, 1000).unwrap().levels()[0].clone())
            .collect();
        assert_ne!(firsts[0], firsts[1]);
        assert_ne!(firsts[1], firsts[2]);
        assert_ne!(firsts[0], firsts[2]);
        for s in 0..3 {
            assert!(verify_labeling(&label(&amb, 2, s, None, 10_000).unwrap()).is_ok());
        }
    }

    #[test]
    fn depth_zero_is_first_element() {
        let c = remove_finite(&CopyHandle::ambient(), &FinSet::of(&[0, 1]));
        let lab = label(&c, 0, 0, None, 100).unwrap();
        assert_eq!(idx(&lab.levels()[0]), vec![2]);
        assert!(label(&c, 4, 0, None, 100).is_err());
    }

    #[test]
    fn node_vertex_examples() {
        let lab = ambient(3);
        assert_eq!(lab.node_vertex(1, &FinSet::of(&[0])).unwrap(), Vertex(1));
        assert_eq!(lab.node_vertex(1, &FinSet::new()).unwrap(), Vertex(2));
        assert_eq!(lab.node_vertex(2, &FinSet::of(&[0, 1])).unwrap(), Vertex(3));
        assert!(matches!(
            lab.node_vertex(1, &FinSet::of(&[1])),
            Err(Error::PreconditionViolation(_))
        ));
        assert!(lab.node_vertex(5, &FinSet::new()).is_err());
    }

    #[test]
    fn sparse_level_is_memoized() {
        let lab = ambient(3);
        let prefix = lab.prefix(4).unwrap().clone();
        assert_eq!(prefix.len(), 2059);
        // Every vertex below 2059 is in the prefix, so the witness is 2^0 + 2^12.
        let k = FinSet::of(&[0, 12]);
        let v = lab.node_vertex(4, &k).unwrap();
        assert_eq!(v, Vertex(4097));
        assert!(OrbitType::new(prefix, k.clone()).unwrap().admits(v));
        assert_eq!(lab.node_vertex(4, &k).unwrap(), v);
        assert!(lab.contains_vertex(v));
    }

    #[test]
    fn sparse_level_on_shallow_labeling() {
        let lab = ambient(1);
        let v = lab.node_vertex(2, &FinSet::of(&[0, 2])).unwrap();
        assert_eq!(v, Vertex(5));
    }

    fn corrupt(lab: &Labeling, edit: impl FnOnce(&mut Vec<FinSet>, &mut Vec<WitnessEntry>)) -> Labeling {
        let mut levels = lab.levels().to_vec();
        let mut witness = lab.witness_entries();
        edit(&mut levels, &mut witness);
        Labeling::from_parts(lab.base().clone(), 0, 0, levels, &witness, 1000).unwrap()
    }

    #[test]
    fn swapped_witnesses_violate_orbit_axiom() {
        let lab = ambient(2);
        let bad = corrupt(&lab, |_, w| {
            let i = w.iter().position(|e| e.n == 2 && e.k.is_empty()).unwrap();
            let j = w.iter().position(|e| e.n == 2 && e.k == FinSet::of(&[0])).unwrap();
            let (a, b) = (w[i].q, w[j].q);
            w[i].q = b;
            w[j].q = a;
        });
        let report = verify_labeling(&bad);
        let l4 = report
            .violations
            .iter()
            .filter(|v| matches!(v, Violation::OrbitViolation { level: 2, .. }))
            .count();
        assert_eq!(l4, 2);
    }

    #[test]
    fn duplicate_vertex_violates_disjointness() {
        let lab = ambient(2);
        let bad = corrupt(&lab, |levels, w| {
            let e = w.iter_mut().find(|e| e.n == 2 && e.k.is_empty()).unwrap();
            let old = e.q;
            e.q = Vertex(1);
            levels[2] = levels[2].difference(&FinSet::singleton(old)).union(&FinSet::of(&[1]));
        });
        let report = verify_labeling(&bad);
        assert!(report.violations.iter().any(|v| matches!(
            v,
            Violation::Overlap {
                vertex: Vertex(1),
                first: 1,
                second: 2
            }
        )));
    }

    #[test]
    fn json_round_trip() {
        let lab = label(&CopyHandle::ambient(), 2, 1, None, 1000).unwrap();
        let json = serde_json::to_string(&lab.to_json().unwrap()).unwrap();
        let back: LabelingJson = serde_json::from_str(&json).unwrap();
        let lab2 = back.to_labeling(1000).unwrap();
        assert_eq!(lab.data(), lab2.data());
        assert_eq!(serde_json::to_string(&lab2.to_json().unwrap()).unwrap(), json);
        let nested = CopyHandle::filtered(&CopyHandle::labeled(Arc::new(lab2)), VertexPredicate::Below(9));
        let spec = HandleSpec::from_handle(&nested).unwrap();
        assert_eq!(HandleSpec::from_handle(&spec.to_handle(1000).unwrap()).unwrap(), spec);
    }

    #[test]
    fn structural_witness_on_labeled_copy() {
        let lab = Arc::new(ambient(2));
        let o = OrbitType::of(&[0, 2], &[2]);
        let w = lab.structural_witness(&o).unwrap();
        assert!(o.admits(w));
        assert_eq!(lab.node_of(Vertex(6)), Some((2, FinSet::of(&[1, 2]))));
    }

    proptest! {
        #[test]
        fn labelings_of_orbit_copies_are_valid(h in 0u64..4, adj in any::<bool>(), variant in 0usize..3) {
            let k = if adj { vec![h] } else { vec![] };
            let c = orbit_copy(&CopyHandle::ambient(), &OrbitType::of(&[h], &k));
            let shallow = label(&c, 1, variant, None, 20_000).unwrap();
            prop_assert!(verify_labeling(&shallow).is_ok());
            // Depth 2 can outgrow 64-bit indices; it must then fail cleanly.
            match label(&c, 2, variant, None, 20_000) {
                Ok(lab) => {
                    prop_assert!(verify_labeling(&lab).is_ok());
                    for v in lab.vertices().iter() {
                        prop_assert_eq!(adjacent(v, Vertex(h)), adj);
                    }
                }
                Err(e) => prop_assert!(matches!(e, Error::SearchExhausted { .. }), "{}", e),
            }
        }
    }
}
