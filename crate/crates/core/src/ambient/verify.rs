use serde::Serialize;

use crate::ambient::{least_orbit_member, orbit_member, CopyHandle, CopyKind, OrbitType};
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};

/// Largest accepted `pattern_depth` for [`verify_copy`].
pub const MAX_PATTERN_DEPTH: usize = 5;

/// One pattern `(H, K)` over the prefix and the witness found for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternCheck {
    pub orbit: OrbitType,
    pub witness: Option<Vertex>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CopyReport {
    pub prefix: Vec<Vertex>,
    pub checks: Vec<PatternCheck>,
}

impl CopyReport {
    pub fn failures(&self) -> impl Iterator<Item = &PatternCheck> {
        self.checks.iter().filter(|c| c.witness.is_none())
    }

    pub fn is_ok(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Looks for a witness of every pattern `K ⊆ H ⊆ P`, where `P` is the first
/// `pattern_depth` members of `c`.
///
/// Labeled copies are answered from their own witness map (the node at the
/// first level whose prefix covers `H`), and the answer is re-checked with
/// `orbit_member`; other handles are scanned.
pub fn verify_copy(c: &CopyHandle, pattern_depth: usize, search_bound: usize) -> Result<CopyReport> {
    if pattern_depth > MAX_PATTERN_DEPTH {
        return Err(Error::precondition(format!(
            "pattern_depth {pattern_depth} exceeds the cap {MAX_PATTERN_DEPTH}"
        )));
    }
    let prefix = c.first(pattern_depth, search_bound)?;
    let ground: FinSet = prefix.iter().copied().collect();
    let mut checks = Vec::new();
    for h in ground.subsets() {
        for k in h.subsets() {
            let orbit = OrbitType::new(h.clone(), k).expect("subset of H");
            let witness = find_witness(c, &orbit, search_bound).filter(|&w| orbit_member(w, &orbit, c));
            checks.push(PatternCheck { orbit, witness });
        }
    }
    Ok(CopyReport { prefix, checks })
}

fn find_witness(c: &CopyHandle, orbit: &OrbitType, search_bound: usize) -> Option<Vertex> {
    if let CopyKind::Labeled(lab) = c.kind() {
        return lab.structural_witness(orbit).ok();
    }
    least_orbit_member(orbit, Vertex(0), c, search_bound).ok()
}
