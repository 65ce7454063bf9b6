//! The reversed tree order `≤_L` induced by a labeling on its nodes `(n, K)`:
//! `(m, K') ≤ (n, K'')` iff `m ≥ n` and `K' ∩ ⋃_{i<n} L_i = K''`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ambient::OrbitType;
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};
use crate::labeling::Labeling;

/// Largest level size whose subsets are enumerated as predecessors.
const MAX_BRANCH_BITS: usize = 16;

/// A node `(n, K)` of the tree of a labeling, `K ⊆ ⋃_{i<n} L_i`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreeNode {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: FinSet,
}

impl TreeNode {
    pub fn new(n: usize, k: FinSet) -> Self {
        TreeNode { n, k }
    }

    pub fn root() -> Self {
        TreeNode::new(0, FinSet::new())
    }
}

impl std::fmt::Display for TreeNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.n, self.k)
    }
}

fn check(q: &TreeNode, lab: &Labeling) -> Result<()> {
    if lab.seeds() != 0 {
        return Err(Error::precondition("tree order needs a labeling without seed levels"));
    }
    let prefix = lab
        .prefix(q.n)
        .ok_or_else(|| Error::precondition(format!("node {q} lies beyond depth + 1")))?;
    if !q.k.is_subset(prefix) {
        return Err(Error::precondition(format!("node {q}: K ⊄ ⋃_{{i<{}}} L_i", q.n)));
    }
    Ok(())
}

/// `a ≤_L b`.
pub fn leq(a: &TreeNode, b: &TreeNode, lab: &Labeling) -> Result<bool> {
    check(a, lab)?;
    check(b, lab)?;
    Ok(a.n >= b.n && a.k.intersection(lab.prefix(b.n).unwrap()) == b.k)
}

/// The down-set of `q` is the orbit `(⋃_{i<n} L_i, K)`, plus `q` itself.
pub fn downset_orbit(q: &TreeNode, lab: &Labeling) -> Result<OrbitType> {
    check(q, lab)?;
    OrbitType::new(lab.prefix(q.n).unwrap().clone(), q.k.clone())
}

/// The nodes `(n + 1, K ∪ K1)` for `K1 ⊆ L_n`, in mask order of `K1`.
pub fn immediate_predecessors(q: &TreeNode, lab: &Labeling) -> Result<Vec<TreeNode>> {
    check(q, lab)?;
    if q.n + 1 > lab.sparse_cap() {
        return Err(Error::precondition(format!(
            "predecessors of {q} lie beyond the sparse cap {}",
            lab.sparse_cap()
        )));
    }
    let level = lab.level(q.n).expect("n < sparse cap ≤ depth + 1");
    if level.len() > MAX_BRANCH_BITS {
        return Err(Error::precondition(format!(
            "{q} has 2^{} immediate predecessors, too many to list",
            level.len()
        )));
    }
    Ok(level
        .subsets()
        .map(|k1| TreeNode::new(q.n + 1, q.k.union(&k1)))
        .collect())
}

/// The unique immediate successor (parent) of a non-root node.
pub fn successor(q: &TreeNode, lab: &Labeling) -> Result<Option<TreeNode>> {
    check(q, lab)?;
    if q.n == 0 {
        return Ok(None);
    }
    Ok(Some(TreeNode::new(
        q.n - 1,
        q.k.intersection(lab.prefix(q.n - 1).unwrap()),
    )))
}

/// The nodes strictly above `q`, from the root down.
pub fn interval_to_root(q: &TreeNode, lab: &Labeling) -> Result<Vec<TreeNode>> {
    check(q, lab)?;
    Ok((0..q.n)
        .map(|m| TreeNode::new(m, q.k.intersection(lab.prefix(m).unwrap())))
        .collect())
}

/// All nodes of level `n ≤ depth`, in mask order of `K`.
pub fn nodes_at(lab: &Labeling, n: usize) -> Result<Vec<TreeNode>> {
    if lab.seeds() != 0 || n > lab.depth() {
        return Err(Error::precondition(format!("level {n} is not materialized")));
    }
    Ok(lab.prefix(n).unwrap().subsets().map(|k| TreeNode::new(n, k)).collect())
}

pub fn vertex(q: &TreeNode, lab: &Labeling) -> Result<Vertex> {
    lab.node_vertex(q.n, &q.k)
}

/// DOT rendering of the levels `0..=depth`. Edges run from each node to its
/// parent; `rankdir=BT` puts the root on top.
pub fn export_dot(lab: &Labeling, depth: usize) -> Result<String> {
    if depth > lab.depth() {
        return Err(Error::precondition(format!(
            "depth {depth} exceeds the materialized depth {}",
            lab.depth()
        )));
    }
    let mut out = String::new();
    out.push_str("// Reversed tree order of a labeling: node (n, K) is labeled with its vertex q(n, K).\n");
    out.push_str("// Edges point from a node to its immediate successor; the root is drawn on top.\n");
    out.push_str("digraph labeling {\n  rankdir=BT;\n  node [shape=circle];\n");
    for n in 0..=depth {
        let prefix = lab.prefix(n).unwrap();
        for q in nodes_at(lab, n)? {
            let mask = prefix.mask_of(&q.k).unwrap();
            writeln!(out, "  n{n}_{mask} [label=\"{}\", tooltip=\"{q}\"];", vertex(&q, lab)?).unwrap();
        }
    }
    for n in 1..=depth {
        let prefix = lab.prefix(n).unwrap();
        let parent_prefix = lab.prefix(n - 1).unwrap();
        for q in nodes_at(lab, n)? {
            let mask = prefix.mask_of(&q.k).unwrap();
            let parent = parent_prefix.mask_of(&q.k.intersection(parent_prefix)).unwrap();
            writeln!(out, "  n{n}_{mask} -> n{}_{parent};", n - 1).unwrap();
        }
    }
    out.push_str("}\n");
    Ok(out)
}
