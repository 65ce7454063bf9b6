//! Strong subtrees of finite reversed trees, a bounded Halpern–Läuchli search,
//! extraction of a labeled copy from a strong subtree, and the unsplitting
//! pipeline that colors the tree by a 0/1 fusion table.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ambient::{CopyHandle, OrbitType};
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};
use crate::fusion::FusionResult;
use crate::labeling::{Labeling, WitnessEntry, MAX_DEPTH};
use crate::treeorder::{leq, vertex, TreeNode};

/// A finite tree given by parent pointers. The parent of a node is its unique
/// immediate successor; children are its immediate predecessors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct FiniteReversedTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    level: Vec<usize>,
    levels: Vec<Vec<usize>>,
    root: usize,
}

#[derive(Serialize, Deserialize)]
struct RawTree {
    parent: Vec<Option<usize>>,
}

impl TryFrom<RawTree> for FiniteReversedTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        FiniteReversedTree::new(raw.parent)
    }
}

impl From<FiniteReversedTree> for RawTree {
    fn from(t: FiniteReversedTree) -> Self {
        RawTree { parent: t.parent }
    }
}

impl FiniteReversedTree {
    /// Builds the tree, rejecting anything but exactly one root and no cycles.
    pub fn new(parent: Vec<Option<usize>>) -> Result<Self> {
        let n = parent.len();
        let roots: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::precondition(format!(
                "a tree needs exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::precondition(format!("node {v} has unknown parent {p}")));
                }
                children[p].push(v);
            }
        }
        let root = roots[0];
        let mut level = vec![usize::MAX; n];
        let mut levels: Vec<Vec<usize>> = Vec::new();
        let mut frontier = vec![root];
        let mut depth = 0;
        while !frontier.is_empty() {
            for &v in &frontier {
                level[v] = depth;
            }
            let next: Vec<usize> = frontier.iter().flat_map(|&v| children[v].iter().copied()).collect();
            levels.push(frontier);
            frontier = next;
            depth += 1;
        }
        if let Some(v) = level.iter().position(|&l| l == usize::MAX) {
            return Err(Error::precondition(format!("node {v} does not reach the root")));
        }
        for lv in &mut levels {
            lv.sort_unstable();
        }
        Ok(FiniteReversedTree {
            parent,
            children,
            level,
            levels,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn level(&self, v: usize) -> usize {
        self.level[v]
    }

    /// Number of levels.
    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn level_nodes(&self, n: usize) -> &[usize] {
        self.levels.get(n).map_or(&[], Vec::as_slice)
    }

    /// Whether `w` equals `t` or lies below it (is reached from `w` by parents).
    pub fn is_below(&self, mut w: usize, t: usize) -> bool {
        if self.level[w] < self.level[t] {
            return false;
        }
        while self.level[w] > self.level[t] {
            w = self.parent[w].expect("non-root");
        }
        w == t
    }

    /// The nodes at level `n` below `t`, ascending.
    pub fn descendants_at(&self, t: usize, n: usize) -> Vec<usize> {
        if n < self.level[t] {
            return Vec::new();
        }
        let mut frontier = vec![t];
        for _ in self.level[t]..n {
            frontier = frontier
                .iter()
                .flat_map(|&v| self.children[v].iter().copied())
                .collect();
        }
        frontier.sort_unstable();
        frontier
    }
}

/// One entry of the selection map: the member of the next level chosen below
/// child `t` of member `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub s: usize,
    pub t: usize,
    pub chosen: usize,
}

#[derive(Serialize, Deserialize)]
struct RawSubtree {
    root: usize,
    level_set: Vec<usize>,
    members: Vec<Vec<usize>>,
    selection: Vec<Selection>,
}

/// A strong subtree: one root, member sets on the levels of `level_set`, and
/// for every member `s` and child `t` of `s` the unique next-level member
/// below `t`. Members below the top level must have children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "RawSubtree", into = "RawSubtree")]
pub struct StrongSubtree {
    pub root: usize,
    pub level_set: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub selection: BTreeMap<(usize, usize), usize>,
}

impl From<RawSubtree> for StrongSubtree {
    fn from(raw: RawSubtree) -> Self {
        StrongSubtree {
            root: raw.root,
            level_set: raw.level_set,
            members: raw.members,
            selection: raw.selection.into_iter().map(|x| ((x.s, x.t), x.chosen)).collect(),
        }
    }
}

impl From<StrongSubtree> for RawSubtree {
    fn from(s: StrongSubtree) -> Self {
        RawSubtree {
            root: s.root,
            level_set: s.level_set,
            members: s.members,
            selection: s
                .selection
                .into_iter()
                .map(|((s, t), chosen)| Selection { s, t, chosen })
                .collect(),
        }
    }
}

impl StrongSubtree {
    pub fn height(&self) -> usize {
        self.level_set.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().flatten().copied()
    }

    /// Whether every member has color `c`.
    pub fn is_monochromatic(&self, colors: &[usize], c: usize) -> bool {
        self.nodes().all(|v| colors.get(v) == Some(&c))
    }
}

/// Every violated axiom of `s` as a strong subtree of `t`, as text.
pub fn subtree_violations(t: &FiniteReversedTree, s: &StrongSubtree) -> Vec<String> {
    let mut out = Vec::new();
    let h = s.level_set.len();
    if h == 0 {
        out.push("empty level set".to_string());
        return out;
    }
    if s.level_set.windows(2).any(|w| w[0] >= w[1]) {
        out.push(format!("level set {:?} is not strictly increasing", s.level_set));
    }
    if s.members.len() != h {
        out.push(format!("{} member levels for a level set of size {h}", s.members.len()));
        return out;
    }
    if s.nodes().any(|v| v >= t.len()) || s.root >= t.len() {
        out.push("unknown node".to_string());
        return out;
    }
    if s.members[0] != [s.root] {
        out.push(format!("(sst1) level 0 is {:?}, not the root {}", s.members[0], s.root));
    }
    for (k, lv) in s.members.iter().enumerate() {
        if lv.is_empty() {
            out.push(format!("(sst2) level {k} is empty"));
        }
        if lv.windows(2).any(|w| w[0] >= w[1]) {
            out.push(format!("level {k} is not sorted without repeats"));
        }
        if let Some(&v) = lv.iter().find(|&&v| t.level(v) != s.level_set[k]) {
            out.push(format!("(sst2) node {v} is not on host level {}", s.level_set[k]));
        }
    }
    let mut expected = BTreeMap::new();
    for k in 0..h - 1 {
        let mut chosen = Vec::new();
        for &m in &s.members[k] {
            if t.children(m).is_empty() {
                out.push(format!("(sst3) member {m} below the top level is a leaf"));
            }
            for &c in t.children(m) {
                let below: Vec<usize> = s.members[k + 1].iter().copied().filter(|&w| t.is_below(w, c)).collect();
                if below.len() != 1 {
                    out.push(format!(
                        "(sst3) {} members of level {} below child {c} of {m}",
                        below.len(),
                        k + 1
                    ));
                    continue;
                }
                expected.insert((m, c), below[0]);
                chosen.push(below[0]);
            }
        }
        chosen.sort_unstable();
        chosen.dedup();
        if chosen != s.members[k + 1] {
            out.push(format!(
                "(sst3) level {} has members not selected from level {k}",
                k + 1
            ));
        }
    }
    if expected != s.selection {
        out.push("selection map differs from the members below each child".to_string());
    }
    out
}

pub fn is_strong_subtree(t: &FiniteReversedTree, s: &StrongSubtree) -> bool {
    subtree_violations(t, s).is_empty()
}

/// Lexicographic enumeration of increasing `len`-tuples from `from..=to`.
fn level_sets(from: usize, to: usize, len: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, to: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for n in start..=to {
            if to + 1 - n < left {
                break;
            }
            cur.push(n);
            go(n + 1, to, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if from <= to || len == 0 {
        go(from, to, len, &mut Vec::new(), &mut out);
    }
    out
}

/// Per `(node, level index)`: `None` if the node cannot head a subtree, else
/// the chosen `(child, member)` pairs.
type Picks = HashMap<(usize, usize), Option<Vec<(usize, usize)>>>;

struct Attempt<'a> {
    tree: &'a FiniteReversedTree,
    colors: &'a [usize],
    color: usize,
    level_set: &'a [usize],
    good: Picks,
}

impl Attempt<'_> {
    /// Whether `v` (on host level `level_set[k]`) can head a monochromatic
    /// strong subtree on `level_set[k..]`; on success, the least admissible
    /// choice below each child.
    fn good(&mut self, v: usize, k: usize) -> bool {
        if let Some(r) = self.good.get(&(v, k)) {
            return r.is_some();
        }
        let mut picks = Some(Vec::new());
        if self.colors[v] != self.color || (k + 1 < self.level_set.len() && self.tree.children(v).is_empty()) {
            picks = None;
        } else if k + 1 < self.level_set.len() {
            for &c in self.tree.children(v) {
                let next = self.level_set[k + 1];
                let pick = self
                    .tree
                    .descendants_at(c, next)
                    .into_iter()
                    .find(|&w| self.good(w, k + 1));
                match pick {
                    Some(w) => picks.as_mut().unwrap().push((c, w)),
                    None => {
                        picks = None;
                        break;
                    }
                }
            }
        }
        let ok = picks.is_some();
        self.good.insert((v, k), picks);
        ok
    }

    fn assemble(&self, root: usize) -> StrongSubtree {
        let mut members = vec![vec![root]];
        let mut selection = BTreeMap::new();
        for k in 0..self.level_set.len() - 1 {
            let mut next = Vec::new();
            for &s in &members[k] {
                for &(c, w) in self.good[&(s, k)].as_ref().unwrap() {
                    selection.insert((s, c), w);
                    next.push(w);
                }
            }
            next.sort_unstable();
            next.dedup();
            members.push(next);
        }
        StrongSubtree {
            root,
            level_set: self.level_set.to_vec(),
            members,
            selection,
        }
    }
}

/// The canonically first monochromatic strong subtree of the given height:
/// roots by id, then level sets lexicographically, then the least admissible
/// member below each child. `None` means the truncated tree has none.
pub fn find_strong_subtree(t: &FiniteReversedTree, colors: &[usize], height: usize) -> Option<StrongSubtree> {
    if height == 0 || colors.len() != t.len() {
        return None;
    }
    let top = t.height() - 1;
    for root in 0..t.len() {
        let n0 = t.level(root);
        for rest in level_sets(n0 + 1, top, height - 1) {
            let mut level_set = vec![n0];
            level_set.extend(rest);
            let mut at = Attempt {
                tree: t,
                colors,
                color: colors[root],
                level_set: &level_set,
                good: HashMap::new(),
            };
            if at.good(root, 0) {
                let s = at.assemble(root);
                debug_assert!(is_strong_subtree(t, &s));
                return Some(s);
            }
        }
    }
    None
}

/// The tree of a labeling cut at a depth, with node `(n, K)` at id
/// `Σ_{i<n} m_i + mask(K)`.
#[derive(Debug, Clone)]
pub struct TruncatedTree {
    pub tree: FiniteReversedTree,
    pub nodes: Vec<TreeNode>,
    index: HashMap<TreeNode, usize>,
}

impl TruncatedTree {
    pub fn id_of(&self, q: &TreeNode) -> Option<usize> {
        self.index.get(q).copied()
    }
}

/// Materializes the levels `0..=depth` of the tree order of `lab`.
pub fn truncate_tree(lab: &Labeling, depth: usize) -> Result<TruncatedTree> {
    if depth > MAX_DEPTH || depth > lab.depth() || lab.seeds() != 0 {
        return Err(Error::precondition(format!(
            "cannot truncate at depth {depth} (materialized depth {})",
            lab.depth()
        )));
    }
    let mut nodes = Vec::new();
    let mut parent = Vec::new();
    let mut index = HashMap::new();
    for n in 0..=depth {
        let prefix = lab.prefix(n).unwrap();
        for k in prefix.subsets() {
            let p = if n == 0 {
                None
            } else {
                let up = TreeNode::new(n - 1, k.intersection(lab.prefix(n - 1).unwrap()));
                Some(index[&up])
            };
            let q = TreeNode::new(n, k);
            index.insert(q.clone(), nodes.len());
            nodes.push(q);
            parent.push(p);
        }
    }
    Ok(TruncatedTree {
        tree: FiniteReversedTree::new(parent)?,
        nodes,
        index,
    })
}

/// Levels `Λ_0..Λ_{k-1}` read off a strong subtree, with the witness
/// `p(k, H)` of every `H ⊆ ⋃_{j<k} Λ_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyExtraction {
    /// Host levels of the extracted levels.
    pub level_set: Vec<usize>,
    pub lambda_levels: Vec<FinSet>,
    /// Entries `(k, H, vertex)`.
    pub witness: Vec<WitnessEntry>,
    /// The tree node of each witness, parallel to `witness`.
    pub nodes: Vec<TreeNode>,
    /// Height reached (the requested `k`, capped by the subtree's height).
    pub achieved: usize,
}

impl CopyExtraction {
    fn union_below(&self, k: usize) -> FinSet {
        self.lambda_levels[..k]
            .iter()
            .fold(FinSet::new(), |acc, l| acc.union(l))
    }

    /// The extraction as a labeling of the ambient graph.
    pub fn to_labeling(&self, search_bound: usize) -> Result<Labeling> {
        Labeling::from_parts(
            CopyHandle::ambient(),
            0,
            0,
            self.lambda_levels.clone(),
            &self.witness,
            search_bound,
        )
    }

    /// Every failed postcondition, as text: (Λ1), orbit membership, order
    /// coincidence and down-set agreement.
    pub fn violations(&self, lab: &Labeling, s: &StrongSubtree, tt: &TruncatedTree) -> Vec<String> {
        let mut out = Vec::new();
        for (k, lv) in self.lambda_levels.iter().enumerate() {
            let host = lab.level(self.level_set[k]).cloned().unwrap_or_default();
            let in_s: FinSet = s.members[k]
                .iter()
                .filter_map(|&id| vertex(&tt.nodes[id], lab).ok())
                .collect();
            if !lv.is_subset(&host) || !lv.is_subset(&in_s) {
                out.push(format!("(Λ1) Λ_{k} ⊄ S ∩ L_{}", self.level_set[k]));
            }
        }
        for e in &self.witness {
            let o = OrbitType::new(self.union_below(e.n), e.k.clone()).expect("H ⊆ prefix");
            if !o.admits(e.q) {
                out.push(format!("witness {} of ({}, {}) is outside its orbit", e.q, e.n, e.k));
            }
        }
        let all: Vec<(usize, &WitnessEntry, &TreeNode)> =
            self.witness.iter().zip(&self.nodes).map(|(e, q)| (e.n, e, q)).collect();
        for &(ka, a, qa) in &all {
            for &(kb, b, qb) in &all {
                let by_lambda = ka >= kb && a.k.intersection(&self.union_below(kb)) == b.k;
                let by_host = leq(qa, qb, lab).unwrap_or(false);
                if by_lambda != by_host {
                    out.push(format!("order differs at ({ka}, {}) vs ({kb}, {})", a.k, b.k));
                }
            }
        }
        for &(k, e, q) in &all {
            let o = OrbitType::new(self.union_below(k), e.k.clone()).unwrap();
            for &(_, f, r) in &all {
                if o.admits(f.q) != leq(r, q, lab).unwrap_or(false) {
                    out.push(format!(
                        "down-set of ({k}, {}) disagrees with its orbit at {}",
                        e.k, f.q
                    ));
                }
            }
        }
        out
    }
}

/// Reads `Λ_0..Λ_{k-1}` off the strong subtree `s` of `truncate_tree(lab, ·)`:
/// `p(0, ∅)` is the root, and `p(k, H)` is the member selected below the
/// child `(n_{k-1} + 1, K ∪ (H ∩ Λ_{k-1}))` of `p(k-1, H ∩ ⋃_{j<k-1} Λ_j) = (n_{k-1}, K)`.
pub fn copy_from_subtree(lab: &Labeling, tt: &TruncatedTree, s: &StrongSubtree, k: usize) -> Result<CopyExtraction> {
    let bad = subtree_violations(&tt.tree, s);
    if !bad.is_empty() {
        return Err(Error::precondition(format!("not a strong subtree: {}", bad.join("; "))));
    }
    let achieved = k.min(s.height());
    let mut lambda_levels: Vec<FinSet> = Vec::new();
    let mut witness = Vec::new();
    let mut nodes = Vec::new();
    // Node ids of p(j, H), keyed by H, for the previous level j.
    let mut prev: BTreeMap<FinSet, usize> = BTreeMap::new();
    let mut below = FinSet::new();
    for j in 0..achieved {
        let mut cur = BTreeMap::new();
        for h in below.subsets() {
            let id = if j == 0 {
                s.root
            } else {
                let last = &lambda_levels[j - 1];
                let up_prefix = below.difference(last);
                let up = prev[&h.intersection(&up_prefix)];
                let q = &tt.nodes[up];
                let child = TreeNode::new(q.n + 1, q.k.union(&h.intersection(last)));
                let c = tt
                    .id_of(&child)
                    .ok_or_else(|| Error::precondition(format!("child {child} is not in the truncation")))?;
                *s.selection
                    .get(&(up, c))
                    .ok_or_else(|| Error::precondition(format!("no selection below {child}")))?
            };
            let q = tt.nodes[id].clone();
            witness.push(WitnessEntry {
                n: j,
                k: h.clone(),
                q: vertex(&q, lab)?,
            });
            nodes.push(q);
            cur.insert(h, id);
        }
        let level: FinSet = witness.iter().filter(|e| e.n == j).map(|e| e.q).collect();
        below = below.union(&level);
        lambda_levels.push(level);
        prev = cur;
    }
    Ok(CopyExtraction {
        level_set: s.level_set[..achieved].to_vec(),
        lambda_levels,
        witness,
        nodes,
        achieved,
    })
}

/// Which way a monochromatic extraction decides the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Every node has value 1.
    In,
    /// Every node has value 0.
    Out,
}

/// The result of [`unsplit`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unsplit {
    pub side: Side,
    pub level_set: Vec<usize>,
    pub subtree: StrongSubtree,
    pub extraction: CopyExtraction,
}

/// Colors the tree of `fr` by its 0/1 table, finds a monochromatic strong
/// subtree of `height`, and extracts a copy from it. Every extracted node is
/// checked to carry the returned side's color.
pub fn unsplit(fr: &FusionResult, height: usize) -> Result<Unsplit> {
    if height == 0 || height > MAX_DEPTH + 1 {
        return Err(Error::precondition(format!(
            "height {height} is outside 1..={}",
            MAX_DEPTH + 1
        )));
    }
    if let Some(((n, k), v)) = fr.table.iter().find(|(_, &v)| v > 1) {
        return Err(Error::precondition(format!(
            "table value {v} at ({n}, {k}) is not 0 or 1"
        )));
    }
    let tt = truncate_tree(&fr.labeling, fr.depth())?;
    let colors: Vec<usize> = tt
        .nodes
        .iter()
        .map(|q| fr.value(q.n, &q.k).map(|v| v as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::precondition("table does not cover the truncated tree"))?;
    let subtree = find_strong_subtree(&tt.tree, &colors, height).ok_or(Error::NoSubtreeFound { height })?;
    let color = colors[subtree.root];
    let extraction = copy_from_subtree(&fr.labeling, &tt, &subtree, height)?;
    if let Some(q) = extraction.nodes.iter().find(|q| colors[tt.id_of(q).unwrap()] != color) {
        return Err(Error::precondition(format!("extracted node {q} has the other color")));
    }
    Ok(Unsplit {
        side: if color == 1 { Side::In } else { Side::Out },
        level_set: subtree.level_set.clone(),
        subtree,
        extraction,
    })
}

/// DOT rendering of `t` with the members of `s` filled and the selections
/// drawn bold. `labels` (one per node) default to node ids.
pub fn export_subtree_dot(t: &FiniteReversedTree, s: &StrongSubtree, labels: Option<&[String]>) -> String {
    let members: std::collections::BTreeSet<usize> = s.nodes().collect();
    let mut out = String::new();
    out.push_str("// Host tree with a strong subtree: filled nodes are members, bold edges the selections.\n");
    out.push_str("digraph subtree {\n  rankdir=BT;\n  node [shape=circle];\n");
    for v in 0..t.len() {
        let label = labels.and_then(|l| l.get(v)).cloned().unwrap_or_else(|| v.to_string());
        let style = if members.contains(&v) { ", style=filled" } else { "" };
        writeln!(out, "  t{v} [label=\"{label}\"{style}];").unwrap();
    }
    for v in 0..t.len() {
        if let Some(p) = t.parent(v) {
            writeln!(out, "  t{v} -> t{p};").unwrap();
        }
    }
    for (&(m, _), &w) in &s.selection {
        writeln!(out, "  t{w} -> t{m} [style=bold, color=red, constraint=false];").unwrap();
    }
    out.push_str("}\n");
    out
}

/// Vertices of the extraction's levels.
pub fn extraction_vertices(x: &CopyExtraction) -> FinSet {
    x.lambda_levels.iter().fold(FinSet::new(), |acc, l| acc.union(l))
}

#[doc(hidden)]
pub fn vertex_of(tt: &TruncatedTree, lab: &Labeling, id: usize) -> Result<Vertex> {
    vertex(&tt.nodes[id], lab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::VertexPredicate;
    use crate::ambient::DEFAULT_SEARCH_BOUND;
    use crate::fusion::{fuse, OracleSpec, ValueRule};
    use crate::labeling::{label, verify_labeling};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    const B: usize = DEFAULT_SEARCH_BOUND;

    fn binary(height: usize) -> FiniteReversedTree {
        let mut parent = vec![None];
        let mut frontier = vec![0];
        for _ in 1..height {
            let mut next = Vec::new();
            for &v in &frontier {
                for _ in 0..2 {
                    parent.push(Some(v));
                    next.push(parent.len() - 1);
                }
            }
            frontier = next;
        }
        FiniteReversedTree::new(parent).unwrap()
    }

    /// Set-based validity: members on the declared levels, the root alone on
    /// top, and below every child of a member exactly one next-level member,
    /// each of which hangs below some member.
    fn valid_by_sets(t: &FiniteReversedTree, root: usize, ls: &[usize], members: &[Vec<usize>]) -> bool {
        if members.len() != ls.len() || members[0] != [root] || t.level(root) != ls[0] {
            return false;
        }
        if ls.windows(2).any(|w| w[0] >= w[1]) {
            return false;
        }
        for (k, lv) in members.iter().enumerate() {
            if lv.is_empty() || lv.iter().any(|&v| t.level(v) != ls[k]) {
                return false;
            }
        }
        for k in 0..ls.len() - 1 {
            for &m in &members[k] {
                if t.children(m).is_empty() {
                    return false;
                }
                for &c in t.children(m) {
                    if members[k + 1].iter().filter(|&&w| t.is_below(w, c)).count() != 1 {
                        return false;
                    }
                }
            }
            if !members[k + 1]
                .iter()
                .all(|&w| members[k].iter().any(|&m| t.is_below(w, m)))
            {
                return false;
            }
        }
        true
    }

    fn subsets_of(xs: &[usize]) -> Vec<Vec<usize>> {
        (0..1u64 << xs.len())
            .map(|m| {
                xs.iter()
                    .enumerate()
                    .filter(|(i, _)| m >> i & 1 == 1)
                    .map(|(_, &x)| x)
                    .collect()
            })
            .collect()
    }

    /// Enumerates member families for (root, level set) drawn from `pool`,
    /// level by level among nodes hanging below the previous level.
    fn families(
        t: &FiniteReversedTree,
        ls: &[usize],
        pool: &dyn Fn(usize) -> bool,
        root: usize,
    ) -> Vec<Vec<Vec<usize>>> {
        let mut out = vec![vec![vec![root]]];
        for &n in &ls[1..] {
            let mut next = Vec::new();
            for fam in out {
                let last = fam.last().unwrap();
                let cands: Vec<usize> = t
                    .level_nodes(n)
                    .iter()
                    .copied()
                    .filter(|&w| pool(w) && last.iter().any(|&m| t.is_below(w, m)))
                    .collect();
                for sub in subsets_of(&cands) {
                    let mut f = fam.clone();
                    f.push(sub);
                    next.push(f);
                }
            }
            out = next;
        }
        out
    }

    fn with_selection(t: &FiniteReversedTree, root: usize, ls: &[usize], members: Vec<Vec<usize>>) -> StrongSubtree {
        let mut selection = BTreeMap::new();
        for k in 0..ls.len() - 1 {
            for &m in &members[k] {
                for &c in t.children(m) {
                    if let Some(&w) = members[k + 1].iter().find(|&&w| t.is_below(w, c)) {
                        selection.insert((m, c), w);
                    }
                }
            }
        }
        StrongSubtree {
            root,
            level_set: ls.to_vec(),
            members,
            selection,
        }
    }

    /// Brute force: the first (root, level set) in canonical order carrying a
    /// monochromatic strong subtree of the height.
    fn brute(t: &FiniteReversedTree, colors: &[usize], height: usize) -> Option<(usize, Vec<usize>)> {
        for root in 0..t.len() {
            let c = colors[root];
            for rest in level_sets(t.level(root) + 1, t.height() - 1, height - 1) {
                let mut ls = vec![t.level(root)];
                ls.extend(rest);
                let pool = |w: usize| colors[w] == c;
                if families(t, &ls, &pool, root)
                    .iter()
                    .any(|f| valid_by_sets(t, root, &ls, f))
                {
                    return Some((root, ls));
                }
            }
        }
        None
    }

    fn random_tree(rng: &mut ChaCha8Rng, max: usize) -> FiniteReversedTree {
        let n = rng.gen_range(1..=max);
        let parent = (0..n)
            .map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) })
            .collect();
        FiniteReversedTree::new(parent).unwrap()
    }

    #[test]
    fn tree_validation() {
        assert!(FiniteReversedTree::new(vec![None, None]).is_err());
        assert!(FiniteReversedTree::new(vec![Some(1), Some(0), None]).is_err());
        assert!(FiniteReversedTree::new(vec![None, Some(7)]).is_err());
        let t = binary(3);
        assert_eq!(t.len(), 7);
        assert_eq!(t.level_nodes(2), &[3, 4, 5, 6]);
        assert!(t.is_below(5, 2) && !t.is_below(5, 1));
        assert_eq!(t.descendants_at(0, 2), vec![3, 4, 5, 6]);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"parent":[null,0,0,1,1,2,2]}"#);
        assert_eq!(serde_json::from_str::<FiniteReversedTree>(&json).unwrap(), t);
    }

    #[test]
    fn strong_subtree_examples() {
        let t = binary(3);
        let full = with_selection(&t, 0, &[0, 1, 2], vec![vec![0], vec![1, 2], vec![3, 4, 5, 6]]);
        assert!(is_strong_subtree(&t, &full));
        let mut missing = full.clone();
        missing.members[2] = vec![3, 5, 6];
        missing.selection.remove(&(1, 4));
        assert!(!is_strong_subtree(&t, &missing));
        let single = with_selection(&t, 0, &[0], vec![vec![0]]);
        assert!(is_strong_subtree(&t, &single));
        let skip = with_selection(&t, 0, &[0, 2], vec![vec![0], vec![3, 5]]);
        assert!(is_strong_subtree(&t, &skip));
        let json = serde_json::to_string(&skip).unwrap();
        assert_eq!(serde_json::from_str::<StrongSubtree>(&json).unwrap(), skip);
    }

    #[test]
    fn find_examples() {
        let t = binary(4);
        let s = find_strong_subtree(&t, &vec![0; t.len()], 4).unwrap();
        assert_eq!(s.level_set, vec![0, 1, 2, 3]);
        let parity: Vec<usize> = (0..t.len()).map(|v| t.level(v) % 2).collect();
        let s = find_strong_subtree(&t, &parity, 2).unwrap();
        assert_eq!(s.level_set, vec![0, 2]);
        assert!(is_strong_subtree(&t, &s) && s.is_monochromatic(&parity, 0));
        let two = FiniteReversedTree::new(vec![None, Some(0)]).unwrap();
        assert!(find_strong_subtree(&two, &[0, 1], 2).is_none());
        assert!(find_strong_subtree(&two, &[0, 0], 3).is_none());
    }

    #[test]
    fn search_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let t = random_tree(&mut rng, 25);
            let colors: Vec<usize> = (0..t.len()).map(|_| rng.gen_range(0..2)).collect();
            for height in 1..=3 {
                let found = find_strong_subtree(&t, &colors, height);
                let expect = brute(&t, &colors, height);
                assert_eq!(found.as_ref().map(|s| (s.root, s.level_set.clone())), expect);
                if let Some(s) = found {
                    assert!(is_strong_subtree(&t, &s));
                    assert!(s.is_monochromatic(&colors, colors[s.root]));
                }
            }
        }
    }

    #[test]
    fn validity_agrees_with_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let t = random_tree(&mut rng, 25);
            let all = |_: usize| true;
            for root in 0..t.len() {
                for len in 1..=3 {
                    for rest in level_sets(t.level(root) + 1, t.height() - 1, len - 1) {
                        let mut ls = vec![t.level(root)];
                        ls.extend(rest);
                        for fam in families(&t, &ls, &all, root) {
                            let s = with_selection(&t, root, &ls, fam.clone());
                            assert_eq!(is_strong_subtree(&t, &s), valid_by_sets(&t, root, &ls, &fam));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn truncation_sizes() {
        let lab = label(&CopyHandle::ambient(), 3, 0, None, B).unwrap();
        assert_eq!(truncate_tree(&lab, 1).unwrap().tree.len(), 3);
        let t2 = truncate_tree(&lab, 2).unwrap();
        assert_eq!(t2.tree.len(), 11);
        assert_eq!(t2.tree.children(0).len(), 2);
        assert_eq!(t2.id_of(&TreeNode::new(2, FinSet::of(&[0, 2]))), Some(3 + 0b101));
        assert_eq!(truncate_tree(&lab, 3).unwrap().tree.len(), 2059);
        assert!(truncate_tree(&lab, 4).is_err());
    }

    #[test]
    fn full_subtree_extracts_the_labeling() {
        let lab = label(&CopyHandle::ambient(), 2, 0, None, B).unwrap();
        let tt = truncate_tree(&lab, 2).unwrap();
        let s = find_strong_subtree(&tt.tree, &vec![0; tt.tree.len()], 3).unwrap();
        assert_eq!(s.level_set, vec![0, 1, 2]);
        let x = copy_from_subtree(&lab, &tt, &s, 3).unwrap();
        assert_eq!(x.achieved, 3);
        assert_eq!(x.lambda_levels, lab.levels());
        assert!(x.violations(&lab, &s, &tt).is_empty());
        assert!(verify_labeling(&x.to_labeling(B).unwrap()).is_ok());
    }

    #[test]
    fn extraction_from_a_sparser_subtree() {
        let lab = label(&CopyHandle::ambient(), 3, 0, None, B).unwrap();
        let tt = truncate_tree(&lab, 3).unwrap();
        let parity: Vec<usize> = tt.nodes.iter().map(|q| q.n % 2).collect();
        let s = find_strong_subtree(&tt.tree, &parity, 2).unwrap();
        assert_eq!(s.level_set, vec![0, 2]);
        let x = copy_from_subtree(&lab, &tt, &s, 5).unwrap();
        assert_eq!(x.achieved, 2);
        let sizes: Vec<usize> = x.lambda_levels.iter().map(FinSet::len).collect();
        assert_eq!(sizes, vec![1, 2]);
        assert!(x.violations(&lab, &s, &tt).is_empty());
        assert!(verify_labeling(&x.to_labeling(B).unwrap()).is_ok());
    }

    #[test]
    fn invalid_subtree_is_rejected() {
        let lab = label(&CopyHandle::ambient(), 2, 0, None, B).unwrap();
        let tt = truncate_tree(&lab, 2).unwrap();
        let mut s = find_strong_subtree(&tt.tree, &[0; 11], 2).unwrap();
        s.members[1].pop();
        assert!(matches!(
            copy_from_subtree(&lab, &tt, &s, 2),
            Err(Error::PreconditionViolation(_))
        ));
    }

    fn fused(value: ValueRule, depth: usize) -> FusionResult {
        fuse(
            &CopyHandle::ambient(),
            Arc::new(OracleSpec::new(value, VertexPredicate::All)),
            depth,
            B,
        )
        .unwrap()
    }

    #[test]
    fn unsplit_examples() {
        let u = unsplit(&fused(ValueRule::Const(1), 2), 3).unwrap();
        assert_eq!(u.side, Side::In);
        assert_eq!(u.level_set, vec![0, 1, 2]);

        let u = unsplit(&fused(ValueRule::EmptyK, 2), 2).unwrap();
        assert_eq!(u.side, Side::Out);
        assert_eq!(u.subtree.root, 2);

        let bad = fused(ValueRule::CardK, 2);
        assert!(matches!(unsplit(&bad, 2), Err(Error::PreconditionViolation(_))));

        let none = unsplit(&fused(ValueRule::LevelParity, 1), 3);
        assert!(matches!(none, Err(Error::NoSubtreeFound { height: 3 })));
    }

    #[test]
    fn dot_overlay() {
        let t = binary(3);
        let s = find_strong_subtree(&t, &[0; 7], 2).unwrap();
        let dot = export_subtree_dot(&t, &s, None);
        assert_eq!(dot.matches("style=filled").count(), 3);
        assert_eq!(dot.matches("style=bold").count(), 2);
    }
}
