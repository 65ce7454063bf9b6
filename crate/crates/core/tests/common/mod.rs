//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use rado_core::ramsey::{FiniteReversedTree, StrongSubtree};
use std::collections::BTreeMap;

/// Adjacency from the binary expansion, without shifts.
pub fn adj(u: u64, v: u64) -> bool {
    if u == v {
        return false;
    }
    let (lo, hi) = (u.min(v), u.max(v));
    let digits: Vec<u8> = format!("{hi:b}").bytes().rev().collect();
    digits.get(lo as usize) == Some(&b'1')
}

/// Whether `v ∉ h` and `v` is adjacent to exactly `k` among `h`.
pub fn in_orbit(v: u64, h: &[u64], k: &[u64]) -> bool {
    !h.contains(&v) && h.iter().all(|&x| adj(v, x) == k.contains(&x))
}

/// Increasing `len`-tuples from `from..=to`, lexicographically.
pub fn level_sets(from: usize, to: usize, len: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for n in from..=to {
        for mut rest in level_sets(n + 1, to, len - 1) {
            rest.insert(0, n);
            out.push(rest);
        }
    }
    out
}

fn below(t: &FiniteReversedTree, mut w: usize, top: usize) -> bool {
    loop {
        if w == top {
            return true;
        }
        match t.parent(w) {
            Some(p) => w = p,
            None => return false,
        }
    }
}

/// Set-based validity of a candidate subtree.
pub fn valid_by_sets(t: &FiniteReversedTree, root: usize, ls: &[usize], members: &[Vec<usize>]) -> bool {
    if members.len() != ls.len() || members[0] != [root] || t.level(root) != ls[0] {
        return false;
    }
    if members
        .iter()
        .zip(ls)
        .any(|(m, &n)| m.is_empty() || m.iter().any(|&v| t.level(v) != n))
    {
        return false;
    }
    for k in 0..ls.len() - 1 {
        for &m in &members[k] {
            if t.children(m).is_empty() {
                return false;
            }
            for &c in t.children(m) {
                if members[k + 1].iter().filter(|&&w| below(t, w, c)).count() != 1 {
                    return false;
                }
            }
        }
        if !members[k + 1]
            .iter()
            .all(|&w| members[k].iter().any(|&m| below(t, w, m)))
        {
            return false;
        }
    }
    true
}

/// All candidate member families for a root and level set, each level drawn
/// from the `pool` nodes hanging below the previous level.
pub fn candidates(
    t: &FiniteReversedTree,
    root: usize,
    ls: &[usize],
    pool: &dyn Fn(usize) -> bool,
) -> Vec<Vec<Vec<usize>>> {
    let mut out = vec![vec![vec![root]]];
    for &n in &ls[1..] {
        let mut next = Vec::new();
        for fam in out {
            let last = fam.last().unwrap();
            let cands: Vec<usize> = (0..t.len())
                .filter(|&w| t.level(w) == n && pool(w) && last.iter().any(|&m| below(t, w, m)))
                .collect();
            for mask in 0..1u64 << cands.len() {
                let sub = cands
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &x)| x)
                    .collect();
                let mut f = fam.clone();
                f.push(sub);
                next.push(f);
            }
        }
        out = next;
    }
    out
}

/// A candidate with its selection map derived from the members.
pub fn with_selection(t: &FiniteReversedTree, root: usize, ls: &[usize], members: Vec<Vec<usize>>) -> StrongSubtree {
    let mut selection = BTreeMap::new();
    for k in 0..ls.len() - 1 {
        for &m in &members[k] {
            for &c in t.children(m) {
                if let Some(&w) = members[k + 1].iter().find(|&&w| below(t, w, c)) {
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

/// The first (root, level set) in canonical order that carries a
/// monochromatic strong subtree, by exhaustive enumeration.
pub fn brute_force_hl(t: &FiniteReversedTree, colors: &[usize], height: usize) -> Option<(usize, Vec<usize>)> {
    for root in 0..t.len() {
        let c = colors[root];
        for rest in level_sets(t.level(root) + 1, t.height() - 1, height - 1) {
            let mut ls = vec![t.level(root)];
            ls.extend(rest);
            let pool = |w: usize| colors[w] == c;
            if candidates(t, root, &ls, &pool)
                .iter()
                .any(|f| valid_by_sets(t, root, &ls, f))
            {
                return Some((root, ls));
            }
        }
    }
    None
}
