//! Vertices and canonical finite vertex sets.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A vertex of the ambient graph, identified by its index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vertex(pub u64);

impl Vertex {
    pub fn index(self) -> u64 {
        self.0
    }
}

impl From<u64> for Vertex {
    fn from(v: u64) -> Self {
        Vertex(v)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite set of vertices, kept sorted ascending without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Vertex>", into = "Vec<Vertex>")]
pub struct FinSet(Vec<Vertex>);

impl From<Vec<Vertex>> for FinSet {
    fn from(mut v: Vec<Vertex>) -> Self {
        v.sort_unstable();
        v.dedup();
        FinSet(v)
    }
}

impl From<FinSet> for Vec<Vertex> {
    fn from(s: FinSet) -> Self {
        s.0
    }
}

impl FromIterator<Vertex> for FinSet {
    fn from_iter<I: IntoIterator<Item = Vertex>>(iter: I) -> Self {
        FinSet::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl FromIterator<u64> for FinSet {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        iter.into_iter().map(Vertex).collect()
    }
}

impl<'a> IntoIterator for &'a FinSet {
    type Item = Vertex;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, Vertex>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl fmt::Display for FinSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

impl FinSet {
    pub fn new() -> Self {
        FinSet(Vec::new())
    }

    pub fn singleton(v: Vertex) -> Self {
        FinSet(vec![v])
    }

    /// Builds a set from raw indices.
    pub fn of(items: &[u64]) -> Self {
        items.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Vertex] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.0.iter().copied()
    }

    pub fn indices(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.0).collect()
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    /// Position of `v` in ascending order, if present.
    pub fn position(&self, v: Vertex) -> Option<usize> {
        self.0.binary_search(&v).ok()
    }

    pub fn largest(&self) -> Option<Vertex> {
        self.0.last().copied()
    }

    pub fn insert(&mut self, v: Vertex) -> bool {
        match self.0.binary_search(&v) {
            Ok(_) => false,
            Err(i) => {
                self.0.insert(i, v);
                true
            }
        }
    }

    pub fn is_subset(&self, other: &FinSet) -> bool {
        self.0.len() <= other.0.len() && self.0.iter().all(|v| other.contains(*v))
    }

    pub fn is_disjoint(&self, other: &FinSet) -> bool {
        self.0.iter().all(|v| !other.contains(*v))
    }

    pub fn union(&self, other: &FinSet) -> FinSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        FinSet(out)
    }

    pub fn intersection(&self, other: &FinSet) -> FinSet {
        FinSet(self.0.iter().copied().filter(|v| other.contains(*v)).collect())
    }

    pub fn difference(&self, other: &FinSet) -> FinSet {
        FinSet(self.0.iter().copied().filter(|v| !other.contains(*v)).collect())
    }

    /// The subset selected by `mask`: bit `i` picks the `i`-th smallest element.
    pub fn subset_from_mask(&self, mask: u64) -> FinSet {
        FinSet(
            self.0
                .iter()
                .enumerate()
                .filter(|(i, _)| *i < 64 && mask >> i & 1 == 1)
                .map(|(_, v)| *v)
                .collect(),
        )
    }

    /// Inverse of [`FinSet::subset_from_mask`]. `None` if `sub` is not a subset
    /// or does not fit in 64 bits.
    pub fn mask_of(&self, sub: &FinSet) -> Option<u64> {
        let mut mask = 0u64;
        for v in sub.iter() {
            let i = self.position(v)?;
            if i >= 64 {
                return None;
            }
            mask |= 1 << i;
        }
        Some(mask)
    }

    /// All subsets in mask order. Only for sets of fewer than 64 elements.
    pub fn subsets(&self) -> impl Iterator<Item = FinSet> + '_ {
        assert!(self.len() < 64, "subset enumeration over {} elements", self.len());
        (0..1u64 << self.len()).map(move |m| self.subset_from_mask(m))
    }
}
