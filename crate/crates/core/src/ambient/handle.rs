use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::ambient::OrbitType;
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};
use crate::labeling::Labeling;

/// A decidable vertex predicate. The declarative variants have a canonical
/// string form (`all`, `mod:3:0`, `bitset:5:1`, `in:1,2` ...) used in JSON.
#[derive(Clone)]
pub enum VertexPredicate {
    All,
    Nothing,
    Residue {
        modulus: u64,
        residue: u64,
    },
    Below(u64),
    AtLeast(u64),
    /// `v & mask == value`.
    Bits {
        mask: u64,
        value: u64,
    },
    In(FinSet),
    NotIn(FinSet),
    Not(Box<VertexPredicate>),
    Custom {
        name: String,
        test: Arc<dyn Fn(Vertex) -> bool + Send + Sync>,
    },
}

impl VertexPredicate {
    pub fn custom(name: impl Into<String>, test: impl Fn(Vertex) -> bool + Send + Sync + 'static) -> Self {
        VertexPredicate::Custom {
            name: name.into(),
            test: Arc::new(test),
        }
    }

    pub fn test(&self, v: Vertex) -> bool {
        match self {
            VertexPredicate::All => true,
            VertexPredicate::Nothing => false,
            VertexPredicate::Residue { modulus, residue } => v.0 % modulus == *residue,
            VertexPredicate::Below(n) => v.0 < *n,
            VertexPredicate::AtLeast(n) => v.0 >= *n,
            VertexPredicate::Bits { mask, value } => v.0 & mask == *value,
            VertexPredicate::In(s) => s.contains(v),
            VertexPredicate::NotIn(s) => !s.contains(v),
            VertexPredicate::Not(p) => !p.test(v),
            VertexPredicate::Custom { test, .. } => test(v),
        }
    }

    /// Whether the predicate can be written to and read back from JSON.
    pub fn is_declarative(&self) -> bool {
        match self {
            VertexPredicate::Custom { .. } => false,
            VertexPredicate::Not(p) => p.is_declarative(),
            _ => true,
        }
    }
}

impl PartialEq for VertexPredicate {
    fn eq(&self, other: &Self) -> bool {
        use VertexPredicate::*;
        match (self, other) {
            (All, All) | (Nothing, Nothing) => true,
            (Residue { modulus: a, residue: b }, Residue { modulus: c, residue: d }) => a == c && b == d,
            (Below(a), Below(b)) | (AtLeast(a), AtLeast(b)) => a == b,
            (Bits { mask: a, value: b }, Bits { mask: c, value: d }) => a == c && b == d,
            (In(a), In(b)) | (NotIn(a), NotIn(b)) => a == b,
            (Not(a), Not(b)) => a == b,
            (Custom { name: a, test: f }, Custom { name: b, test: g }) => a == b && Arc::ptr_eq(f, g),
            _ => false,
        }
    }
}

impl Eq for VertexPredicate {}

fn join(s: &FinSet) -> String {
    s.indices().iter().map(u64::to_string).collect::<Vec<_>>().join(",")
}

impl fmt::Display for VertexPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexPredicate::All => write!(f, "all"),
            VertexPredicate::Nothing => write!(f, "none"),
            VertexPredicate::Residue { modulus, residue } => write!(f, "mod:{modulus}:{residue}"),
            VertexPredicate::Below(n) => write!(f, "below:{n}"),
            VertexPredicate::AtLeast(n) => write!(f, "atleast:{n}"),
            VertexPredicate::Bits { mask, value } => write!(f, "bitset:{mask}:{value}"),
            VertexPredicate::In(s) => write!(f, "in:{}", join(s)),
            VertexPredicate::NotIn(s) => write!(f, "notin:{}", join(s)),
            VertexPredicate::Not(p) => write!(f, "not:{p}"),
            VertexPredicate::Custom { name, .. } => write!(f, "custom:{name}"),
        }
    }
}

impl fmt::Debug for VertexPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VertexPredicate({self})")
    }
}

fn parse_u64(s: &str, whole: &str) -> Result<u64> {
    s.trim()
        .parse()
        .map_err(|_| Error::precondition(format!("bad number {s:?} in predicate {whole:?}")))
}

fn parse_set(s: &str, whole: &str) -> Result<FinSet> {
    if s.trim().is_empty() {
        return Ok(FinSet::new());
    }
    s.split(',')
        .map(|x| parse_u64(x, whole).map(Vertex))
        .collect::<Result<Vec<_>>>()
        .map(FinSet::from)
}

impl FromStr for VertexPredicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let parts: Vec<&str> = rest.split(':').collect();
        let pred = match (head, parts.as_slice()) {
            ("all", _) => VertexPredicate::All,
            ("none", _) => VertexPredicate::Nothing,
            ("even", _) => VertexPredicate::Residue { modulus: 2, residue: 0 },
            ("odd", _) => VertexPredicate::Residue { modulus: 2, residue: 1 },
            ("mod", [m, r]) => {
                let modulus = parse_u64(m, s)?;
                let residue = parse_u64(r, s)?;
                if modulus == 0 || residue >= modulus {
                    return Err(Error::precondition(format!("bad residue class in {s:?}")));
                }
                VertexPredicate::Residue { modulus, residue }
            }
            ("below", [n]) => VertexPredicate::Below(parse_u64(n, s)?),
            ("atleast", [n]) => VertexPredicate::AtLeast(parse_u64(n, s)?),
            ("bitset", [m]) => {
                let mask = parse_u64(m, s)?;
                VertexPredicate::Bits { mask, value: mask }
            }
            ("bitset", [m, v]) => VertexPredicate::Bits {
                mask: parse_u64(m, s)?,
                value: parse_u64(v, s)?,
            },
            ("in", _) => VertexPredicate::In(parse_set(rest, s)?),
            ("notin", _) => VertexPredicate::NotIn(parse_set(rest, s)?),
            ("not", _) => VertexPredicate::Not(Box::new(rest.parse()?)),
            _ => return Err(Error::precondition(format!("unknown predicate {s:?}"))),
        };
        Ok(pred)
    }
}

impl serde::Serialize for VertexPredicate {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for VertexPredicate {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The shape of a copy handle.
#[derive(Clone)]
pub enum CopyKind {
    Ambient,
    OrbitRestricted {
        base: CopyHandle,
        orbit: OrbitType,
    },
    Filtered {
        base: CopyHandle,
        predicate: VertexPredicate,
    },
    Labeled(Arc<Labeling>),
}

/// A lazily enumerated vertex set inside the ambient graph, meant to be a copy
/// of it. Members are enumerated in increasing order.
#[derive(Clone)]
pub struct CopyHandle(Arc<CopyKind>);

impl fmt::Debug for CopyHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CopyHandle({})", self.describe())
    }
}

impl PartialEq for CopyHandle {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (self.kind(), other.kind()) {
            (CopyKind::Ambient, CopyKind::Ambient) => true,
            (CopyKind::OrbitRestricted { base: a, orbit: o }, CopyKind::OrbitRestricted { base: b, orbit: p }) => {
                o == p && a == b
            }
            (CopyKind::Filtered { base: a, predicate: p }, CopyKind::Filtered { base: b, predicate: q }) => {
                p == q && a == b
            }
            (CopyKind::Labeled(a), CopyKind::Labeled(b)) => Arc::ptr_eq(a, b) || a.data() == b.data(),
            _ => false,
        }
    }
}

impl CopyHandle {
    pub fn new(kind: CopyKind) -> Self {
        CopyHandle(Arc::new(kind))
    }

    pub fn ambient() -> Self {
        CopyHandle::new(CopyKind::Ambient)
    }

    pub fn filtered(base: &CopyHandle, predicate: VertexPredicate) -> Self {
        CopyHandle::new(CopyKind::Filtered {
            base: base.clone(),
            predicate,
        })
    }

    pub fn labeled(lab: Arc<Labeling>) -> Self {
        CopyHandle::new(CopyKind::Labeled(lab))
    }

    pub fn kind(&self) -> &CopyKind {
        &self.0
    }

    pub fn contains(&self, v: Vertex) -> bool {
        match self.kind() {
            CopyKind::Ambient => true,
            CopyKind::OrbitRestricted { base, orbit } => orbit.admits(v) && base.contains(v),
            CopyKind::Filtered { base, predicate } => predicate.test(v) && base.contains(v),
            CopyKind::Labeled(lab) => lab.contains_vertex(v),
        }
    }

    /// The handle at the bottom of the chain of restrictions.
    fn root(&self) -> &CopyHandle {
        match self.kind() {
            CopyKind::OrbitRestricted { base, .. } | CopyKind::Filtered { base, .. } => base.root(),
            _ => self,
        }
    }

    /// The root enumeration from `from` on: every integer for the ambient
    /// graph, the materialized vertices for a labeled copy.
    fn candidates(&self, from: Vertex) -> Box<dyn Iterator<Item = Vertex> + '_> {
        match self.root().kind() {
            CopyKind::Labeled(lab) => Box::new(lab.vertices_from(from)),
            _ => Box::new((from.0..=u64::MAX).map(Vertex)),
        }
    }

    /// Members `>= from` among the next `bound` candidates of the root
    /// enumeration, in increasing order.
    pub fn scan(&self, from: Vertex, bound: usize) -> impl Iterator<Item = Vertex> + '_ {
        self.candidates(from).take(bound).filter(move |&v| self.contains(v))
    }

    /// The `k`-th member (0-based), searching `bound` candidates.
    pub fn nth(&self, k: usize, bound: usize) -> Result<Vertex> {
        self.scan(Vertex(0), bound)
            .nth(k)
            .ok_or_else(|| Error::exhausted(format!("member #{k} of {}", self.describe()), bound))
    }

    /// The first `n` members, searching `bound` candidates.
    pub fn first(&self, n: usize, bound: usize) -> Result<Vec<Vertex>> {
        let out: Vec<Vertex> = self.scan(Vertex(0), bound).take(n).collect();
        if out.len() < n {
            return Err(Error::exhausted(
                format!("first {n} members of {}", self.describe()),
                bound,
            ));
        }
        Ok(out)
    }

    /// Every orbit this handle is certified to lie inside, intersected along
    /// the chain of restrictions. `None` if the chain contains incompatible
    /// orbits (the handle is then empty).
    pub fn certified_orbit(&self) -> Option<OrbitType> {
        match self.kind() {
            CopyKind::OrbitRestricted { base, orbit } => crate::orbits::intersect(orbit, &base.certified_orbit()?),
            CopyKind::Filtered { base, .. } => base.certified_orbit(),
            CopyKind::Ambient | CopyKind::Labeled(_) => Some(OrbitType::whole()),
        }
    }

    pub fn as_labeling(&self) -> Option<&Arc<Labeling>> {
        match self.kind() {
            CopyKind::Labeled(lab) => Some(lab),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self.kind() {
            CopyKind::Ambient => "ambient".to_string(),
            CopyKind::OrbitRestricted { base, orbit } => format!("{} ∩ orbit{orbit}", base.describe()),
            CopyKind::Filtered { base, predicate } => format!("{} | {predicate}", base.describe()),
            CopyKind::Labeled(lab) => format!("labeled(depth {})", lab.depth()),
        }
    }
}

/// `c` without the vertices of `f`.
pub fn remove_finite(c: &CopyHandle, f: &FinSet) -> CopyHandle {
    if f.is_empty() {
        return c.clone();
    }
    CopyHandle::filtered(c, VertexPredicate::NotIn(f.clone()))
}

/// The members of `c` realizing the orbit type `o`.
pub fn orbit_copy(c: &CopyHandle, o: &OrbitType) -> CopyHandle {
    CopyHandle::new(CopyKind::OrbitRestricted {
        base: c.clone(),
        orbit: o.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::orbit_member;

    fn firsts(c: &CopyHandle, n: usize) -> Vec<u64> {
        c.first(n, 10_000).unwrap().into_iter().map(|v| v.0).collect()
    }

    #[test]
    fn remove_finite_examples() {
        let amb = CopyHandle::ambient();
        assert_eq!(firsts(&remove_finite(&amb, &FinSet::of(&[0])), 3), vec![1, 2, 3]);
        assert_eq!(firsts(&remove_finite(&amb, &FinSet::new()), 4), firsts(&amb, 4));
        assert_eq!(
            remove_finite(&amb, &FinSet::of(&[0, 1, 2])).nth(0, 100).unwrap(),
            Vertex(3)
        );
    }

    #[test]
    fn orbit_copy_examples() {
        let amb = CopyHandle::ambient();
        assert_eq!(firsts(&orbit_copy(&amb, &OrbitType::of(&[0], &[0])), 3), vec![1, 3, 5]);
        assert_eq!(firsts(&orbit_copy(&amb, &OrbitType::whole()), 50), firsts(&amb, 50));
        assert_eq!(firsts(&orbit_copy(&amb, &OrbitType::of(&[0], &[])), 3), vec![2, 4, 6]);
    }

    #[test]
    fn orbit_restricted_enumeration_is_filtered_base() {
        let amb = CopyHandle::ambient();
        let base = remove_finite(&amb, &FinSet::of(&[3, 4]));
        let o = OrbitType::of(&[1, 2], &[2]);
        let c = orbit_copy(&base, &o);
        let got = firsts(&c, 100);
        let expected: Vec<u64> = base
            .scan(Vertex(0), 100_000)
            .filter(|&v| orbit_member(v, &o, &base))
            .take(100)
            .map(|v| v.0)
            .collect();
        assert_eq!(got, expected);
        assert!(got.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn finite_class_exhausts() {
        let c = CopyHandle::filtered(&CopyHandle::ambient(), VertexPredicate::Below(5));
        assert_eq!(firsts(&c, 5), vec![0, 1, 2, 3, 4]);
        assert!(matches!(c.nth(5, 1000), Err(Error::SearchExhausted { .. })));
    }

    #[test]
    fn predicate_strings_round_trip() {
        for s in [
            "all",
            "none",
            "mod:3:0",
            "below:7",
            "atleast:2",
            "bitset:5:1",
            "in:1,4",
            "notin:",
            "not:mod:2:0",
        ] {
            let p: VertexPredicate = s.parse().unwrap();
            let back: VertexPredicate = p.to_string().parse().unwrap();
            assert_eq!(p, back, "{s}");
        }
        assert_eq!("even".parse::<VertexPredicate>().unwrap().to_string(), "mod:2:0");
        assert!("mod:3:3".parse::<VertexPredicate>().is_err());
        assert!("bogus".parse::<VertexPredicate>().is_err());
    }

    #[test]
    fn certified_orbit_intersects_chain() {
        let amb = CopyHandle::ambient();
        let c = orbit_copy(&orbit_copy(&amb, &OrbitType::of(&[0], &[0])), &OrbitType::of(&[1], &[]));
        assert_eq!(c.certified_orbit(), Some(OrbitType::of(&[0, 1], &[0])));
        let empty = orbit_copy(&orbit_copy(&amb, &OrbitType::of(&[0], &[0])), &OrbitType::of(&[0], &[]));
        assert_eq!(empty.certified_orbit(), None);
    }
}
