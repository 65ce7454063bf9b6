//! Constructions inside copies: labelings with prescribed orbit witnesses, the
//! back-and-forth map between `R^{{p}}_{{p}}` and `R^{{p}}_∅`, the extendible
//! base copy and the `A_0`/`A_1` splitting recursion.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::ambient::{
    adjacent, least_orbit_member_where, orbit_copy, orbit_member, verify_copy, CopyHandle, OrbitType,
};
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};
use crate::labeling::{label, Labeling, WitnessChooser, WitnessRequest, MAX_DEPTH};
use crate::orbits::intersect;

/// Labels `a` to `depth`, so every witness lies in the corresponding orbit of `a`.
///
/// `a` is spot-checked first: all patterns over its first two members must
/// have witnesses within the bound.
pub fn build_copy_in(
    a: &CopyHandle,
    depth: usize,
    chooser: Option<Arc<dyn WitnessChooser>>,
    search_bound: usize,
) -> Result<Labeling> {
    let spot = verify_copy(a, 2, search_bound)?;
    if let Some(bad) = spot.failures().next() {
        return Err(Error::precondition(format!(
            "{} fails the extension property at pattern {}",
            a.describe(),
            bad.orbit
        )));
    }
    label(a, depth, 0, chooser, search_bound)
}

fn inside(p: Vertex) -> OrbitType {
    OrbitType::new(FinSet::singleton(p), FinSet::singleton(p)).unwrap()
}

fn outside(p: Vertex) -> OrbitType {
    OrbitType::new(FinSet::singleton(p), FinSet::new()).unwrap()
}

/// Order in which the back-and-forth absorbs elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Schedule {
    /// Even steps extend the domain, odd steps the range.
    #[default]
    DomainFirst,
    /// Even steps extend the range, odd steps the domain.
    RangeFirst,
}

#[derive(Serialize, Deserialize)]
struct RawIso {
    pivot: Vertex,
    pairs: Vec<(Vertex, Vertex)>,
    avoid_f: FinSet,
    avoid_g: FinSet,
}

/// A finite partial map `φ` from `R^{{p}}_{{p}}` to `R^{{p}}_∅` that is
/// injective, edge-preserving, satisfies `u ∼ φ(v) ⟺ φ(u) ∼ v`, and sends no
/// element of `avoid_f` into `avoid_g`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawIso", into = "RawIso")]
pub struct PartialIso {
    pivot: Vertex,
    pairs: Vec<(Vertex, Vertex)>,
    avoid_f: FinSet,
    avoid_g: FinSet,
    forward: BTreeMap<Vertex, Vertex>,
    backward: BTreeMap<Vertex, Vertex>,
}

impl TryFrom<RawIso> for PartialIso {
    type Error = Error;

    fn try_from(raw: RawIso) -> Result<Self> {
        let mut iso = PartialIso::new(raw.pivot, raw.avoid_f, raw.avoid_g)?;
        for (u, v) in raw.pairs {
            iso.insert(u, v);
        }
        let bad = iso.violations();
        if !bad.is_empty() {
            return Err(Error::precondition(format!(
                "invalid partial isomorphism: {}",
                bad.join("; ")
            )));
        }
        Ok(iso)
    }
}

impl From<PartialIso> for RawIso {
    fn from(iso: PartialIso) -> Self {
        RawIso {
            pivot: iso.pivot,
            pairs: iso.pairs,
            avoid_f: iso.avoid_f,
            avoid_g: iso.avoid_g,
        }
    }
}

impl PartialIso {
    /// The empty map. `avoid_f ⊆ R^{{p}}_{{p}}` and `avoid_g ⊆ R^{{p}}_∅` are required.
    pub fn new(pivot: Vertex, avoid_f: FinSet, avoid_g: FinSet) -> Result<Self> {
        if let Some(u) = avoid_f.iter().find(|&u| !inside(pivot).admits(u)) {
            return Err(Error::precondition(format!(
                "{u} ∈ F is not in orbit ({{{pivot}}}, {{{pivot}}})"
            )));
        }
        if let Some(v) = avoid_g.iter().find(|&v| !outside(pivot).admits(v)) {
            return Err(Error::precondition(format!("{v} ∈ G is not in orbit ({{{pivot}}}, ∅)")));
        }
        Ok(PartialIso {
            pivot,
            pairs: Vec::new(),
            avoid_f,
            avoid_g,
            forward: BTreeMap::new(),
            backward: BTreeMap::new(),
        })
    }

    fn insert(&mut self, u: Vertex, v: Vertex) {
        self.pairs.push((u, v));
        self.forward.insert(u, v);
        self.backward.insert(v, u);
    }

    pub fn pivot(&self) -> Vertex {
        self.pivot
    }

    pub fn avoid_f(&self) -> &FinSet {
        &self.avoid_f
    }

    pub fn avoid_g(&self) -> &FinSet {
        &self.avoid_g
    }

    /// Pairs in the order they were added.
    pub fn pairs(&self) -> &[(Vertex, Vertex)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, u: Vertex) -> Option<Vertex> {
        self.forward.get(&u).copied()
    }

    pub fn preimage(&self, v: Vertex) -> Option<Vertex> {
        self.backward.get(&v).copied()
    }

    pub fn domain(&self) -> FinSet {
        self.forward.keys().copied().collect()
    }

    pub fn range(&self) -> FinSet {
        self.backward.keys().copied().collect()
    }

    /// `φ[S]` for `S ⊆ dom φ`.
    pub fn image(&self, s: &FinSet) -> FinSet {
        s.iter().filter_map(|u| self.get(u)).collect()
    }

    fn frame(&self) -> FinSet {
        self.domain().union(&self.range()).union(&FinSet::singleton(self.pivot))
    }

    /// Adds `u` to the domain (if absent) and returns `φ(u)`. The image is the
    /// least vertex of `R^{{p}}_∅ ∩ R^{dom}_L ∩ R^{ran}_{φ[H]}` outside
    /// `avoid_g`, where `H = {x ∈ dom : x ∼ u}` and `L = {x ∈ dom : φ(x) ∼ u}`.
    pub fn extend_domain(&mut self, u: Vertex, search_bound: usize) -> Result<Vertex> {
        if let Some(v) = self.get(u) {
            return Ok(v);
        }
        if !inside(self.pivot).admits(u) {
            return Err(Error::precondition(format!(
                "{u} is not in orbit ({{p}}, {{p}}) for p = {}",
                self.pivot
            )));
        }
        let dom = self.domain();
        let h: FinSet = dom.iter().filter(|&x| adjacent(x, u)).collect();
        let l: FinSet = self
            .pairs
            .iter()
            .filter(|(_, y)| adjacent(*y, u))
            .map(|(x, _)| *x)
            .collect();
        let target = [
            OrbitType::new(dom.clone(), l)?,
            OrbitType::new(self.range(), self.image(&h))?,
        ]
        .iter()
        .try_fold(outside(self.pivot), |acc, o| intersect(&acc, o))
        .ok_or_else(|| Error::precondition("extension orbits are incompatible"))?;
        debug_assert_eq!(target.h(), &self.frame());
        let avoid = self.avoid_g.clone();
        let v = least_orbit_member_where(&target, Vertex(0), &CopyHandle::ambient(), search_bound, |v| {
            !avoid.contains(v)
        })?;
        self.insert(u, v);
        debug_assert!(self.violations().is_empty());
        Ok(v)
    }

    /// Adds `v` to the range (if absent) and returns `φ^{-1}(v)`. The preimage
    /// is the least vertex of `R^{{p} ∪ dom ∪ ran}_{{p} ∪ φ^{-1}[H] ∪ φ[L]}`
    /// outside `avoid_f`, where `H = {y ∈ ran : y ∼ v}` and `L = {x ∈ dom : x ∼ v}`.
    pub fn extend_range(&mut self, v: Vertex, search_bound: usize) -> Result<Vertex> {
        if let Some(u) = self.preimage(v) {
            return Ok(u);
        }
        if !outside(self.pivot).admits(v) {
            return Err(Error::precondition(format!(
                "{v} is not in orbit ({{p}}, ∅) for p = {}",
                self.pivot
            )));
        }
        let h: FinSet = self
            .pairs
            .iter()
            .filter(|(_, y)| adjacent(*y, v))
            .map(|(x, _)| *x)
            .collect();
        let l: FinSet = self.domain().iter().filter(|&x| adjacent(x, v)).collect();
        let target = [
            OrbitType::new(self.domain(), h)?,
            OrbitType::new(self.range(), self.image(&l))?,
        ]
        .iter()
        .try_fold(inside(self.pivot), |acc, o| intersect(&acc, o))
        .ok_or_else(|| Error::precondition("extension orbits are incompatible"))?;
        let avoid = self.avoid_f.clone();
        let u = least_orbit_member_where(&target, Vertex(0), &CopyHandle::ambient(), search_bound, |u| {
            !avoid.contains(u)
        })?;
        self.insert(u, v);
        debug_assert!(self.violations().is_empty());
        Ok(u)
    }

    /// Every violated condition, as text. Empty for a valid map.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let p = self.pivot;
        if self.forward.len() != self.pairs.len() || self.backward.len() != self.pairs.len() {
            out.push("(i) not injective".to_string());
        }
        for &(u, v) in &self.pairs {
            if !inside(p).admits(u) {
                out.push(format!("{u} in the domain is not in ({{p}}, {{p}})"));
            }
            if !outside(p).admits(v) {
                out.push(format!("{v} in the range is not in ({{p}}, ∅)"));
            }
            if self.avoid_f.contains(u) && self.avoid_g.contains(v) {
                out.push(format!("(iv) {u} ∈ F maps to {v} ∈ G"));
            }
        }
        for &(u, fu) in &self.pairs {
            for &(w, fw) in &self.pairs {
                if adjacent(u, w) != adjacent(fu, fw) {
                    out.push(format!("(ii) edge {u}-{w} not preserved"));
                }
                if adjacent(u, fw) != adjacent(fu, w) {
                    out.push(format!("(iii) {u} ∼ φ({w}) differs from φ({u}) ∼ {w}"));
                }
            }
        }
        out
    }
}

/// A partial isomorphism shared between constructions that grow it on demand.
#[derive(Debug, Clone)]
pub struct SharedIso(Arc<Mutex<PartialIso>>);

impl SharedIso {
    pub fn new(iso: PartialIso) -> Self {
        SharedIso(Arc::new(Mutex::new(iso)))
    }

    pub fn snapshot(&self) -> PartialIso {
        self.0.lock().unwrap().clone()
    }

    pub fn extend_domain(&self, u: Vertex, search_bound: usize) -> Result<Vertex> {
        self.0.lock().unwrap().extend_domain(u, search_bound)
    }

    pub fn extend_range(&self, v: Vertex, search_bound: usize) -> Result<Vertex> {
        self.0.lock().unwrap().extend_range(v, search_bound)
    }

    /// `φ[S]`, growing the domain to cover `S` first.
    pub fn image_of(&self, s: &FinSet, search_bound: usize) -> Result<FinSet> {
        let mut iso = self.0.lock().unwrap();
        s.iter().map(|u| iso.extend_domain(u, search_bound)).collect()
    }
}

/// Runs `steps` rounds of the back-and-forth. Under [`Schedule::DomainFirst`],
/// round `2k` absorbs the `k`-th member of `R^{{p}}_{{p}}` into the domain and
/// round `2k + 1` the `k`-th member of `R^{{p}}_∅` into the range; members
/// already present are skipped.
pub fn back_and_forth(
    p: Vertex,
    avoid_f: FinSet,
    avoid_g: FinSet,
    steps: usize,
    search_bound: usize,
    schedule: Schedule,
) -> Result<PartialIso> {
    let mut iso = PartialIso::new(p, avoid_f, avoid_g)?;
    let amb = CopyHandle::ambient();
    let rounds = steps.div_ceil(2);
    let ins = orbit_copy(&amb, &inside(p)).first(rounds, search_bound)?;
    let outs = orbit_copy(&amb, &outside(p)).first(rounds, search_bound)?;
    for step in 0..steps {
        let k = step / 2;
        let domain_turn = (step % 2 == 0) == (schedule == Schedule::DomainFirst);
        if domain_turn {
            iso.extend_domain(ins[k], search_bound)?;
        } else {
            iso.extend_range(outs[k], search_bound)?;
        }
    }
    Ok(iso)
}

/// Witness rule of the extendible base: the least vertex of
/// `R^{{p}}_{{p}} ∩ R^U_K ∩ R^{f[U]}_{f[K]}`, growing `f` to cover `U`.
struct ExtendibleChooser {
    pivot: Vertex,
    iso: SharedIso,
}

impl WitnessChooser for ExtendibleChooser {
    fn choose(&self, req: &WitnessRequest<'_>) -> Result<Vertex> {
        let prefix = req.prefix();
        let f_prefix = self.iso.image_of(prefix, req.search_bound)?;
        let f_k = self.iso.image_of(req.k, req.search_bound)?;
        let p = FinSet::singleton(self.pivot);
        let orbit = OrbitType::new(prefix.union(&f_prefix).union(&p), req.k.union(&f_k).union(&p))?;
        least_orbit_member_where(&orbit, Vertex(0), req.base, req.search_bound, |_| true)
    }
}

/// The base copy `B ⊆ R^{{p}}_{{p}}` with seed levels `L_0 = F` and
/// `L_1 = f^{-1}[G]`, followed by `depth` generated levels whose witnesses
/// realize their pattern both over `U = ⋃_{k≤n} L_k` and over `f[U]`.
pub fn extendible_base(
    p: Vertex,
    avoid_f: &FinSet,
    avoid_g: &FinSet,
    iso: &SharedIso,
    depth: usize,
    search_bound: usize,
) -> Result<Labeling> {
    if depth > MAX_DEPTH {
        return Err(Error::precondition(format!(
            "depth {depth} exceeds the cap {MAX_DEPTH}"
        )));
    }
    {
        let snap = iso.snapshot();
        if snap.pivot() != p || snap.avoid_f() != avoid_f || snap.avoid_g() != avoid_g {
            return Err(Error::precondition(
                "the isomorphism was built for another pivot or avoid sets",
            ));
        }
    }
    let l1: FinSet = avoid_g
        .iter()
        .map(|g| iso.extend_range(g, search_bound))
        .collect::<Result<_>>()?;
    let chooser = Arc::new(ExtendibleChooser {
        pivot: p,
        iso: iso.clone(),
    });
    Labeling::build(
        CopyHandle::ambient(),
        vec![avoid_f.clone(), l1],
        depth,
        0,
        chooser,
        search_bound,
    )
}

/// One block `S_{i,j}` of the splitting recursion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBlock {
    pub i: usize,
    pub j: usize,
    /// The level indices `n` of the block, one per pattern `K_r`, increasing.
    pub levels: Vec<usize>,
}

/// The record of [`split_extendible`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTrace {
    pub pivot: Vertex,
    pub rounds: usize,
    pub blocks: Vec<SplitBlock>,
    /// `n ↦ a_n`.
    pub picks: BTreeMap<usize, Vertex>,
    pub a0: FinSet,
    pub a1: FinSet,
    /// `A_0 ∪ {p} ∪ f[A_1]`.
    pub glued: FinSet,
}

/// Runs `rounds` values of `i_0 = 2, 3, …` of the splitting recursion inside
/// `a ⊆ B`. Round `i_0` fixes `X = L_0 ∪ L_1 ∪ A_{<i_0}`; for `j = 0, 1` and
/// every `K_r ⊆ X` (mask order) it picks the least level `n` past the previous
/// one where `a` meets `R^X_{K_r}`, and records `a_n`, the least such vertex
/// of `L_n`.
pub fn split_extendible(
    a: &CopyHandle,
    base: &Labeling,
    iso: &SharedIso,
    rounds: usize,
    search_bound: usize,
) -> Result<SplitTrace> {
    if base.seeds() != 2 {
        return Err(Error::precondition("the base must come from extendible_base"));
    }
    let l0 = base.level(0).unwrap().clone();
    let l1 = base.level(1).unwrap().clone();
    if let Some(v) = l0.union(&l1).iter().find(|&v| !a.contains(v)) {
        return Err(Error::precondition(format!(
            "{v} from the seed levels is missing from a"
        )));
    }
    if let Some(v) = a
        .scan(Vertex(0), search_bound)
        .take(32)
        .find(|&v| !base.contains_vertex(v))
    {
        return Err(Error::precondition(format!("{v} ∈ a is not in the base")));
    }
    let pivot = iso.snapshot().pivot();
    let mut blocks = Vec::new();
    let mut picks = BTreeMap::new();
    let mut sides = [FinSet::new(), FinSet::new()];
    let mut last_level = 1;
    for i0 in 2..2 + rounds {
        let x = l0.union(&l1).union(&picks.values().copied().collect());
        if x.len() >= 63 {
            return Err(Error::precondition(format!(
                "round {i0} would need 2^{} patterns",
                x.len()
            )));
        }
        let mut round_picks = Vec::new();
        for (j, side) in sides.iter_mut().enumerate() {
            let mut levels = Vec::with_capacity(1 << x.len());
            for k in x.subsets() {
                let orbit = OrbitType::new(x.clone(), k)?;
                let found = (last_level + 1..=base.depth()).find_map(|n| {
                    base.level(n)
                        .unwrap()
                        .iter()
                        .find(|&v| orbit_member(v, &orbit, a))
                        .map(|v| (n, v))
                });
                let (n, v) = found.ok_or_else(|| {
                    Error::exhausted(
                        format!(
                            "round {i0}, block {j}: no level in {}..={} of the base meets orbit {orbit} of a",
                            last_level + 1,
                            base.depth()
                        ),
                        search_bound,
                    )
                })?;
                levels.push(n);
                round_picks.push(v);
                picks.insert(n, v);
                side.insert(v);
                last_level = n;
            }
            blocks.push(SplitBlock { i: i0, j, levels });
        }
        debug_assert_eq!(round_picks.len(), 2 << x.len());
    }
    let [s0, s1] = sides;
    let a0 = l0.union(&s0);
    let a1 = l1.union(&s1);
    let glued = a0
        .union(&FinSet::singleton(pivot))
        .union(&iso.image_of(&a1, search_bound)?);
    Ok(SplitTrace {
        pivot,
        rounds,
        blocks,
        picks,
        a0,
        a1,
        glued,
    })
}

impl SplitTrace {
    /// Re-checks the trace against `a`, the base and the isomorphism.
    pub fn violations(&self, a: &CopyHandle, base: &Labeling, iso: &PartialIso) -> Vec<String> {
        let mut out = Vec::new();
        for (&n, &v) in &self.picks {
            if !(a.contains(v) && base.level(n).is_some_and(|l| l.contains(v))) {
                out.push(format!("(i) a_{n} = {v} is not in a ∩ L_{n}"));
            }
        }
        for w in self.blocks.windows(2) {
            let (x, y) = (&w[0], &w[1]);
            if (x.i, x.j) >= (y.i, y.j) || x.levels.last() >= y.levels.first() {
                out.push(format!(
                    "(ii) block ({},{}) does not precede ({},{})",
                    x.i, x.j, y.i, y.j
                ));
            }
        }
        for b in &self.blocks {
            if b.levels.windows(2).any(|w| w[0] >= w[1]) {
                out.push(format!("block ({},{}) levels not increasing", b.i, b.j));
            }
        }
        if !self.a0.is_disjoint(&self.a1) {
            out.push("A0 and A1 intersect".to_string());
        }
        if !iso.avoid_f().is_subset(&self.a0) {
            out.push("F ⊄ A0".to_string());
        }
        if !iso.avoid_g().is_subset(&iso.image(&self.a1)) {
            out.push("G ⊄ f[A1]".to_string());
        }
        let seeds = base.level(0).unwrap().union(base.level(1).unwrap());
        let mut earlier = FinSet::new();
        for round in self.blocks.chunks(2) {
            let x = seeds.union(&earlier);
            for b in round {
                for (r, n) in b.levels.iter().enumerate() {
                    let v = self.picks[n];
                    let o = OrbitType::new(x.clone(), x.subset_from_mask(r as u64)).unwrap();
                    if !orbit_member(v, &o, a) {
                        out.push(format!("a_{n} = {v} does not realize pattern #{r} over {x}"));
                    }
                }
            }
            for b in round {
                for n in &b.levels {
                    earlier.insert(self.picks[n]);
                }
            }
        }
        out
    }
}
