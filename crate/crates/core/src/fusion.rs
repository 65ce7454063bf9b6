//! Fusion over decision oracles: labelings whose orbits obey oracle-chosen
//! refinements, decision tables `α^n_K`, branch read-off, slaloms and the
//! new-real shadow.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::ambient::{
    least_orbit_member, least_orbit_member_where, orbit_copy, orbit_member, verify_copy, CopyHandle, OrbitType,
    VertexPredicate,
};
use crate::error::{Error, Result};
use crate::finset::{FinSet, Vertex};
use crate::labeling::{level_size, Labeling, LabelingJson, WitnessChooser, WitnessRequest, MAX_DEPTH};
use crate::orbits::is_suborbit;

/// What an oracle says about node `(n, K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub value: u64,
    /// Witnesses below the node must satisfy this.
    pub refined: VertexPredicate,
}

/// A stand-in for a dense family: decides a value for every node and names a
/// refinement that later witnesses have to respect.
///
/// Richness is the caller's promise: the refinement must meet every orbit over
/// finitely many placed vertices within the search bound.
pub trait DecisionOracle: Send + Sync {
    fn decide(&self, n: usize, k: &FinSet, ctx: &CopyHandle) -> Decision;

    fn deterministic(&self) -> bool {
        true
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Range of the `hash:SEED` value rule.
pub const HASH_RANGE: u64 = 1_000_000;

/// Value rules of the declarative oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueRule {
    /// `const:N`
    Const(u64),
    /// `card_K`: `|K|`.
    CardK,
    /// `hash:SEED`: a SplitMix64 mix of `(SEED, n, K)` reduced mod 10^6.
    Hash(u64),
    /// `level`: `n`.
    Level,
    /// `level_parity`: `n mod 2`.
    LevelParity,
    /// `empty_K`: 1 iff `K = ∅`.
    EmptyK,
}

impl ValueRule {
    pub fn eval(&self, n: usize, k: &FinSet) -> u64 {
        match *self {
            ValueRule::Const(c) => c,
            ValueRule::CardK => k.len() as u64,
            ValueRule::Hash(seed) => {
                let mut h = splitmix64(seed ^ splitmix64(n as u64));
                for v in k.iter() {
                    h = splitmix64(h ^ v.0);
                }
                h % HASH_RANGE
            }
            ValueRule::Level => n as u64,
            ValueRule::LevelParity => (n % 2) as u64,
            ValueRule::EmptyK => u64::from(k.is_empty()),
        }
    }
}

impl fmt::Display for ValueRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueRule::Const(c) => write!(f, "const:{c}"),
            ValueRule::CardK => write!(f, "card_K"),
            ValueRule::Hash(s) => write!(f, "hash:{s}"),
            ValueRule::Level => write!(f, "level"),
            ValueRule::LevelParity => write!(f, "level_parity"),
            ValueRule::EmptyK => write!(f, "empty_K"),
        }
    }
}

impl FromStr for ValueRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |x: &str| {
            x.parse::<u64>()
                .map_err(|_| Error::precondition(format!("bad number in value rule {s:?}")))
        };
        Ok(match s.split_once(':') {
            Some(("const", n)) => ValueRule::Const(num(n)?),
            Some(("hash", seed)) => ValueRule::Hash(num(seed)?),
            None if s == "card_K" => ValueRule::CardK,
            None if s == "level" => ValueRule::Level,
            None if s == "level_parity" => ValueRule::LevelParity,
            None if s == "empty_K" => ValueRule::EmptyK,
            _ => return Err(Error::precondition(format!("unknown value rule {s:?}"))),
        })
    }
}

impl Serialize for ValueRule {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ValueRule {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(de)?.parse().map_err(serde::de::Error::custom)
    }
}

/// The refinement of a declarative oracle: one predicate for every node, or
/// one per level (the last entry repeats).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RefineRule {
    Uniform(VertexPredicate),
    PerLevel(Vec<VertexPredicate>),
}

impl Default for RefineRule {
    fn default() -> Self {
        RefineRule::Uniform(VertexPredicate::All)
    }
}

impl RefineRule {
    pub fn at(&self, n: usize) -> VertexPredicate {
        match self {
            RefineRule::Uniform(p) => p.clone(),
            RefineRule::PerLevel(ps) => ps.get(n).or_else(|| ps.last()).cloned().unwrap_or(VertexPredicate::All),
        }
    }
}

/// Oracle read from JSON, e.g. `{"value": "card_K", "refine": "mod:3:0"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub value: ValueRule,
    #[serde(default)]
    pub refine: RefineRule,
}

impl OracleSpec {
    pub fn new(value: ValueRule, refine: VertexPredicate) -> Self {
        OracleSpec {
            value,
            refine: RefineRule::Uniform(refine),
        }
    }
}

impl DecisionOracle for OracleSpec {
    fn decide(&self, n: usize, k: &FinSet, _ctx: &CopyHandle) -> Decision {
        Decision {
            value: self.value.eval(n, k),
            refined: self.refine.at(n),
        }
    }
}

type Key = (usize, FinSet);

/// Witness rule of the fusion: the least member of the orbit in the base that
/// satisfies the refinement of every node above it.
struct FusionChooser {
    oracle: Arc<dyn DecisionOracle>,
    memo: Mutex<BTreeMap<Key, Decision>>,
}

impl FusionChooser {
    fn decision(&self, n: usize, k: &FinSet, ctx: &CopyHandle) -> Result<Decision> {
        let key = (n, k.clone());
        if let Some(d) = self.memo.lock().unwrap().get(&key) {
            return Ok(d.clone());
        }
        let first = self.oracle.decide(n, k, ctx);
        let again = self.oracle.decide(n, k, ctx);
        if first != again {
            return Err(Error::OracleInconsistency {
                level: n,
                k: k.indices(),
                detail: format!(
                    "({}, {}) then ({}, {})",
                    first.value, first.refined, again.value, again.refined
                ),
            });
        }
        self.memo.lock().unwrap().insert(key, first.clone());
        Ok(first)
    }
}

impl WitnessChooser for FusionChooser {
    fn choose(&self, req: &WitnessRequest<'_>) -> Result<Vertex> {
        let stack = (0..=req.level)
            .map(|n| self.decision(n, &req.k.intersection(&req.unions[n]), req.base))
            .collect::<Result<Vec<_>>>()?;
        least_orbit_member_where(&req.orbit(), Vertex(0), req.base, req.search_bound, |v| {
            stack.iter().all(|d| d.refined.test(v))
        })
    }
}

/// A labeled copy with its decision table and per-node refinements.
#[derive(Debug, Clone)]
pub struct FusionResult {
    pub labeling: Arc<Labeling>,
    pub table: BTreeMap<Key, u64>,
    pub constraints: BTreeMap<Key, VertexPredicate>,
}

impl PartialEq for FusionResult {
    fn eq(&self, other: &Self) -> bool {
        self.labeling.data() == other.labeling.data()
            && self.table == other.table
            && self.constraints == other.constraints
    }
}

/// One row of the serialized table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: FinSet,
    pub value: u64,
    pub refine: VertexPredicate,
}

/// JSON form of a [`FusionResult`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionJson {
    pub labeling: LabelingJson,
    pub table: Vec<TableEntry>,
}

impl FusionResult {
    pub fn depth(&self) -> usize {
        self.labeling.depth()
    }

    pub fn value(&self, n: usize, k: &FinSet) -> Option<u64> {
        self.table.get(&(n, k.clone())).copied()
    }

    /// The refinements a witness of node `(m, K)` has to satisfy, from the
    /// root down.
    pub fn constraint_stack(&self, m: usize, k: &FinSet) -> Result<Vec<&VertexPredicate>> {
        (0..=m)
            .map(|n| {
                let prefix = self
                    .labeling
                    .prefix(n)
                    .ok_or_else(|| Error::precondition(format!("level {n} is not materialized")))?;
                self.constraints
                    .get(&(n, k.intersection(prefix)))
                    .ok_or_else(|| Error::precondition(format!("no constraint for level {n}")))
            })
            .collect()
    }

    /// Every materialized witness that fails part of its constraint stack.
    pub fn stack_violations(&self) -> Vec<(usize, FinSet, Vertex)> {
        let mut out = Vec::new();
        for e in self.labeling.witness_entries() {
            let ok = self
                .constraint_stack(e.n, &e.k)
                .map(|s| s.iter().all(|p| p.test(e.q)))
                .unwrap_or(false);
            if !ok {
                out.push((e.n, e.k, e.q));
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<FusionJson> {
        let table = self
            .table
            .iter()
            .map(|((n, k), &value)| {
                let refine = self.constraints[&(*n, k.clone())].clone();
                if !refine.is_declarative() {
                    return Err(Error::precondition(format!("refinement {refine} has no JSON form")));
                }
                Ok(TableEntry {
                    n: *n,
                    k: k.clone(),
                    value,
                    refine,
                })
            })
            .collect::<Result<_>>()?;
        Ok(FusionJson {
            labeling: self.labeling.to_json()?,
            table,
        })
    }

    pub fn from_json(json: &FusionJson, search_bound: usize) -> Result<FusionResult> {
        let labeling = Arc::new(json.labeling.to_labeling(search_bound)?);
        let mut table = BTreeMap::new();
        let mut constraints = BTreeMap::new();
        for e in &json.table {
            let key = (e.n, e.k.clone());
            table.insert(key.clone(), e.value);
            constraints.insert(key, e.refine.clone());
        }
        let fr = FusionResult {
            labeling,
            table,
            constraints,
        };
        for n in 0..=fr.depth() {
            let prefix = fr.labeling.prefix(n).expect("materialized");
            for k in prefix.subsets() {
                if !fr.table.contains_key(&(n, k.clone())) {
                    return Err(Error::precondition(format!("table has no entry for ({n}, {k})")));
                }
            }
        }
        Ok(fr)
    }
}

/// Builds a labeling of `base` to `depth` whose witness for `(m, K')` obeys
/// the refinement of `(n, K' ∩ ⋃_{i<n} L_i)` for every `n ≤ m`, and records
/// the oracle's value for every node.
pub fn fuse(
    base: &CopyHandle,
    oracle: Arc<dyn DecisionOracle>,
    depth: usize,
    search_bound: usize,
) -> Result<FusionResult> {
    if depth > MAX_DEPTH {
        return Err(Error::precondition(format!(
            "depth {depth} exceeds the cap {MAX_DEPTH}"
        )));
    }
    if !oracle.deterministic() {
        return Err(Error::precondition("fusion needs a deterministic oracle"));
    }
    let chooser = Arc::new(FusionChooser {
        oracle,
        memo: Mutex::new(BTreeMap::new()),
    });
    let labeling = Labeling::build(base.clone(), Vec::new(), depth + 1, 0, chooser.clone(), search_bound)?;
    let memo = std::mem::take(&mut *chooser.memo.lock().unwrap());
    let mut table = BTreeMap::new();
    let mut constraints = BTreeMap::new();
    for (key, d) in memo {
        if key.0 <= depth {
            table.insert(key.clone(), d.value);
            constraints.insert(key, d.refined);
        }
    }
    Ok(FusionResult {
        labeling: Arc::new(labeling),
        table,
        constraints,
    })
}

/// A branch through the labeling: `K_n ⊆ ⋃_{i<n} L_i` for `n = 0, 1, …`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchReal {
    pub choices: Vec<FinSet>,
}

impl BranchReal {
    /// Checks `K_n ⊆ ⋃_{i<n} L_i` and `K_{n+1} ∩ ⋃_{i<n} L_i = K_n`.
    pub fn check(&self, lab: &Labeling) -> Result<()> {
        for (n, k) in self.choices.iter().enumerate() {
            let prefix = lab
                .prefix(n)
                .ok_or_else(|| Error::precondition(format!("branch runs past level {}", lab.depth())))?;
            if !k.is_subset(prefix) {
                return Err(Error::precondition(format!(
                    "K_{n} = {k} is not inside ⋃_{{i<{n}}} L_i"
                )));
            }
            if n > 0 && k.intersection(lab.prefix(n - 1).unwrap()) != self.choices[n - 1] {
                return Err(Error::precondition(format!("K_{n} = {k} does not extend K_{}", n - 1)));
            }
        }
        Ok(())
    }
}

/// `α^n_{K_n}` along `rho`.
pub fn read_off(fr: &FusionResult, rho: &BranchReal, n: usize) -> Result<u64> {
    if n > fr.depth() {
        return Err(Error::precondition(format!(
            "level {n} is past the depth {}",
            fr.depth()
        )));
    }
    rho.check(&fr.labeling)?;
    let k = rho
        .choices
        .get(n)
        .ok_or_else(|| Error::precondition(format!("branch has no choice at level {n}")))?;
    fr.value(n, k)
        .ok_or_else(|| Error::precondition(format!("table has no entry for ({n}, {k})")))
}

/// The branch `K_n = ⋃_{i<n} L_i ∩ {v : x(v)}`.
pub fn branch_from_real(fr: &FusionResult, x: &VertexPredicate) -> BranchReal {
    let choices = (0..=fr.depth())
        .map(|n| fr.labeling.prefix(n).unwrap().iter().filter(|&v| x.test(v)).collect())
        .collect();
    BranchReal { choices }
}

/// Every coherent branch through levels `0..=depth` of `lab`.
pub fn all_branches(lab: &Labeling, depth: usize) -> Result<Vec<BranchReal>> {
    let mut out = vec![BranchReal {
        choices: vec![FinSet::new()],
    }];
    for n in 1..=depth {
        let fresh = lab
            .level(n - 1)
            .ok_or_else(|| Error::precondition(format!("level {} is not materialized", n - 1)))?;
        if fresh.len() >= 16 {
            return Err(Error::precondition("too many branches to enumerate"));
        }
        out = out
            .into_iter()
            .flat_map(|b| {
                fresh.subsets().map(move |add| {
                    let mut choices = b.choices.clone();
                    choices.push(choices.last().unwrap().union(&add));
                    BranchReal { choices }
                })
            })
            .collect();
    }
    Ok(out)
}

/// Three-valued answer of [`decided_membership`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    In,
    Out,
    Undecided,
}

/// Whether `c` is certified to lie in `({p}, {p})` (In) or in `({p}, ∅)`
/// (Out). Only structural certificates count. Scanning the first `_depth`
/// members could refute a containment but never prove one, so it cannot turn
/// Undecided into an answer and is skipped.
pub fn decided_membership(c: &CopyHandle, p: Vertex, _depth: usize) -> Membership {
    let single = FinSet::singleton(p);
    let inside = OrbitType::new(single.clone(), single.clone()).unwrap();
    let outside = OrbitType::new(single, FinSet::new()).unwrap();
    if let Some(o) = c.certified_orbit() {
        if is_suborbit(&o, &inside) {
            return Membership::In;
        }
        if is_suborbit(&o, &outside) {
            return Membership::Out;
        }
    }
    Membership::Undecided
}

/// A pivot at which a copy decides nothing, with a witness on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub p: Vertex,
    /// A member of `c ∩ ({p}, {p})`.
    pub inside: Vertex,
    /// A member of `c ∩ ({p}, ∅)`.
    pub outside: Vertex,
    /// What `s` claims about `p` (true: `p` is in the real).
    pub claimed: bool,
}

impl Counterexample {
    /// The witness that refutes the claim `s(p)`.
    pub fn refuting(&self) -> Vertex {
        if self.claimed {
            self.outside
        } else {
            self.inside
        }
    }
}

/// The least `p ∈ c` (within the bound) such that `c` meets both orbits
/// `({p}, {p})` and `({p}, ∅)`: `c` cannot force the real to agree with `s`
/// at `p`.
pub fn total_decision_counterexample(
    c: &CopyHandle,
    s: &VertexPredicate,
    search_bound: usize,
) -> Result<Counterexample> {
    let report = verify_copy(c, 3, search_bound)?;
    if let Some(bad) = report.failures().next() {
        return Err(Error::precondition(format!(
            "{} fails the extension property at pattern {}",
            c.describe(),
            bad.orbit
        )));
    }
    for p in c.scan(Vertex(0), search_bound) {
        let single = FinSet::singleton(p);
        let inside = OrbitType::new(single.clone(), single.clone()).unwrap();
        let outside = OrbitType::new(single, FinSet::new()).unwrap();
        let (Ok(a), Ok(b)) = (
            least_orbit_member(&inside, Vertex(0), c, search_bound),
            least_orbit_member(&outside, Vertex(0), c, search_bound),
        ) else {
            continue;
        };
        debug_assert!(orbit_member(a, &inside, c) && orbit_member(b, &outside, c));
        return Ok(Counterexample {
            p,
            inside: a,
            outside: b,
            claimed: s.test(p),
        });
    }
    Err(Error::exhausted(
        format!("no undecided pivot in {}", c.describe()),
        search_bound,
    ))
}

/// `n ↦ s(n)` with `|s(n)| ≤ k_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slalom {
    pub sets: Vec<BTreeSet<u64>>,
    pub bound: Vec<u64>,
}

impl Slalom {
    pub fn holds(&self) -> bool {
        self.sets.iter().zip(&self.bound).all(|(s, &k)| s.len() as u64 <= k)
    }

    pub fn covers(&self, value: u64) -> bool {
        self.sets.iter().any(|s| s.contains(&value))
    }
}

/// `s(n) = {α^n_K : K ⊆ ⋃_{i<n} L_i}`, bounded by `m_n`.
pub fn slalom(fr: &FusionResult) -> Slalom {
    let depth = fr.depth();
    let mut sets = vec![BTreeSet::new(); depth + 1];
    for (&(n, _), &v) in &fr.table {
        sets[n].insert(v);
    }
    let bound = (0..=depth).map(|n| level_size(n).expect("n ≤ 3")).collect();
    Slalom { sets, bound }
}

/// `c` restricted to `({p}, {p})`, the copies that decide `p` into the real.
pub fn deciding_copy(c: &CopyHandle, p: Vertex, inside: bool) -> CopyHandle {
    let single = FinSet::singleton(p);
    let k = if inside { single.clone() } else { FinSet::new() };
    orbit_copy(c, &OrbitType::new(single, k).unwrap())
}
