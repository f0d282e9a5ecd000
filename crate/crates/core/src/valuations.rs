//! Agents' set valuations, the value-query oracle, and validity checks.
//!
//! Every agent `i` has a valuation `v_i(S)` over winner sets `S ⊆ [n]`. A valid profile is
//! nonnegative, zero whenever `i ∉ S`, monotone in `S`, and subadditive over sets that both
//! contain `i` (optionally relaxed by a factor `L ≥ 1`).
//!
//! Mechanisms never see a [`ValuationProfile`] directly; they talk to a [`BidOracle`], which
//! is what an agent reports. The truthful oracle is the profile itself.

use std::cell::Cell;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::set::{WinnerSet, MAX_AGENTS};

/// Absolute tolerance for every inequality between values.
pub const TOLERANCE: f64 = 1e-9;

/// Largest market for exhaustive condition checks.
pub const MAX_EXHAUSTIVE_AGENTS: usize = 12;

/// Largest market for explicit per-set tables.
pub const MAX_TABLE_AGENTS: usize = 10;

/// Default number of sampled triples in [`CheckMode::Sampled`].
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Stored violations are truncated at this count.
pub const MAX_REPORTED_VIOLATIONS: usize = 10_000;

/// Black-box value queries `b_i(S)`.
pub trait BidOracle {
    fn agents(&self) -> usize;

    fn bid(&self, agent: usize, set: WinnerSet) -> f64;
}

impl<T: BidOracle + ?Sized> BidOracle for &T {
    fn agents(&self) -> usize {
        (**self).agents()
    }

    fn bid(&self, agent: usize, set: WinnerSet) -> f64 {
        (**self).bid(agent, set)
    }
}

/// Wraps an oracle and counts the queries issued through it.
pub struct QueryCounter<O> {
    inner: O,
    count: Cell<u64>,
}

impl<O: BidOracle> QueryCounter<O> {
    pub fn new(inner: O) -> Self {
        QueryCounter { inner, count: Cell::new(0) }
    }

    pub fn count(&self) -> u64 {
        self.count.get()
    }
}

impl<O: BidOracle> BidOracle for QueryCounter<O> {
    fn agents(&self) -> usize {
        self.inner.agents()
    }

    fn bid(&self, agent: usize, set: WinnerSet) -> f64 {
        self.count.set(self.count.get() + 1);
        self.inner.bid(agent, set)
    }
}

/// An oracle defined by a closure; handy for hand-built examples.
pub struct FnOracle<F> {
    n: usize,
    f: F,
}

impl<F: Fn(usize, WinnerSet) -> f64> FnOracle<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnOracle { n, f }
    }
}

impl<F: Fn(usize, WinnerSet) -> f64> BidOracle for FnOracle<F> {
    fn agents(&self) -> usize {
        self.n
    }

    fn bid(&self, agent: usize, set: WinnerSet) -> f64 {
        (self.f)(agent, set)
    }
}

/// A public set function `w_i(S)`, zero whenever the owner is not in `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetFunction {
    /// Explicit values indexed by set mask (`2^n` entries).
    Table { values: Vec<f64> },
    /// `Σ_{j∈S} weights[j]`.
    Modular { weights: Vec<f64> },
    /// `coeff · |S|^power`.
    Count { coeff: f64, power: f64 },
    /// `value` for every set containing the owner.
    Constant { value: f64 },
}

impl SetFunction {
    pub fn eval(&self, owner: usize, set: WinnerSet) -> f64 {
        if !set.contains(owner) {
            return 0.0;
        }
        match self {
            SetFunction::Table { values } => values[set.bits() as usize],
            SetFunction::Modular { weights } => set.iter().map(|j| weights[j]).sum(),
            SetFunction::Count { coeff, power } => coeff * (set.len() as f64).powf(*power),
            SetFunction::Constant { value } => *value,
        }
    }

    fn validate(&self, n: usize, what: &str) -> Result<()> {
        let finite = |x: f64| x.is_finite() && x >= 0.0;
        let ok = match self {
            SetFunction::Table { values } => {
                if n > MAX_TABLE_AGENTS {
                    return Err(Error::TooManyAgents { what: "table set function", n, max: MAX_TABLE_AGENTS });
                }
                values.len() == 1 << n && values.iter().all(|&x| finite(x))
            }
            SetFunction::Modular { weights } => weights.len() == n && weights.iter().all(|&x| finite(x)),
            SetFunction::Count { coeff, power } => finite(*coeff) && finite(*power),
            SetFunction::Constant { value } => finite(*value),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInstance(format!("{what}: malformed or negative set function")))
        }
    }
}

/// Concave increasing curve with `f(0) = 0` for the graph model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    #[default]
    Sqrt,
    Log1p,
}

impl Curve {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Curve::Sqrt => x.sqrt(),
            Curve::Log1p => x.ln_1p(),
        }
    }
}

/// One agent's valuation model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentValuation {
    /// Explicit `v_i(S)` for all `2^n` masks. Not forced to zero outside `S`, so invalid
    /// tables can be represented and rejected by the checker.
    Table { values: Vec<f64> },
    /// `t + w(S)`.
    Additive { t: f64, w: SetFunction },
    /// `t · w(S)`.
    Scalar { t: f64, w: SetFunction },
    /// `t · w(S) + w'(S)`.
    Linear { t: f64, w: SetFunction, w_prime: SetFunction },
    /// `t · (1 + β·f(|N(i) ∩ S \ {i}|))`, with `N(i)` from the profile's graph.
    GraphConcave {
        t: f64,
        beta: f64,
        #[serde(default)]
        curve: Curve,
    },
}

impl AgentValuation {
    pub fn private_param(&self) -> Option<f64> {
        match *self {
            AgentValuation::Table { .. } => None,
            AgentValuation::Additive { t, .. }
            | AgentValuation::Scalar { t, .. }
            | AgentValuation::Linear { t, .. }
            | AgentValuation::GraphConcave { t, .. } => Some(t),
        }
    }

    fn set_private_param(&mut self, value: f64) {
        match self {
            AgentValuation::Table { .. } => {}
            AgentValuation::Additive { t, .. }
            | AgentValuation::Scalar { t, .. }
            | AgentValuation::Linear { t, .. }
            | AgentValuation::GraphConcave { t, .. } => *t = value,
        }
    }

    pub fn model_name(&self) -> &'static str {
        match self {
            AgentValuation::Table { .. } => "table",
            AgentValuation::Additive { .. } => "additive",
            AgentValuation::Scalar { .. } => "scalar",
            AgentValuation::Linear { .. } => "linear",
            AgentValuation::GraphConcave { .. } => "graph_concave",
        }
    }
}

/// A full market: one valuation per agent plus the optional social graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ValuationProfile {
    agents: Vec<AgentValuation>,
    neighbors: Vec<WinnerSet>,
    has_graph: bool,
    declared_l: Option<f64>,
}

impl ValuationProfile {
    /// Builds a profile, validating structure (sizes, finite nonnegative parameters,
    /// graph symmetry). The valuation conditions are checked separately.
    pub fn new(agents: Vec<AgentValuation>, adjacency: Option<Vec<Vec<usize>>>, declared_l: Option<f64>) -> Result<Self> {
        let n = agents.len();
        if n == 0 {
            return Err(Error::EmptyMarket);
        }
        if n > MAX_AGENTS {
            return Err(Error::TooManyAgents { what: "valuation profile", n, max: MAX_AGENTS });
        }
        if let Some(l) = declared_l {
            if !(l.is_finite() && l >= 1.0) {
                return Err(Error::InvalidInstance(format!("declared_L must be finite and >= 1, got {l}")));
            }
        }
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        for (i, a) in agents.iter().enumerate() {
            let what = format!("agent {i}");
            match a {
                AgentValuation::Table { values } => {
                    if n > MAX_TABLE_AGENTS {
                        return Err(Error::TooManyAgents { what: "table valuation", n, max: MAX_TABLE_AGENTS });
                    }
                    if values.len() != 1 << n || values.iter().any(|x| !x.is_finite()) {
                        return Err(Error::InvalidInstance(format!("{what}: table needs {} finite entries", 1u64 << n)));
                    }
                }
                AgentValuation::Additive { t, w } | AgentValuation::Scalar { t, w } => {
                    if !nonneg(*t) {
                        return Err(Error::InvalidInstance(format!("{what}: t must be finite and >= 0")));
                    }
                    w.validate(n, &what)?;
                }
                AgentValuation::Linear { t, w, w_prime } => {
                    if !nonneg(*t) {
                        return Err(Error::InvalidInstance(format!("{what}: t must be finite and >= 0")));
                    }
                    w.validate(n, &what)?;
                    w_prime.validate(n, &what)?;
                }
                AgentValuation::GraphConcave { t, beta, .. } => {
                    if !nonneg(*t) || !nonneg(*beta) {
                        return Err(Error::InvalidInstance(format!("{what}: t and beta must be finite and >= 0")));
                    }
                }
            }
        }
        let needs_graph = agents.iter().any(|a| matches!(a, AgentValuation::GraphConcave { .. }));
        let has_graph = adjacency.is_some();
        let neighbors = match adjacency {
            Some(adj) => neighbor_masks(n, &adj)?,
            None if needs_graph => {
                return Err(Error::InvalidInstance("graph_concave agents require an adjacency list".into()));
            }
            None => vec![WinnerSet::EMPTY; n],
        };
        Ok(ValuationProfile { agents, neighbors, has_graph, declared_l })
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &AgentValuation {
        &self.agents[i]
    }

    pub fn agent_models(&self) -> &[AgentValuation] {
        &self.agents
    }

    pub fn neighbors(&self, i: usize) -> WinnerSet {
        self.neighbors[i]
    }

    /// Adjacency lists, if the profile was built with a graph.
    pub fn adjacency(&self) -> Option<Vec<Vec<usize>>> {
        self.has_graph.then(|| self.neighbors.iter().map(|s| s.to_vec()).collect())
    }

    pub fn declared_l(&self) -> Option<f64> {
        self.declared_l
    }

    /// `v_i(S)` under the agent's true model.
    pub fn value(&self, i: usize, set: WinnerSet) -> f64 {
        match self.agents[i].private_param() {
            Some(t) => self.value_with_param(i, set, t),
            None => match &self.agents[i] {
                AgentValuation::Table { values } => values[set.bits() as usize],
                _ => unreachable!(),
            },
        }
    }

    /// `v_i(t, S)` with the private parameter replaced by `t`. Table agents ignore `t`.
    pub fn value_with_param(&self, i: usize, set: WinnerSet, t: f64) -> f64 {
        match self.linear_form(i, set) {
            Some((coef, offset)) => t * coef + offset,
            None => self.value(i, set),
        }
    }

    /// Writes `v_i(t, S) = t·coef + offset` for single-parameter models; `None` for tables.
    pub fn linear_form(&self, i: usize, set: WinnerSet) -> Option<(f64, f64)> {
        if !set.contains(i) {
            return match self.agents[i] {
                AgentValuation::Table { .. } => None,
                _ => Some((0.0, 0.0)),
            };
        }
        match &self.agents[i] {
            AgentValuation::Table { .. } => None,
            AgentValuation::Additive { w, .. } => Some((1.0, w.eval(i, set))),
            AgentValuation::Scalar { w, .. } => Some((w.eval(i, set), 0.0)),
            AgentValuation::Linear { w, w_prime, .. } => Some((w.eval(i, set), w_prime.eval(i, set))),
            AgentValuation::GraphConcave { beta, curve, .. } => {
                let k = self.neighbors[i].intersection(set).without(i).len();
                Some((1.0 + beta * curve.eval(k as f64), 0.0))
            }
        }
    }

    pub fn private_param(&self, i: usize) -> Option<f64> {
        self.agents[i].private_param()
    }

    /// A copy of the profile with agent `i`'s private parameter replaced.
    #[must_use]
    pub fn with_private_param(&self, i: usize, t: f64) -> Self {
        let mut out = self.clone();
        out.agents[i].set_private_param(t);
        out
    }

    pub fn is_additive(&self) -> bool {
        self.agents.iter().all(|a| matches!(a, AgentValuation::Additive { .. }))
    }

    /// Public part `w_i(S)` of an additive agent.
    pub fn additive_weight(&self, i: usize, set: WinnerSet) -> Option<f64> {
        match &self.agents[i] {
            AgentValuation::Additive { w, .. } => Some(w.eval(i, set)),
            _ => None,
        }
    }

    /// Private parameters of every agent, if all are single-parameter.
    pub fn private_params(&self) -> Option<Vec<f64>> {
        self.agents.iter().map(AgentValuation::private_param).collect()
    }
}

impl BidOracle for ValuationProfile {
    fn agents(&self) -> usize {
        self.n()
    }

    fn bid(&self, agent: usize, set: WinnerSet) -> f64 {
        self.value(agent, set)
    }
}

fn neighbor_masks(n: usize, adj: &[Vec<usize>]) -> Result<Vec<WinnerSet>> {
    if adj.len() != n {
        return Err(Error::InvalidInstance(format!("adjacency has {} rows for {n} agents", adj.len())));
    }
    let mut masks = vec![WinnerSet::EMPTY; n];
    for (i, row) in adj.iter().enumerate() {
        for &j in row {
            if j >= n || j == i {
                return Err(Error::InvalidInstance(format!("adjacency row {i}: invalid neighbor {j}")));
            }
            masks[i] = masks[i].with(j);
        }
    }
    for i in 0..n {
        for j in masks[i].iter() {
            if !masks[j].contains(i) {
                return Err(Error::InvalidInstance(format!("adjacency is not symmetric: {i}->{j} without {j}->{i}")));
            }
        }
    }
    Ok(masks)
}

/// A failed valuation condition, with the witness that breaks it.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    Negative { agent: usize, set: WinnerSet, value: f64 },
    NonzeroOutside { agent: usize, set: WinnerSet, value: f64 },
    NotMonotone { agent: usize, subset: WinnerSet, superset: WinnerSet, subset_value: f64, superset_value: f64 },
    NotSubadditive { agent: usize, left: WinnerSet, right: WinnerSet, union_value: f64, bound: f64 },
}

impl Violation {
    pub fn agent(&self) -> usize {
        match *self {
            Violation::Negative { agent, .. }
            | Violation::NonzeroOutside { agent, .. }
            | Violation::NotMonotone { agent, .. }
            | Violation::NotSubadditive { agent, .. } => agent,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Negative { agent, set, value } => write!(f, "v_{agent}({set}) = {value} < 0"),
            Violation::NonzeroOutside { agent, set, value } => {
                write!(f, "v_{agent}({set}) = {value} but agent {agent} is not in the set")
            }
            Violation::NotMonotone { agent, subset, superset, subset_value, superset_value } => write!(
                f,
                "monotonicity: v_{agent}({subset}) = {subset_value} > v_{agent}({superset}) = {superset_value}"
            ),
            Violation::NotSubadditive { agent, left, right, union_value, bound } => write!(
                f,
                "subadditivity: v_{agent}({left} ∪ {right}) = {union_value} > {bound}"
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    /// Every `(i, S, R)` triple; `n ≤ 12`.
    Exhaustive,
    /// `samples` random triples from a seeded generator.
    Sampled { samples: usize, seed: u64 },
}

impl CheckMode {
    /// Exhaustive when affordable, otherwise the default sampled check.
    pub fn auto(n: usize) -> Self {
        if n <= MAX_EXHAUSTIVE_AGENTS {
            CheckMode::Exhaustive
        } else {
            CheckMode::Sampled { samples: DEFAULT_SAMPLES, seed: 0 }
        }
    }
}

struct ViolationLog(Vec<Violation>);

impl ViolationLog {
    fn push(&mut self, v: Violation) {
        if self.0.len() < MAX_REPORTED_VIOLATIONS {
            self.0.push(v);
        }
    }
}

/// Checks nonnegativity, zero-outside, monotonicity and (L-relaxed) subadditivity.
///
/// `relax` is the factor `L` on the subadditive bound; pass `1.0` for the strict condition.
/// Each unordered pair `{S, R}` is reported at most once per agent.
pub fn check_conditions<O: BidOracle>(oracle: &O, mode: CheckMode, relax: f64) -> Result<Vec<Violation>> {
    let n = oracle.agents();
    let mut log = ViolationLog(Vec::new());
    match mode {
        CheckMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_AGENTS {
                return Err(Error::TooManyAgents { what: "exhaustive condition check", n, max: MAX_EXHAUSTIVE_AGENTS });
            }
            for i in 0..n {
                let values = agent_table(oracle, i);
                exhaustive_agent(i, n, &values, relax, &mut log);
            }
        }
        CheckMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = WinnerSet::full(n).bits();
            for _ in 0..samples {
                let i = rng.random_range(0..n);
                let s = WinnerSet::from_bits(rng.random::<u64>() & full).with(i);
                let r = WinnerSet::from_bits(rng.random::<u64>() & full).with(i);
                let outside = WinnerSet::from_bits(rng.random::<u64>() & full).without(i);
                check_point(oracle, i, s, &mut log);
                check_point(oracle, i, outside, &mut log);
                let (vs, vr, vu) = (oracle.bid(i, s), oracle.bid(i, r), oracle.bid(i, s.union(r)));
                if vs > vu + TOLERANCE {
                    log.push(Violation::NotMonotone { agent: i, subset: s, superset: s.union(r), subset_value: vs, superset_value: vu });
                }
                let bound = relax * (vs + vr);
                if vu > bound + TOLERANCE {
                    log.push(Violation::NotSubadditive { agent: i, left: s, right: r, union_value: vu, bound });
                }
            }
        }
    }
    Ok(log.0)
}

fn check_point<O: BidOracle>(oracle: &O, i: usize, set: WinnerSet, log: &mut ViolationLog) {
    let v = oracle.bid(i, set);
    if v < -TOLERANCE {
        log.push(Violation::Negative { agent: i, set, value: v });
    }
    if !set.contains(i) && v > TOLERANCE {
        log.push(Violation::NonzeroOutside { agent: i, set, value: v });
    }
}

fn agent_table<O: BidOracle>(oracle: &O, i: usize) -> Vec<f64> {
    let n = oracle.agents();
    (0..1u64 << n).map(|m| oracle.bid(i, WinnerSet::from_bits(m))).collect()
}

fn exhaustive_agent(i: usize, n: usize, values: &[f64], relax: f64, log: &mut ViolationLog) {
    let full = (1u64 << n) - 1;
    for m in 0..=full {
        let set = WinnerSet::from_bits(m);
        let v = values[m as usize];
        if v < -TOLERANCE {
            log.push(Violation::Negative { agent: i, set, value: v });
        }
        if !set.contains(i) && v > TOLERANCE {
            log.push(Violation::NonzeroOutside { agent: i, set, value: v });
        }
        // single-element extensions suffice for monotonicity
        for j in WinnerSet::from_bits(full & !m).iter() {
            let sup = set.with(j);
            let vs = values[sup.bits() as usize];
            if v > vs + TOLERANCE {
                log.push(Violation::NotMonotone { agent: i, subset: set, superset: sup, subset_value: v, superset_value: vs });
            }
        }
    }
    for_each_overlapping_pair(i, n, |s, r| {
        let vu = values[s.union(r).bits() as usize];
        let bound = relax * (values[s.bits() as usize] + values[r.bits() as usize]);
        if vu > bound + TOLERANCE {
            log.push(Violation::NotSubadditive { agent: i, left: s, right: r, union_value: vu, bound });
        }
    });
}

/// Unordered pairs `{S, R}` with `i ∈ S ∩ R` and neither contained in the other.
fn for_each_overlapping_pair(i: usize, n: usize, mut f: impl FnMut(WinnerSet, WinnerSet)) {
    let others = WinnerSet::full(n).without(i);
    let subs: Vec<WinnerSet> = others.subsets().map(|s| s.with(i)).collect();
    for (a, &s) in subs.iter().enumerate() {
        for &r in &subs[a + 1..] {
            if s.is_subset(r) || r.is_subset(s) {
                continue;
            }
            f(s, r);
        }
    }
}

/// Smallest `L ≥ 1` with `L·(v_i(A) + v_i(B)) ≥ v_i(A ∪ B)` over the checked triples.
///
/// Returns `+∞` when some union has positive value over two zero-valued parts.
pub fn estimate_l<O: BidOracle>(oracle: &O, mode: CheckMode) -> Result<f64> {
    let n = oracle.agents();
    let mut worst: f64 = 1.0;
    let mut consider = |vs: f64, vr: f64, vu: f64| {
        let denom = vs + vr;
        if denom > TOLERANCE {
            worst = worst.max(vu / denom);
        } else if vu > TOLERANCE {
            worst = f64::INFINITY;
        }
    };
    match mode {
        CheckMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_AGENTS {
                return Err(Error::TooManyAgents { what: "exhaustive L estimate", n, max: MAX_EXHAUSTIVE_AGENTS });
            }
            for i in 0..n {
                let values = agent_table(oracle, i);
                for_each_overlapping_pair(i, n, |s, r| {
                    consider(values[s.bits() as usize], values[r.bits() as usize], values[s.union(r).bits() as usize]);
                });
            }
        }
        CheckMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = WinnerSet::full(n).bits();
            for _ in 0..samples {
                let i = rng.random_range(0..n);
                let s = WinnerSet::from_bits(rng.random::<u64>() & full).with(i);
                let r = WinnerSet::from_bits(rng.random::<u64>() & full).with(i);
                consider(oracle.bid(i, s), oracle.bid(i, r), oracle.bid(i, s.union(r)));
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn squared(n: usize) -> FnOracle<impl Fn(usize, WinnerSet) -> f64> {
        FnOracle::new(n, |i, s: WinnerSet| if s.contains(i) { (s.len() * s.len()) as f64 } else { 0.0 })
    }

    fn additive(t: &[f64], w: SetFunction) -> ValuationProfile {
        let agents = t.iter().map(|&t| AgentValuation::Additive { t, w: w.clone() }).collect();
        ValuationProfile::new(agents, None, None).unwrap()
    }

    #[test]
    fn additive_value_query() {
        let p = additive(&[2.0, 1.0], SetFunction::Constant { value: 3.0 });
        assert_eq!(p.value(0, WinnerSet::from_agents([0])), 5.0);
        assert_eq!(p.value(0, WinnerSet::from_agents([1])), 0.0);
    }

    #[test]
    fn graph_concave_value_query() {
        let agents = (0..5).map(|_| AgentValuation::GraphConcave { t: 1.0, beta: 1.0, curve: Curve::Sqrt }).collect();
        let star = vec![vec![1, 2, 3, 4], vec![0], vec![0], vec![0], vec![0]];
        let p = ValuationProfile::new(agents, Some(star), None).unwrap();
        assert_eq!(p.value(0, WinnerSet::full(5)), 3.0);
        assert_eq!(p.value(0, WinnerSet::from_agents([0])), 1.0);
        assert_eq!(p.value(1, WinnerSet::from_agents([0, 2])), 0.0);
    }

    #[test]
    fn additive_profile_has_no_violations() {
        let p = additive(&[1.0, 4.0, 0.0, 2.5], SetFunction::Modular { weights: vec![0.5, 1.0, 2.0, 0.0] });
        assert!(check_conditions(&p, CheckMode::Exhaustive, 1.0).unwrap().is_empty());
        assert_eq!(estimate_l(&p, CheckMode::Exhaustive).unwrap(), 1.0);
    }

    #[test]
    fn squared_size_breaks_subadditivity() {
        let v = check_conditions(&squared(3), CheckMode::Exhaustive, 1.0).unwrap();
        // one violating pair per agent: {i,j} ∪ {i,k}, 9 > 8
        assert_eq!(v.len(), 3);
        for i in 0..3 {
            let mine: Vec<_> = v.iter().filter(|x| x.agent() == i).collect();
            assert_eq!(mine.len(), 1);
            match mine[0] {
                Violation::NotSubadditive { left, right, union_value, bound, .. } => {
                    assert_eq!(left.len(), 2);
                    assert_eq!(right.len(), 2);
                    assert_eq!(*union_value, 9.0);
                    assert_eq!(*bound, 8.0);
                }
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn linear_size_is_subadditive() {
        let o = FnOracle::new(5, |i, s: WinnerSet| if s.contains(i) { 2.0 * s.len() as f64 } else { 0.0 });
        assert!(check_conditions(&o, CheckMode::Exhaustive, 1.0).unwrap().is_empty());
    }

    #[test]
    fn relaxed_check_accepts_squared_with_enough_slack() {
        assert!(check_conditions(&squared(3), CheckMode::Exhaustive, 9.0 / 8.0).unwrap().is_empty());
    }

    #[test]
    fn estimate_l_for_squared_size() {
        assert!((estimate_l(&squared(3), CheckMode::Exhaustive).unwrap() - 9.0 / 8.0).abs() < 1e-12);
        // |A|=2, |B|=3 sharing one agent: 16 / (4 + 9)
        assert!((estimate_l(&squared(4), CheckMode::Exhaustive).unwrap() - 16.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_rejects_large_markets() {
        let o = FnOracle::new(13, |_, _| 0.0);
        assert!(matches!(check_conditions(&o, CheckMode::Exhaustive, 1.0), Err(Error::TooManyAgents { .. })));
        assert!(check_conditions(&o, CheckMode::Sampled { samples: 100, seed: 1 }, 1.0).unwrap().is_empty());
    }

    #[test]
    fn sampled_check_finds_losing_values() {
        let o = FnOracle::new(20, |_, s: WinnerSet| s.len() as f64);
        let v = check_conditions(&o, CheckMode::Sampled { samples: 200, seed: 3 }, 1.0).unwrap();
        assert!(v.iter().any(|x| matches!(x, Violation::NonzeroOutside { .. })));
    }

    #[test]
    fn table_may_hold_invalid_values() {
        let values: Vec<f64> = (0..4).map(|m: u64| m.count_ones() as f64).collect();
        let p = ValuationProfile::new(vec![AgentValuation::Table { values: values.clone() }, AgentValuation::Table { values }], None, None).unwrap();
        let v = check_conditions(&p, CheckMode::Exhaustive, 1.0).unwrap();
        assert!(v.iter().any(|x| matches!(x, Violation::NonzeroOutside { agent: 0, .. })));
    }

    #[test]
    fn query_counter_counts() {
        let p = additive(&[1.0, 1.0], SetFunction::Constant { value: 0.0 });
        let c = QueryCounter::new(&p);
        for _ in 0..7 {
            c.bid(0, WinnerSet::full(2));
        }
        assert_eq!(c.count(), 7);
    }

    #[test]
    fn structural_validation() {
        assert!(matches!(ValuationProfile::new(vec![], None, None), Err(Error::EmptyMarket)));
        let g = AgentValuation::GraphConcave { t: 1.0, beta: 1.0, curve: Curve::Sqrt };
        assert!(ValuationProfile::new(vec![g.clone(), g.clone()], None, None).is_err());
        assert!(ValuationProfile::new(vec![g.clone(), g.clone()], Some(vec![vec![1], vec![]]), None).is_err());
        assert!(ValuationProfile::new(vec![g.clone(), g], Some(vec![vec![1], vec![0]]), None).is_ok());
        let bad_t = AgentValuation::Scalar { t: -1.0, w: SetFunction::Constant { value: 1.0 } };
        assert!(ValuationProfile::new(vec![bad_t], None, None).is_err());
    }
}
