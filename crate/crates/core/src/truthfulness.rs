//! Truthfulness tooling.
//!
//! Two halves:
//!
//! * Single-parameter grid rules. Each agent bids a point of a finite grid and values a set
//!   as `v_i(x, S) = x·w_i(S) + w'_i(S)`. A rule is truthfully implementable iff winning is
//!   monotone in one's own bid and `w_i` of the allocated set never drops as the bid rises.
//!   For implementable rules the grid splits into intervals of `w_i`-equivalent allocations,
//!   and payments telescope across interval boundaries.
//! * A deviation tester for black-box multi-parameter mechanisms: run the mechanism with the
//!   truth and with misreports under identical randomness and compare utilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{derive_seed, DeterministicMechanism};
use crate::set::WinnerSet;
use crate::valuations::{BidOracle, ValuationProfile, TOLERANCE};

/// Default grid resolution.
pub const DEFAULT_GRID_POINTS: usize = 64;

/// Sorted bid values shared by all agents.
#[derive(Clone, Debug, PartialEq)]
pub struct BidGrid(Vec<f64>);

impl BidGrid {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidArgument("grid needs finite nonnegative values".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        Ok(BidGrid(values))
    }

    /// `points` evenly spaced values over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument("uniform grid needs points >= 2 and hi > lo".into()));
        }
        BidGrid::new((0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.0[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

type AllocFn = dyn Fn(&[usize]) -> WinnerSet + Send + Sync;

/// A deterministic allocation rule over grid bid vectors (bids given as grid indices).
pub struct SingleParamRule {
    n: usize,
    grid: BidGrid,
    alloc: Box<AllocFn>,
}

impl SingleParamRule {
    pub fn from_fn(n: usize, grid: BidGrid, alloc: impl Fn(&[usize]) -> WinnerSet + Send + Sync + 'static) -> Self {
        SingleParamRule { n, grid, alloc: Box::new(alloc) }
    }

    /// Lookup table indexed in mixed radix, agent 0 least significant.
    pub fn from_table(n: usize, grid: BidGrid, table: Vec<WinnerSet>) -> Result<Self> {
        let g = grid.len();
        if table.len() != g.pow(n as u32) {
            return Err(Error::InvalidArgument(format!("rule table needs {} entries", g.pow(n as u32))));
        }
        Ok(SingleParamRule::from_fn(n, grid, move |bids| table[profile_index(bids, g)]))
    }

    /// Sell at uniform price `c`: drop agents with `v_i(b_i, S) < c` until none remain.
    pub fn fixed_price(params: &ValuationProfile, grid: BidGrid, price: f64) -> Self {
        let params = params.clone();
        let values = grid.values().to_vec();
        let n = params.n();
        SingleParamRule::from_fn(n, grid, move |bids| {
            let mut s = WinnerSet::full(n);
            loop {
                let drop = WinnerSet::from_agents(s.iter().filter(|&i| params.value_with_param(i, s, values[bids[i]]) < price - TOLERANCE));
                if drop.is_empty() {
                    return s;
                }
                s = s.difference(drop);
            }
        })
    }

    /// A random table made monotone: each bid vector gets the union of the raw sets at every
    /// dominated bid vector, so raising any bid only grows the winner set.
    pub fn random_upward_closed(n: usize, grid: BidGrid, seed: u64, density: f64) -> Result<Self> {
        let g = grid.len();
        let raw = random_table(n, g, seed, density);
        let mut closed = raw.clone();
        for idx in 0..closed.len() {
            let bids = index_profile(idx, n, g);
            for k in 0..n {
                if bids[k] > 0 {
                    let mut lower = bids.clone();
                    lower[k] -= 1;
                    let prev = closed[profile_index(&lower, g)];
                    closed[idx] = closed[idx].union(prev);
                }
            }
        }
        SingleParamRule::from_table(n, grid, closed)
    }

    /// A random, generally non-monotone table.
    pub fn random_unstructured(n: usize, grid: BidGrid, seed: u64, density: f64) -> Result<Self> {
        let table = random_table(n, grid.len(), seed, density);
        SingleParamRule::from_table(n, grid, table)
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn allocate(&self, bids: &[usize]) -> WinnerSet {
        (self.alloc)(bids)
    }

    /// Every grid bid vector of the other agents, with agent `i`'s slot set to 0.
    pub fn contexts(&self, i: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
        let g = self.grid.len();
        let count = g.pow(self.n as u32 - 1);
        (0..count).map(move |mut idx| {
            let mut bids = vec![0; self.n];
            for (k, b) in bids.iter_mut().enumerate() {
                if k != i {
                    *b = idx % g;
                    idx /= g;
                }
            }
            bids
        })
    }

    /// Allocations as agent `i` walks up the grid with the others fixed.
    fn walk(&self, i: usize, context: &[usize]) -> Vec<WinnerSet> {
        let mut bids = context.to_vec();
        (0..self.grid.len())
            .map(|x| {
                bids[i] = x;
                self.allocate(&bids)
            })
            .collect()
    }
}

fn profile_index(bids: &[usize], g: usize) -> usize {
    bids.iter().rev().fold(0, |acc, &b| acc * g + b)
}

fn index_profile(mut idx: usize, n: usize, g: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let b = idx % g;
            idx /= g;
            b
        })
        .collect()
}

fn random_table(n: usize, g: usize, seed: u64, density: f64) -> Vec<WinnerSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..g.pow(n as u32))
        .map(|_| WinnerSet::from_agents((0..n).filter(|_| rng.random_bool(density))))
        .collect()
}

/// A failed characterization condition between two adjacent grid bids of one agent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleViolation {
    pub agent: usize,
    /// Others' grid indices; the agent's own slot is meaningless.
    pub context: Vec<usize>,
    pub low_bid: f64,
    pub high_bid: f64,
    pub low_set: WinnerSet,
    pub high_set: WinnerSet,
}

/// Winning must survive raising one's own bid. Scans adjacent grid pairs, which is
/// equivalent to checking all pairs.
pub fn check_bid_independent_monotone(rule: &SingleParamRule, i: usize) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    for ctx in rule.contexts(i) {
        let walk = rule.walk(i, &ctx);
        for x in 1..walk.len() {
            if walk[x - 1].contains(i) && !walk[x].contains(i) {
                out.push(violation(rule, i, &ctx, x, &walk));
            }
        }
    }
    out
}

fn violation(rule: &SingleParamRule, i: usize, ctx: &[usize], x: usize, walk: &[WinnerSet]) -> RuleViolation {
    RuleViolation {
        agent: i,
        context: ctx.to_vec(),
        low_bid: rule.grid.value(x - 1),
        high_bid: rule.grid.value(x),
        low_set: walk[x - 1],
        high_set: walk[x],
    }
}

/// Marginal weight `w_i(S)` of a set for agent `i` (zero when `i ∉ S`).
fn class_weight(params: &ValuationProfile, i: usize, set: WinnerSet) -> Result<f64> {
    params
        .linear_form(i, set)
        .map(|(coef, _)| coef)
        .ok_or_else(|| Error::InvalidArgument(format!("agent {i} has no single-parameter valuation")))
}

/// `w_i` of the allocated set must not drop as agent `i` raises the bid. Pairs where the
/// agent loses at the higher bid are left to [`check_bid_independent_monotone`].
pub fn check_encourages_higher_bids(rule: &SingleParamRule, i: usize, params: &ValuationProfile) -> Result<Vec<RuleViolation>> {
    let mut out = Vec::new();
    for ctx in rule.contexts(i) {
        let walk = rule.walk(i, &ctx);
        for x in 1..walk.len() {
            if !walk[x].contains(i) {
                continue;
            }
            if class_weight(params, i, walk[x])? < class_weight(params, i, walk[x - 1])? - TOLERANCE {
                out.push(violation(rule, i, &ctx, x, &walk));
            }
        }
    }
    Ok(out)
}

/// A maximal run of grid bids whose allocations are `w_i`-equivalent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BidInterval {
    /// First and last grid index, inclusive.
    pub lo: usize,
    pub hi: usize,
    /// Shared `w_i` value of the class.
    pub weight: f64,
    /// Representative allocated set (the one at `lo`).
    pub representative: WinnerSet,
}

/// Interval structure of agent `i`'s bid axis for one context, with telescoping offsets
/// `d_j = inf_{I_{j+1}} v_i(x, S_j) − inf_{I_j} v_i(x, S_j)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakpointPartition {
    pub agent: usize,
    pub context: Vec<usize>,
    pub intervals: Vec<BidInterval>,
    pub d: Vec<f64>,
    /// Allocation at every grid point.
    pub allocations: Vec<WinnerSet>,
    grid: Vec<f64>,
}

impl BreakpointPartition {
    pub fn interval_of(&self, bid_idx: usize) -> usize {
        self.intervals.iter().position(|iv| iv.lo <= bid_idx && bid_idx <= iv.hi).expect("intervals cover the grid")
    }
}

fn inf_value(params: &ValuationProfile, i: usize, grid: &[f64], iv: &BidInterval, set: WinnerSet) -> f64 {
    grid[iv.lo..=iv.hi].iter().map(|&x| params.value_with_param(i, set, x)).fold(f64::INFINITY, f64::min)
}

/// Splits agent `i`'s grid into equivalence-class intervals and computes the offsets `d_j`.
/// Rejects contexts where the rule breaks either characterization condition.
pub fn discover_breakpoints(rule: &SingleParamRule, i: usize, context: &[usize], params: &ValuationProfile) -> Result<BreakpointPartition> {
    let walk = rule.walk(i, context);
    let grid = rule.grid.values();
    let weights = walk.iter().map(|&s| class_weight(params, i, s)).collect::<Result<Vec<_>>>()?;
    for x in 1..walk.len() {
        if walk[x - 1].contains(i) && !walk[x].contains(i) {
            return Err(Error::RuleNotImplementable {
                agent: i,
                reason: format!("wins at bid {} but loses at {}", grid[x - 1], grid[x]),
            });
        }
        if walk[x].contains(i) && weights[x] < weights[x - 1] - TOLERANCE {
            return Err(Error::RuleNotImplementable {
                agent: i,
                reason: format!("w drops from {} to {} between bids {} and {}", weights[x - 1], weights[x], grid[x - 1], grid[x]),
            });
        }
    }
    let mut intervals: Vec<BidInterval> = Vec::new();
    for (x, &set) in walk.iter().enumerate() {
        match intervals.last_mut() {
            Some(iv) if (weights[x] - iv.weight).abs() <= TOLERANCE => iv.hi = x,
            _ => intervals.push(BidInterval { lo: x, hi: x, weight: weights[x], representative: set }),
        }
    }
    let d = intervals
        .windows(2)
        .map(|w| {
            let s = w[0].representative;
            inf_value(params, i, grid, &w[1], s) - inf_value(params, i, grid, &w[0], s)
        })
        .collect();
    Ok(BreakpointPartition { agent: i, context: context.to_vec(), intervals, d, allocations: walk, grid: grid.to_vec() })
}

/// `p_i(b) = inf_{x∈I_ℓ} v_i(x, A(b)) − Σ_{j<ℓ} d_j` for a winning bid in interval `I_ℓ`;
/// zero for losing bids. No constant is subtracted for agents that win at the lowest bid,
/// which picks the largest admissible payment.
pub fn payment_from_characterization(partition: &BreakpointPartition, bid_idx: usize, params: &ValuationProfile) -> f64 {
    let i = partition.agent;
    let set = partition.allocations[bid_idx];
    if !set.contains(i) {
        return 0.0;
    }
    let ell = partition.interval_of(bid_idx);
    inf_value(params, i, &partition.grid, &partition.intervals[ell], set) - partition.d[..ell].iter().sum::<f64>()
}

/// A profitable misreport found on the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridViolation {
    pub agent: usize,
    pub context: Vec<usize>,
    pub true_bid: f64,
    pub reported_bid: f64,
    pub truthful_utility: f64,
    pub deviating_utility: f64,
}

/// Runs the rule with synthesized payments over the full grid and lists every profitable
/// misreport. Errors if the rule is not implementable for some context.
pub fn grid_deviation_test(rule: &SingleParamRule, params: &ValuationProfile) -> Result<Vec<GridViolation>> {
    let g = rule.grid.len();
    let mut out = Vec::new();
    for i in 0..rule.agents() {
        for ctx in rule.contexts(i) {
            let part = discover_breakpoints(rule, i, &ctx, params)?;
            let payments: Vec<f64> = (0..g).map(|b| payment_from_characterization(&part, b, params)).collect();
            let utility = |t: usize, b: usize| {
                let s = part.allocations[b];
                if s.contains(i) {
                    params.value_with_param(i, s, rule.grid.value(t)) - payments[b]
                } else {
                    0.0
                }
            };
            for t in 0..g {
                let honest = utility(t, t);
                for b in 0..g {
                    let lie = utility(t, b);
                    if lie > honest + TOLERANCE {
                        out.push(GridViolation {
                            agent: i,
                            context: ctx.clone(),
                            true_bid: rule.grid.value(t),
                            reported_bid: rule.grid.value(b),
                            truthful_utility: honest,
                            deviating_utility: lie,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// How a deviating agent reshapes its bid function `b_i(S)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Misreport {
    Truthful,
    /// `factor · v_i(S)`.
    Scale { factor: f64 },
    /// `value` for every set containing the agent.
    Constant { value: f64 },
    /// `v_i(S)·(1 + spread·u_S)` with `u_S ∈ [-1, 1]` hashed from `(seed, S)`.
    Noise { seed: u64, spread: f64 },
    /// Single-parameter misreport: the model evaluated at private parameter `t`.
    Param { t: f64 },
    /// Scale only sets with at least `min_size` members.
    Inflate { min_size: usize, factor: f64 },
    /// Truthful on sets inside `support`, zero elsewhere.
    Truncate { support: WinnerSet },
}

/// The truthful profile with one agent's bids replaced by a misreport.
pub struct MisreportOracle<'a> {
    truth: &'a ValuationProfile,
    agent: usize,
    misreport: &'a Misreport,
}

impl<'a> MisreportOracle<'a> {
    pub fn new(truth: &'a ValuationProfile, agent: usize, misreport: &'a Misreport) -> Self {
        MisreportOracle { truth, agent, misreport }
    }
}

fn unit_hash(seed: u64, set: WinnerSet) -> f64 {
    let h = derive_seed(seed, &[set.bits()]);
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

impl BidOracle for MisreportOracle<'_> {
    fn agents(&self) -> usize {
        self.truth.n()
    }

    fn bid(&self, agent: usize, set: WinnerSet) -> f64 {
        let truth = self.truth.value(agent, set);
        if agent != self.agent || !set.contains(agent) {
            return truth;
        }
        match *self.misreport {
            Misreport::Truthful => truth,
            Misreport::Scale { factor } => factor * truth,
            Misreport::Constant { value } => value,
            Misreport::Noise { seed, spread } => truth * (1.0 + spread * unit_hash(seed, set)),
            Misreport::Param { t } => self.truth.value_with_param(agent, set, t),
            Misreport::Inflate { min_size, factor } => {
                if set.len() >= min_size {
                    factor * truth
                } else {
                    truth
                }
            }
            Misreport::Truncate { support } => {
                if set.is_subset(support) {
                    truth
                } else {
                    0.0
                }
            }
        }
    }
}

/// Misreports to try, as `(agent, misreport)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DeviationPlan {
    pub entries: Vec<(usize, Misreport)>,
}

impl DeviationPlan {
    /// A mix of scaling, constant, "bid 0 / bid huge", size-targeted, truncated and noisy
    /// misreports: `per_agent` entries for every agent.
    pub fn structured(truth: &ValuationProfile, per_agent: usize, seed: u64) -> Self {
        let n = truth.n();
        let top = (0..n).map(|i| truth.value(i, WinnerSet::full(n))).fold(0.0, f64::max).max(1.0);
        let mut entries = Vec::new();
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[i as u64]));
            let mut mine = vec![
                Misreport::Constant { value: 0.0 },
                Misreport::Constant { value: top * 1e6 },
                Misreport::Scale { factor: 0.0 },
                Misreport::Scale { factor: 0.5 },
                Misreport::Scale { factor: 0.999 },
                Misreport::Scale { factor: 1.001 },
                Misreport::Scale { factor: 2.0 },
                Misreport::Scale { factor: 1e6 },
            ];
            for min_size in 1..=n {
                mine.push(Misreport::Inflate { min_size, factor: 10.0 });
                mine.push(Misreport::Inflate { min_size, factor: 0.1 });
            }
            while mine.len() < per_agent {
                let m = match rng.random_range(0..5u8) {
                    0 => Misreport::Scale { factor: rng.random_range(0.0..3.0) },
                    1 => Misreport::Constant { value: rng.random_range(0.0..2.0 * top) },
                    2 => Misreport::Noise { seed: rng.random(), spread: rng.random_range(0.0..1.0) },
                    3 => Misreport::Truncate {
                        support: WinnerSet::from_bits(rng.random::<u64>() & WinnerSet::full(n).bits()).with(i),
                    },
                    _ => Misreport::Inflate { min_size: rng.random_range(1..=n), factor: rng.random_range(0.0..5.0) },
                };
                mine.push(m);
            }
            mine.truncate(per_agent.max(1));
            entries.extend(mine.into_iter().map(|m| (i, m)));
        }
        DeviationPlan { entries }
    }

    /// For single-parameter agents: `points` evenly spaced private parameters over
    /// `[0, 2·max_j t_j]`, plus the truth nudged just below and above.
    pub fn param_grid(truth: &ValuationProfile, points: usize) -> Self {
        let n = truth.n();
        let top = (0..n).filter_map(|i| truth.private_param(i)).fold(0.0, f64::max).max(1.0) * 2.0;
        let mut entries = Vec::new();
        for i in 0..n {
            let Some(t) = truth.private_param(i) else { continue };
            for k in 0..points {
                let value = top * k as f64 / (points.max(2) - 1) as f64;
                entries.push((i, Misreport::Param { t: value }));
            }
            for t in [t * 0.999, t * 1.001 + 1e-6] {
                entries.push((i, Misreport::Param { t }));
            }
        }
        DeviationPlan { entries }
    }

    pub fn extend(&mut self, other: DeviationPlan) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeviationViolation {
    pub agent: usize,
    pub misreport: Misreport,
    pub truthful_utility: f64,
    pub deviating_utility: f64,
}

/// Compares each agent's utility under truth and under every planned misreport, with the
/// mechanism's randomness already fixed. Utilities use the true valuations.
pub fn deviation_test(mechanism: &dyn DeterministicMechanism, truth: &ValuationProfile, plan: &DeviationPlan) -> Vec<DeviationViolation> {
    let honest = mechanism.run(truth);
    let mut out = Vec::new();
    for (agent, misreport) in &plan.entries {
        let lie = MisreportOracle::new(truth, *agent, misreport);
        let outcome = mechanism.run(&lie);
        let (u_truth, u_lie) = (honest.utility(truth, *agent), outcome.utility(truth, *agent));
        if u_lie > u_truth + TOLERANCE {
            out.push(DeviationViolation { agent: *agent, misreport: misreport.clone(), truthful_utility: u_truth, deviating_utility: u_lie });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{FirstPrice, FixedPrice, MainRealization, Partition3};
    use crate::valuations::{AgentValuation, SetFunction};

    fn scalar(n: usize, w: SetFunction) -> ValuationProfile {
        ValuationProfile::new((0..n).map(|_| AgentValuation::Scalar { t: 1.0, w: w.clone() }).collect(), None, None).unwrap()
    }

    fn unit_grid() -> BidGrid {
        BidGrid::new((0..=10).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn fixed_price_rule_is_monotone() {
        let params = scalar(2, SetFunction::Constant { value: 1.0 });
        let rule = SingleParamRule::fixed_price(&params, unit_grid(), 4.0);
        for i in 0..2 {
            assert!(check_bid_independent_monotone(&rule, i).is_empty());
            assert!(check_encourages_higher_bids(&rule, i, &params).unwrap().is_empty());
        }
    }

    #[test]
    fn window_rule_breaks_monotonicity_once() {
        let rule = SingleParamRule::from_fn(1, unit_grid(), |b| if (1..=2).contains(&b[0]) { WinnerSet::full(1) } else { WinnerSet::EMPTY });
        let v = check_bid_independent_monotone(&rule, 0);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].low_bid, v[0].high_bid), (2.0, 3.0));
    }

    #[test]
    fn constant_rule_has_one_interval() {
        let params = scalar(2, SetFunction::Constant { value: 1.0 });
        let rule = SingleParamRule::from_fn(2, unit_grid(), |_| WinnerSet::full(2));
        assert!(check_bid_independent_monotone(&rule, 0).is_empty());
        let part = discover_breakpoints(&rule, 0, &[0, 3], &params).unwrap();
        assert_eq!(part.intervals.len(), 1);
        assert!(part.d.is_empty());
    }

    #[test]
    fn shrinking_weight_breaks_second_condition() {
        // w_0({0}) = 3, w_0({0,1}) = 5: winning with {0,1} at low bids and {0} at high bids
        let mut values = vec![0.0; 4];
        values[0b01] = 3.0;
        values[0b11] = 5.0;
        let params = ValuationProfile::new(
            vec![
                AgentValuation::Scalar { t: 1.0, w: SetFunction::Table { values } },
                AgentValuation::Scalar { t: 1.0, w: SetFunction::Constant { value: 1.0 } },
            ],
            None,
            None,
        )
        .unwrap();
        let grid = BidGrid::new(vec![1.0, 2.0]).unwrap();
        let rule = SingleParamRule::from_fn(2, grid, |b| if b[0] == 0 { WinnerSet::full(2) } else { WinnerSet::singleton(0) });
        assert!(check_bid_independent_monotone(&rule, 0).is_empty());
        assert_eq!(check_encourages_higher_bids(&rule, 0, &params).unwrap().len(), 2);
        assert!(discover_breakpoints(&rule, 0, &[0, 0], &params).is_err());
    }

    #[test]
    fn fixed_price_rule_with_size_weight_passes() {
        let params = scalar(3, SetFunction::Count { coeff: 1.0, power: 1.0 });
        let rule = SingleParamRule::fixed_price(&params, BidGrid::uniform(0.0, 6.0, 7).unwrap(), 4.0);
        for i in 0..3 {
            assert!(check_bid_independent_monotone(&rule, i).is_empty());
            assert!(check_encourages_higher_bids(&rule, i, &params).unwrap().is_empty());
        }
        assert!(grid_deviation_test(&rule, &params).unwrap().is_empty());
    }

    #[test]
    fn additive_rules_never_fail_second_condition() {
        let params = ValuationProfile::new(
            (0..2).map(|_| AgentValuation::Additive { t: 0.0, w: SetFunction::Count { coeff: 2.0, power: 1.0 } }).collect(),
            None,
            None,
        )
        .unwrap();
        for seed in 0..20 {
            let rule = SingleParamRule::random_unstructured(2, BidGrid::uniform(0.0, 4.0, 5).unwrap(), seed, 0.5).unwrap();
            for i in 0..2 {
                assert!(check_encourages_higher_bids(&rule, i, &params).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn threshold_breakpoints_and_payment() {
        let params = scalar(1, SetFunction::Constant { value: 1.0 });
        let rule = SingleParamRule::fixed_price(&params, unit_grid(), 4.0);
        let part = discover_breakpoints(&rule, 0, &[0], &params).unwrap();
        assert_eq!(part.intervals.len(), 2);
        assert_eq!((part.intervals[0].lo, part.intervals[0].hi), (0, 3));
        assert_eq!((part.intervals[1].lo, part.intervals[1].hi), (4, 10));
        // the losing class has value 0 everywhere
        assert_eq!(part.d, vec![0.0]);
        assert_eq!(payment_from_characterization(&part, 7, &params), 4.0);
        assert_eq!(payment_from_characterization(&part, 2, &params), 0.0);
    }

    #[test]
    fn two_step_linear_rule() {
        // v_0(x, S) = x·w(S) + w'(S); {0} has w=1, w'=1; {0,1} has w=2, w'=0.5
        let mut w = vec![0.0; 4];
        let mut wp = vec![0.0; 4];
        w[0b01] = 1.0;
        w[0b11] = 2.0;
        wp[0b01] = 1.0;
        wp[0b11] = 0.5;
        let params = ValuationProfile::new(
            vec![
                AgentValuation::Linear { t: 0.0, w: SetFunction::Table { values: w }, w_prime: SetFunction::Table { values: wp } },
                AgentValuation::Scalar { t: 0.0, w: SetFunction::Constant { value: 1.0 } },
            ],
            None,
            None,
        )
        .unwrap();
        let rule = SingleParamRule::from_fn(2, unit_grid(), |b| match b[0] {
            0..=1 => WinnerSet::EMPTY,
            2..=4 => WinnerSet::singleton(0),
            _ => WinnerSet::full(2),
        });
        let part = discover_breakpoints(&rule, 0, &[0, 0], &params).unwrap();
        assert_eq!(part.intervals.len(), 3);
        // d_0: losing class is identically 0
        // d_1: v(5, {0}) - v(2, {0}) = 6 - 3
        assert_eq!(part.d, vec![0.0, 3.0]);
        assert_eq!(payment_from_characterization(&part, 3, &params), 3.0);
        // inf over [5,10] of 2x + 0.5 is 10.5, minus 3
        assert_eq!(payment_from_characterization(&part, 8, &params), 7.5);
        assert!(grid_deviation_test(&rule, &params).unwrap().is_empty());
    }

    #[test]
    fn additive_payment_is_threshold_plus_weight() {
        let params = ValuationProfile::new(
            vec![AgentValuation::Additive { t: 0.0, w: SetFunction::Constant { value: 2.5 } }],
            None,
            None,
        )
        .unwrap();
        let rule = SingleParamRule::from_fn(1, unit_grid(), |b| if b[0] >= 6 { WinnerSet::full(1) } else { WinnerSet::EMPTY });
        let part = discover_breakpoints(&rule, 0, &[0], &params).unwrap();
        assert_eq!(payment_from_characterization(&part, 9, &params), 6.0 + 2.5);
    }

    #[test]
    fn truthful_report_has_no_gain() {
        let p = scalar(3, SetFunction::Count { coeff: 1.0, power: 1.0 });
        let plan = DeviationPlan { entries: (0..3).map(|i| (i, Misreport::Truthful)).collect() };
        let mech = MainRealization { partition: Partition3::from_index(3, 5) };
        assert!(deviation_test(&mech, &p, &plan).is_empty());
    }

    #[test]
    fn first_price_is_caught() {
        let p = scalar(3, SetFunction::Count { coeff: 1.0, power: 1.0 });
        let plan = DeviationPlan::structured(&p, 20, 1);
        assert!(!deviation_test(&FirstPrice, &p, &plan).is_empty());
        assert!(deviation_test(&FixedPrice { price: 2.0 }, &p, &plan).is_empty());
    }

    #[test]
    fn plans_have_requested_size() {
        let p = scalar(4, SetFunction::Count { coeff: 1.0, power: 0.5 });
        assert_eq!(DeviationPlan::structured(&p, 50, 0).len(), 200);
        assert_eq!(DeviationPlan::param_grid(&p, 10).len(), 4 * 12);
    }
}
