//! Instance generation and the exact and Monte-Carlo verification drivers.
//!
//! The generated families are choices of this crate, not canonical benchmarks: t-values come
//! from a configurable distribution, public parts are concave functions of the winner count or
//! modular weights, and `table` instances are XOS functions plus a concave size bonus.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmark::{benchmark_bruteforce, benchmark_sweep, revenue_given_free, BenchmarkResult};
use crate::error::{Error, Result};
use crate::instance::{SCHEMA_VERSION, MAX_DOCUMENT_BYTES};
use crate::mechanisms::{
    derive_seed, fixed_price_mechanism, main_mechanism, main_mechanism_exact, mechanism2_exact_expectation,
    Partition3, RandomSource, Rsop, DEFAULT_ALPHA, MAX_EXACT_AGENTS,
};
use crate::report::{Cell, ExperimentReport};
use crate::set::WinnerSet;
use crate::valuations::{
    check_conditions, AgentValuation, CheckMode, Curve, SetFunction, ValuationProfile, Violation, MAX_TABLE_AGENTS,
    TOLERANCE,
};

/// Attempts before [`gen_instance`] gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Guaranteed fraction of `F^(3)` for the main mechanism.
pub const THEOREM2_FRACTION: f64 = 1.0 / 324.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Table,
    Additive,
    Scalar,
    Linear,
    GraphConcave,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Table, ModelKind::Additive, ModelKind::Scalar, ModelKind::Linear, ModelKind::GraphConcave];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Table => "table",
            ModelKind::Additive => "additive",
            ModelKind::Scalar => "scalar",
            ModelKind::Linear => "linear",
            ModelKind::GraphConcave => "graph_concave",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphKind {
    ErdosRenyi { p: f64 },
    /// Each arriving node links to `m` existing nodes chosen proportionally to degree.
    PreferentialAttachment { m: usize },
}

impl Default for GraphKind {
    fn default() -> Self {
        GraphKind::ErdosRenyi { p: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueDist {
    Uniform { lo: f64, hi: f64 },
    UniformInt { lo: u32, hi: u32 },
    Constant { value: f64 },
}

impl Default for ValueDist {
    fn default() -> Self {
        ValueDist::Uniform { lo: 1.0, hi: 10.0 }
    }
}

impl ValueDist {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ValueDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi,
            ValueDist::UniformInt { lo, hi } => lo <= hi,
            ValueDist::Constant { value } => value.is_finite() && value >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad value distribution {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ValueDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ValueDist::UniformInt { lo, hi } => rng.random_range(lo..=hi) as f64,
            ValueDist::Constant { value } => value,
        }
    }
}

/// Parameters of one generated instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub model: ModelKind,
    pub n: usize,
    #[serde(default)]
    pub graph: GraphKind,
    #[serde(default)]
    pub values: ValueDist,
    pub seed: u64,
}

fn concave_count(rng: &mut ChaCha8Rng, coeff: f64) -> SetFunction {
    SetFunction::Count { coeff, power: rng.random_range(0.3..=1.0) }
}

/// A public part for `i`: a concave function of `|S|` or nonnegative modular weights.
fn public_part(rng: &mut ChaCha8Rng, n: usize, i: usize, unit_self: bool) -> SetFunction {
    if rng.random_bool(0.5) {
        let coeff = if unit_self { 1.0 } else { rng.random_range(0.5..=3.0) };
        concave_count(rng, coeff)
    } else {
        let weights = (0..n)
            .map(|j| if unit_self && j == i { 1.0 } else { rng.random_range(0.0..=1.0) })
            .collect();
        SetFunction::Modular { weights }
    }
}

fn xos_table(rng: &mut ChaCha8Rng, n: usize, i: usize, t: f64) -> Vec<f64> {
    let clauses = rng.random_range(1..=3);
    let weights: Vec<Vec<f64>> = (0..clauses)
        .map(|_| (0..n).map(|j| if j == i { t } else { rng.random_range(0.0..=2.0) }).collect())
        .collect();
    let bonus = rng.random_range(0.0..=2.0);
    (0..1u64 << n)
        .map(|mask| {
            let set = WinnerSet::from_bits(mask);
            if !set.contains(i) {
                return 0.0;
            }
            let best = weights.iter().map(|w| set.iter().map(|j| w[j]).sum::<f64>()).fold(0.0, f64::max);
            best + bonus * ((set.len() - 1) as f64).sqrt()
        })
        .collect()
}

fn gen_graph(rng: &mut ChaCha8Rng, n: usize, kind: GraphKind) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    let link = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        adj[a].push(b);
        adj[b].push(a);
    };
    match kind {
        GraphKind::ErdosRenyi { p } => {
            for a in 0..n {
                for b in a + 1..n {
                    if rng.random_bool(p) {
                        link(&mut adj, a, b);
                    }
                }
            }
        }
        GraphKind::PreferentialAttachment { m } => {
            let seed_nodes = (m + 1).min(n);
            let mut ends = Vec::new();
            for a in 0..seed_nodes {
                for b in a + 1..seed_nodes {
                    link(&mut adj, a, b);
                    ends.extend([a, b]);
                }
            }
            for v in seed_nodes..n {
                let mut targets = Vec::new();
                while targets.len() < m.min(v) {
                    let u = if ends.is_empty() { rng.random_range(0..v) } else { ends[rng.random_range(0..ends.len())] };
                    if !targets.contains(&u) {
                        targets.push(u);
                    }
                }
                for u in targets {
                    link(&mut adj, v, u);
                    ends.extend([v, u]);
                }
            }
        }
    }
    for row in &mut adj {
        row.sort_unstable();
    }
    adj
}

fn draw_profile(spec: &InstanceSpec, rng: &mut ChaCha8Rng) -> Result<ValuationProfile> {
    let n = spec.n;
    let mut agents = Vec::with_capacity(n);
    let adjacency = match spec.model {
        ModelKind::GraphConcave => Some(gen_graph(rng, n, spec.graph)),
        _ => None,
    };
    for i in 0..n {
        let t = spec.values.sample(rng);
        let agent = match spec.model {
            ModelKind::Table => AgentValuation::Table { values: xos_table(rng, n, i, t) },
            ModelKind::Additive => AgentValuation::Additive { t, w: public_part(rng, n, i, false) },
            ModelKind::Scalar => AgentValuation::Scalar { t, w: public_part(rng, n, i, true) },
            ModelKind::Linear => {
                AgentValuation::Linear { t, w: public_part(rng, n, i, true), w_prime: public_part(rng, n, i, false) }
            }
            ModelKind::GraphConcave => AgentValuation::GraphConcave {
                t,
                beta: rng.random_range(0.2..=2.0),
                curve: if rng.random_bool(0.5) { Curve::Sqrt } else { Curve::Log1p },
            },
        };
        agents.push(agent);
    }
    ValuationProfile::new(agents, adjacency, None)
}

/// Draws a profile that passes the condition check, retrying up to
/// [`MAX_GENERATION_ATTEMPTS`] times from the same seeded stream.
pub fn gen_instance(spec: &InstanceSpec) -> Result<ValuationProfile> {
    if spec.n == 0 {
        return Err(Error::EmptyMarket);
    }
    if spec.model == ModelKind::Table && spec.n > MAX_TABLE_AGENTS {
        return Err(Error::TooManyAgents { what: "table instance generation", n: spec.n, max: MAX_TABLE_AGENTS });
    }
    match spec.graph {
        GraphKind::ErdosRenyi { p } if !(0.0..=1.0).contains(&p) => {
            return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
        }
        _ => {}
    }
    spec.values.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut last = String::new();
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let profile = draw_profile(spec, &mut rng)?;
        let violations = check_conditions(&profile, CheckMode::auto(spec.n), 1.0)?;
        match violations.first() {
            None => return Ok(profile),
            Some(v) => last = v.to_string(),
        }
    }
    Err(Error::Generation { attempts: MAX_GENERATION_ATTEMPTS, reason: last })
}

#[derive(Clone, Debug)]
pub struct SuiteInstance {
    pub id: usize,
    pub spec: InstanceSpec,
    pub profile: ValuationProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Models cycled in order; all five by default.
    #[serde(default = "all_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub values: ValueDist,
}

fn all_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { count: 200, n_min: 3, n_max: 9, models: all_models(), values: ValueDist::default() }
    }
}

/// Instance `id` cycles through `models`, draws `n` uniformly from `[n_min, n_max]` and is
/// seeded with `derive_seed(seed, [id])`. Graph instances alternate between Erdős–Rényi and
/// preferential-attachment graphs.
pub fn standard_suite(seed: u64, config: &SuiteConfig) -> Result<Vec<SuiteInstance>> {
    if config.n_min == 0 || config.n_min > config.n_max {
        return Err(Error::InvalidArgument(format!("bad size range [{}, {}]", config.n_min, config.n_max)));
    }
    if config.models.is_empty() {
        return Err(Error::InvalidArgument("suite needs at least one model".into()));
    }
    (0..config.count)
        .map(|id| {
            let inst_seed = derive_seed(seed, &[id as u64]);
            let mut rng = ChaCha8Rng::seed_from_u64(inst_seed);
            let model = config.models[id % config.models.len()];
            let n = rng.random_range(config.n_min..=config.n_max);
            let graph = if id % 2 == 0 {
                GraphKind::ErdosRenyi { p: rng.random_range(0.2..=0.8) }
            } else {
                GraphKind::PreferentialAttachment { m: rng.random_range(1..=2) }
            };
            let spec = InstanceSpec { model, n, graph, values: config.values, seed: rng.random() };
            Ok(SuiteInstance { id, spec, profile: gen_instance(&spec)? })
        })
        .collect()
}

/// Winners of the `F^(3)` optimum in each group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PartitionStats {
    pub m: usize,
    pub k_1: usize,
    pub k_2: usize,
    pub k_3: usize,
}

impl PartitionStats {
    pub fn new(optimum: WinnerSet, partition: &Partition3) -> Self {
        let (a, b, c) = partition.groups();
        PartitionStats {
            m: optimum.len(),
            k_1: optimum.intersection(a).len(),
            k_2: optimum.intersection(b).len(),
            k_3: optimum.intersection(c).len(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma2Check {
    pub r_c: f64,
    pub r_f: f64,
    pub stats: PartitionStats,
    pub pass: bool,
}

/// Compares `r(C)` with `r_F(C) = |S* ∩ C| · p*` for the given optimum `(p*, S*)`.
pub fn lemma2_check(profile: &ValuationProfile, partition: &Partition3, optimum: &BenchmarkResult) -> Lemma2Check {
    let (a, b, c) = partition.groups();
    let r_c = revenue_given_free(profile, c, a).value.max(revenue_given_free(profile, c, b).value);
    let stats = PartitionStats::new(optimum.set, partition);
    let r_f = stats.k_3 as f64 * optimum.price;
    Lemma2Check { r_c, r_f, stats, pass: r_c >= r_f / 4.0 - TOLERANCE }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma2Summary {
    pub partitions: u64,
    pub failures: u64,
    pub first_failure: Option<u64>,
    /// Smallest `r(C) − r_F(C)/4` seen.
    pub min_slack: f64,
}

/// Runs [`lemma2_check`] on all `3^n` partitions against the canonical brute-force `F^(3)`
/// optimum. `None` when `F^(3) = 0`.
pub fn lemma2_exhaustive(profile: &ValuationProfile) -> Result<Option<Lemma2Summary>> {
    let n = profile.n();
    if n > MAX_EXACT_AGENTS {
        return Err(Error::TooManyAgents { what: "exhaustive partition check", n, max: MAX_EXACT_AGENTS });
    }
    let optimum = benchmark_bruteforce(profile, 3)?;
    if optimum.value <= TOLERANCE {
        return Ok(None);
    }
    let partitions = 3u64.pow(n as u32);
    let mut summary = Lemma2Summary { partitions, failures: 0, first_failure: None, min_slack: f64::INFINITY };
    for idx in 0..partitions {
        let check = lemma2_check(profile, &Partition3::from_index(n, idx), &optimum);
        summary.min_slack = summary.min_slack.min(check.r_c - check.r_f / 4.0);
        if !check.pass {
            summary.failures += 1;
            summary.first_failure.get_or_insert(idx);
        }
    }
    Ok(Some(summary))
}

pub fn lemma2_suite(instances: &[SuiteInstance], seed: u64) -> Result<ExperimentReport> {
    let results: Vec<Option<Lemma2Summary>> =
        instances.par_iter().map(|inst| lemma2_exhaustive(&inst.profile)).collect::<Result<_>>()?;
    let mut report =
        ExperimentReport::new("lemma2", seed, &["instance", "model", "n", "partitions", "failures", "min_slack"]);
    let (mut skipped, mut failures) = (0usize, 0u64);
    for (inst, res) in instances.iter().zip(results) {
        let Some(s) = res else {
            skipped += 1;
            continue;
        };
        failures += s.failures;
        report.push_row(vec![
            inst.id.into(),
            inst.spec.model.name().into(),
            inst.spec.n.into(),
            Cell::Int(s.partitions as i64),
            Cell::Int(s.failures as i64),
            s.min_slack.into(),
        ]);
    }
    report.set_summary("instances", instances.len());
    report.set_summary("skipped", skipped);
    report.set_summary("violations", Cell::Int(failures as i64));
    Ok(report)
}

fn binomial_rows(m: usize) -> Vec<Vec<BigInt>> {
    let mut rows: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
    for r in 1..=m {
        let prev = &rows[r - 1];
        let mut row = Vec::with_capacity(r + 1);
        row.push(BigInt::one());
        for k in 1..r {
            row.push(&prev[k - 1] + &prev[k]);
        }
        row.push(BigInt::one());
        rows.push(row);
    }
    rows
}

/// `E[min{a, b, c}]` when `m` items are labeled uniformly and independently with one of three
/// labels and `a, b, c` count the labels.
pub fn partition_min_expectation(m: usize) -> BigRational {
    let rows = binomial_rows(m);
    let mut total = BigInt::zero();
    for a in 0..=m {
        for b in 0..=m - a {
            let c = m - a - b;
            let lo = a.min(b).min(c);
            if lo > 0 {
                total += &rows[m][a] * &rows[m - a][b] * BigInt::from(lo);
            }
        }
    }
    BigRational::new(total, BigInt::from(3).pow(m as u32))
}

/// `Pr(a ≤ ⌊m/9⌋)` for `a ~ Binomial(m, 1/3)`.
pub fn chernoff_tail(m: usize) -> BigRational {
    let rows = binomial_rows(m);
    let two = BigInt::from(2);
    let total: BigInt = (0..=m / 9).map(|a| &rows[m][a] * two.pow((m - a) as u32)).sum();
    BigRational::new(total, BigInt::from(3).pow(m as u32))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lemma3Row {
    pub m: usize,
    pub expectation: BigRational,
    /// `expectation ≥ 2m/27`.
    pub expectation_holds: bool,
    pub tail: BigRational,
    /// `tail < 1/9`; only asserted for `m ≥ 17`.
    pub tail_holds: bool,
}

pub fn lemma3_rows(m_max: usize) -> Vec<Lemma3Row> {
    let ninth = BigRational::new(BigInt::one(), BigInt::from(9));
    (1..=m_max)
        .map(|m| {
            let expectation = partition_min_expectation(m);
            let floor = BigRational::new(BigInt::from(2 * m), BigInt::from(27));
            let tail = chernoff_tail(m);
            Lemma3Row { m, expectation_holds: m < 3 || expectation >= floor, tail_holds: m < 17 || tail < ninth, expectation, tail }
        })
        .collect()
}

pub fn lemma3_report(m_max: usize, seed: u64) -> ExperimentReport {
    let mut report = ExperimentReport::new(
        "lemma3",
        seed,
        &["m", "expectation", "expectation_per_m", "floor_2m_27", "expectation_holds", "tail", "tail_holds"],
    );
    let mut violations = 0;
    let mut argmin = (f64::INFINITY, 0usize);
    for row in lemma3_rows(m_max) {
        let e = row.expectation.to_f64().unwrap_or(f64::NAN);
        if row.m >= 3 && e / (row.m as f64) < argmin.0 {
            argmin = (e / row.m as f64, row.m);
        }
        violations += usize::from(!row.expectation_holds) + usize::from(!row.tail_holds);
        report.push_row(vec![
            row.m.into(),
            e.into(),
            (e / row.m as f64).into(),
            (2.0 * row.m as f64 / 27.0).into(),
            row.expectation_holds.into(),
            row.tail.to_f64().unwrap_or(f64::NAN).into(),
            row.tail_holds.into(),
        ]);
    }
    report.set_summary("violations", violations);
    report.set_summary("min_expectation_per_m", argmin.0);
    report.set_summary("argmin_m", argmin.1);
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem2Row {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub expected_revenue: f64,
    pub max_queries: u64,
    /// `F^(3) / revenue`, infinite when revenue is zero.
    pub ratio: f64,
    pub pass: bool,
}

/// Exact expected revenue against `F^(3)/324`; `None` when `F^(3) = 0`.
pub fn theorem2_row(profile: &ValuationProfile) -> Result<Option<Theorem2Row>> {
    let f3 = benchmark_bruteforce(profile, 3)?.value;
    if f3 <= TOLERANCE {
        return Ok(None);
    }
    let f1 = benchmark_bruteforce(profile, 1)?.value;
    let f2 = benchmark_bruteforce(profile, 2)?.value;
    let exact = main_mechanism_exact(profile)?;
    Ok(Some(Theorem2Row {
        f1,
        f2,
        f3,
        expected_revenue: exact.revenue,
        max_queries: exact.max_queries,
        ratio: ratio(f3, exact.revenue),
        pass: exact.revenue >= f3 * THEOREM2_FRACTION - TOLERANCE,
    }))
}

fn ratio(benchmark: f64, revenue: f64) -> f64 {
    if revenue > 0.0 {
        benchmark / revenue
    } else {
        f64::INFINITY
    }
}

/// Sequential so that its running time is a single-thread figure.
pub fn theorem2_suite(instances: &[SuiteInstance], seed: u64) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "theorem2",
        seed,
        &["instance", "seed", "model", "n", "f1", "f2", "f3", "expected_revenue", "ratio", "max_queries", "pass"],
    );
    let (mut skipped, mut violations) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    for inst in instances {
        let Some(row) = theorem2_row(&inst.profile)? else {
            skipped += 1;
            continue;
        };
        violations += usize::from(!row.pass);
        worst = worst.max(row.ratio);
        report.push_row(vec![
            inst.id.into(),
            inst.spec.seed.into(),
            inst.spec.model.name().into(),
            inst.spec.n.into(),
            row.f1.into(),
            row.f2.into(),
            row.f3.into(),
            row.expected_revenue.into(),
            row.ratio.into(),
            Cell::Int(row.max_queries as i64),
            row.pass.into(),
        ]);
    }
    report.set_summary("instances", instances.len());
    report.set_summary("skipped", skipped);
    report.set_summary("violations", violations);
    report.set_summary("worst_ratio", worst);
    report.set_summary("guaranteed_ratio", 324.0);
    Ok(report)
}

/// `F^(k)` of classical bids: the best `j · b_(j)` over `j ≥ k` with bids sorted descending.
pub fn classical_benchmark(bids: &[f64], k: usize) -> f64 {
    let mut sorted = bids.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.iter().enumerate().skip(k.saturating_sub(1)).map(|(j, &b)| (j + 1) as f64 * b).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mechanism2Bound {
    pub f2: f64,
    /// `F^(2)` of the private parameters alone.
    pub f2_classical: f64,
    pub sum_v: f64,
    pub sum_w: f64,
    /// `F^(2) ≤ 2·F̃^(2) + 2·Σ v_i([n])`.
    pub pass: bool,
    /// The same inequality with `Σ w_i([n])`, which matches what the mechanism charges.
    pub pass_with_w: bool,
}

pub fn mechanism2_bound_check(profile: &ValuationProfile) -> Result<Mechanism2Bound> {
    let t = profile.private_params().filter(|_| profile.is_additive()).ok_or(Error::NotAdditive("mechanism2 bound"))?;
    let n = profile.n();
    let all = WinnerSet::full(n);
    let f2 = benchmark_sweep(profile, 2)?.value;
    let f2_classical = classical_benchmark(&t, 2);
    let sum_v: f64 = (0..n).map(|i| profile.value(i, all)).sum();
    let sum_w: f64 = (0..n).map(|i| profile.additive_weight(i, all).unwrap_or(0.0)).sum();
    Ok(Mechanism2Bound {
        f2,
        f2_classical,
        sum_v,
        sum_w,
        pass: f2 <= 2.0 * f2_classical + 2.0 * sum_v + TOLERANCE,
        pass_with_w: f2 <= 2.0 * f2_classical + 2.0 * sum_w + TOLERANCE,
    })
}

/// Bound check and exact expected revenue (RSOP plug-in) on every additive suite instance.
pub fn mechanism2_suite(instances: &[SuiteInstance], alpha: f64, seed: u64) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "mechanism2",
        seed,
        &["instance", "n", "f2", "f2_classical", "sum_v", "sum_w", "pass", "pass_with_w", "expected_revenue", "ratio"],
    );
    let (mut checked, mut violations) = (0usize, 0usize);
    for inst in instances.iter().filter(|i| i.profile.is_additive()) {
        let b = mechanism2_bound_check(&inst.profile)?;
        let revenue = mechanism2_exact_expectation(&inst.profile, alpha, &Rsop)?;
        checked += 1;
        violations += usize::from(!b.pass);
        report.push_row(vec![
            inst.id.into(),
            inst.spec.n.into(),
            b.f2.into(),
            b.f2_classical.into(),
            b.sum_v.into(),
            b.sum_w.into(),
            b.pass.into(),
            b.pass_with_w.into(),
            revenue.into(),
            ratio(b.f2, revenue).into(),
        ]);
    }
    report.set_summary("alpha", alpha);
    report.set_summary("instances", checked);
    report.set_summary("violations", violations);
    Ok(report)
}

/// Two agents with `v_i({i}) = x` and `v_i({0, 1}) = M·x`, as scalar valuations with `x = 1`.
pub fn theorem3_instance(m: f64) -> Result<ValuationProfile> {
    if !(m.is_finite() && m >= 1.0) {
        return Err(Error::InvalidArgument(format!("M must be a finite value ≥ 1, got {m}")));
    }
    let agent = |i: usize| {
        let mut values = vec![0.0; 4];
        values[1 << i] = 1.0;
        values[3] = m;
        AgentValuation::Scalar { t: 1.0, w: SetFunction::Table { values } }
    };
    ValuationProfile::new(vec![agent(0), agent(1)], None, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct F2DemoRow {
    pub m: f64,
    pub f2: f64,
    pub f3: f64,
    pub main_expected_revenue: f64,
    /// `F^(2) / revenue`; infinite when the main mechanism earns nothing.
    pub ratio: f64,
    pub fixed_price_at_x: f64,
    /// Reference row: selling at `M·x` needs the price in advance.
    pub fixed_price_at_mx: f64,
}

pub fn f2_impossibility_demo(ms: &[f64]) -> Result<Vec<F2DemoRow>> {
    ms.iter()
        .map(|&m| {
            let profile = theorem3_instance(m)?;
            let f2 = benchmark_bruteforce(&profile, 2)?.value;
            let f3 = benchmark_bruteforce(&profile, 3)?.value;
            let revenue = main_mechanism_exact(&profile)?.revenue;
            Ok(F2DemoRow {
                m,
                f2,
                f3,
                main_expected_revenue: revenue,
                ratio: ratio(f2, revenue),
                fixed_price_at_x: fixed_price_mechanism(&profile, 1.0).revenue,
                fixed_price_at_mx: fixed_price_mechanism(&profile, m).revenue,
            })
        })
        .collect()
}

pub fn f2_demo_report(ms: &[f64], seed: u64) -> Result<ExperimentReport> {
    let rows = f2_impossibility_demo(ms)?;
    let mut report = ExperimentReport::new(
        "f2_demo",
        seed,
        &["m", "f2", "f3", "main_expected_revenue", "ratio", "fixed_price_at_x", "fixed_price_at_mx"],
    );
    for r in &rows {
        report.push_row(vec![
            r.m.into(),
            r.f2.into(),
            r.f3.into(),
            r.main_expected_revenue.into(),
            r.ratio.into(),
            r.fixed_price_at_x.into(),
            r.fixed_price_at_mx.into(),
        ]);
    }
    let nondecreasing = rows.windows(2).all(|w| w[1].ratio >= w[0].ratio);
    report.set_summary("ratio_nondecreasing", nondecreasing);
    report.set_summary("exceeds_m_over_10", rows.iter().all(|r| r.ratio > r.m / 10.0));
    Ok(report)
}

pub const LOSING_VALUE_NOTE: &str = "valuations that stay positive for losing agents fall outside the model: \
there is no universally truthful competitive mechanism for them, so the validator rejects such instances";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LosingValueDemo {
    /// Violations of `v_i(t, S) = t_i · |S|` on every set.
    pub positive_when_losing: Vec<Violation>,
    /// Violations of the truncation that is zero when `i ∉ S`.
    pub truncated: Vec<Violation>,
    pub note: &'static str,
}

pub fn losing_value_demo() -> Result<LosingValueDemo> {
    let n = 3;
    let build = |truncate: bool| {
        let agents = (0..n)
            .map(|i| {
                let t = (i + 1) as f64;
                let values = (0..1u64 << n)
                    .map(|mask| {
                        let s = WinnerSet::from_bits(mask);
                        if truncate && !s.contains(i) {
                            0.0
                        } else {
                            t * s.len() as f64
                        }
                    })
                    .collect();
                AgentValuation::Table { values }
            })
            .collect();
        ValuationProfile::new(agents, None, None)
    };
    Ok(LosingValueDemo {
        positive_when_losing: check_conditions(&build(false)?, CheckMode::Exhaustive, 1.0)?,
        truncated: check_conditions(&build(true)?, CheckMode::Exhaustive, 1.0)?,
        note: LOSING_VALUE_NOTE,
    })
}

pub fn losing_value_report(seed: u64) -> Result<ExperimentReport> {
    let demo = losing_value_demo()?;
    let mut report = ExperimentReport::new("losing_value", seed, &["case", "violations", "nonzero_outside", "accepted"]);
    for (case, v) in [("positive_when_losing", &demo.positive_when_losing), ("truncated", &demo.truncated)] {
        let outside = v.iter().filter(|x| matches!(x, Violation::NonzeroOutside { .. })).count();
        report.push_row(vec![case.into(), v.len().into(), outside.into(), v.is_empty().into()]);
    }
    report.set_summary("note", demo.note);
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    pub mean: f64,
    pub stderr: f64,
    pub max_queries: u64,
}

impl MonteCarloEstimate {
    /// Normal-approximation 95% confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr)
    }
}

/// Mean revenue of independent main-mechanism draws; trial `j` uses
/// `derive_seed(seed, [j])`. `None` for zero trials.
pub fn monte_carlo_main(profile: &ValuationProfile, trials: usize, seed: u64) -> Option<MonteCarloEstimate> {
    if trials == 0 {
        return None;
    }
    let draws: Vec<(f64, u64)> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let out = main_mechanism(profile, &mut RandomSource::new(derive_seed(seed, &[j as u64])));
            (out.revenue, out.queries_used)
        })
        .collect();
    let mean = draws.iter().map(|d| d.0).sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        draws.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    Some(MonteCarloEstimate {
        trials,
        mean,
        stderr: (var / trials as f64).sqrt(),
        max_queries: draws.iter().map(|d| d.1).max().unwrap_or(0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub n: usize,
    pub instances: usize,
    pub trials: usize,
    #[serde(default = "graph_concave")]
    pub model: ModelKind,
    #[serde(default)]
    pub graph: GraphKind,
    #[serde(default)]
    pub values: ValueDist,
}

fn graph_concave() -> ModelKind {
    ModelKind::GraphConcave
}

/// Monte-Carlo revenue of the main mechanism against the sweep `F^(3)` on larger markets.
pub fn ratio_campaign(config: &CampaignConfig, seed: u64) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(
        "campaign",
        seed,
        &[
            "instance", "seed", "n", "f3", "mean_revenue", "stderr", "ci_low", "ci_high", "ratio", "max_queries",
            "query_budget",
        ],
    );
    let budget = 10 * (config.n as u64).pow(2);
    let mut over_budget = 0usize;
    let mut worst: f64 = 0.0;
    if config.trials > 0 {
        for id in 0..config.instances {
            let inst_seed = derive_seed(seed, &[id as u64]);
            let spec = InstanceSpec { model: config.model, n: config.n, graph: config.graph, values: config.values, seed: inst_seed };
            let profile = gen_instance(&spec)?;
            let f3 = benchmark_sweep(&profile, 3)?.value;
            let est = monte_carlo_main(&profile, config.trials, derive_seed(inst_seed, &[1])).expect("trials > 0");
            let (lo, hi) = est.ci95();
            let r = if f3 > TOLERANCE { ratio(f3, est.mean) } else { f64::NAN };
            if f3 > TOLERANCE {
                worst = worst.max(r);
            }
            over_budget += usize::from(est.max_queries > budget);
            report.push_row(vec![
                id.into(),
                inst_seed.into(),
                config.n.into(),
                f3.into(),
                est.mean.into(),
                est.stderr.into(),
                lo.into(),
                hi.into(),
                r.into(),
                Cell::Int(est.max_queries as i64),
                Cell::Int(budget as i64),
            ]);
        }
    }
    report.set_summary("trials", config.trials);
    report.set_summary("over_budget", over_budget);
    report.set_summary("worst_ratio", worst);
    Ok(report)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Section {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma3Section {
    #[serde(default = "default_m_max")]
    pub m_max: usize,
}

fn default_m_max() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mechanism2Section {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct F2DemoSection {
    #[serde(default = "default_ms")]
    pub m_values: Vec<f64>,
}

fn default_ms() -> Vec<f64> {
    vec![1.0, 10.0, 100.0, 1000.0, 10000.0]
}

/// An experiment configuration file. Every section is optional and runs only when present.
///
/// ```json
/// {
///   "schema": 1,
///   "seed": 42,
///   "suite": { "count": 200, "n_min": 3, "n_max": 9 },
///   "theorem2": {},
///   "lemma2": {},
///   "lemma3": { "m_max": 200 },
///   "mechanism2": { "alpha": 4.68 },
///   "f2_demo": { "m_values": [1, 10, 100] },
///   "losing_value": {},
///   "campaign": { "n": 30, "instances": 3, "trials": 10000 }
/// }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub seed: u64,
    #[serde(default)]
    pub suite: SuiteConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma2: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma3: Option<Lemma3Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mechanism2: Option<Mechanism2Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2_demo: Option<F2DemoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losing_value: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub campaign: Option<CampaignConfig>,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: self.schema, expected: SCHEMA_VERSION });
        }
        if self.uses_suite() && self.suite.n_max > MAX_EXACT_AGENTS {
            return Err(Error::TooManyAgents { what: "exact suite", n: self.suite.n_max, max: MAX_EXACT_AGENTS });
        }
        if let Some(l3) = &self.lemma3 {
            if l3.m_max > 400 {
                return Err(Error::InvalidArgument(format!("lemma3 m_max {} above 400", l3.m_max)));
            }
        }
        if let Some(d) = &self.f2_demo {
            if let Some(m) = d.m_values.iter().find(|m| !(m.is_finite() && **m >= 1.0)) {
                return Err(Error::InvalidArgument(format!("M value {m} must be finite and ≥ 1")));
            }
        }
        if let Some(m2) = &self.mechanism2 {
            if !(m2.alpha.is_finite() && m2.alpha > 0.0) {
                return Err(Error::InvalidArgument(format!("alpha must be finite and > 0, got {}", m2.alpha)));
            }
        }
        Ok(())
    }

    fn uses_suite(&self) -> bool {
        self.theorem2.is_some() || self.lemma2.is_some() || self.mechanism2.is_some()
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    if text.len() > MAX_DOCUMENT_BYTES {
        return Err(Error::InvalidArgument(format!("config exceeds {MAX_DOCUMENT_BYTES} bytes")));
    }
    let config: ExperimentConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

/// Canonical pretty JSON text of a config.
pub fn config_to_string(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

/// SHA-256 of the compact canonical JSON, hex encoded.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let compact = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(compact.as_bytes()))
}

/// Runs every configured section in a fixed order. Each report's summary carries the config
/// hash.
pub fn run_experiments(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    let seed = config.seed;
    let suite = if config.uses_suite() { standard_suite(seed, &config.suite)? } else { Vec::new() };
    let mut reports = Vec::new();
    if config.theorem2.is_some() {
        reports.push(theorem2_suite(&suite, seed)?);
    }
    if config.lemma2.is_some() {
        reports.push(lemma2_suite(&suite, seed)?);
    }
    if let Some(l3) = &config.lemma3 {
        reports.push(lemma3_report(l3.m_max, seed));
    }
    if let Some(m2) = &config.mechanism2 {
        reports.push(mechanism2_suite(&suite, m2.alpha, seed)?);
    }
    if let Some(d) = &config.f2_demo {
        reports.push(f2_demo_report(&d.m_values, seed)?);
    }
    if config.losing_value.is_some() {
        reports.push(losing_value_report(seed)?);
    }
    if let Some(c) = &config.campaign {
        reports.push(ratio_campaign(c, seed)?);
    }
    let hash = config_hash(config);
    for r in &mut reports {
        r.set_summary("config_hash", hash.clone());
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::Label;
    use crate::valuations::estimate_l;

    fn spec(model: ModelKind, n: usize, seed: u64) -> InstanceSpec {
        InstanceSpec { model, n, graph: GraphKind::default(), values: ValueDist::default(), seed }
    }

    #[test]
    fn generated_instances_pass_the_checker() {
        let g = InstanceSpec { values: ValueDist::Uniform { lo: 1.0, hi: 10.0 }, ..spec(ModelKind::GraphConcave, 6, 7) };
        let p = gen_instance(&g).unwrap();
        assert!(check_conditions(&p, CheckMode::Exhaustive, 1.0).unwrap().is_empty());
        for model in ModelKind::ALL {
            for seed in 0..5 {
                let p = gen_instance(&spec(model, 4, seed)).unwrap();
                assert!(check_conditions(&p, CheckMode::Exhaustive, 1.0).unwrap().is_empty(), "{model:?} {seed}");
                assert_eq!(estimate_l(&p, CheckMode::Exhaustive).unwrap(), 1.0);
            }
        }
        let pa = InstanceSpec { graph: GraphKind::PreferentialAttachment { m: 2 }, ..spec(ModelKind::GraphConcave, 12, 3) };
        let p = gen_instance(&pa).unwrap();
        assert!(p.adjacency().unwrap().iter().all(|row| !row.is_empty()));
    }

    #[test]
    fn generation_rejects_bad_parameters() {
        assert!(matches!(gen_instance(&spec(ModelKind::Additive, 0, 1)), Err(Error::EmptyMarket)));
        assert!(gen_instance(&spec(ModelKind::Table, 11, 1)).is_err());
        let bad = InstanceSpec { values: ValueDist::Uniform { lo: 3.0, hi: 1.0 }, ..spec(ModelKind::Scalar, 3, 1) };
        assert!(gen_instance(&bad).is_err());
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let a = gen_instance(&spec(ModelKind::Table, 5, 11)).unwrap();
        let b = gen_instance(&spec(ModelKind::Table, 5, 11)).unwrap();
        let c = gen_instance(&spec(ModelKind::Table, 5, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn lemma2_on_symmetric_size_valuation() {
        let agents = (0..3).map(|_| AgentValuation::Scalar { t: 1.0, w: SetFunction::Count { coeff: 1.0, power: 1.0 } }).collect();
        let p = ValuationProfile::new(agents, None, None).unwrap();
        let opt = benchmark_bruteforce(&p, 3).unwrap();
        let all_c = Partition3::new(vec![Label::C; 3]);
        let check = lemma2_check(&p, &all_c, &opt);
        assert_eq!((check.r_f, check.r_c), (9.0, 9.0));
        assert!(check.pass);
        let no_c = Partition3::new(vec![Label::A, Label::B, Label::A]);
        assert_eq!(lemma2_check(&p, &no_c, &opt).r_f, 0.0);
        let s = lemma2_exhaustive(&p).unwrap().unwrap();
        assert_eq!((s.partitions, s.failures), (27, 0));
    }

    #[test]
    fn partition_min_expectation_small_cases() {
        // exhaustive enumeration of the 3^m labelings
        for m in 1..=7usize {
            let mut total = 0u64;
            for idx in 0..3u64.pow(m as u32) {
                let mut counts = [0u64; 3];
                let mut x = idx;
                for _ in 0..m {
                    counts[(x % 3) as usize] += 1;
                    x /= 3;
                }
                total += counts.iter().min().unwrap();
            }
            let expect = BigRational::new(BigInt::from(total), BigInt::from(3u64.pow(m as u32)));
            assert_eq!(partition_min_expectation(m), expect, "m = {m}");
        }
        assert_eq!(partition_min_expectation(3), BigRational::new(2.into(), 9.into()));
        assert!(partition_min_expectation(1).is_zero());
    }

    #[test]
    fn chernoff_tail_values() {
        assert_eq!(chernoff_tail(1), BigRational::new(2.into(), 3.into()));
        assert_eq!(chernoff_tail(17), BigRational::new(1245184.into(), 129140163.into()));
        let ninth = BigRational::new(1.into(), 9.into());
        assert!(chernoff_tail(100) < ninth);
    }

    #[test]
    fn classical_benchmark_examples() {
        assert_eq!(classical_benchmark(&[5.0, 1.0, 4.0], 1), 8.0);
        assert_eq!(classical_benchmark(&[5.0, 1.0], 2), 2.0);
        assert_eq!(classical_benchmark(&[5.0], 2), 0.0);
    }

    fn additive(t: &[f64], w: SetFunction) -> ValuationProfile {
        ValuationProfile::new(t.iter().map(|&t| AgentValuation::Additive { t, w: w.clone() }).collect(), None, None).unwrap()
    }

    #[test]
    fn mechanism2_bound_degenerate_cases() {
        let p = additive(&[3.0, 2.0, 1.0], SetFunction::Constant { value: 0.0 });
        let b = mechanism2_bound_check(&p).unwrap();
        assert_eq!((b.f2, b.f2_classical, b.sum_w), (4.0, 4.0, 0.0));
        assert!(b.pass && b.pass_with_w);
        let q = additive(&[0.0, 0.0, 0.0], SetFunction::Count { coeff: 1.0, power: 0.5 });
        let b = mechanism2_bound_check(&q).unwrap();
        assert_eq!(b.f2_classical, 0.0);
        assert!((b.f2 - 3.0 * 3f64.sqrt()).abs() < 1e-12);
        assert!(b.f2 <= 2.0 * b.sum_w && b.pass);
    }

    #[test]
    fn f2_demo_small_m() {
        let rows = f2_impossibility_demo(&[1.0, 10.0]).unwrap();
        assert_eq!(rows[0].f2, 2.0);
        assert!((rows[0].main_expected_revenue - 2.0 / 9.0).abs() < 1e-12);
        assert!((rows[0].ratio - 9.0).abs() < 1e-9);
        assert_eq!(rows[1].f2, 20.0);
        assert_eq!(rows[1].main_expected_revenue, 0.0);
        assert!(rows[1].ratio.is_infinite());
        assert_eq!((rows[1].fixed_price_at_x, rows[1].fixed_price_at_mx), (2.0, 20.0));
        assert_eq!(rows[1].f3, 0.0);
        assert!(theorem3_instance(0.5).is_err());
    }

    #[test]
    fn losing_value_demo_flags_condition_two() {
        let d = losing_value_demo().unwrap();
        assert!(d.positive_when_losing.iter().any(|v| matches!(v, Violation::NonzeroOutside { .. })));
        assert!(d.truncated.is_empty());
    }

    #[test]
    fn zero_trial_campaign_is_empty() {
        let c = CampaignConfig { n: 5, instances: 3, trials: 0, model: ModelKind::GraphConcave, graph: GraphKind::default(), values: ValueDist::default() };
        let r = ratio_campaign(&c, 1).unwrap();
        assert!(r.rows.is_empty());
        assert!(monte_carlo_main(&gen_instance(&spec(ModelKind::Scalar, 3, 0)).unwrap(), 0, 0).is_none());
    }

    #[test]
    fn config_parsing() {
        let c = parse_config(r#"{"schema":1,"seed":5,"lemma3":{}}"#).unwrap();
        assert_eq!(c.lemma3.as_ref().unwrap().m_max, 200);
        assert_eq!(c.suite, SuiteConfig::default());
        assert!(parse_config(r#"{"schema":2,"seed":5}"#).is_err());
        assert!(parse_config(r#"{"schema":1,"seed":5,"bogus":{}}"#).is_err());
        assert!(parse_config(r#"{"schema":1,"seed":5,"theorem2":{},"suite":{"count":1,"n_min":3,"n_max":12}}"#).is_err());
        assert_eq!(config_hash(&c), config_hash(&parse_config(r#"{ "seed": 5, "schema": 1, "lemma3": {"m_max": 200} }"#).unwrap()));
    }

    #[test]
    fn small_config_runs_every_section() {
        let c = parse_config(
            r#"{"schema":1,"seed":3,"suite":{"count":5,"n_min":3,"n_max":4},"theorem2":{},"lemma2":{},
                "lemma3":{"m_max":20},"mechanism2":{},"f2_demo":{"m_values":[1,10]},"losing_value":{},
                "campaign":{"n":6,"instances":1,"trials":50}}"#,
        )
        .unwrap();
        let reports = run_experiments(&c).unwrap();
        let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["theorem2", "lemma2", "lemma3", "mechanism2", "f2_demo", "losing_value", "campaign"]);
        for r in &reports {
            assert!(matches!(r.summary.get("config_hash"), Some(Cell::Text(h)) if h.len() == 64));
        }
        assert_eq!(reports[0].summary["violations"], Cell::Int(0));
    }
}
