//! Cross-checks of the library against independent brute-force oracles, plus property tests.

use proptest::prelude::*;

use extauction::benchmark::{benchmark_bruteforce, benchmark_sweep, maximal_feasible_set, revenue_given_free};
use extauction::experiments::{gen_instance, monte_carlo_main, GraphKind, InstanceSpec, ModelKind, ValueDist};
use extauction::mechanisms::{derive_seed, main_mechanism, main_mechanism_exact_expectation, RandomSource};
use extauction::valuations::{AgentValuation, BidOracle, QueryCounter, SetFunction, ValuationProfile};
use extauction::WinnerSet;

/// Best `|T| · min_{i∈T} b_i(T ∪ free)` over nonempty `T ⊆ pool`, by enumeration.
fn oracle_revenue(p: &ValuationProfile, pool: u64, free: u64) -> f64 {
    let mut best = 0.0f64;
    let mut t = pool;
    while t != 0 {
        let ctx = WinnerSet::from_bits(t | free);
        let members: Vec<usize> = (0..64).filter(|i| t >> i & 1 == 1).collect();
        let price = members.iter().map(|&i| p.value(i, ctx)).fold(f64::INFINITY, f64::min);
        best = best.max(price * members.len() as f64);
        t = (t - 1) & pool;
    }
    best
}

/// Main-mechanism expectation written directly from its definition.
fn oracle_expectation(p: &ValuationProfile) -> f64 {
    let n = p.n();
    let total_partitions = 3u64.pow(n as u32);
    let mut total = 0.0;
    for idx in 0..total_partitions {
        let (mut a, mut b, mut c) = (0u64, 0u64, 0u64);
        let mut x = idx;
        for i in 0..n {
            match x % 3 {
                0 => a |= 1 << i,
                1 => b |= 1 << i,
                _ => c |= 1 << i,
            }
            x /= 3;
        }
        let r = oracle_revenue(p, c, a).max(oracle_revenue(p, c, b));
        let mut s = b;
        loop {
            let k = s.count_ones();
            if k == 0 {
                break;
            }
            let share = r / k as f64;
            let keep: u64 = (0..n).filter(|&i| s >> i & 1 == 1 && p.value(i, WinnerSet::from_bits(s | a)) >= share - 1e-9).map(|i| 1 << i).sum();
            if keep == s {
                break;
            }
            s = keep;
        }
        if s != 0 {
            total += r;
        }
    }
    total / total_partitions as f64
}

fn spec(model: ModelKind, n: usize, seed: u64) -> InstanceSpec {
    InstanceSpec { model, n, graph: GraphKind::ErdosRenyi { p: 0.5 }, values: ValueDist::UniformInt { lo: 1, hi: 5 }, seed }
}

#[test]
fn exact_expectation_matches_definition() {
    for (k, model) in ModelKind::ALL.iter().enumerate() {
        for n in 2..=6 {
            let p = gen_instance(&spec(*model, n, (k * 10 + n) as u64)).unwrap();
            let lib = main_mechanism_exact_expectation(&p).unwrap();
            let oracle = oracle_expectation(&p);
            assert!((lib - oracle).abs() < 1e-9, "{model:?} n={n}: {lib} vs {oracle}");
        }
    }
}

#[test]
fn revenue_given_free_matches_subset_enumeration() {
    for seed in 0..30 {
        let p = gen_instance(&spec(ModelKind::ALL[seed as usize % 5], 6, seed)).unwrap();
        for pool in 0..64u64 {
            let rest = 63 & !pool;
            for free in [0, rest, rest & 0b10101] {
                let lib = revenue_given_free(&p, WinnerSet::from_bits(pool), WinnerSet::from_bits(free)).value;
                assert!((lib - oracle_revenue(&p, pool, free)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_with_exact_expectation() {
    for (k, model) in ModelKind::ALL.iter().enumerate() {
        let p = gen_instance(&spec(*model, 3 + 2 * k % 7, 40 + k as u64)).unwrap();
        let exact = main_mechanism_exact_expectation(&p).unwrap();
        let est = monte_carlo_main(&p, 10_000, derive_seed(7, &[k as u64])).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.stderr + 1e-12, "{model:?}: {} ± {} vs {exact}", est.mean, est.stderr);
    }
}

#[test]
fn revenue_given_free_on_full_market_is_f1() {
    for seed in 0..20 {
        let p = gen_instance(&spec(ModelKind::Scalar, 7, seed)).unwrap();
        let r = revenue_given_free(&p, WinnerSet::full(7), WinnerSet::EMPTY).value;
        assert!((r - benchmark_bruteforce(&p, 1).unwrap().value).abs() < 1e-9);
    }
}

fn profile_strategy() -> impl Strategy<Value = ValuationProfile> {
    (1usize..=8, prop::sample::select(ModelKind::ALL.to_vec()), any::<u64>())
        .prop_map(|(n, model, seed)| gen_instance(&spec(model, n, seed)).unwrap())
}

/// Scalar bids over integer set-size tables: valid, many ties.
fn tie_heavy_strategy() -> impl Strategy<Value = ValuationProfile> {
    (2usize..=7, prop::collection::vec(1u8..4, 7)).prop_map(|(n, steps)| {
        let mut acc = 0.0;
        let mut by_size = vec![0.0];
        for s in steps.iter().take(n) {
            acc += f64::from(*s);
            by_size.push(acc.min(3.0 * by_size.len() as f64).max(*by_size.last().unwrap()));
        }
        let agents = (0..n)
            .map(|i| {
                let values = (0..1u64 << n)
                    .map(|m| if m >> i & 1 == 1 { by_size[m.count_ones() as usize] } else { 0.0 })
                    .collect();
                AgentValuation::Scalar { t: 1.0, w: SetFunction::Table { values } }
            })
            .collect();
        ValuationProfile::new(agents, None, None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sweep_equals_bruteforce(p in profile_strategy(), k in 1usize..=3) {
        let n = p.n();
        let counter = QueryCounter::new(&p);
        let sweep = benchmark_sweep(&counter, k).unwrap();
        let brute = benchmark_bruteforce(&p, k).unwrap();
        prop_assert!((sweep.value - brute.value).abs() < 1e-9);
        prop_assert!(counter.count() <= (n * (n + 1) / 2) as u64);
    }

    #[test]
    fn sweep_equals_bruteforce_with_ties(p in tie_heavy_strategy(), k in 1usize..=3) {
        prop_assert!((benchmark_sweep(&p, k).unwrap().value - benchmark_bruteforce(&p, k).unwrap().value).abs() < 1e-9);
    }

    #[test]
    fn benchmark_result_invariants(p in profile_strategy()) {
        let f: Vec<_> = (1..=3).map(|k| benchmark_bruteforce(&p, k).unwrap()).collect();
        prop_assert!(f[0].value >= f[1].value && f[1].value >= f[2].value);
        for (k, r) in f.iter().enumerate() {
            prop_assert!((r.value - r.price * r.set.len() as f64).abs() < 1e-9);
            prop_assert!(r.set.len() > k || (r.value == 0.0 && r.set.is_empty()));
            for i in r.set.iter() {
                prop_assert!(p.bid(i, r.set) >= r.price - 1e-9);
            }
        }
    }

    #[test]
    fn maximal_feasible_set_contains_every_feasible_set(p in profile_strategy(), price in 0.0f64..20.0, free_bits in any::<u64>()) {
        let n = p.n();
        let free = WinnerSet::from_bits(free_bits & WinnerSet::full(n).bits());
        let pool = WinnerSet::full(n).difference(free);
        let result = maximal_feasible_set(&p, price, pool, free);
        for t in pool.subsets() {
            let ctx = t.union(free);
            if t.iter().all(|i| p.bid(i, ctx) >= price - 1e-9) {
                prop_assert!(t.is_subset(result));
            }
        }
    }

    #[test]
    fn main_mechanism_is_seed_deterministic_and_in_budget(p in profile_strategy(), seed in any::<u64>()) {
        let n = p.n() as u64;
        let a = main_mechanism(&p, &mut RandomSource::new(seed));
        let b = main_mechanism(&p, &mut RandomSource::new(seed));
        prop_assert_eq!(&a, &b);
        prop_assert!(a.queries_used <= 10 * n * n);
        prop_assert!(a.revenue >= 0.0);
        for i in a.winners.iter() {
            prop_assert!(a.payments[i] <= p.bid(i, a.winners) + 1e-9);
        }
    }
}
