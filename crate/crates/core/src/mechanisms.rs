//! Truthful auctions for digital goods with positive externalities.
//!
//! Randomized mechanisms here are universally truthful: each is a lottery over deterministic
//! truthful mechanisms, and the lottery never looks at bids. Every randomized entry point
//! therefore has a deterministic counterpart that takes the realized randomness explicitly
//! ([`Partition3`] for the main mechanism, coin splits for RSOP, a [`Mechanism2Branch`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::benchmark::{maximal_feasible_set, revenue_given_free};
use crate::error::{Error, Result};
use crate::set::WinnerSet;
use crate::valuations::{BidOracle, QueryCounter, ValuationProfile, TOLERANCE};

/// Largest market for exact `3^n` enumeration.
pub const MAX_EXACT_AGENTS: usize = 10;

/// Largest market for enumerating every RSOP coin split.
pub const MAX_RSOP_SUPPORT_AGENTS: usize = 20;

/// Default Mechanism-2 mixing parameter, the competitive ratio usually quoted for RSOP.
pub const DEFAULT_ALPHA: f64 = 4.68;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Outcome {
    pub winners: WinnerSet,
    /// One entry per agent; zero for losers.
    pub payments: Vec<f64>,
    pub revenue: f64,
    pub queries_used: u64,
}

impl Outcome {
    fn nobody(n: usize) -> Self {
        Outcome { winners: WinnerSet::EMPTY, payments: vec![0.0; n], revenue: 0.0, queries_used: 0 }
    }

    fn from_payments(winners: WinnerSet, payments: Vec<f64>, queries_used: u64) -> Self {
        let revenue = payments.iter().sum();
        Outcome { winners, payments, revenue, queries_used }
    }

    /// Truthful-report utility of agent `i` under the true valuations.
    pub fn utility<O: BidOracle + ?Sized>(&self, truth: &O, i: usize) -> f64 {
        if self.winners.contains(i) {
            truth.bid(i, self.winners) - self.payments[i]
        } else {
            0.0
        }
    }
}

/// Seeded randomness for mechanism runs.
///
/// All randomness descends from one 64-bit seed. Child streams are split off with
/// [`derive_seed`], which mixes the parent seed with integer tags through SplitMix64.
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `seed' = splitmix(... splitmix(splitmix(parent) ^ tag_0) ^ tag_1 ...)`.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(parent), |acc, &t| splitmix64(acc ^ t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    A,
    B,
    C,
}

/// Assignment of every agent to one of the groups A (free riders), B (buyers), C (price testers).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Partition3 {
    labels: Vec<Label>,
}

impl Partition3 {
    pub fn new(labels: Vec<Label>) -> Self {
        Partition3 { labels }
    }

    /// i.i.d. uniform labels.
    pub fn sample(n: usize, rng: &mut RandomSource) -> Self {
        let labels = (0..n)
            .map(|_| match rng.rng().random_range(0..3u8) {
                0 => Label::A,
                1 => Label::B,
                _ => Label::C,
            })
            .collect();
        Partition3 { labels }
    }

    /// The `index`-th of the `3^n` assignments; agent 0 is the least significant base-3 digit
    /// (0 = A, 1 = B, 2 = C).
    pub fn from_index(n: usize, mut index: u64) -> Self {
        let labels = (0..n)
            .map(|_| {
                let d = index % 3;
                index /= 3;
                [Label::A, Label::B, Label::C][d as usize]
            })
            .collect();
        Partition3 { labels }
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn group(&self, label: Label) -> WinnerSet {
        WinnerSet::from_agents(self.labels.iter().enumerate().filter(|(_, &l)| l == label).map(|(i, _)| i))
    }

    pub fn groups(&self) -> (WinnerSet, WinnerSet, WinnerSet) {
        (self.group(Label::A), self.group(Label::B), self.group(Label::C))
    }
}

/// Sells at a known price `c`: start from everyone and drop agents bidding below `c` for the
/// current set until none remain.
pub fn fixed_price_mechanism<O: BidOracle + ?Sized>(bids: &O, price: f64) -> Outcome {
    let n = bids.agents();
    let counted = QueryCounter::new(bids);
    let winners = maximal_feasible_set(&counted, price, WinnerSet::full(n), WinnerSet::EMPTY);
    let payments = (0..n).map(|i| if winners.contains(i) { price } else { 0.0 }).collect();
    Outcome::from_payments(winners, payments, counted.count())
}

/// Extracts exactly `r` from `buyers` (or nothing) while `free` already holds the good.
///
/// Each round evicts every buyer whose bid for `survivors ∪ free` is below the current
/// share `r / |survivors|`. The outcome lists only the surviving buyers.
pub fn cost_share<O: BidOracle + ?Sized>(bids: &O, r: f64, buyers: WinnerSet, free: WinnerSet) -> Outcome {
    debug_assert!(buyers.is_disjoint(free));
    let n = bids.agents();
    let counted = QueryCounter::new(bids);
    let mut survivors = buyers;
    while !survivors.is_empty() {
        let share = r / survivors.len() as f64;
        let context = survivors.union(free);
        let evicted = WinnerSet::from_agents(survivors.iter().filter(|&i| counted.bid(i, context) < share - TOLERANCE));
        if evicted.is_empty() {
            break;
        }
        survivors = survivors.difference(evicted);
    }
    if survivors.is_empty() {
        let mut out = Outcome::nobody(n);
        out.queries_used = counted.count();
        return out;
    }
    let share = r / survivors.len() as f64;
    let payments = (0..n).map(|i| if survivors.contains(i) { share } else { 0.0 }).collect();
    Outcome::from_payments(survivors, payments, counted.count())
}

/// `r(C) = max(r_A(C), r_B(C))`: the revenue target the main mechanism asks from B.
pub fn revenue_target<O: BidOracle + ?Sized>(bids: &O, partition: &Partition3) -> f64 {
    let (a, b, c) = partition.groups();
    revenue_given_free(&bids, c, a).value.max(revenue_given_free(&bids, c, b).value)
}

/// The main mechanism for a fixed partition: A wins for free, C never wins, and B pays the
/// target `r(C)` learned from C through cost sharing.
pub fn main_mechanism_with_partition<O: BidOracle + ?Sized>(bids: &O, partition: &Partition3) -> Outcome {
    let n = bids.agents();
    debug_assert_eq!(partition.labels().len(), n);
    let counted = QueryCounter::new(bids);
    let (a, b, _) = partition.groups();
    let r = revenue_target(&counted, partition);
    let sale = cost_share(&counted, r, b, a);
    Outcome {
        winners: a.union(sale.winners),
        payments: sale.payments,
        revenue: sale.revenue,
        queries_used: counted.count(),
    }
}

/// One draw of the main mechanism: uniform i.i.d. labels, then the deterministic mechanism.
pub fn main_mechanism<O: BidOracle + ?Sized>(bids: &O, rng: &mut RandomSource) -> Outcome {
    let partition = Partition3::sample(bids.agents(), rng);
    main_mechanism_with_partition(bids, &partition)
}

/// Exact expected revenue of the main mechanism together with the largest query count of
/// any single realization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactExpectation {
    pub revenue: f64,
    pub max_queries: u64,
}

/// Averages all `3^n` label assignments in index order.
pub fn main_mechanism_exact<O: BidOracle + ?Sized>(bids: &O) -> Result<ExactExpectation> {
    let n = bids.agents();
    if n > MAX_EXACT_AGENTS {
        return Err(Error::TooManyAgents { what: "exact expectation", n, max: MAX_EXACT_AGENTS });
    }
    let count = 3u64.pow(n as u32);
    let mut total = 0.0;
    let mut max_queries = 0;
    for idx in 0..count {
        let out = main_mechanism_with_partition(bids, &Partition3::from_index(n, idx));
        total += out.revenue;
        max_queries = max_queries.max(out.queries_used);
    }
    Ok(ExactExpectation { revenue: total / count as f64, max_queries })
}

pub fn main_mechanism_exact_expectation<O: BidOracle + ?Sized>(bids: &O) -> Result<f64> {
    main_mechanism_exact(bids).map(|e| e.revenue)
}

/// A deterministic mechanism over black-box bids, i.e. one realization of a universally
/// truthful lottery.
pub trait DeterministicMechanism {
    fn name(&self) -> String;

    fn run(&self, bids: &dyn BidOracle) -> Outcome;
}

#[derive(Clone, Copy, Debug)]
pub struct FixedPrice {
    pub price: f64,
}

impl DeterministicMechanism for FixedPrice {
    fn name(&self) -> String {
        format!("fixed-price({})", self.price)
    }

    fn run(&self, bids: &dyn BidOracle) -> Outcome {
        fixed_price_mechanism(bids, self.price)
    }
}

#[derive(Clone, Debug)]
pub struct MainRealization {
    pub partition: Partition3,
}

impl DeterministicMechanism for MainRealization {
    fn name(&self) -> String {
        "main".into()
    }

    fn run(&self, bids: &dyn BidOracle) -> Outcome {
        main_mechanism_with_partition(bids, &self.partition)
    }
}

/// Negative control: everyone wins and pays their own bid for `[n]`. Not truthful.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstPrice;

impl DeterministicMechanism for FirstPrice {
    fn name(&self) -> String {
        "first-price".into()
    }

    fn run(&self, bids: &dyn BidOracle) -> Outcome {
        let n = bids.agents();
        let counted = QueryCounter::new(bids);
        let all = WinnerSet::full(n);
        let payments = (0..n).map(|i| counted.bid(i, all)).collect();
        Outcome::from_payments(all, payments, counted.count())
    }
}

/// Allocation and per-winner threshold prices of a classical (no-externality) auction.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalOutcome {
    pub winners: WinnerSet,
    /// Threshold bid for each winner; zero for losers.
    pub prices: Vec<f64>,
}

/// A randomized classical digital-goods auction whose coins are independent of bids.
pub trait ClassicalAuction {
    type Coins: Clone;

    fn sample_coins(&self, n: usize, rng: &mut RandomSource) -> Self::Coins;

    /// Every coin outcome with its probability.
    fn coin_support(&self, n: usize) -> Result<Vec<(f64, Self::Coins)>>;

    fn run(&self, bids: &[f64], coins: &Self::Coins) -> ClassicalOutcome;
}

/// Random sampling optimal price auction.
///
/// A fair coin splits the bidders into two halves; each half is offered the optimal single
/// price of the other half. An empty half yields price `+∞`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rsop;

/// Revenue-maximizing single price for a set of bids; ties go to the lower price.
/// `None` for an empty set.
pub fn optimal_single_price(bids: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut sorted: Vec<f64> = bids.into_iter().collect();
    if sorted.is_empty() {
        return None;
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (j, &b) in sorted.iter().enumerate() {
        let value = b * (j + 1) as f64;
        if value >= best.0 - TOLERANCE {
            best = (value.max(best.0), b);
        }
    }
    Some(best.1)
}

impl Rsop {
    pub fn run_with_split(&self, bids: &[f64], left: WinnerSet) -> ClassicalOutcome {
        let n = bids.len();
        let right = WinnerSet::full(n).difference(left);
        let price_of = |side: WinnerSet| optimal_single_price(side.iter().map(|i| bids[i])).unwrap_or(f64::INFINITY);
        let (left_price, right_price) = (price_of(right), price_of(left));
        let mut winners = WinnerSet::EMPTY;
        let mut prices = vec![0.0; n];
        for (i, &b) in bids.iter().enumerate() {
            let offer = if left.contains(i) { left_price } else { right_price };
            if offer.is_finite() && b >= offer - TOLERANCE {
                winners = winners.with(i);
                prices[i] = offer;
            }
        }
        ClassicalOutcome { winners, prices }
    }
}

impl ClassicalAuction for Rsop {
    type Coins = WinnerSet;

    fn sample_coins(&self, n: usize, rng: &mut RandomSource) -> WinnerSet {
        WinnerSet::from_agents((0..n).filter(|_| rng.rng().random_bool(0.5)))
    }

    fn coin_support(&self, n: usize) -> Result<Vec<(f64, WinnerSet)>> {
        if n > MAX_RSOP_SUPPORT_AGENTS {
            return Err(Error::TooManyAgents { what: "RSOP coin enumeration", n, max: MAX_RSOP_SUPPORT_AGENTS });
        }
        let p = 0.5f64.powi(n as i32);
        Ok(WinnerSet::full(n).subsets().map(|s| (p, s)).collect())
    }

    fn run(&self, bids: &[f64], coins: &WinnerSet) -> ClassicalOutcome {
        self.run_with_split(bids, *coins)
    }
}

/// RSOP outcome as a revenue-bearing [`Outcome`] on classical bids.
pub fn rsop(bids: &[f64], rng: &mut RandomSource) -> Outcome {
    let coins = Rsop.sample_coins(bids.len(), rng);
    let out = Rsop.run_with_split(bids, coins);
    Outcome::from_payments(out.winners, out.prices, bids.len() as u64)
}

/// Which of Mechanism-2's two branches a realization takes.
#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism2Branch<C> {
    /// Everyone wins and pays their public externality `w_i([n])`.
    GiveAll,
    /// The classical auction runs on the private parameters with the given coins.
    Classical(C),
}

/// A deterministic realization of Mechanism-2 for additive valuations `t_i + w_i(S)`.
///
/// The reported private parameter is read as `b_i({i}) − w_i({i})` (floored at zero), so a
/// single query per agent suffices. Classical winners pay their threshold plus `w_i(W)` for
/// the allocated set `W`.
pub struct Mechanism2Realization<'a, M: ClassicalAuction> {
    public: &'a ValuationProfile,
    auction: &'a M,
    branch: Mechanism2Branch<M::Coins>,
}

impl<'a, M: ClassicalAuction> Mechanism2Realization<'a, M> {
    pub fn new(public: &'a ValuationProfile, auction: &'a M, branch: Mechanism2Branch<M::Coins>) -> Result<Self> {
        if !public.is_additive() {
            return Err(Error::NotAdditive("mechanism2"));
        }
        Ok(Mechanism2Realization { public, auction, branch })
    }
}

impl<M: ClassicalAuction> DeterministicMechanism for Mechanism2Realization<'_, M> {
    fn name(&self) -> String {
        "mechanism2".into()
    }

    fn run(&self, bids: &dyn BidOracle) -> Outcome {
        let n = self.public.n();
        let weight = |i: usize, s: WinnerSet| self.public.additive_weight(i, s).unwrap_or(0.0);
        match &self.branch {
            Mechanism2Branch::GiveAll => {
                let all = WinnerSet::full(n);
                let payments = (0..n).map(|i| weight(i, all)).collect();
                Outcome::from_payments(all, payments, 0)
            }
            Mechanism2Branch::Classical(coins) => {
                let counted = QueryCounter::new(bids);
                let reported: Vec<f64> = (0..n)
                    .map(|i| {
                        let solo = WinnerSet::singleton(i);
                        (counted.bid(i, solo) - weight(i, solo)).max(0.0)
                    })
                    .collect();
                let classical = self.auction.run(&reported, coins);
                let payments = (0..n)
                    .map(|i| {
                        if classical.winners.contains(i) {
                            classical.prices[i] + weight(i, classical.winners)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Outcome::from_payments(classical.winners, payments, counted.count())
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be finite and > 0, got {alpha}")))
    }
}

/// Probability of the give-everything branch, `1 / (1 + α)`.
pub fn give_all_probability(alpha: f64) -> f64 {
    1.0 / (1.0 + alpha)
}

/// One draw of Mechanism-2 with plug-in classical auction `m0`.
pub fn mechanism2<M: ClassicalAuction>(profile: &ValuationProfile, alpha: f64, m0: &M, rng: &mut RandomSource) -> Result<Outcome> {
    check_alpha(alpha)?;
    let branch = if rng.rng().random::<f64>() < give_all_probability(alpha) {
        Mechanism2Branch::GiveAll
    } else {
        Mechanism2Branch::Classical(m0.sample_coins(profile.n(), rng))
    };
    Ok(Mechanism2Realization::new(profile, m0, branch)?.run(profile))
}

/// Exact expected revenue of Mechanism-2 over both branches and all of `m0`'s coins.
pub fn mechanism2_exact_expectation<M: ClassicalAuction>(profile: &ValuationProfile, alpha: f64, m0: &M) -> Result<f64> {
    check_alpha(alpha)?;
    let give_all = Mechanism2Realization::new(profile, m0, Mechanism2Branch::GiveAll)?.run(profile).revenue;
    let mut classical = 0.0;
    for (p, coins) in m0.coin_support(profile.n())? {
        classical += p * Mechanism2Realization::new(profile, m0, Mechanism2Branch::Classical(coins))?.run(profile).revenue;
    }
    let q = give_all_probability(alpha);
    Ok(q * give_all + (1.0 - q) * classical)
}
