//! `extauction` command-line harness.
//!
//! Exit codes: 0 success, 1 a property violation was found, 2 usage or I/O error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use extauction::benchmark::{benchmark_bruteforce, benchmark_sweep};
use extauction::experiments::{f2_demo_report, losing_value_report, parse_config, run_experiments};
use extauction::instance::{instance_hash, load_instance, parse_instance, read_text};
use extauction::mechanisms::{
    derive_seed, fixed_price_mechanism, main_mechanism, main_mechanism_exact, mechanism2, mechanism2_exact_expectation,
    ClassicalAuction, DeterministicMechanism, FirstPrice, FixedPrice, MainRealization, Mechanism2Branch,
    Mechanism2Realization, Partition3, RandomSource, Rsop, DEFAULT_ALPHA, MAX_EXACT_AGENTS,
};
use extauction::report::{emit_report, Cell, ReportFormat};
use extauction::truthfulness::{deviation_test, DeviationPlan, DEFAULT_GRID_POINTS};
use extauction::valuations::{check_conditions, estimate_l, CheckMode, QueryCounter, ValuationProfile};
use extauction::Error;

#[derive(Parser)]
#[command(name = "extauction", version, about = "Truthful digital-goods auctions with positive externalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the valuation conditions of an instance and estimate its subadditivity factor L.
    Check {
        #[arg(long)]
        instance: PathBuf,
        /// Check this many random triples instead of the exhaustive check.
        #[arg(long)]
        sampled: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute F^(k).
    Benchmark {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        k: u8,
        #[arg(long, value_enum, default_value_t = Method::Sweep)]
        method: Method,
    },
    /// Run one seeded draw of a mechanism.
    Run {
        #[arg(long, value_enum)]
        mechanism: MechanismName,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Required for fixed-price.
        #[arg(long)]
        price: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Exact expected revenue, with the benchmarks for comparison.
    Expect {
        #[arg(long, value_enum, default_value_t = MechanismName::Main)]
        mechanism: MechanismName,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        price: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Search for profitable misreports with the mechanism's randomness held fixed.
    Verify {
        #[arg(long, value_enum)]
        mechanism: VerifyName,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Misreports tried per agent.
        #[arg(long, default_value_t = 200)]
        misreports: usize,
        /// Random realizations tested (ignored with --exhaustive).
        #[arg(long, default_value_t = 4)]
        realizations: u64,
        /// Test every realization: all 3^n partitions, or both Mechanism-2 branches with all coins.
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        price: Option<f64>,
    },
    /// Run the experiments in a config file and write CSV and JSON reports.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Built-in demonstrations.
    Demo {
        #[arg(value_enum)]
        which: DemoName,
        /// M values for the f2 demo.
        #[arg(long = "m", num_args = 1.., default_values_t = [1.0, 10.0, 100.0, 1000.0, 10000.0])]
        ms: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Brute,
    Sweep,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MechanismName {
    Main,
    FixedPrice,
    Mechanism2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyName {
    Main,
    FixedPrice,
    Mechanism2,
    /// Pay-your-bid control; expected to fail.
    FirstPrice,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    F2,
    LosingValue,
}

enum Status {
    Ok,
    Violation,
}

/// Writes pretty JSON to stdout. A closed pipe (e.g. `| head`) is not an error.
fn print(v: &Value) {
    let mut out = std::io::stdout().lock();
    let text = serde_json::to_string_pretty(v).expect("json output");
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
        }
    }
}

fn load(path: &Path) -> anyhow::Result<(ValuationProfile, String)> {
    let profile = load_instance(path).with_context(|| format!("loading {}", path.display()))?;
    let hash = instance_hash(&profile);
    Ok((profile, hash))
}

fn require_price(price: Option<f64>) -> anyhow::Result<f64> {
    match price {
        Some(p) if p.is_finite() && p >= 0.0 => Ok(p),
        Some(p) => bail!("--price must be finite and nonnegative, got {p}"),
        None => bail!("--price is required for fixed-price"),
    }
}

fn cmd_check(path: &Path, sampled: Option<usize>, seed: u64) -> anyhow::Result<Status> {
    let profile = parse_instance(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let mode = match sampled {
        Some(samples) => CheckMode::Sampled { samples, seed },
        None => CheckMode::auto(profile.n()),
    };
    let relax = profile.declared_l().unwrap_or(1.0);
    let violations = check_conditions(&profile, mode, relax)?;
    let l = estimate_l(&profile, mode)?;
    print(&json!({
        "instance_hash": instance_hash(&profile),
        "n": profile.n(),
        "mode": if matches!(mode, CheckMode::Exhaustive) { "exhaustive" } else { "sampled" },
        "seed": seed,
        "declared_L": profile.declared_l(),
        "estimated_L": if l.is_finite() { json!(l) } else { json!("inf") },
        "violation_count": violations.len(),
        "violations": violations.iter().take(20).map(|v| json!({ "agent": v.agent(), "detail": v.to_string() })).collect::<Vec<_>>(),
    }));
    Ok(if violations.is_empty() { Status::Ok } else { Status::Violation })
}

fn cmd_benchmark(path: &Path, k: u8, method: Method) -> anyhow::Result<Status> {
    let (profile, hash) = load(path)?;
    let counter = QueryCounter::new(&profile);
    let (name, result) = match method {
        Method::Brute => ("brute", benchmark_bruteforce(&counter, k as usize)?),
        Method::Sweep => ("sweep", benchmark_sweep(&counter, k as usize)?),
    };
    print(&json!({
        "instance_hash": hash,
        "k": k,
        "method": name,
        "value": result.value,
        "price": result.price,
        "set": result.set.to_vec(),
        "queries": counter.count(),
    }));
    Ok(Status::Ok)
}

fn cmd_run(mechanism: MechanismName, path: &Path, seed: u64, price: Option<f64>, alpha: f64) -> anyhow::Result<Status> {
    let (profile, hash) = load(path)?;
    let mut rng = RandomSource::new(seed);
    let outcome = match mechanism {
        MechanismName::Main => main_mechanism(&profile, &mut rng),
        MechanismName::FixedPrice => fixed_price_mechanism(&profile, require_price(price)?),
        MechanismName::Mechanism2 => mechanism2(&profile, alpha, &Rsop, &mut rng)?,
    };
    print(&json!({
        "instance_hash": hash,
        "seed": seed,
        "mechanism": mechanism_label(mechanism),
        "winners": outcome.winners.to_vec(),
        "payments": outcome.payments,
        "revenue": outcome.revenue,
        "queries_used": outcome.queries_used,
    }));
    Ok(Status::Ok)
}

fn mechanism_label(m: MechanismName) -> &'static str {
    match m {
        MechanismName::Main => "main",
        MechanismName::FixedPrice => "fixed-price",
        MechanismName::Mechanism2 => "mechanism2",
    }
}

fn cmd_expect(mechanism: MechanismName, path: &Path, price: Option<f64>, alpha: f64) -> anyhow::Result<Status> {
    let (profile, hash) = load(path)?;
    let f: Vec<f64> = (1..=3).map(|k| benchmark_sweep(&profile, k).map(|r| r.value)).collect::<Result<_, _>>()?;
    let (revenue, max_queries) = match mechanism {
        MechanismName::Main => {
            let e = main_mechanism_exact(&profile)?;
            (e.revenue, Some(e.max_queries))
        }
        MechanismName::FixedPrice => {
            let out = fixed_price_mechanism(&profile, require_price(price)?);
            (out.revenue, Some(out.queries_used))
        }
        MechanismName::Mechanism2 => (mechanism2_exact_expectation(&profile, alpha, &Rsop)?, None),
    };
    let ratio = |b: f64| if revenue > 0.0 { json!(b / revenue) } else { json!("inf") };
    print(&json!({
        "instance_hash": hash,
        "mechanism": mechanism_label(mechanism),
        "expected_revenue": revenue,
        "f1": f[0],
        "f2": f[1],
        "f3": f[2],
        "ratio_f2": ratio(f[1]),
        "ratio_f3": ratio(f[2]),
        "max_queries": max_queries,
    }));
    Ok(Status::Ok)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    name: VerifyName,
    path: &Path,
    seed: u64,
    misreports: usize,
    realizations: u64,
    exhaustive: bool,
    price: Option<f64>,
) -> anyhow::Result<Status> {
    let (profile, hash) = load(path)?;
    let n = profile.n();
    let mut plan = DeviationPlan::structured(&profile, misreports, derive_seed(seed, &[0]));
    if profile.private_params().is_some() {
        plan.extend(DeviationPlan::param_grid(&profile, DEFAULT_GRID_POINTS));
    }
    let mut mechanisms: Vec<Box<dyn DeterministicMechanism + '_>> = Vec::new();
    match name {
        VerifyName::Main => {
            if exhaustive {
                if n > MAX_EXACT_AGENTS {
                    return Err(Error::TooManyAgents { what: "exhaustive verification", n, max: MAX_EXACT_AGENTS }.into());
                }
                for idx in 0..3u64.pow(n as u32) {
                    mechanisms.push(Box::new(MainRealization { partition: Partition3::from_index(n, idx) }));
                }
            } else {
                for r in 0..realizations {
                    let mut rng = RandomSource::new(derive_seed(seed, &[1, r]));
                    mechanisms.push(Box::new(MainRealization { partition: Partition3::sample(n, &mut rng) }));
                }
            }
        }
        VerifyName::FixedPrice => mechanisms.push(Box::new(FixedPrice { price: require_price(price)? })),
        VerifyName::Mechanism2 => {
            mechanisms.push(Box::new(Mechanism2Realization::new(&profile, &Rsop, Mechanism2Branch::GiveAll)?));
            let coins: Vec<_> = if exhaustive {
                Rsop.coin_support(n)?.into_iter().map(|(_, c)| c).collect()
            } else {
                (0..realizations).map(|r| Rsop.sample_coins(n, &mut RandomSource::new(derive_seed(seed, &[2, r])))).collect()
            };
            for c in coins {
                mechanisms.push(Box::new(Mechanism2Realization::new(&profile, &Rsop, Mechanism2Branch::Classical(c))?));
            }
        }
        VerifyName::FirstPrice => mechanisms.push(Box::new(FirstPrice)),
    }
    let mut found = Vec::new();
    for m in &mechanisms {
        found.extend(deviation_test(m.as_ref(), &profile, &plan));
    }
    print(&json!({
        "instance_hash": hash,
        "seed": seed,
        "mechanism": mechanisms.first().map(|m| m.name()),
        "realizations": mechanisms.len(),
        "misreports": plan.len(),
        "violation_count": found.len(),
        "violations": found.iter().take(20).collect::<Vec<_>>(),
    }));
    Ok(if found.is_empty() { Status::Ok } else { Status::Violation })
}

fn cmd_experiment(config_path: &Path, out: &Path) -> anyhow::Result<Status> {
    let config = parse_config(&read_text(config_path)?).with_context(|| format!("parsing {}", config_path.display()))?;
    let reports = run_experiments(&config)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut files = Vec::new();
    let mut violations = 0i64;
    for r in &reports {
        for (ext, fmt) in [("csv", ReportFormat::Csv), ("json", ReportFormat::Json)] {
            let path = out.join(format!("{}.{ext}", r.name));
            emit_report(r, fmt, &path)?;
            files.push(path.display().to_string());
        }
        for key in ["violations", "over_budget"] {
            if let Some(Cell::Int(v)) = r.summary.get(key) {
                violations += v;
            }
        }
    }
    print(&json!({ "seed": config.seed, "reports": reports.len(), "files": files, "violations": violations }));
    Ok(if violations == 0 { Status::Ok } else { Status::Violation })
}

fn cmd_demo(which: DemoName, ms: &[f64]) -> anyhow::Result<Status> {
    let report = match which {
        DemoName::F2 => f2_demo_report(ms, 0)?,
        DemoName::LosingValue => losing_value_report(0)?,
    };
    print(&report.to_json());
    Ok(Status::Ok)
}

fn dispatch(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Check { instance, sampled, seed } => cmd_check(&instance, sampled, seed),
        Command::Benchmark { instance, k, method } => cmd_benchmark(&instance, k, method),
        Command::Run { mechanism, instance, seed, price, alpha } => cmd_run(mechanism, &instance, seed, price, alpha),
        Command::Expect { mechanism, instance, price, alpha } => cmd_expect(mechanism, &instance, price, alpha),
        Command::Verify { mechanism, instance, seed, misreports, realizations, exhaustive, price } => {
            cmd_verify(mechanism, &instance, seed, misreports, realizations, exhaustive, price)
        }
        Command::Experiment { config, out } => cmd_experiment(&config, &out),
        Command::Demo { which, ms } => cmd_demo(which, &ms),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::ConditionViolations(v)) => {
                    for x in v.iter().take(20) {
                        eprintln!("  {x}");
                    }
                    ExitCode::from(1)
                }
                _ => ExitCode::from(2),
            }
        }
    }
}
