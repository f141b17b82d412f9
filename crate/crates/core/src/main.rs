//! Batch experiment harness: single runs, verification suites,
//! parameter sweeps, and adversary searches. A run is fully described
//! by a JSON run-spec file; every field can be overridden by a flag of
//! the same name, and seeded runs reproduce byte-for-byte.
//!
//! Exit codes: 0 pass, 1 property/verification failure, 2 usage or
//! configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use consensus_sim::algorithms::{
    parse_behavior, Behavior, QuantizationSpec, RoundingMode, Rule,
};
use consensus_sim::dynamics::{greedy_adversary, round_rng, PoolSpec, Repeat, Schedule};
use consensus_sim::engine::{
    contraction_series, decision_round, run, verify_trace, ExecutionConfig, ExecutionTrace,
    HorizonPolicy, VerificationReport,
};
use consensus_sim::suites;
use consensus_sim::value::{parse_rational, Rational, F64};
use consensus_sim::{CommunicationGraph, Error, Scalar};

/// Worker-pool size for sweeps and verification suites.
const WORKERS_ENV: &str = "CONSENSUS_SIM_WORKERS";

#[derive(Parser)]
#[command(
    name = "consensus-sim",
    version,
    about = "Averaging-based approximate consensus in dynamic rooted networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one execution from a run-spec and verify its trace.
    Simulate(SimulateArgs),
    /// Run a named randomized property suite.
    Verify(VerifyArgs),
    /// Sweep one parameter and tabulate theoretical vs measured rounds.
    Sweep(SweepArgs),
    /// Search a graph pool for schedules that slow a rule down.
    Adversary(AdversaryArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum NumericMode {
    Rational,
    Float,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum RepeatArg {
    #[default]
    Cycle,
    HoldLast,
}

impl From<RepeatArg> for Repeat {
    fn from(r: RepeatArg) -> Repeat {
        match r {
            RepeatArg::Cycle => Repeat::Cycle,
            RepeatArg::HoldLast => Repeat::HoldLast,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum RoundingArg {
    Down,
    Up,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ScheduleSpec {
    RandomRooted {
        #[serde(default = "default_density")]
        density: f64,
    },
    PartiallyRooted,
    LoopsOnly,
    Explicit {
        graphs: Vec<PathBuf>,
        #[serde(default)]
        repeat: RepeatArg,
    },
}

fn default_density() -> f64 {
    0.25
}

/// One JSON file describes a run; flags mirror the field names.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSpec {
    /// e.g. "amortized midpoint" or "mean-value".
    behavior: Option<String>,
    n: Option<usize>,
    /// Estimate N of the process count; defaults to n.
    estimate: Option<usize>,
    epsilon: Option<String>,
    /// Grid denominator; shorthand for a `quantized(Q, ...)` descriptor.
    q: Option<u64>,
    rounding: Option<RoundingArg>,
    schedule: Option<ScheduleSpec>,
    seed: Option<u64>,
    mode: Option<NumericMode>,
    /// Fixed round count; absent means run to the decision round.
    horizon: Option<u64>,
    /// Initial values; absent means seeded uniform draws.
    initial: Option<Vec<String>>,
    trace: Option<PathBuf>,
    summary: Option<PathBuf>,
}

impl RunSpec {
    fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Field-wise override: every flag that was given wins.
    fn apply_overrides(&mut self, o: &SpecOverrides) {
        if o.behavior.is_some() {
            self.behavior.clone_from(&o.behavior);
        }
        if o.n.is_some() {
            self.n = o.n;
        }
        if o.estimate.is_some() {
            self.estimate = o.estimate;
        }
        if o.epsilon.is_some() {
            self.epsilon.clone_from(&o.epsilon);
        }
        if o.q.is_some() {
            self.q = o.q;
        }
        if o.rounding.is_some() {
            self.rounding = o.rounding;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.mode.is_some() {
            self.mode = o.mode;
        }
        if o.horizon.is_some() {
            self.horizon = o.horizon;
        }
        if let Some(values) = &o.initial {
            self.initial = Some(values.split(',').map(|s| s.trim().to_string()).collect());
        }
        if let Some(kind) = o.schedule {
            self.schedule = Some(match kind {
                ScheduleKind::RandomRooted => ScheduleSpec::RandomRooted {
                    density: o.density.unwrap_or_else(default_density),
                },
                ScheduleKind::PartiallyRooted => ScheduleSpec::PartiallyRooted,
                ScheduleKind::LoopsOnly => ScheduleSpec::LoopsOnly,
                ScheduleKind::Explicit => ScheduleSpec::Explicit {
                    graphs: o.graphs.clone(),
                    repeat: o.repeat.unwrap_or_default(),
                },
            });
        } else if let (Some(density), Some(ScheduleSpec::RandomRooted { density: d })) =
            (o.density, self.schedule.as_mut())
        {
            *d = density;
        }
        if o.trace.is_some() {
            self.trace.clone_from(&o.trace);
        }
        if o.summary.is_some() {
            self.summary.clone_from(&o.summary);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScheduleKind {
    RandomRooted,
    PartiallyRooted,
    LoopsOnly,
    Explicit,
}

/// Flags mirroring the run-spec fields 1:1.
#[derive(Args, Clone, Debug)]
struct SpecOverrides {
    /// Behavior descriptor, e.g. "amortized midpoint".
    #[arg(long)]
    behavior: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Estimate N of the process count.
    #[arg(long)]
    estimate: Option<usize>,
    /// Agreement tolerance, e.g. "0.01" or "1/100".
    #[arg(long)]
    epsilon: Option<String>,
    /// Grid denominator Q for quantized runs.
    #[arg(long)]
    q: Option<u64>,
    #[arg(long, value_enum)]
    rounding: Option<RoundingArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<NumericMode>,
    /// Fixed round count; omit to run to the decision round.
    #[arg(long)]
    horizon: Option<u64>,
    /// Comma-separated initial values.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleKind>,
    /// Extra-edge density for generated schedules.
    #[arg(long)]
    density: Option<f64>,
    /// Edge-list files for an explicit schedule.
    #[arg(long, num_args = 1..)]
    graphs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    repeat: Option<RepeatArg>,
    /// Where to write the CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Where to write the JSON summary.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON run-spec file; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    overrides: SpecOverrides,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: graph-products, safety, contraction, amortized-bounds,
    /// quantized, resiliency, all.
    #[arg(long)]
    suite: String,
    /// Largest process count exercised.
    #[arg(long, default_value_t = 16)]
    max_n: usize,
    /// Randomized cases per suite.
    #[arg(long, default_value_t = 200)]
    cases: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Parameter to vary.
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated axis values (integers, or rationals for epsilon).
    #[arg(long)]
    values: String,
    /// Base run-spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    overrides: SpecOverrides,
    /// Measured runs per axis point.
    #[arg(long, default_value_t = 5)]
    runs: u64,
    /// Output CSV table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Axis {
    N,
    Epsilon,
    Q,
    Estimate,
}

#[derive(Args)]
struct AdversaryArgs {
    /// JSON run-spec file; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    overrides: SpecOverrides,
    /// Rooted candidate graphs tried per round.
    #[arg(long, default_value_t = 64)]
    pool_size: usize,
    /// Directory for the chosen edge-list graphs and ratio report.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    if let Ok(workers) = std::env::var(WORKERS_ENV) {
        match workers.parse::<usize>() {
            Ok(w) if w > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
            }
            _ => {
                eprintln!("error: {WORKERS_ENV} must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Adversary(args) => cmd_adversary(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Everything resolved out of a run-spec, still mode-agnostic: initial
/// values stay exact rationals until a numeric mode is chosen.
struct ResolvedRun {
    behavior: Behavior,
    schedule: Schedule,
    initial: Vec<BigRational>,
    epsilon: BigRational,
    horizon: HorizonPolicy,
    mode: NumericMode,
    n: usize,
    estimate: usize,
    seed: u64,
}

fn resolve(spec: &RunSpec) -> Result<ResolvedRun, Error> {
    let n = spec
        .n
        .ok_or_else(|| Error::Config("n is required (field or --n)".into()))?;
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let estimate = spec.estimate.unwrap_or(n);
    let seed = spec.seed.unwrap_or(0);

    let descriptor = spec
        .behavior
        .as_deref()
        .ok_or_else(|| Error::Config("behavior is required (field or --behavior)".into()))?;
    let mut behavior = parse_behavior(descriptor)?;
    if let Some(q) = spec.q {
        match &behavior.quantization {
            Some(existing) if existing.q != q => {
                return Err(Error::Config(format!(
                    "q = {q} conflicts with behavior descriptor ({})",
                    existing.q
                )));
            }
            Some(_) => {}
            None => {
                let mode = match spec.rounding.unwrap_or(RoundingArg::Down) {
                    RoundingArg::Down => RoundingMode::Down,
                    RoundingArg::Up => RoundingMode::Up,
                };
                behavior = behavior.quantized(QuantizationSpec { q, mode })?;
            }
        }
    }
    if behavior.amortized {
        if estimate < 2 {
            return Err(Error::Config(
                "amortized behaviors need n (or the estimate N) >= 2".into(),
            ));
        }
        behavior = behavior.amortize((estimate - 1) as u64)?;
    }

    let schedule = match spec
        .schedule
        .as_ref()
        .unwrap_or(&ScheduleSpec::RandomRooted {
            density: default_density(),
        }) {
        ScheduleSpec::RandomRooted { density } => Schedule::random_rooted(n, seed, *density)?,
        ScheduleSpec::PartiallyRooted => Schedule::partially_rooted(n, estimate, seed)?,
        ScheduleSpec::LoopsOnly => Schedule::loops_only(n)?,
        ScheduleSpec::Explicit { graphs, repeat } => {
            let mut loaded = Vec::with_capacity(graphs.len());
            for path in graphs {
                let text = std::fs::read_to_string(path)?;
                let (graph, missing_loops) = CommunicationGraph::parse_edge_list(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                if !missing_loops.is_empty() {
                    eprintln!(
                        "warning: {}: self-loops added for nodes {missing_loops:?}",
                        path.display()
                    );
                }
                loaded.push(graph);
            }
            Schedule::explicit(loaded, (*repeat).into())?
        }
    };
    if schedule.n() != n {
        return Err(Error::Config(format!(
            "schedule is over {} processes but n = {n}",
            schedule.n()
        )));
    }

    let epsilon = match &spec.epsilon {
        Some(text) => parse_rational(text)?,
        None => match &behavior.quantization {
            Some(q) => BigRational::new(BigInt::one(), BigInt::from(q.q)),
            None => {
                return Err(Error::Config("epsilon is required (field or --epsilon)".into()))
            }
        },
    };

    let initial = match &spec.initial {
        Some(texts) => texts
            .iter()
            .map(|t| parse_rational(t))
            .collect::<Result<Vec<_>, _>>()?,
        None => default_initial(n, seed, behavior.quantization.as_ref()),
    };

    let horizon = match spec.horizon {
        Some(rounds) => HorizonPolicy::FixedRounds(rounds),
        None => HorizonPolicy::RunToDecision,
    };

    let mode = spec.mode.unwrap_or_else(|| {
        let rounds = match horizon {
            HorizonPolicy::FixedRounds(r) => r,
            HorizonPolicy::RunToDecision => {
                decision_round(&behavior, estimate, &epsilon).unwrap_or(u64::MAX)
            }
        };
        if n <= 16 && rounds <= 10_000 {
            NumericMode::Rational
        } else {
            NumericMode::Float
        }
    });

    Ok(ResolvedRun {
        behavior,
        schedule,
        initial,
        epsilon,
        horizon,
        mode,
        n,
        estimate,
        seed,
    })
}

/// Seeded initial values: uniform on the 1/Q grid for quantized runs,
/// uniform multiples of 1/256 otherwise.
fn default_initial(n: usize, seed: u64, quant: Option<&QuantizationSpec>) -> Vec<BigRational> {
    let mut rng = round_rng(seed ^ 0x696e_6974, 0);
    let denom = quant.map_or(256, |spec| spec.q);
    (0..n)
        .map(|_| {
            BigRational::new(
                BigInt::from(rng.gen_range(0..=denom)),
                BigInt::from(denom),
            )
        })
        .collect()
}

fn config_for<S: Scalar>(run: &ResolvedRun) -> ExecutionConfig<S> {
    ExecutionConfig {
        behavior: run.behavior.clone(),
        schedule: run.schedule.clone(),
        initial: run.initial.iter().map(S::from_rational).collect(),
        epsilon: run.epsilon.clone(),
        horizon: run.horizon,
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Error> {
    let mut spec = match &args.spec {
        Some(path) => RunSpec::load(path)?,
        None => RunSpec::default(),
    };
    spec.apply_overrides(&args.overrides);
    let run_cfg = resolve(&spec)?;
    match run_cfg.mode {
        NumericMode::Rational => simulate_typed::<Rational>(&spec, &run_cfg),
        NumericMode::Float => simulate_typed::<F64>(&spec, &run_cfg),
    }
}

fn simulate_typed<S: Scalar>(spec: &RunSpec, run_cfg: &ResolvedRun) -> Result<u8, Error> {
    let config = config_for::<S>(run_cfg);
    let trace = run(&config)?;
    let report = verify_trace(&trace, &config)?;

    if let Some(path) = &spec.trace {
        std::fs::write(path, trace.to_csv())?;
    }
    if let Some(path) = &spec.summary {
        let summary = summary_json(run_cfg, &trace, &report);
        std::fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?;
    }

    println!("behavior: {}", run_cfg.behavior);
    println!(
        "n = {}, estimate N = {}, epsilon = {}, seed = {}, mode = {:?}",
        run_cfg.n, run_cfg.estimate, run_cfg.epsilon, run_cfg.seed, run_cfg.mode
    );
    println!("rounds run: {}", trace.rounds());
    match trace.decision_round {
        Some(r) if !trace.undecided_at_horizon => println!("decided at round {r}"),
        Some(r) => println!("decision round {r} lies beyond the horizon"),
        None => println!("no decision-round bound for this behavior"),
    }
    let final_delta = trace.deltas.last().expect("at least the initial state");
    println!("final spread: {}", final_delta.render());
    for check in &report.checks {
        println!(
            "check {:<22} {} {}",
            check.name,
            if check.pass { "pass" } else { "FAIL" },
            check.detail
        );
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn summary_json<S: Scalar>(
    run_cfg: &ResolvedRun,
    trace: &ExecutionTrace<S>,
    report: &VerificationReport,
) -> serde_json::Value {
    let ratios = contraction_series(trace, trace.macro_length);
    serde_json::json!({
        "behavior": run_cfg.behavior.to_string(),
        "n": run_cfg.n,
        "estimate": run_cfg.estimate,
        "epsilon": run_cfg.epsilon.to_string(),
        "seed": run_cfg.seed,
        "mode": match run_cfg.mode {
            NumericMode::Rational => "rational",
            NumericMode::Float => "float",
        },
        "rounds": trace.rounds(),
        "decision_round": trace.decision_round,
        "undecided_at_horizon": trace.undecided_at_horizon,
        "deltas": trace.deltas.iter().map(S::render).collect::<Vec<_>>(),
        "contraction_ratios": ratios.iter().map(S::render).collect::<Vec<_>>(),
        "decisions": trace.decisions.iter().enumerate().map(|(i, d)| {
            serde_json::json!({
                "process": i + 1,
                "round": d.as_ref().map(|d| d.round),
                "value": d.as_ref().map(|d| d.value.render()),
            })
        }).collect::<Vec<_>>(),
        "verification": {
            "passed": report.passed(),
            "checks": report.checks.iter().map(|c| serde_json::json!({
                "name": c.name,
                "pass": c.pass,
                "detail": c.detail,
            })).collect::<Vec<_>>()
        },
    })
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Error> {
    let names: Vec<&str> = if args.suite == "all" {
        vec![
            "graph-products",
            "safety",
            "contraction",
            "amortized-bounds",
            "quantized",
            "resiliency",
        ]
    } else {
        vec![args.suite.as_str()]
    };
    let mut all_pass = true;
    for name in names {
        for outcome in suites::run_named(name, args.max_n, args.cases, args.seed)? {
            all_pass &= outcome.pass;
            println!(
                "suite {:<24} {} ({} cases){}",
                outcome.name,
                if outcome.pass { "pass" } else { "FAIL" },
                outcome.cases,
                outcome
                    .counterexample
                    .as_deref()
                    .map(|cx| format!(" counterexample: {cx}"))
                    .unwrap_or_default()
            );
        }
    }
    Ok(if all_pass { 0 } else { 1 })
}

struct SweepRow {
    value: String,
    n: usize,
    estimate: usize,
    epsilon: String,
    theoretical_round: Option<u64>,
    measured_round: Option<u64>,
    worst_ratio: String,
    l_blocks: u64,
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, Error> {
    let mut base = match &args.spec {
        Some(path) => RunSpec::load(path)?,
        None => RunSpec::default(),
    };
    base.apply_overrides(&args.overrides);

    let points: Vec<String> = args
        .values
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if points.is_empty() {
        return Err(Error::Config("no axis values given".into()));
    }

    // parse every point up front so a typo fails before any work
    let specs: Vec<(String, RunSpec)> = points
        .iter()
        .map(|point| {
            let mut spec = base.clone();
            match args.axis {
                Axis::N => {
                    spec.n = Some(parse_usize(point)?);
                }
                Axis::Epsilon => {
                    parse_rational(point)?;
                    spec.epsilon = Some(point.clone());
                }
                Axis::Q => {
                    spec.q = Some(parse_usize(point)? as u64);
                }
                Axis::Estimate => {
                    spec.estimate = Some(parse_usize(point)?);
                }
            }
            Ok((point.clone(), spec))
        })
        .collect::<Result<_, Error>>()?;

    let rows: Vec<Result<SweepRow, Error>> = specs
        .par_iter()
        .map(|(point, spec)| sweep_point(point, spec, args.runs))
        .collect();
    let mut table = Vec::with_capacity(rows.len());
    for row in rows {
        table.push(row?);
    }

    let mut writer = csv::Writer::from_path(&args.out)?;
    writer.write_record([
        "axis",
        "value",
        "n",
        "estimate",
        "epsilon",
        "theoretical_round",
        "measured_round",
        "worst_macro_ratio",
        "l_blocks",
    ])?;
    let axis_name = match args.axis {
        Axis::N => "n",
        Axis::Epsilon => "epsilon",
        Axis::Q => "q",
        Axis::Estimate => "estimate",
    };
    for row in &table {
        writer.write_record([
            axis_name,
            &row.value,
            &row.n.to_string(),
            &row.estimate.to_string(),
            &row.epsilon,
            &row.theoretical_round.map_or(String::new(), |r| r.to_string()),
            &row.measured_round.map_or(String::new(), |r| r.to_string()),
            &row.worst_ratio,
            &row.l_blocks.to_string(),
        ])?;
    }
    writer.flush()?;
    println!(
        "sweep over {axis_name}: {} points x {} runs -> {}",
        table.len(),
        args.runs,
        args.out.display()
    );
    Ok(0)
}

/// Worst case over `runs` seeded executions of one axis point: the
/// largest first-round-under-epsilon and the largest macro-window
/// spread ratio.
fn sweep_point(point: &str, spec: &RunSpec, runs: u64) -> Result<SweepRow, Error> {
    let resolved = resolve(spec)?;
    let theoretical = decision_round(&resolved.behavior, resolved.estimate, &resolved.epsilon).ok();
    // cap at 10x the theoretical round when one exists
    let cap = theoretical.map_or(1000, |r| r.saturating_mul(10).max(1));
    let l_blocks = ((resolved.n - 1) as u64).div_ceil((resolved.estimate - 1).max(1) as u64);

    let mut measured: Option<u64> = None;
    let mut worst_ratio_f = f64::NEG_INFINITY;
    let mut worst_ratio_render = String::new();
    for r in 0..runs {
        let mut spec_r = spec.clone();
        spec_r.seed = Some(resolved.seed.wrapping_add(r));
        spec_r.horizon = Some(cap);
        let run_cfg = resolve(&spec_r)?;
        let (first, ratio_render, ratio_f) = match run_cfg.mode {
            NumericMode::Rational => sweep_run::<Rational>(&run_cfg)?,
            NumericMode::Float => sweep_run::<F64>(&run_cfg)?,
        };
        measured = match (measured, first) {
            (_, None) => measured,
            (None, Some(f)) => Some(f),
            (Some(m), Some(f)) => Some(m.max(f)),
        };
        if ratio_f > worst_ratio_f || worst_ratio_render.is_empty() {
            worst_ratio_f = ratio_f;
            worst_ratio_render = ratio_render;
        }
    }
    Ok(SweepRow {
        value: point.to_string(),
        n: resolved.n,
        estimate: resolved.estimate,
        epsilon: resolved.epsilon.to_string(),
        theoretical_round: theoretical,
        measured_round: measured,
        worst_ratio: worst_ratio_render,
        l_blocks,
    })
}

/// First round under epsilon plus the worst macro-window ratio
/// (rendered, and as f64 for cross-run comparison).
type SweepRun = (Option<u64>, String, f64);

fn sweep_run<S: Scalar>(run_cfg: &ResolvedRun) -> Result<SweepRun, Error> {
    let config = config_for::<S>(run_cfg);
    let trace = run(&config)?;
    let eps = S::from_rational(&run_cfg.epsilon);
    let first = trace
        .deltas
        .iter()
        .position(|d| *d <= eps)
        .map(|k| k as u64);
    let ratios = contraction_series(&trace, trace.macro_length);
    match ratios.iter().max() {
        None => Ok((first, String::new(), f64::NEG_INFINITY)),
        Some(worst) => Ok((first, worst.render(), worst.to_f64())),
    }
}

fn parse_usize(s: &str) -> Result<usize, Error> {
    s.parse()
        .map_err(|_| Error::Config(format!("expected a positive integer, got {s:?}")))
}

fn cmd_adversary(args: AdversaryArgs) -> Result<u8, Error> {
    let mut spec = match &args.spec {
        Some(path) => RunSpec::load(path)?,
        None => RunSpec::default(),
    };
    if spec.behavior.is_none() {
        spec.behavior = Some("equal-neighbor".into());
    }
    if spec.epsilon.is_none() {
        spec.epsilon = Some("1/100".into());
    }
    spec.apply_overrides(&args.overrides);
    if spec.initial.is_none() {
        // the spread-preserving worst case starts from a lone maximum
        let n = spec
            .n
            .ok_or_else(|| Error::Config("n is required (field or --n)".into()))?;
        let mut values = vec!["0".to_string(); n];
        values[n - 1] = "1".into();
        spec.initial = Some(values);
    }
    let run_cfg = resolve(&spec)?;
    let horizon = match run_cfg.horizon {
        HorizonPolicy::FixedRounds(r) => r,
        HorizonPolicy::RunToDecision => 60,
    };
    let density = match spec.schedule {
        Some(ScheduleSpec::RandomRooted { density }) => density,
        _ => 0.0,
    };
    let pool = PoolSpec::Random {
        density,
        per_round: args.pool_size,
    };
    let initial: Vec<Rational> = run_cfg.initial.clone();
    let adversary = greedy_adversary(
        &run_cfg.behavior,
        run_cfg.n,
        &initial,
        horizon,
        &pool,
        run_cfg.seed,
    )?;

    std::fs::create_dir_all(&args.out_dir)?;
    for k in 1..=horizon {
        let graph = adversary.schedule.graph_at(k);
        std::fs::write(
            args.out_dir.join(format!("round_{k:04}.edges")),
            graph.to_edge_list(),
        )?;
    }
    let mut ratio_writer = csv::Writer::from_path(args.out_dir.join("ratios.csv"))?;
    ratio_writer.write_record(["round", "ratio"])?;
    for (k, ratio) in adversary.ratios.iter().enumerate() {
        ratio_writer.write_record([(k + 1).to_string(), ratio.render()])?;
    }
    ratio_writer.flush()?;

    let slow = adversary
        .ratios
        .iter()
        .filter(|r| **r >= <Rational as Scalar>::from_ratio(9, 10))
        .count();
    println!("behavior: {}", run_cfg.behavior);
    println!(
        "n = {}, horizon = {horizon}, pool = {} rooted graphs/round, seed = {}",
        run_cfg.n, args.pool_size, run_cfg.seed
    );
    println!("rounds with spread ratio >= 9/10: {slow} of {horizon}");
    if let Some(worst) = adversary.ratios.iter().max() {
        println!("worst per-round ratio: {}", worst.render());
    }
    println!("schedule written to {}", args.out_dir.display());

    // comparison run: amortized midpoint on the identical schedule
    if run_cfg.n >= 2 {
        let macro_len = (run_cfg.n - 1) as u64;
        let config = ExecutionConfig::<Rational> {
            behavior: Behavior::plain(Rule::Midpoint).amortize(macro_len)?,
            schedule: adversary.schedule.clone(),
            initial,
            epsilon: run_cfg.epsilon.clone(),
            horizon: HorizonPolicy::FixedRounds(horizon - horizon % macro_len),
        };
        let trace = run(&config)?;
        if let Some(worst) = contraction_series(&trace, macro_len).iter().max() {
            println!(
                "amortized midpoint on the same schedule: worst macro-round ratio {}",
                worst.render()
            );
        }
    }
    Ok(0)
}
