//! `atlab`: command-line front end of the adversarial-training laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use atlab_core::bounds::{self, BoundInputs, BoundReport, ConstantEstimates};
use atlab_core::experiments::report::{self as rep, PlotRow};
use atlab_core::experiments::{
    self, checks, BudgetMode, ExperimentConfig, ReportFormat, StabilityStudyConfig, SyntheticSpec,
};
use atlab_core::threat::NormKind;
use atlab_core::trainers::{ScheduleKind, StepSchedule};
use atlab_core::{Algorithm, Error, PerturbationSet, Result, SmoothModel, TrainConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "atlab", version, about = "Adversarial training stability laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generalization gap over training, averaged over trials.
    Gap(ExperimentArgs),
    /// Final gap across training-set sizes at fixed iterations.
    VsN {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated, increasing training-set sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n_values: Vec<usize>,
        /// Also sweep this algorithm and compare fitted slopes.
        #[arg(long)]
        against: Option<AlgorithmArg>,
    },
    /// Attacks crafted on one model, evaluated on another.
    Transfer {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Config file of the second model; defaults to the first.
        #[arg(long)]
        config_b: Option<PathBuf>,
        #[arg(long)]
        algorithm_b: Option<AlgorithmArg>,
        #[arg(long)]
        seed_b: Option<u64>,
    },
    /// Sequential TRADES against Free-TRADES.
    FreeTrades {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Coupled runs on neighboring datasets with growth checks.
    Stability(StabilityArgs),
    /// Evaluate the three stability bounds for given constants.
    Bounds(BoundArgs),
    /// Run the built-in verification suites.
    Check {
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Vanilla,
    Free,
    Fast,
    FreeTrades,
    Trades,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Vanilla => Algorithm::Vanilla,
            AlgorithmArg::Free => Algorithm::Free,
            AlgorithmArg::Fast => Algorithm::Fast,
            AlgorithmArg::FreeTrades => Algorithm::FreeTrades,
            AlgorithmArg::Trades => Algorithm::Trades,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Constant,
    COverT,
    COverMt,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L2,
    Linf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BudgetArg {
    MatchedUpdates,
    MatchedOracleCalls,
}

/// Flags shared by the experiment commands; each overrides the matching
/// config-file field.
#[derive(Args, Clone)]
struct ExperimentArgs {
    /// JSON experiment config; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "atlab-out")]
    output: PathBuf,
    #[arg(long)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    trials: Option<usize>,
    /// Training seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    norm: Option<NormArg>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    schedule: Option<ScheduleArg>,
    /// Schedule constant `c`.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    free_steps: Option<usize>,
    #[arg(long)]
    attack_lr: Option<f64>,
    #[arg(long)]
    fast_step: Option<f64>,
    /// Inner PGD steps of vanilla training.
    #[arg(long)]
    inner_steps: Option<usize>,
    /// Evaluation PGD steps.
    #[arg(long)]
    eval_steps: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    budget: Option<BudgetArg>,
    #[arg(long)]
    hidden: Option<usize>,
}

#[derive(Args)]
struct StabilityArgs {
    /// JSON stability-study config; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "atlab-out")]
    output: PathBuf,
    #[arg(long)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long)]
    slack: Option<f64>,
    /// Comma-separated steps at which to report encounter fractions.
    #[arg(long, value_delimiter = ',')]
    encounter_t0: Option<Vec<usize>>,
}

#[derive(Args)]
struct BoundArgs {
    /// JSON `BoundInputs`; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "atlab-out")]
    output: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    attack_lr: Option<f64>,
    #[arg(long)]
    fast_step: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    #[arg(long)]
    lipschitz_w: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
}

fn default_experiment() -> ExperimentConfig {
    let mut data = SyntheticSpec::two_gaussians(500, 1000, 20, 1.0, 100);
    data.separation = 1.5;
    let set = PerturbationSet::l2(0.5, 20).expect("valid default set");
    let train = TrainConfig::new(Algorithm::Free, set, StepSchedule::constant(0.3), 32, 2000, 200);
    let mut cfg = ExperimentConfig::new(SmoothModel::mlp(20, 64, 2), data, train);
    cfg.checkpoint_every = Some(500);
    cfg
}

fn load_experiment(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => rep::read_json(p)?,
        None => default_experiment(),
    };
    let dim_change = args.norm.is_some() || args.epsilon.is_some();
    if let Some(a) = args.algorithm {
        cfg.train.algorithm = a.into();
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = args.data_seed {
        cfg.data.seed = v;
    }
    if let Some(v) = args.n_train {
        cfg.data.n_train = v;
    }
    if let Some(v) = args.n_test {
        cfg.data.n_test = v;
    }
    if let Some(v) = args.iterations {
        cfg.train.total_iterations = v;
    }
    if let Some(v) = args.batch_size {
        cfg.train.batch_size = v;
    }
    if dim_change {
        let norm = match args.norm {
            Some(NormArg::L2) => NormKind::L2,
            Some(NormArg::Linf) => NormKind::Linf,
            None => cfg.train.set.norm,
        };
        let eps = args.epsilon.unwrap_or(cfg.train.set.radius);
        cfg.train.set = PerturbationSet::new(norm, eps, cfg.train.set.dim)?;
        cfg.train.attack_lr = eps;
        cfg.train.fast_step = atlab_core::trainers::default_fast_step(&cfg.train.set);
        cfg.train.inner_attack.step_size = eps / 4.0;
        cfg.eval_attack.step_size = eps / 4.0;
    }
    if let Some(v) = args.free_steps {
        cfg.train.free_steps = v;
    }
    let c = args.lr.unwrap_or(cfg.train.schedule.c);
    let kind = match args.schedule {
        Some(ScheduleArg::Constant) => ScheduleKind::Constant,
        Some(ScheduleArg::COverT) => ScheduleKind::VanishingCOverT,
        Some(ScheduleArg::COverMt) => ScheduleKind::VanishingCOverMt,
        None => cfg.train.schedule.kind,
    };
    cfg.train.schedule = match kind {
        ScheduleKind::Constant => StepSchedule::constant(c),
        ScheduleKind::VanishingCOverT => StepSchedule::c_over_t(c),
        ScheduleKind::VanishingCOverMt => StepSchedule::c_over_mt(c, cfg.train.free_steps),
    };
    if let Some(v) = args.attack_lr {
        cfg.train.attack_lr = v;
    }
    if let Some(v) = args.fast_step {
        cfg.train.fast_step = v;
    }
    if let Some(v) = args.inner_steps {
        cfg.train.inner_attack.steps = v;
    }
    if let Some(v) = args.eval_steps {
        cfg.eval_attack.steps = v;
    }
    if let Some(v) = args.checkpoint_every {
        cfg.checkpoint_every = Some(v);
    }
    if let Some(b) = args.budget {
        cfg.budget = match b {
            BudgetArg::MatchedUpdates => BudgetMode::MatchedUpdates,
            BudgetArg::MatchedOracleCalls => BudgetMode::MatchedOracleCalls,
        };
    }
    if let Some(h) = args.hidden {
        cfg.model.hidden_dim = h;
    }
    cfg.output = Some(args.output.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn cmd_gap(args: &ExperimentArgs) -> Result<()> {
    let cfg = load_experiment(args)?;
    let r = experiments::run_gap_experiment(&cfg)?;
    experiments::emit_report(std::slice::from_ref(&r), ReportFormat::Json, &args.output)?;
    experiments::emit_report(std::slice::from_ref(&r), ReportFormat::Csv, &args.output)?;
    println!(
        "{}: final accuracy gap {:.4} +- {:.4}, risk gap {:.4} +- {:.4} over {} trials",
        r.algorithm.name(),
        r.final_gap_mean,
        r.final_gap_std,
        r.final_risk_gap_mean,
        r.final_risk_gap_std,
        r.trials.len()
    );
    Ok(())
}

fn cmd_vs_n(args: &ExperimentArgs, n_values: &[usize], against: Option<AlgorithmArg>) -> Result<()> {
    let cfg = load_experiment(args)?;
    let mut sweeps = vec![experiments::run_vs_n_experiment(&cfg, n_values)?];
    if let Some(a) = against {
        let other = cfg.clone().with_algorithm(a.into());
        sweeps.push(experiments::run_vs_n_experiment(&other, n_values)?);
    }
    let comparison = match sweeps.as_slice() {
        [a, b] => {
            let (free, vanilla) = if a.algorithm.is_free_style() { (a, b) } else { (b, a) };
            experiments::compare_slopes(free, vanilla).ok()
        }
        _ => None,
    };
    ensure_dir(&args.output)?;
    rep::write_json(&json!({ "sweeps": sweeps, "slope_comparison": comparison }), &args.output.join("report.json"))?;
    let all: Vec<_> = sweeps.iter().flat_map(|s| s.reports.iter().cloned()).collect();
    experiments::emit_report(&all, ReportFormat::Csv, &args.output)?;
    rep::write_plot_data("gap_vs_n", &rep::gap_vs_n_rows(&sweeps), &args.output)?;
    for s in &sweeps {
        println!("{}: spearman(gap, n) = {:+.3}", s.algorithm.name(), s.spearman);
    }
    if let Some(c) = comparison {
        println!(
            "slopes: free {:.3} +- {:.3}, vanilla {:.3} +- {:.3}",
            c.free_slope, c.free_slope_se, c.vanilla_slope, c.vanilla_slope_se
        );
    }
    Ok(())
}

fn cmd_transfer(
    args: &ExperimentArgs,
    config_b: Option<&PathBuf>,
    algorithm_b: Option<AlgorithmArg>,
    seed_b: Option<u64>,
) -> Result<()> {
    let a = load_experiment(args)?;
    let mut b = match config_b {
        Some(p) => rep::read_json::<ExperimentConfig>(p)?,
        None => a.clone(),
    };
    if let Some(alg) = algorithm_b {
        b.train.algorithm = alg.into();
    }
    if let Some(s) = seed_b {
        b.train.seed = s;
    }
    let r = experiments::run_transfer_experiment(&a, &b)?;
    ensure_dir(&args.output)?;
    rep::write_json(&r, &args.output.join("report.json"))?;
    let mut rows = Vec::new();
    for s in 0..2 {
        for t in 0..2 {
            let vals: Vec<f64> = r.per_trial.iter().map(|m| m[s][t]).collect();
            rows.push(PlotRow {
                series: format!("{}_to_{}", ["a", "b"][s], ["a", "b"][t]),
                x: 0.0,
                mean: r.mean[s][t],
                stderr: experiments::stats::std_error(&vals),
            });
        }
    }
    rep::write_plot_data("transfer", &rows, &args.output)?;
    println!("robust accuracy [source][target]: {:?}", r.mean);
    Ok(())
}

fn cmd_free_trades(args: &ExperimentArgs, lambda: Option<f64>) -> Result<()> {
    let mut base = load_experiment(args)?;
    if let Some(l) = lambda {
        base.train.trades_lambda = l;
    }
    let seq = base.clone().with_algorithm(Algorithm::Trades);
    let free = base.with_algorithm(Algorithm::FreeTrades);
    let r = experiments::run_free_trades_comparison(&seq, &free)?;
    ensure_dir(&args.output)?;
    rep::write_json(&r, &args.output.join("report.json"))?;
    experiments::emit_report(&[r.sequential.clone(), r.free.clone()], ReportFormat::Csv, &args.output)?;
    println!(
        "gap trades {:.4}, free-trades {:.4}, paired difference {:+.4} +- {:.4}",
        r.sequential.final_gap_mean, r.free.final_gap_mean, r.paired_diff_mean, r.paired_diff_se
    );
    Ok(())
}

fn default_study() -> StabilityStudyConfig {
    let data = SyntheticSpec::two_gaussians(64, 64, 20, 1.0, 90);
    let set = PerturbationSet::l2(0.05, 20).expect("valid default set");
    let train = TrainConfig::new(Algorithm::Vanilla, set, StepSchedule::c_over_t(0.5), 8, 40, 500);
    let mut cfg = StabilityStudyConfig::new(SmoothModel::mlp(20, 16, 2).with_bounded_loss(true), data, train, 100);
    cfg.probes = 400;
    cfg.encounter_t0 = vec![1, 2, 5];
    cfg
}

#[derive(serde::Serialize)]
struct DistanceRow {
    run: usize,
    iteration: usize,
    step: usize,
    inner: usize,
    lr: f64,
    d_w_before: f64,
    d_w_after: f64,
    d_delta_before: f64,
    d_delta_after: f64,
    s_count: usize,
}

fn cmd_stability(args: &StabilityArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => rep::read_json(p)?,
        None => default_study(),
    };
    if let Some(a) = args.algorithm {
        cfg.train.algorithm = a.into();
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(v) = args.iterations {
        cfg.train.total_iterations = v;
    }
    if let Some(v) = args.seed {
        cfg.train.seed = v;
    }
    if let Some(v) = args.probes {
        cfg.probes = v;
    }
    if let Some(v) = args.slack {
        cfg.slack = v;
    }
    if let Some(v) = &args.encounter_t0 {
        cfg.encounter_t0 = v.clone();
    }
    let r = experiments::run_stability_study(&cfg)?;
    ensure_dir(&args.output)?;
    rep::write_json(&r, &args.output.join("report.json"))?;
    let path = args.output.join("trace.csv");
    let mut w = csv_writer(&path)?;
    for (run, t) in r.traces.iter().enumerate() {
        for rec in &t.records {
            w.serialize(DistanceRow {
                run,
                iteration: rec.iteration,
                step: rec.step,
                inner: rec.inner,
                lr: rec.lr,
                d_w_before: rec.d_w_before,
                d_w_after: rec.d_w_after,
                d_delta_before: rec.d_delta_before,
                d_delta_after: rec.d_delta_after,
                s_count: rec.s_count,
            })
            .map_err(|e| Error::Serialization(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
    let rows: Vec<PlotRow> = r
        .mean_distance
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let vals: Vec<f64> = r.traces.iter().map(|t| t.records[k].d_w_after).collect();
            PlotRow {
                series: cfg.train.algorithm.name().into(),
                x: (k + 1) as f64,
                mean: d,
                stderr: experiments::stats::std_error(&vals),
            }
        })
        .collect();
    rep::write_plot_data("distance", &rows, &args.output)?;
    println!(
        "{}: {} violations in {} checks with constants x{}; control x{}: {} violations",
        cfg.train.algorithm.name(),
        r.growth.outside.violations + r.growth.step_wise.violations,
        r.growth.outside.checked + r.growth.step_wise.checked,
        cfg.slack,
        cfg.control_factor,
        r.control.outside.violations + r.control.encounter.violations + r.control.step_wise.violations,
    );
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn cmd_bounds(args: &BoundArgs) -> Result<()> {
    let mut inputs: BoundInputs = match &args.config {
        Some(p) => rep::read_json(p)?,
        None => BoundInputs {
            n: 1,
            b: 1,
            t: 1,
            m: 1,
            c: 1.0,
            eps: 1.0,
            attack_lr: 0.0,
            fast_step: 0.0,
            constants: ConstantEstimates {
                lipschitz: 1.0,
                lipschitz_w: 1.0,
                beta: 1.0,
                psi: 1.0,
                sample_count: 0,
                region: "given".into(),
            },
        },
    };
    macro_rules! set {
        ($($field:ident).+ <- $flag:expr) => {
            if let Some(v) = $flag {
                inputs.$($field).+ = v;
            }
        };
    }
    set!(n <- args.n);
    set!(b <- args.b);
    set!(t <- args.t);
    set!(m <- args.m);
    set!(c <- args.c);
    set!(eps <- args.epsilon);
    set!(attack_lr <- args.attack_lr);
    set!(fast_step <- args.fast_step);
    set!(constants.lipschitz <- args.lipschitz);
    set!(constants.lipschitz_w <- args.lipschitz_w);
    set!(constants.beta <- args.beta);
    set!(constants.psi <- args.psi);
    let reports: Vec<BoundReport> = vec![
        bounds::bound_vanilla(&inputs)?,
        bounds::bound_free(&inputs)?,
        bounds::bound_fast(&inputs)?,
    ];
    ensure_dir(&args.output)?;
    rep::write_json(&json!({ "inputs": inputs, "bounds": reports }), &args.output.join("report.json"))?;
    for r in &reports {
        println!("{:>8}: lambda {:.6}, bound {:.6}", r.algorithm, r.lambda, r.bound_value);
    }
    Ok(())
}

fn cmd_check(quick: bool, seed: u64, output: Option<&PathBuf>) -> Result<bool> {
    let results = checks::run_checks(quick, seed)?;
    for c in &results {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(dir) = output {
        ensure_dir(dir)?;
        rep::write_json(&results, &dir.join("report.json"))?;
    }
    Ok(results.iter().all(|c| c.passed))
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Gap(a) => cmd_gap(a)?,
        Command::VsN { exp, n_values, against } => cmd_vs_n(exp, n_values, *against)?,
        Command::Transfer {
            exp,
            config_b,
            algorithm_b,
            seed_b,
        } => cmd_transfer(exp, config_b.as_ref(), *algorithm_b, *seed_b)?,
        Command::FreeTrades { exp, lambda } => cmd_free_trades(exp, *lambda)?,
        Command::Stability(a) => cmd_stability(a)?,
        Command::Bounds(a) => cmd_bounds(a)?,
        Command::Check { quick, seed, output } => return cmd_check(*quick, *seed, output.as_ref()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("ATLAB_LOG"))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::from(2)
        }
    }
}
