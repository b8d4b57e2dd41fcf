//! Experiment orchestration: learning-curve gaps, gap-versus-n sweeps,
//! transferred attacks, TRADES comparisons, and the stability study.
//!
//! Every trial is a pure function of its config and trial index, so trials
//! run in parallel and are reduced in order afterwards.

pub mod checks;
pub mod report;
pub mod stability_study;
pub mod stats;
pub mod synthetic;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, BoundReport, ConstantEstimates, PsiEstimate, RegionSampler};
use crate::error::{Error, Result};
use crate::models::{Dataset, ParamVector, SmoothModel};
use crate::numcore::SeededRng;
use crate::threat::{self, AttackConfig};
use crate::trainers::{Algorithm, Objective, TrainConfig, TrainRun};

pub use report::{emit_report, read_report_json, ReportFormat};
pub use stability_study::{run_stability_study, StabilityStudyConfig, StabilityStudyReport};
pub use stats::LineFit;
pub use synthetic::{make_synthetic, SyntheticKind, SyntheticSpec};

const EVAL_STREAM: u64 = 1000;
const CONSTANT_STREAM: u64 = 50;

/// What is held equal when algorithms are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// `total_iterations` weight updates for every algorithm.
    #[default]
    MatchedUpdates,
    /// The gradient-oracle calls vanilla training would spend in
    /// `total_iterations` updates with the configured inner attack.
    MatchedOracleCalls,
}

fn default_trials() -> usize {
    1
}

fn default_probes() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: SmoothModel,
    pub data: SyntheticSpec,
    pub train: TrainConfig,
    /// Evaluation adversary; keep it identical across compared algorithms.
    pub eval_attack: AttackConfig,
    /// Iterations between checkpoints; defaults to `n / b`. The final
    /// iteration is always a checkpoint.
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub budget: BudgetMode,
    /// Probes per constant estimate for the attached bounds.
    #[serde(default = "default_probes")]
    pub constant_probes: usize,
    #[serde(default)]
    pub output: Option<std::path::PathBuf>,
}

impl ExperimentConfig {
    /// Defaults: one trial, evaluation attack `AttackConfig::evaluation_default(eps)`.
    pub fn new(model: SmoothModel, data: SyntheticSpec, train: TrainConfig) -> Self {
        Self {
            model,
            data,
            eval_attack: AttackConfig::evaluation_default(train.set.radius),
            train,
            checkpoint_every: None,
            trials: default_trials(),
            budget: BudgetMode::default(),
            constant_probes: default_probes(),
            output: None,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.train.algorithm = algorithm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.data.validate()?;
        self.train.validate()?;
        self.eval_attack.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::InvalidConfig("checkpoint cadence must be >= 1".into()));
        }
        if self.model.input_dim != self.data.dim || self.train.set.dim != self.data.dim {
            return Err(Error::InvalidConfig(format!(
                "model input dim {}, perturbation dim {} and data dim {} must agree",
                self.model.input_dim, self.train.set.dim, self.data.dim
            )));
        }
        if self.model.class_count != 2 {
            return Err(Error::InvalidConfig(format!(
                "synthetic data has two classes, model has {}",
                self.model.class_count
            )));
        }
        if self.train.batch_size > self.data.n_train {
            return Err(Error::InvalidConfig(format!(
                "batch size {} exceeds n = {}",
                self.train.batch_size, self.data.n_train
            )));
        }
        Ok(())
    }

    /// Training config after the budget rule is applied.
    pub fn effective_train(&self) -> Result<TrainConfig> {
        let mut cfg = self.train;
        if self.budget == BudgetMode::MatchedOracleCalls {
            let attack = cfg.inner_attack;
            let budget = cfg.total_iterations * (attack.steps * attack.restarts + 1);
            let per_update = match cfg.algorithm {
                Algorithm::Vanilla | Algorithm::Trades => attack.steps * attack.restarts + 1,
                Algorithm::Fast => 2,
                Algorithm::Free | Algorithm::FreeTrades => 1,
            };
            let mut t = budget / per_update;
            if cfg.algorithm.is_free_style() {
                t -= t % cfg.free_steps;
            }
            cfg.total_iterations = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn checkpoint_iterations(&self) -> Result<Vec<usize>> {
        let t = self.effective_train()?.total_iterations;
        let every = self
            .checkpoint_every
            .unwrap_or((self.data.n_train / self.train.batch_size).max(1));
        let mut its: Vec<usize> = (1..).map(|k| k * every).take_while(|&i| i < t).collect();
        its.push(t);
        Ok(its)
    }

    fn trial_data(&self, trial: usize) -> SyntheticSpec {
        self.data.with_seed(self.data.seed.wrapping_add(trial as u64))
    }

    fn trial_train(&self, trial: usize) -> Result<TrainConfig> {
        let mut cfg = self.effective_train()?;
        cfg.seed = cfg.seed.wrapping_add(trial as u64);
        Ok(cfg)
    }
}

/// Robust accuracies and risks of one trial at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "CheckpointRecord", from = "CheckpointRecord")]
pub struct Checkpoint {
    pub iteration: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub train_risk: f64,
    pub test_risk: f64,
}

impl Checkpoint {
    /// Accuracy gap `train - test`.
    pub fn gap(&self) -> f64 {
        self.train_acc - self.test_acc
    }

    /// Risk gap `test - train`.
    pub fn risk_gap(&self) -> f64 {
        self.test_risk - self.train_risk
    }
}

/// Serialized form: the gaps are written for readers and recomputed on load.
#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    iteration: usize,
    train_acc: f64,
    test_acc: f64,
    train_risk: f64,
    test_risk: f64,
    #[serde(default)]
    gap: f64,
    #[serde(default)]
    risk_gap: f64,
}

impl From<Checkpoint> for CheckpointRecord {
    fn from(c: Checkpoint) -> Self {
        Self {
            iteration: c.iteration,
            train_acc: c.train_acc,
            test_acc: c.test_acc,
            train_risk: c.train_risk,
            test_risk: c.test_risk,
            gap: c.gap(),
            risk_gap: c.risk_gap(),
        }
    }
}

impl From<CheckpointRecord> for Checkpoint {
    fn from(r: CheckpointRecord) -> Self {
        Self {
            iteration: r.iteration,
            train_acc: r.train_acc,
            test_acc: r.test_acc,
            train_risk: r.train_risk,
            test_risk: r.test_risk,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub data_seed: u64,
    pub train_seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub oracle_calls: usize,
    /// Min-gradient series of the run and the constant read from it; `None`
    /// for a run without updates.
    pub psi: Option<PsiEstimate>,
    pub initial_w: ParamVector,
    pub final_w: ParamVector,
}

impl TrialResult {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least one checkpoint")
    }
}

/// Across-trial mean and standard deviation at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub iteration: usize,
    pub train_acc_mean: f64,
    pub test_acc_mean: f64,
    pub train_risk_mean: f64,
    pub test_risk_mean: f64,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub risk_gap_mean: f64,
    pub risk_gap_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub algorithm: Algorithm,
    /// Config echo, budget rule already applied to `config.train`.
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub summary: Vec<CheckpointSummary>,
    pub final_gap_mean: f64,
    pub final_gap_std: f64,
    pub final_risk_gap_mean: f64,
    pub final_risk_gap_std: f64,
    pub oracle_calls_mean: f64,
    /// Smallest recorded `||grad_delta||` over all trials.
    pub min_grad_delta_norm: f64,
    pub psi_degenerate: bool,
    pub constants: Option<ConstantEstimates>,
    pub bound: Option<BoundReport>,
}

impl GapReport {
    pub fn final_gaps(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.final_checkpoint().gap()).collect()
    }

    pub fn final_risk_gaps(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.final_checkpoint().risk_gap()).collect()
    }

    pub fn n_train(&self) -> usize {
        self.config.data.n_train
    }
}

fn evaluate_checkpoint(
    cfg: &ExperimentConfig,
    w: &ParamVector,
    train: &Dataset,
    test: &Dataset,
    data_seed: u64,
    index: usize,
    iteration: usize,
) -> Result<Checkpoint> {
    let set = cfg.train.set;
    let stream = EVAL_STREAM + 2 * index as u64;
    let mut rng = SeededRng::new(data_seed, stream);
    let tr = threat::empirical_robust_risk(&cfg.model, w, train, &set, &cfg.eval_attack, &mut rng)?;
    let mut rng = SeededRng::new(data_seed, stream + 1);
    let te = threat::empirical_robust_risk(&cfg.model, w, test, &set, &cfg.eval_attack, &mut rng)?;
    Ok(Checkpoint {
        iteration,
        train_acc: tr.accuracy,
        test_acc: te.accuracy,
        train_risk: tr.risk,
        test_risk: te.risk,
    })
}

/// One trial: train with checkpoints, evaluating with the fixed adversary.
/// The evaluation streams depend only on the data seed, so algorithms
/// compared on the same data face identical attack randomness.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let data = cfg.trial_data(trial);
    let (train, test) = make_synthetic(&data)?;
    let tcfg = cfg.trial_train(trial)?;
    let objective = Objective::for_config(&cfg.model, &tcfg)?;
    let mut run = TrainRun::new(&cfg.model, &objective, &train, tcfg)?;
    let initial_w = run.w().clone();
    let mut checkpoints = Vec::new();
    for (k, it) in cfg.checkpoint_iterations()?.into_iter().enumerate() {
        while run.iteration() < it {
            run.advance()?;
        }
        checkpoints.push(evaluate_checkpoint(cfg, run.w(), &train, &test, data.seed, k, it)?);
    }
    let (final_w, trace) = run.finish();
    let psi = if trace.records.is_empty() {
        None
    } else {
        Some(bounds::estimate_psi(&trace, bounds::DEFAULT_PSI_FLOOR)?)
    };
    Ok(TrialResult {
        trial,
        data_seed: data.seed,
        train_seed: tcfg.seed,
        checkpoints,
        oracle_calls: trace.oracle_calls(),
        psi,
        initial_w,
        final_w,
    })
}

fn summarize(trials: &[TrialResult]) -> Vec<CheckpointSummary> {
    let count = trials[0].checkpoints.len();
    (0..count)
        .map(|k| {
            let at: Vec<&Checkpoint> = trials.iter().map(|t| &t.checkpoints[k]).collect();
            let col = |f: &dyn Fn(&Checkpoint) -> f64| at.iter().map(|c| f(c)).collect::<Vec<f64>>();
            let (gap_mean, gap_std) = stats::mean_std(&col(&|c| c.gap()));
            let (risk_gap_mean, risk_gap_std) = stats::mean_std(&col(&|c| c.risk_gap()));
            CheckpointSummary {
                iteration: at[0].iteration,
                train_acc_mean: stats::mean_std(&col(&|c| c.train_acc)).0,
                test_acc_mean: stats::mean_std(&col(&|c| c.test_acc)).0,
                train_risk_mean: stats::mean_std(&col(&|c| c.train_risk)).0,
                test_risk_mean: stats::mean_std(&col(&|c| c.test_risk)).0,
                gap_mean,
                gap_std,
                risk_gap_mean,
                risk_gap_std,
            }
        })
        .collect()
}

/// Constants estimated along the init-to-final segments of every trial, with
/// `psi` from the recorded gradient floors.
fn estimate_constants(cfg: &ExperimentConfig, trials: &[TrialResult]) -> Result<Option<ConstantEstimates>> {
    let psi = trials
        .iter()
        .filter_map(|t| t.psi.as_ref().map(|p| p.psi))
        .fold(0.0_f64, f64::max);
    if psi == 0.0 || cfg.constant_probes == 0 {
        return Ok(None);
    }
    let (train, _) = make_synthetic(&cfg.trial_data(0))?;
    let segments = trials
        .iter()
        .map(|t| (t.initial_w.clone(), t.final_w.clone()))
        .collect();
    let region = RegionSampler::new(segments, train.samples().to_vec(), cfg.train.set, 0.1)?;
    let mut rng = SeededRng::new(cfg.train.seed, CONSTANT_STREAM);
    ConstantEstimates::estimate(&cfg.model, &region, cfg.constant_probes, 1e-4, psi, &mut rng).map(Some)
}

fn attach_bound(
    cfg: &ExperimentConfig,
    constants: &ConstantEstimates,
    measured_risk_gap: f64,
) -> Result<Option<BoundReport>> {
    let train = cfg.train;
    if !train.schedule.is_vanishing() || train.total_iterations == 0 {
        return Ok(None);
    }
    let inputs = BoundInputs {
        n: cfg.data.n_train,
        b: train.batch_size,
        t: train.total_iterations,
        m: train.free_steps,
        c: train.schedule.c,
        eps: train.set.radius,
        attack_lr: train.attack_lr,
        fast_step: train.fast_step,
        constants: constants.clone(),
    };
    let report = match train.algorithm {
        Algorithm::Vanilla => bounds::bound_vanilla(&inputs)?,
        Algorithm::Free => bounds::bound_free(&inputs)?,
        Algorithm::Fast => bounds::bound_fast(&inputs)?,
        Algorithm::FreeTrades | Algorithm::Trades => return Ok(None),
    };
    Ok(Some(report.with_measured_gap(measured_risk_gap)))
}

/// Train `cfg.trials` independent runs, evaluate each at every checkpoint
/// and aggregate. Bounds are attached for vanishing schedules of the three
/// analyzed algorithms.
pub fn run_gap_experiment(cfg: &ExperimentConfig) -> Result<GapReport> {
    cfg.validate()?;
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect::<Result<_>>()?;
    let summary = summarize(&trials);
    let (final_gap_mean, final_gap_std) =
        stats::mean_std(&trials.iter().map(|t| t.final_checkpoint().gap()).collect::<Vec<_>>());
    let (final_risk_gap_mean, final_risk_gap_std) =
        stats::mean_std(&trials.iter().map(|t| t.final_checkpoint().risk_gap()).collect::<Vec<_>>());
    let min_grad_delta_norm = trials
        .iter()
        .filter_map(|t| t.psi.as_ref().map(|p| p.min_norm))
        .fold(f64::INFINITY, f64::min);
    let psi_degenerate = trials.iter().any(|t| t.psi.as_ref().is_some_and(|p| p.degenerate));
    let oracle_calls_mean =
        trials.iter().map(|t| t.oracle_calls as f64).sum::<f64>() / trials.len() as f64;
    let mut echo = cfg.clone();
    echo.train = cfg.effective_train()?;
    let constants = if echo.train.schedule.is_vanishing() {
        estimate_constants(&echo, &trials)?
    } else {
        None
    };
    let bound = match &constants {
        Some(k) => attach_bound(&echo, k, final_risk_gap_mean)?,
        None => None,
    };
    tracing::info!(
        algorithm = cfg.train.algorithm.name(),
        trials = cfg.trials,
        final_gap_mean,
        "gap experiment finished"
    );
    Ok(GapReport {
        algorithm: cfg.train.algorithm,
        config: echo,
        trials,
        summary,
        final_gap_mean,
        final_gap_std,
        final_risk_gap_mean,
        final_risk_gap_std,
        oracle_calls_mean,
        min_grad_delta_norm,
        psi_degenerate,
        constants,
        bound,
    })
}

/// Gap sweep over training-set sizes at fixed `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsNReport {
    pub algorithm: Algorithm,
    pub n_values: Vec<usize>,
    pub reports: Vec<GapReport>,
    /// Rank correlation of the mean final accuracy gap with `n`.
    pub spearman: f64,
    /// Trial-level fit of `ln(gap)` on `ln(n)`, gaps floored at `GAP_FLOOR`;
    /// `None` with fewer than three points or a single `n`.
    pub slope: Option<LineFit>,
}

/// Floor applied to gaps before taking logarithms.
pub const GAP_FLOOR: f64 = 1e-3;

pub fn run_vs_n_experiment(base: &ExperimentConfig, n_values: &[usize]) -> Result<VsNReport> {
    if n_values.is_empty() {
        return Err(Error::InvalidConfig("no n values".into()));
    }
    if n_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig(format!("n values must be increasing: {n_values:?}")));
    }
    if let Some(&n) = n_values.iter().find(|&&n| n < base.train.batch_size) {
        return Err(Error::InvalidConfig(format!(
            "n = {n} is below the batch size {}",
            base.train.batch_size
        )));
    }
    let reports = n_values
        .iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.data.n_train = n;
            run_gap_experiment(&cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let means: Vec<f64> = reports.iter().map(|r| r.final_gap_mean).collect();
    let spearman = if ns.len() >= 2 { stats::spearman(&ns, &means)? } else { 0.0 };
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for r in &reports {
        for g in r.final_gaps() {
            xs.push((r.n_train() as f64).ln());
            ys.push(g.max(GAP_FLOOR).ln());
        }
    }
    let slope = stats::fit_line(&xs, &ys).ok();
    Ok(VsNReport {
        algorithm: base.train.algorithm,
        n_values: n_values.to_vec(),
        reports,
        spearman,
        slope,
    })
}

/// Free-versus-vanilla slope comparison with the predicted exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeComparison {
    pub free_slope: f64,
    pub free_slope_se: f64,
    pub vanilla_slope: f64,
    pub vanilla_slope_se: f64,
    /// Free slope below vanilla's or within one combined standard error.
    pub free_not_shallower: bool,
    /// Predicted exponent of `n` for free training: `-1`.
    pub predicted_free_exponent: f64,
    /// Predicted exponent for vanilla training, `-lambda / (lambda + 1)`
    /// with the smoothness estimate of the largest-`n` report, when attached.
    pub predicted_vanilla_exponent: Option<f64>,
}

pub fn compare_slopes(free: &VsNReport, vanilla: &VsNReport) -> Result<SlopeComparison> {
    let (Some(f), Some(v)) = (free.slope, vanilla.slope) else {
        return Err(Error::InvalidInput("slope fits need at least three points each".into()));
    };
    let se = (f.slope_se * f.slope_se + v.slope_se * v.slope_se).sqrt();
    let predicted_vanilla_exponent = vanilla
        .reports
        .last()
        .and_then(|r| r.bound.as_ref())
        .map(|b| -b.lambda / (b.lambda + 1.0));
    Ok(SlopeComparison {
        free_slope: f.slope,
        free_slope_se: f.slope_se,
        vanilla_slope: v.slope,
        vanilla_slope_se: v.slope_se,
        free_not_shallower: f.slope <= v.slope + se,
        predicted_free_exponent: -1.0,
        predicted_vanilla_exponent,
    })
}

/// Robust accuracies under attacks crafted on one model and applied to
/// another; index order is `[source][target]`, 0 for A and 1 for B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub config_a: ExperimentConfig,
    pub config_b: ExperimentConfig,
    pub per_trial: Vec<[[f64; 2]; 2]>,
    pub mean: [[f64; 2]; 2],
    /// Trials where every transferred entry is at least the target's
    /// white-box accuracy.
    pub transfer_not_stronger: usize,
}

pub fn run_transfer_experiment(cfg_a: &ExperimentConfig, cfg_b: &ExperimentConfig) -> Result<TransferReport> {
    cfg_a.validate()?;
    cfg_b.validate()?;
    let (ma, mb) = (&cfg_a.model, &cfg_b.model);
    if ma.input_dim != mb.input_dim || ma.class_count != mb.class_count {
        return Err(Error::InvalidConfig(format!(
            "models disagree on shape: {}x{} vs {}x{}",
            ma.input_dim, ma.class_count, mb.input_dim, mb.class_count
        )));
    }
    if cfg_a.data != cfg_b.data || cfg_a.trials != cfg_b.trials {
        return Err(Error::InvalidConfig("transfer configs must share data and trial count".into()));
    }
    if cfg_a.eval_attack != cfg_b.eval_attack || cfg_a.train.set != cfg_b.train.set {
        return Err(Error::InvalidConfig(
            "transfer configs must share the evaluation attack and set".into(),
        ));
    }
    let per_trial: Vec<[[f64; 2]; 2]> = (0..cfg_a.trials)
        .into_par_iter()
        .map(|i| transfer_trial(cfg_a, cfg_b, i))
        .collect::<Result<_>>()?;
    let mut mean = [[0.0; 2]; 2];
    for m in &per_trial {
        for s in 0..2 {
            for t in 0..2 {
                mean[s][t] += m[s][t] / per_trial.len() as f64;
            }
        }
    }
    let transfer_not_stronger = per_trial
        .iter()
        .filter(|m| m[0][1] >= m[1][1] && m[1][0] >= m[0][0])
        .count();
    Ok(TransferReport {
        config_a: cfg_a.clone(),
        config_b: cfg_b.clone(),
        per_trial,
        mean,
        transfer_not_stronger,
    })
}

fn transfer_trial(cfg_a: &ExperimentConfig, cfg_b: &ExperimentConfig, trial: usize) -> Result<[[f64; 2]; 2]> {
    let data = cfg_a.trial_data(trial);
    let (train, test) = make_synthetic(&data)?;
    let train_one = |cfg: &ExperimentConfig| -> Result<ParamVector> {
        let tcfg = cfg.trial_train(trial)?;
        let objective = Objective::for_config(&cfg.model, &tcfg)?;
        let mut run = TrainRun::new(&cfg.model, &objective, &train, tcfg)?;
        run.run_to_end()?;
        Ok(run.finish().0)
    };
    let models = [(cfg_a.model, train_one(cfg_a)?), (cfg_b.model, train_one(cfg_b)?)];
    let set = cfg_a.train.set;
    let mut out = [[0.0; 2]; 2];
    for (s, (model, w)) in models.iter().enumerate() {
        let mut rng = SeededRng::new(data.seed, EVAL_STREAM + 500 + s as u64);
        let deltas = threat::craft_attacks(model, w, &test, &set, &cfg_a.eval_attack, &mut rng)?;
        for (t, (target, wt)) in models.iter().enumerate() {
            out[s][t] = threat::evaluate_under(target, wt, &test, &deltas)?.accuracy;
        }
    }
    Ok(out)
}

/// Sequential TRADES against Free-TRADES on identical data and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradesComparison {
    pub sequential: GapReport,
    pub free: GapReport,
    /// Mean over trials of `gap(free) - gap(sequential)`, paired by trial.
    pub paired_diff_mean: f64,
    pub paired_diff_se: f64,
}

pub fn run_free_trades_comparison(
    cfg_sequential: &ExperimentConfig,
    cfg_free: &ExperimentConfig,
) -> Result<TradesComparison> {
    if cfg_sequential.train.algorithm != Algorithm::Trades {
        return Err(Error::InvalidConfig(format!(
            "first config must be sequential trades, got {}",
            cfg_sequential.train.algorithm.name()
        )));
    }
    if cfg_free.train.algorithm != Algorithm::FreeTrades {
        return Err(Error::InvalidConfig(format!(
            "second config must be free-trades, got {}",
            cfg_free.train.algorithm.name()
        )));
    }
    if cfg_sequential.data != cfg_free.data || cfg_sequential.trials != cfg_free.trials {
        return Err(Error::InvalidConfig("paired configs must share data and trial count".into()));
    }
    let sequential = run_gap_experiment(cfg_sequential)?;
    let free = run_gap_experiment(cfg_free)?;
    let diffs: Vec<f64> = free
        .final_gaps()
        .iter()
        .zip(sequential.final_gaps())
        .map(|(f, s)| f - s)
        .collect();
    Ok(TradesComparison {
        paired_diff_mean: stats::mean_std(&diffs).0,
        paired_diff_se: stats::std_error(&diffs),
        sequential,
        free,
    })
}
