//! Vanilla, free, fast, and Free-TRADES adversarial training.
//!
//! All loops are driven by [`TrainRun`], a steppable state machine that
//! performs one weight update per [`TrainRun::advance`]. Coupled stability
//! runs advance two of them in lockstep.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::models::{
    self, batch_grads, Dataset, Evaluation, LabeledSample, LossOracle, ParamVector, SmoothModel,
};
use crate::numcore::{self, RealVector, SeededRng};
use crate::threat::{pgd_attack_with_streams, AttackConfig, NormKind, PerturbationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    VanishingCOverT,
    VanishingCOverMt,
}

/// Weight step size as a function of the (1-based) step index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub c: f64,
    /// Only read by [`ScheduleKind::VanishingCOverMt`].
    #[serde(default = "one")]
    pub m: usize,
}

fn one() -> usize {
    1
}

impl StepSchedule {
    pub fn constant(c: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            c,
            m: 1,
        }
    }

    pub fn c_over_t(c: f64) -> Self {
        Self {
            kind: ScheduleKind::VanishingCOverT,
            c,
            m: 1,
        }
    }

    pub fn c_over_mt(c: f64, m: usize) -> Self {
        Self {
            kind: ScheduleKind::VanishingCOverMt,
            c,
            m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "schedule constant must be finite and positive, got {}",
                self.c
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("schedule m must be >= 1".into()));
        }
        Ok(())
    }

    pub fn step_size(&self, t: usize) -> Result<f64> {
        step_size(self, t)
    }

    pub fn is_vanishing(&self) -> bool {
        self.kind != ScheduleKind::Constant
    }
}

/// `c`, `c / t`, or `c / (m t)`.
pub fn step_size(schedule: &StepSchedule, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidInput("step index starts at 1".into()));
    }
    Ok(match schedule.kind {
        ScheduleKind::Constant => schedule.c,
        ScheduleKind::VanishingCOverT => schedule.c / t as f64,
        ScheduleKind::VanishingCOverMt => schedule.c / (schedule.m as f64 * t as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Full PGD inner maximization, then one weight step.
    Vanilla,
    /// `m` simultaneous weight/perturbation updates per minibatch.
    Free,
    /// One random-start projected step, then one weight step.
    Fast,
    /// The free loop on the TRADES surrogate.
    FreeTrades,
    /// The vanilla loop on the TRADES surrogate.
    Trades,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Vanilla => "vanilla",
            Algorithm::Free => "free",
            Algorithm::Fast => "fast",
            Algorithm::FreeTrades => "free_trades",
            Algorithm::Trades => "trades",
        }
    }

    pub fn is_free_style(&self) -> bool {
        matches!(self, Algorithm::Free | Algorithm::FreeTrades)
    }

    pub fn uses_trades(&self) -> bool {
        matches!(self, Algorithm::FreeTrades | Algorithm::Trades)
    }
}

pub const DEFAULT_FREE_STEPS: usize = 4;
pub const DEFAULT_TRADES_LAMBDA: f64 = 1.0 / 6.0;

/// Default single-step size for fast training, relative to the radius.
pub fn default_fast_step(set: &PerturbationSet) -> f64 {
    match set.norm {
        NormKind::Linf => 7.0 / 8.0 * set.radius,
        NormKind::L2 => set.radius / 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub set: PerturbationSet,
    pub schedule: StepSchedule,
    /// Perturbation step size of the free loops.
    pub attack_lr: f64,
    /// Perturbation step size of fast training.
    pub fast_step: f64,
    pub free_steps: usize,
    pub batch_size: usize,
    /// Number of weight updates.
    pub total_iterations: usize,
    pub trades_lambda: f64,
    /// Inner maximization of the vanilla loops.
    pub inner_attack: AttackConfig,
    pub seed: u64,
}

impl TrainConfig {
    /// A config with the default hyperparameters for every algorithm:
    /// free `attack_lr = eps`, `m = 4`, per-norm fast step, ten-step PGD of
    /// size `eps / 4` for the vanilla inner loop, TRADES coefficient 1/6.
    pub fn new(
        algorithm: Algorithm,
        set: PerturbationSet,
        schedule: StepSchedule,
        batch_size: usize,
        total_iterations: usize,
        seed: u64,
    ) -> Self {
        Self {
            algorithm,
            set,
            schedule,
            attack_lr: set.radius,
            fast_step: default_fast_step(&set),
            free_steps: DEFAULT_FREE_STEPS,
            batch_size,
            total_iterations,
            trades_lambda: DEFAULT_TRADES_LAMBDA,
            inner_attack: AttackConfig::evaluation_default(set.radius),
            seed,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    /// Weight updates per minibatch: `m` for the free loops, else 1.
    pub fn updates_per_batch(&self) -> usize {
        if self.algorithm.is_free_style() {
            self.free_steps
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.set.validate()?;
        self.schedule.validate()?;
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )))
            }
        };
        nonneg("attack_lr", self.attack_lr)?;
        nonneg("fast_step", self.fast_step)?;
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.free_steps == 0 {
            return Err(Error::InvalidConfig("free steps must be >= 1".into()));
        }
        if self.algorithm.is_free_style() && self.total_iterations % self.free_steps != 0 {
            return Err(Error::InvalidConfig(format!(
                "total iterations {} not divisible by free steps {}",
                self.total_iterations, self.free_steps
            )));
        }
        if self.algorithm.uses_trades() && !(self.trades_lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "trades lambda must be positive, got {}",
                self.trades_lambda
            )));
        }
        if matches!(self.algorithm, Algorithm::Vanilla | Algorithm::Trades) {
            self.inner_attack.validate()?;
        }
        Ok(())
    }

    fn validate_for(&self, dataset: &Dataset) -> Result<()> {
        self.validate()?;
        if self.batch_size > dataset.len() {
            return Err(Error::InvalidConfig(format!(
                "batch size {} exceeds dataset size {}",
                self.batch_size,
                dataset.len()
            )));
        }
        ensure_len("perturbation set dim", self.set.dim, dataset.input_dim())
    }
}

/// Independent streams derived from one master seed. Coupled runs build two
/// identical plans so both trajectories see the same draws.
#[derive(Debug, Clone)]
pub struct StreamPlan {
    pub init: SeededRng,
    pub batch: SeededRng,
    pub delta: SeededRng,
    pub restart: SeededRng,
}

impl StreamPlan {
    pub const INIT: u64 = 0;
    pub const BATCH: u64 = 1;
    pub const DELTA: u64 = 2;
    pub const RESTART: u64 = 3;

    pub fn new(seed: u64) -> Self {
        Self {
            init: SeededRng::new(seed, Self::INIT),
            batch: SeededRng::new(seed, Self::BATCH),
            delta: SeededRng::new(seed, Self::DELTA),
            restart: SeededRng::new(seed, Self::RESTART),
        }
    }
}

/// TRADES surrogate `CE(f(x), y) + KL(p(x) || p(x + delta)) / lambda`.
///
/// The consistency term is exactly zero at `delta = 0`. The bounded-loss
/// squashing of the wrapped model is not applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradesObjective {
    pub model: SmoothModel,
    pub lambda: f64,
}

impl TradesObjective {
    pub fn new(model: SmoothModel, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "trades lambda must be positive, got {lambda}"
            )));
        }
        model.validate()?;
        Ok(Self { model, lambda })
    }

    fn check(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<()> {
        ensure_len("weights", w.len(), self.model.param_dim())?;
        ensure_len("delta", delta.len(), self.model.input_dim)?;
        ensure_len("sample features", sample.x.len(), self.model.input_dim)?;
        if sample.y >= self.model.class_count {
            return Err(Error::InvalidInput(format!(
                "label {} >= class count {}",
                sample.y, self.model.class_count
            )));
        }
        Ok(())
    }
}

fn kl(log_p: &[f64], log_q: &[f64]) -> f64 {
    log_p
        .iter()
        .zip(log_q)
        .map(|(lp, lq)| lp.exp() * (lp - lq))
        .sum::<f64>()
        .max(0.0)
}

impl LossOracle for TradesObjective {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn input_dim(&self) -> usize {
        self.model.input_dim
    }

    fn loss(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<f64> {
        self.check(w, delta, sample)?;
        let clean = self.model.forward(w, &sample.x).logits;
        let adv = self
            .model
            .forward(w, &SmoothModel::perturbed(&sample.x, delta))
            .logits;
        let ce = models::cross_entropy(&clean, sample.y);
        Ok(ce + kl(&models::log_softmax(&clean), &models::log_softmax(&adv)) * (1.0 / self.lambda))
    }

    fn evaluate(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<Evaluation> {
        self.check(w, delta, sample)?;
        let adv_input = SmoothModel::perturbed(&sample.x, delta);
        let clean = self.model.forward(w, &sample.x);
        let adv = self.model.forward(w, &adv_input);
        let (ce, mut d_clean) = models::cross_entropy_with_grad(&clean.logits, sample.y);
        let log_pc = models::log_softmax(&clean.logits);
        let log_pa = models::log_softmax(&adv.logits);
        let pc: RealVector = log_pc.iter().map(|v| v.exp()).collect();
        let pa: RealVector = log_pa.iter().map(|v| v.exp()).collect();
        let a: RealVector = log_pc.iter().zip(&log_pa).map(|(c, d)| c - d).collect();
        let mean_a = numcore::dot(&pc, &a);
        let inv = 1.0 / self.lambda;
        for k in 0..d_clean.len() {
            d_clean[k] += inv * pc[k] * (a[k] - mean_a);
        }
        let d_adv: RealVector = pa.iter().zip(&pc).map(|(p, q)| inv * (p - q)).collect();

        let mut grad_w = vec![0.0; self.model.param_dim()];
        let mut grad_delta = vec![0.0; self.model.input_dim];
        let mut discard = vec![0.0; self.model.input_dim];
        self.model
            .backward(w, &sample.x, &clean, &d_clean, &mut grad_w, &mut discard);
        self.model
            .backward(w, &adv_input, &adv, &d_adv, &mut grad_w, &mut grad_delta);
        Ok(Evaluation {
            loss: ce + kl(&log_pc, &log_pa) * inv,
            grad_w,
            grad_delta,
        })
    }
}

/// Value form of [`TradesObjective::loss`].
pub fn trades_surrogate_loss(
    model: &SmoothModel,
    w: &[f64],
    delta: &[f64],
    sample: &LabeledSample,
    lambda: f64,
) -> Result<f64> {
    TradesObjective::new(*model, lambda)?.loss(w, delta, sample)
}

/// The training objective an algorithm optimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Plain(SmoothModel),
    Trades(TradesObjective),
}

impl Objective {
    pub fn for_config(model: &SmoothModel, cfg: &TrainConfig) -> Result<Self> {
        if cfg.algorithm.uses_trades() {
            Ok(Objective::Trades(TradesObjective::new(*model, cfg.trades_lambda)?))
        } else {
            Ok(Objective::Plain(*model))
        }
    }
}

impl LossOracle for Objective {
    fn param_dim(&self) -> usize {
        match self {
            Objective::Plain(m) => m.param_dim(),
            Objective::Trades(t) => t.param_dim(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            Objective::Plain(m) => m.input_dim,
            Objective::Trades(t) => t.input_dim(),
        }
    }

    fn loss(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<f64> {
        match self {
            Objective::Plain(m) => m.loss(w, delta, sample),
            Objective::Trades(t) => t.loss(w, delta, sample),
        }
    }

    fn evaluate(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<Evaluation> {
        match self {
            Objective::Plain(m) => m.evaluate(w, delta, sample),
            Objective::Trades(t) => t.evaluate(w, delta, sample),
        }
    }
}

/// One weight update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based weight-update index.
    pub iteration: usize,
    /// 1-based minibatch index (equals `iteration` outside the free loops).
    pub step: usize,
    /// 0-based position inside the minibatch's `m` updates.
    pub inner: usize,
    pub lr: f64,
    pub batch: Vec<usize>,
    pub grad_w_norm: f64,
    /// Smallest per-sample `||grad_delta||` at the points the update used.
    pub min_grad_delta_norm: f64,
    /// Mean batch loss at the points the update used.
    pub loss: f64,
    /// Cumulative batch-gradient evaluations.
    pub oracle_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    pub final_w: ParamVector,
}

impl TrainTrace {
    pub fn min_grad_delta_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.min_grad_delta_norm).collect()
    }

    pub fn oracle_calls(&self) -> usize {
        self.records.last().map_or(0, |r| r.oracle_calls)
    }

    /// One JSON object per line, one line per weight update.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl()?.as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Steppable training run over any loss oracle.
pub struct TrainRun<'a> {
    oracle: &'a dyn LossOracle,
    dataset: &'a Dataset,
    cfg: TrainConfig,
    streams: StreamPlan,
    w: ParamVector,
    batch_plan: Option<Vec<Vec<usize>>>,
    iteration: usize,
    step: usize,
    inner: usize,
    batch: Vec<usize>,
    deltas: Vec<RealVector>,
    prepared: bool,
    oracle_calls: usize,
    records: Vec<IterationRecord>,
}

impl<'a> TrainRun<'a> {
    /// Starts from the model's initialization drawn on the plan's init stream.
    pub fn new(
        model: &SmoothModel,
        oracle: &'a dyn LossOracle,
        dataset: &'a Dataset,
        cfg: TrainConfig,
    ) -> Result<Self> {
        model.validate()?;
        let mut streams = StreamPlan::new(cfg.seed);
        let w = model.init_params(&mut streams.init);
        Self::from_parts(oracle, dataset, cfg, streams, w)
    }

    /// Starts from the given weights; the init stream is left untouched.
    pub fn with_initial(
        oracle: &'a dyn LossOracle,
        dataset: &'a Dataset,
        cfg: TrainConfig,
        w0: ParamVector,
    ) -> Result<Self> {
        Self::from_parts(oracle, dataset, cfg, StreamPlan::new(cfg.seed), w0)
    }

    fn from_parts(
        oracle: &'a dyn LossOracle,
        dataset: &'a Dataset,
        cfg: TrainConfig,
        streams: StreamPlan,
        w: ParamVector,
    ) -> Result<Self> {
        cfg.validate_for(dataset)?;
        ensure_len("initial weights", w.len(), oracle.param_dim())?;
        ensure_len("oracle input dim", oracle.input_dim(), dataset.input_dim())?;
        Ok(Self {
            oracle,
            dataset,
            cfg,
            streams,
            w,
            batch_plan: None,
            iteration: 0,
            step: 0,
            inner: 0,
            batch: Vec::new(),
            deltas: Vec::new(),
            prepared: false,
            oracle_calls: 0,
            records: Vec::with_capacity(cfg.total_iterations),
        })
    }

    /// Replace random minibatches with a fixed plan, one entry per minibatch.
    pub fn with_batch_plan(mut self, plan: Vec<Vec<usize>>) -> Result<Self> {
        let needed = self.cfg.total_iterations / self.cfg.updates_per_batch();
        if plan.len() < needed {
            return Err(Error::InvalidConfig(format!(
                "batch plan has {} entries, need {needed}",
                plan.len()
            )));
        }
        for b in &plan {
            if b.len() != self.cfg.batch_size || b.iter().any(|&i| i >= self.dataset.len()) {
                return Err(Error::InvalidConfig(format!("invalid planned batch {b:?}")));
            }
        }
        self.batch_plan = Some(plan);
        Ok(self)
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn w(&self) -> &ParamVector {
        &self.w
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.cfg.total_iterations
    }

    /// Minibatch of the pending update once [`TrainRun::prepare`] ran, or of
    /// the last update.
    pub fn batch(&self) -> &[usize] {
        &self.batch
    }

    /// Current perturbations. For the free loops these are the iterates the
    /// next update starts from; otherwise the points the last update used.
    pub fn deltas(&self) -> &[RealVector] {
        &self.deltas
    }

    /// Position of the pending update inside its minibatch.
    pub fn inner(&self) -> usize {
        self.inner
    }

    /// Draw the minibatch (and, for the free loops, the fresh perturbations)
    /// of the pending update. Idempotent.
    pub fn prepare(&mut self) -> Result<()> {
        if self.prepared || self.is_done() {
            return Ok(());
        }
        if self.inner == 0 {
            self.step += 1;
            self.batch = match &self.batch_plan {
                Some(plan) => plan[self.step - 1].clone(),
                None => (0..self.cfg.batch_size)
                    .map(|_| self.streams.batch.index(self.dataset.len()))
                    .collect(),
            };
            if self.cfg.algorithm.is_free_style() {
                let set = self.cfg.set;
                self.deltas = (0..self.batch.len())
                    .map(|_| set.sample(&mut self.streams.delta))
                    .collect();
            }
        }
        self.prepared = true;
        Ok(())
    }

    /// Perform one weight update. Returns `None` once `T` updates are done.
    pub fn advance(&mut self) -> Result<Option<&IterationRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        self.prepare()?;
        let lr = self.cfg.schedule.step_size(self.step)?;
        let samples: Vec<&LabeledSample> =
            self.batch.iter().map(|&i| self.dataset.get(i)).collect();
        let set = self.cfg.set;
        let (grads, min_norm) = match self.cfg.algorithm {
            Algorithm::Free | Algorithm::FreeTrades => {
                let g = batch_grads(self.oracle, &self.w, &self.deltas, &samples)?;
                self.oracle_calls += 1;
                let min_norm = min_norm(&g.grad_deltas);
                for (d, gd) in self.deltas.iter_mut().zip(&g.grad_deltas) {
                    *d = set.ascent_step(d, gd, self.cfg.attack_lr)?;
                }
                (g, min_norm)
            }
            Algorithm::Fast => {
                let starts: Vec<RealVector> = (0..samples.len())
                    .map(|_| set.sample(&mut self.streams.delta))
                    .collect();
                let g0 = batch_grads(self.oracle, &self.w, &starts, &samples)?;
                let min_norm = min_norm(&g0.grad_deltas);
                self.deltas = starts
                    .iter()
                    .zip(&g0.grad_deltas)
                    .map(|(d, gd)| set.ascent_step(d, gd, self.cfg.fast_step))
                    .collect::<Result<_>>()?;
                let g = batch_grads(self.oracle, &self.w, &self.deltas, &samples)?;
                self.oracle_calls += 2;
                (g, min_norm)
            }
            Algorithm::Vanilla | Algorithm::Trades => {
                let attack = self.cfg.inner_attack;
                let mut deltas = Vec::with_capacity(samples.len());
                for s in &samples {
                    let out = pgd_attack_with_streams(
                        self.oracle,
                        &self.w,
                        s,
                        &set,
                        &attack,
                        &mut self.streams.delta,
                        &mut self.streams.restart,
                    )?;
                    deltas.push(out.delta);
                }
                self.deltas = deltas;
                let g = batch_grads(self.oracle, &self.w, &self.deltas, &samples)?;
                self.oracle_calls += attack.steps * attack.restarts + 1;
                let min_norm = min_norm(&g.grad_deltas);
                (g, min_norm)
            }
        };
        numcore::axpy(&mut self.w, -lr, &grads.mean_grad_w);
        if !numcore::all_finite(&self.w) {
            return Err(Error::InvalidInput(format!(
                "weights diverged at iteration {}",
                self.iteration + 1
            )));
        }
        self.iteration += 1;
        let record = IterationRecord {
            iteration: self.iteration,
            step: self.step,
            inner: self.inner,
            lr,
            batch: self.batch.clone(),
            grad_w_norm: numcore::norm2(&grads.mean_grad_w),
            min_grad_delta_norm: min_norm,
            loss: grads.mean_loss,
            oracle_calls: self.oracle_calls,
        };
        self.inner = (self.inner + 1) % self.cfg.updates_per_batch();
        self.prepared = false;
        self.records.push(record);
        Ok(self.records.last())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.advance()?.is_some() {}
        Ok(())
    }

    pub fn finish(self) -> (ParamVector, TrainTrace) {
        let trace = TrainTrace {
            algorithm: self.cfg.algorithm,
            records: self.records,
            final_w: self.w.clone(),
        };
        (self.w, trace)
    }
}

fn min_norm(grads: &[RealVector]) -> f64 {
    grads
        .iter()
        .map(|g| numcore::norm2(g))
        .fold(f64::INFINITY, f64::min)
}

/// Train with the algorithm named in `cfg`, all randomness derived from
/// `cfg.seed`.
pub fn train(
    model: &SmoothModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainTrace)> {
    let objective = Objective::for_config(model, cfg)?;
    let mut run = TrainRun::new(model, &objective, dataset, *cfg)?;
    run.run_to_end()?;
    tracing::debug!(
        algorithm = cfg.algorithm.name(),
        iterations = cfg.total_iterations,
        "training finished"
    );
    Ok(run.finish())
}

fn train_as(
    expected: Algorithm,
    model: &SmoothModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainTrace)> {
    if cfg.algorithm != expected {
        return Err(Error::InvalidConfig(format!(
            "expected a {} config, got {}",
            expected.name(),
            cfg.algorithm.name()
        )));
    }
    train(model, dataset, cfg)
}

pub fn train_vanilla(
    model: &SmoothModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainTrace)> {
    train_as(Algorithm::Vanilla, model, dataset, cfg)
}

pub fn train_free(
    model: &SmoothModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainTrace)> {
    train_as(Algorithm::Free, model, dataset, cfg)
}

pub fn train_fast(
    model: &SmoothModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainTrace)> {
    train_as(Algorithm::Fast, model, dataset, cfg)
}

pub fn train_free_trades(
    model: &SmoothModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainTrace)> {
    train_as(Algorithm::FreeTrades, model, dataset, cfg)
}

pub fn train_trades(
    model: &SmoothModel,
    dataset: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ParamVector, TrainTrace)> {
    train_as(Algorithm::Trades, model, dataset, cfg)
}
