//! Coupled runs on neighboring datasets and path-wise checks of the growth
//! recursions that bound their divergence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::models::{Dataset, LabeledSample, LossOracle, ParamVector, SmoothModel};
use crate::numcore::{self, SeededRng};
use crate::threat::{pgd_attack, AttackConfig, NormKind, PerturbationSet};
use crate::trainers::{Algorithm, Objective, TrainConfig, TrainRun};

/// Two datasets that agree everywhere except at `differing_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub s: Dataset,
    pub s_prime: Dataset,
    pub differing_index: usize,
    pub replaced_sample: LabeledSample,
}

impl NeighborPair {
    pub fn is_trivial(&self) -> bool {
        self.s == self.s_prime
    }
}

/// `S' = S` with sample `index` replaced.
pub fn make_neighbor(
    dataset: &Dataset,
    index: usize,
    replacement: LabeledSample,
) -> Result<NeighborPair> {
    if index >= dataset.len() {
        return Err(Error::InvalidInput(format!(
            "neighbor index {index} out of range for {} samples",
            dataset.len()
        )));
    }
    let s_prime = dataset.with_replaced(index, replacement)?;
    Ok(NeighborPair {
        s: dataset.clone(),
        replaced_sample: dataset.get(index).clone(),
        s_prime,
        differing_index: index,
    })
}

/// Distances between the coupled runs around one weight update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub iteration: usize,
    pub step: usize,
    pub inner: usize,
    pub lr: f64,
    pub d_w_before: f64,
    pub d_w_after: f64,
    /// Mean per-sample perturbation distance the update started from.
    pub d_delta_before: f64,
    /// Mean per-sample perturbation distance after the update.
    pub d_delta_after: f64,
    /// How many batch slots hold the differing sample.
    pub s_count: usize,
    /// Smallest `||grad_delta||` used by either run.
    pub min_grad_delta_norm: f64,
}

impl StabilityRecord {
    pub fn s_in_batch(&self) -> bool {
        self.s_count > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTrace {
    pub algorithm: Algorithm,
    pub set: PerturbationSet,
    pub batch_size: usize,
    pub free_steps: usize,
    pub attack_lr: f64,
    pub fast_step: f64,
    pub differing_index: usize,
    pub records: Vec<StabilityRecord>,
    /// Weights of both runs at a few evenly spaced iterations, final included.
    pub anchors: Vec<(ParamVector, ParamVector)>,
    pub final_w: ParamVector,
    pub final_w_prime: ParamVector,
}

impl StabilityTrace {
    pub fn d_w_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.d_w_after).collect()
    }

    /// 1-based minibatch index of the first minibatch containing the
    /// differing sample.
    pub fn first_encounter_step(&self) -> Option<usize> {
        self.records.iter().find(|r| r.s_in_batch()).map(|r| r.step)
    }

    pub fn min_grad_delta_norm(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.min_grad_delta_norm)
            .fold(f64::INFINITY, f64::min)
    }

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

const ANCHOR_COUNT: usize = 8;

fn mean_delta_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| numcore::distance(x, y))
        .sum::<f64>()
        / a.len() as f64
}

/// Two runs on `S` and `S'` sharing every random draw.
pub fn coupled_run(model: &SmoothModel, pair: &NeighborPair, cfg: &TrainConfig) -> Result<StabilityTrace> {
    coupled_run_with_plan(model, pair, cfg, None)
}

/// As [`coupled_run`], optionally with a fixed minibatch plan.
pub fn coupled_run_with_plan(
    model: &SmoothModel,
    pair: &NeighborPair,
    cfg: &TrainConfig,
    plan: Option<Vec<Vec<usize>>>,
) -> Result<StabilityTrace> {
    ensure_len("neighbor datasets", pair.s_prime.len(), pair.s.len())?;
    let objective = Objective::for_config(model, cfg)?;
    let mut a = TrainRun::new(model, &objective, &pair.s, *cfg)?;
    let mut b = TrainRun::new(model, &objective, &pair.s_prime, *cfg)?;
    if let Some(plan) = plan {
        a = a.with_batch_plan(plan.clone())?;
        b = b.with_batch_plan(plan)?;
    }
    let total = cfg.total_iterations;
    let anchor_every = (total / ANCHOR_COUNT).max(1);
    let mut records = Vec::with_capacity(total);
    let mut anchors = vec![(a.w().clone(), b.w().clone())];
    let free_style = cfg.algorithm.is_free_style();
    while !a.is_done() {
        a.prepare()?;
        b.prepare()?;
        let d_w_before = a.w().distance(b.w());
        let d_delta_before = if free_style {
            mean_delta_distance(a.deltas(), b.deltas())
        } else {
            0.0
        };
        let ra = a.advance()?.expect("run not done").clone();
        let rb = b.advance()?.expect("runs advance in lockstep").clone();
        debug_assert_eq!(ra.batch, rb.batch);
        let d_delta_after = mean_delta_distance(a.deltas(), b.deltas());
        records.push(StabilityRecord {
            iteration: ra.iteration,
            step: ra.step,
            inner: ra.inner,
            lr: ra.lr,
            d_w_before,
            d_w_after: a.w().distance(b.w()),
            d_delta_before: if free_style { d_delta_before } else { d_delta_after },
            d_delta_after,
            s_count: ra.batch.iter().filter(|&&i| i == pair.differing_index).count(),
            min_grad_delta_norm: ra.min_grad_delta_norm.min(rb.min_grad_delta_norm),
        });
        if ra.iteration % anchor_every == 0 && ra.iteration != total {
            anchors.push((a.w().clone(), b.w().clone()));
        }
    }
    let (final_w, _) = a.finish();
    let (final_w_prime, _) = b.finish();
    anchors.push((final_w.clone(), final_w_prime.clone()));
    Ok(StabilityTrace {
        algorithm: cfg.algorithm,
        set: cfg.set,
        batch_size: cfg.batch_size,
        free_steps: cfg.updates_per_batch(),
        attack_lr: cfg.attack_lr,
        fast_step: cfg.fast_step,
        differing_index: pair.differing_index,
        records,
        anchors,
        final_w,
        final_w_prime,
    })
}

/// Estimated constants plugged into the growth recursions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthConstants {
    pub beta: f64,
    pub lipschitz: f64,
    pub psi: f64,
}

impl GrowthConstants {
    /// Every constant multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            beta: self.beta * factor,
            lipschitz: self.lipschitz * factor,
            psi: self.psi * factor,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("L", self.lipschitz), ("psi", self.psi)] {
            // Zero is accepted so the verifiers can be falsified on purpose.
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "constant {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Default multiplicative inflation of estimated constants.
pub const DEFAULT_SLACK: f64 = 1.10;

/// Absolute tolerance for floating-point noise in the checks.
pub const CHECK_TOLERANCE: f64 = 1e-12;

/// Outcome of a path-wise inequality check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub checked: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen (`f64::MAX` when a zero right side was exceeded).
    pub max_ratio: f64,
}

impl CheckTally {
    fn record(&mut self, lhs: f64, rhs: f64) {
        self.checked += 1;
        let tol = CHECK_TOLERANCE * (1.0 + rhs.abs());
        if lhs > rhs + tol {
            self.violations += 1;
        }
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > tol {
            f64::MAX
        } else {
            0.0
        };
        self.max_ratio = self.max_ratio.max(ratio);
    }

    pub fn merge(&mut self, other: &CheckTally) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.max_ratio = self.max_ratio.max(other.max_ratio);
    }
}

/// Path-wise growth report, split by whether the differing sample was in the
/// minibatch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub outside: CheckTally,
    pub encounter: CheckTally,
    /// Step-wise corollary (free loops only).
    pub step_wise: CheckTally,
}

impl GrowthReport {
    pub fn merge(&mut self, other: &GrowthReport) {
        self.outside.merge(&other.outside);
        self.encounter.merge(&other.encounter);
        self.step_wise.merge(&other.step_wise);
    }
}

/// Largest L2 distance between two points of the set.
pub fn set_diameter(set: &PerturbationSet) -> f64 {
    match set.norm {
        NormKind::L2 => 2.0 * set.radius,
        NormKind::Linf => 2.0 * set.radius * (set.dim as f64).sqrt(),
    }
}

fn expect_algorithm(trace: &StabilityTrace, allowed: &[Algorithm]) -> Result<()> {
    if !allowed.contains(&trace.algorithm) {
        return Err(Error::InvalidTrace(format!(
            "trace from {} where {:?} expected",
            trace.algorithm.name(),
            allowed
        )));
    }
    Ok(())
}

/// Vanilla recursion: outside the encounter,
/// `d_t <= (1 + a beta) d_{t-1} + a beta diam`; with `k` copies of the
/// differing sample in a batch of `b`, the `k/b` share is replaced by
/// `d_{t-1} + 2 a L`.
pub fn verify_growth_vanilla(trace: &StabilityTrace, c: &GrowthConstants) -> Result<GrowthReport> {
    expect_algorithm(trace, &[Algorithm::Vanilla, Algorithm::Trades])?;
    c.validate()?;
    let diam = set_diameter(&trace.set);
    let b = trace.batch_size as f64;
    let mut report = GrowthReport::default();
    for r in &trace.records {
        let a = r.lr;
        let clean = (1.0 + a * c.beta) * r.d_w_before + a * c.beta * diam;
        if r.s_in_batch() {
            let k = r.s_count as f64;
            let rhs = (b - k) / b * clean + k / b * (r.d_w_before + 2.0 * a * c.lipschitz);
            report.encounter.record(r.d_w_after, rhs);
        } else {
            report.outside.record(r.d_w_after, clean);
        }
    }
    Ok(report)
}

/// Fast recursion:
/// `d_t <= (1 + a beta (1 + step eps psi beta)) d_{t-1} + k 2 a L / b`.
pub fn verify_growth_fast(trace: &StabilityTrace, c: &GrowthConstants) -> Result<GrowthReport> {
    expect_algorithm(trace, &[Algorithm::Fast])?;
    c.validate()?;
    let eps = trace.set.radius;
    let b = trace.batch_size as f64;
    let expansion = 1.0 + trace.fast_step * eps * c.psi * c.beta;
    let mut report = GrowthReport::default();
    for r in &trace.records {
        let a = r.lr;
        let k = r.s_count as f64;
        let rhs = (1.0 + a * c.beta * expansion) * r.d_w_before + k * 2.0 * a * c.lipschitz / b;
        if r.s_in_batch() {
            report.encounter.record(r.d_w_after, rhs);
        } else {
            report.outside.record(r.d_w_after, rhs);
        }
    }
    Ok(report)
}

/// Free recursion on the pair `(d_w, d_delta)` per inner iteration, with the
/// expansivity matrix built from the constants; plus the step-wise corollary
/// `d_t + k 2L/(b beta) <= F (d_{t-1} + k 2L/(b beta))` with
/// `F = 1 + a beta m (1 + a beta + attack_lr eps psi beta)^(m-1)`.
pub fn verify_growth_free(trace: &StabilityTrace, c: &GrowthConstants) -> Result<GrowthReport> {
    expect_algorithm(trace, &[Algorithm::Free, Algorithm::FreeTrades])?;
    c.validate()?;
    let m = trace.free_steps;
    if m == 0 || trace.records.len() % m != 0 {
        return Err(Error::InvalidTrace(
            "free trace must hold m records per minibatch".into(),
        ));
    }
    let eps = trace.set.radius;
    let b = trace.batch_size as f64;
    let mut report = GrowthReport::default();
    for chunk in trace.records.chunks(m) {
        for (i, r) in chunk.iter().enumerate() {
            if r.inner != i || r.step != chunk[0].step {
                return Err(Error::InvalidTrace(format!(
                    "missing per-iteration record at iteration {}",
                    r.iteration
                )));
            }
        }
        let a = chunk[0].lr;
        let eta = ExpansivityMatrix::new(a, c.beta, trace.attack_lr, eps, c.psi);
        let k = chunk[0].s_count as f64;
        let source_w = k * 2.0 * a * c.lipschitz / b;
        let source_d = k * 2.0 * trace.attack_lr * eps * c.psi * c.lipschitz / b;
        let tally = if k > 0.0 {
            &mut report.encounter
        } else {
            &mut report.outside
        };
        for r in chunk {
            let [pw, pd] = eta.apply([r.d_w_before, r.d_delta_before]);
            tally.record(r.d_w_after, pw + source_w);
            tally.record(r.d_delta_after, pd + source_d);
        }
        let shift = if k > 0.0 && c.beta > 0.0 {
            k * 2.0 * c.lipschitz / (b * c.beta)
        } else {
            0.0
        };
        let factor = 1.0
            + a * c.beta
                * m as f64
                * (1.0 + a * c.beta + trace.attack_lr * eps * c.psi * c.beta).powi(m as i32 - 1);
        let first = &chunk[0];
        let last = &chunk[m - 1];
        report
            .step_wise
            .record(last.d_w_after + shift, factor * (first.d_w_before + shift));
    }
    Ok(report)
}

/// Expectation-level vanilla recursion over many coupled runs:
/// `mean d_t <= (1 + a beta) mean d_{t-1} + a beta diam + 2 a L / n`,
/// accepted within three standard errors of `mean d_t`.
pub fn verify_expected_growth_vanilla(
    traces: &[StabilityTrace],
    c: &GrowthConstants,
    n: usize,
) -> Result<CheckTally> {
    if traces.is_empty() {
        return Err(Error::InvalidInput("no traces".into()));
    }
    c.validate()?;
    let len = traces[0].records.len();
    if traces.iter().any(|t| t.records.len() != len) {
        return Err(Error::InvalidTrace("traces differ in length".into()));
    }
    let diam = set_diameter(&traces[0].set);
    let mut tally = CheckTally::default();
    for i in 0..len {
        let after: Vec<f64> = traces.iter().map(|t| t.records[i].d_w_after).collect();
        let before: Vec<f64> = traces.iter().map(|t| t.records[i].d_w_before).collect();
        let a = traces[0].records[i].lr;
        let se = numcore::std_dev(&after) / (after.len() as f64).sqrt();
        let rhs = (1.0 + a * c.beta) * numcore::mean(&before)
            + a * c.beta * diam
            + 2.0 * a * c.lipschitz / n as f64;
        tally.record(numcore::mean(&after) - 3.0 * se, rhs);
    }
    Ok(tally)
}

/// Fraction of traces whose differing sample was drawn within the first `t0`
/// minibatches, with its standard error.
pub fn encounter_fraction(traces: &[StabilityTrace], t0: usize) -> (f64, f64) {
    if traces.is_empty() {
        return (0.0, 0.0);
    }
    let hits = traces
        .iter()
        .filter(|t| t.first_encounter_step().is_some_and(|s| s <= t0))
        .count();
    let p = hits as f64 / traces.len() as f64;
    (p, (p * (1.0 - p) / traces.len() as f64).sqrt())
}

/// The 2x2 matrix `[[1 + a beta, a beta], [g beta, 1 + g beta]]` with
/// `g = attack_lr eps psi`, in the shorthand `alpha = a beta`,
/// `r = g / a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansivityMatrix {
    pub alpha: f64,
    pub r: f64,
    pub entries: [[f64; 2]; 2],
}

impl ExpansivityMatrix {
    pub fn new(weight_lr: f64, beta: f64, attack_lr: f64, eps: f64, psi: f64) -> Self {
        let g = attack_lr * eps * psi;
        Self {
            alpha: weight_lr * beta,
            r: if weight_lr > 0.0 { g / weight_lr } else { 0.0 },
            entries: [
                [1.0 + weight_lr * beta, weight_lr * beta],
                [g * beta, 1.0 + g * beta],
            ],
        }
    }

    /// From the shorthand directly.
    pub fn from_shorthand(alpha: f64, r: f64) -> Self {
        Self {
            alpha,
            r,
            entries: [[1.0 + alpha, alpha], [alpha * r, 1.0 + alpha * r]],
        }
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let e = &self.entries;
        [
            e[0][0] * v[0] + e[0][1] * v[1],
            e[1][0] * v[0] + e[1][1] * v[1],
        ]
    }

    /// Eigenvalues from the characteristic polynomial, larger first.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let e = &self.entries;
        let tr = e[0][0] + e[1][1];
        let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let hi = tr / 2.0 + disc;
        // det / hi avoids cancellation in the smaller root.
        [hi, if hi != 0.0 { det / hi } else { tr / 2.0 - disc }]
    }

    /// The predicted eigenvalues `{1 + alpha (r + 1), 1}`.
    pub fn predicted_eigenvalues(&self) -> [f64; 2] {
        [1.0 + self.alpha * (self.r + 1.0), 1.0]
    }
}

/// Constants of the generic recursion
/// `E d_t <= (1 + nu / t) E d_{t-1} + nu xi / (n t)` and the conditioning
/// step `t0` that minimizes the resulting bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecursion {
    pub nu: f64,
    pub xi: f64,
    pub t0: f64,
}

/// Robust-loss difference between two weight vectors, maximized over the
/// evaluation points, with the inner max taken over a candidate set shared by
/// both (PGD crafted against each).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    pub estimate: f64,
    pub weight_distance: f64,
}

pub fn estimate_uniform_stability(
    w: &ParamVector,
    w_prime: &ParamVector,
    model: &SmoothModel,
    eval_points: &[LabeledSample],
    set: &PerturbationSet,
    attack: &AttackConfig,
    rng: &mut SeededRng,
) -> Result<StabilityEstimate> {
    if eval_points.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let mut worst = 0.0_f64;
    for x in eval_points {
        let mut fork = rng.clone();
        let da = pgd_attack(model, w, x, set, attack, rng)?;
        let db = pgd_attack(model, w_prime, x, set, attack, &mut fork)?;
        let ha = model.loss(w, &da, x)?.max(model.loss(w, &db, x)?);
        let hb = model.loss(w_prime, &da, x)?.max(model.loss(w_prime, &db, x)?);
        worst = worst.max((ha - hb).abs());
    }
    Ok(StabilityEstimate {
        estimate: worst,
        weight_distance: w.distance(w_prime),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainers::StepSchedule;

    fn data(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed, 5);
        let samples = (0..n)
            .map(|i| {
                let y = i % 2;
                let mut x = rng.gaussian_vec(dim);
                x[0] += if y == 1 { 1.0 } else { -1.0 };
                LabeledSample::new(x, y)
            })
            .collect();
        Dataset::new(samples, 2).unwrap()
    }

    fn cfg(alg: Algorithm, eps: f64, t: usize, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::new(
            alg,
            PerturbationSet::l2(eps, 4).unwrap(),
            StepSchedule::c_over_t(0.5),
            2,
            t,
            seed,
        );
        c.inner_attack.steps = 3;
        c
    }

    #[test]
    fn neighbor_examples() {
        let d = data(6, 4, 1);
        let same = make_neighbor(&d, 2, d.get(2).clone()).unwrap();
        assert!(same.is_trivial());
        let other = LabeledSample::new(vec![9.0; 4], 1);
        let pair = make_neighbor(&d, 3, other.clone()).unwrap();
        let diffs: Vec<usize> = (0..6)
            .filter(|&i| pair.s.get(i) != pair.s_prime.get(i))
            .collect();
        assert_eq!(diffs, vec![3]);
        assert_eq!(pair.s_prime.get(3), &other);
        assert_eq!(&pair.replaced_sample, d.get(3));
        assert!(matches!(make_neighbor(&d, 6, other), Err(Error::InvalidInput(_))));
        let single = data(1, 4, 2);
        let p = make_neighbor(&single, 0, LabeledSample::new(vec![0.0; 4], 1)).unwrap();
        assert_ne!(p.s.get(0), p.s_prime.get(0));
    }

    #[test]
    fn trivial_pair_never_diverges() {
        let model = SmoothModel::mlp(4, 3, 2);
        let d = data(8, 4, 3);
        let pair = make_neighbor(&d, 1, d.get(1).clone()).unwrap();
        for alg in [Algorithm::Vanilla, Algorithm::Free, Algorithm::Fast, Algorithm::FreeTrades] {
            let tr = coupled_run(&model, &pair, &cfg(alg, 0.3, 16, 4)).unwrap();
            assert!(tr.records.iter().all(|r| r.d_w_after == 0.0 && r.d_delta_after == 0.0));
            let c = GrowthConstants {
                beta: 1.0,
                lipschitz: 1.0,
                psi: 1.0,
            };
            let rep = match alg {
                Algorithm::Vanilla => verify_growth_vanilla(&tr, &c),
                Algorithm::Fast => verify_growth_fast(&tr, &c),
                _ => verify_growth_free(&tr, &c),
            }
            .unwrap();
            assert_eq!(rep.outside.violations + rep.encounter.violations, 0);
        }
    }

    #[test]
    fn divergence_is_zero_before_first_encounter() {
        let model = SmoothModel::mlp(4, 3, 2);
        let d = data(10, 4, 5);
        let pair = make_neighbor(&d, 4, LabeledSample::new(vec![2.0; 4], 0)).unwrap();
        for seed in 0..10 {
            let tr = coupled_run(&model, &pair, &cfg(Algorithm::Free, 0.3, 40, seed)).unwrap();
            let first = tr.first_encounter_step().unwrap_or(usize::MAX);
            for r in tr.records.iter().filter(|r| r.step < first) {
                assert_eq!(r.d_w_after, 0.0);
            }
        }
    }

    #[test]
    fn forced_plan_avoiding_the_sample_gives_zero_divergence() {
        let model = SmoothModel::softmax_linear(4, 2);
        let d = data(6, 4, 6);
        let pair = make_neighbor(&d, 0, LabeledSample::new(vec![-3.0; 4], 1)).unwrap();
        let plan: Vec<Vec<usize>> = (0..20).map(|t| vec![1 + t % 5, 1 + (t + 2) % 5]).collect();
        let tr =
            coupled_run_with_plan(&model, &pair, &cfg(Algorithm::Vanilla, 0.0, 20, 1), Some(plan))
                .unwrap();
        assert_eq!(tr.final_w.distance(&tr.final_w_prime), 0.0);
        assert!(tr.first_encounter_step().is_none());
    }

    #[test]
    fn free_with_frozen_perturbations_keeps_delta_distance_zero() {
        let model = SmoothModel::mlp(4, 3, 2);
        let d = data(10, 4, 7);
        let pair = make_neighbor(&d, 2, LabeledSample::new(vec![1.0; 4], 0)).unwrap();
        let mut c = cfg(Algorithm::Free, 0.3, 40, 9);
        c.attack_lr = 0.0;
        let tr = coupled_run(&model, &pair, &c).unwrap();
        for r in tr.records.iter().filter(|r| !r.s_in_batch()) {
            assert_eq!(r.d_delta_before, 0.0);
            assert_eq!(r.d_delta_after, 0.0);
        }
    }

    #[test]
    fn deflated_constants_are_caught() {
        let model = SmoothModel::mlp(4, 3, 2);
        let d = data(6, 4, 8);
        let pair = make_neighbor(&d, 0, LabeledSample::new(vec![3.0; 4], 0)).unwrap();
        let tr = coupled_run(&model, &pair, &cfg(Algorithm::Vanilla, 0.3, 60, 2)).unwrap();
        let zero = GrowthConstants {
            beta: 0.0,
            lipschitz: 0.0,
            psi: 0.0,
        };
        let rep = verify_growth_vanilla(&tr, &zero).unwrap();
        assert!(rep.outside.violations + rep.encounter.violations > 0);
        let bad = GrowthConstants {
            beta: -1.0,
            ..zero
        };
        assert!(matches!(verify_growth_vanilla(&tr, &bad), Err(Error::InvalidInput(_))));
        assert!(matches!(verify_growth_free(&tr, &zero), Err(Error::InvalidTrace(_))));
    }

    #[test]
    fn expansivity_eigenvalues() {
        let mut rng = SeededRng::new(3, 0);
        for _ in 0..1000 {
            let alpha = rng.uniform_range(1e-6, 10.0);
            let r = rng.uniform_range(1e-6, 10.0);
            let m = ExpansivityMatrix::from_shorthand(alpha, r);
            let got = m.eigenvalues();
            let want = m.predicted_eigenvalues();
            assert!((got[0] - want[0]).abs() < 1e-10 * want[0].max(1.0));
            assert!((got[1] - want[1]).abs() < 1e-10);
        }
        let full = ExpansivityMatrix::new(0.1, 2.0, 0.5, 0.4, 3.0);
        let short = ExpansivityMatrix::from_shorthand(full.alpha, full.r);
        for i in 0..2 {
            for j in 0..2 {
                assert!((full.entries[i][j] - short.entries[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniform_stability_examples() {
        let model = SmoothModel::mlp(4, 3, 2);
        let mut rng = SeededRng::new(1, 0);
        let w = model.init_params(&mut rng);
        let set = PerturbationSet::l2(0.3, 4).unwrap();
        let attack = AttackConfig::evaluation_default(0.3);
        let pts = data(5, 4, 9).samples().to_vec();
        let same = estimate_uniform_stability(&w, &w, &model, &pts, &set, &attack, &mut rng).unwrap();
        assert_eq!(same.estimate, 0.0);
        assert!(matches!(
            estimate_uniform_stability(&w, &w, &model, &[], &set, &attack, &mut rng),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn encounter_fraction_bookkeeping() {
        assert_eq!(encounter_fraction(&[], 3), (0.0, 0.0));
    }
}
