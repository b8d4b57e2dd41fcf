//! Small smooth classifiers with hand-written gradients.
//!
//! Every model exposes the per-sample loss `h(w, delta; x, y)`, the
//! cross-entropy of the logits `f_w(x + delta)` at label `y`, together with
//! its analytic gradients in `w` and in `delta`. Activations are `tanh` so the
//! loss is smooth everywhere.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::numcore::{self, RealVector, SeededRng};

/// A feature vector with its class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: RealVector,
    pub y: usize,
}

impl LabeledSample {
    pub fn new(x: RealVector, y: usize) -> Self {
        Self { x, y }
    }
}

/// A nonempty set of samples sharing one input dimension and class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    input_dim: usize,
    class_count: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, class_count: usize) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset must contain at least one sample".into()))?;
        let input_dim = first.x.len();
        if input_dim == 0 {
            return Err(Error::InvalidDimension("samples must have dim >= 1".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != input_dim {
                return Err(Error::InvalidInput(format!(
                    "sample {i} has dim {}, expected {input_dim}",
                    s.x.len()
                )));
            }
            if s.y >= class_count {
                return Err(Error::InvalidInput(format!(
                    "sample {i} has label {} >= class count {class_count}",
                    s.y
                )));
            }
            if !numcore::all_finite(&s.x) {
                return Err(Error::InvalidInput(format!("sample {i} has non-finite features")));
            }
        }
        Ok(Self {
            samples,
            input_dim,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &LabeledSample {
        &self.samples[i]
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Replace one sample, keeping the shape invariants.
    pub fn with_replaced(&self, index: usize, sample: LabeledSample) -> Result<Self> {
        if index >= self.len() {
            return Err(Error::InvalidInput(format!(
                "index {index} out of range for dataset of size {}",
                self.len()
            )));
        }
        let mut samples = self.samples.clone();
        samples[index] = sample;
        Dataset::new(samples, self.class_count)
    }

    /// Concatenate with itself; used by mean-invariance checks.
    pub fn duplicated(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.extend(self.samples.iter().cloned());
        Self {
            samples,
            input_dim: self.input_dim,
            class_count: self.class_count,
        }
    }
}

/// Flat weight vector. The stability distance `d_w` is the L2 distance
/// between two of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub RealVector);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        numcore::distance(&self.0, &other.0)
    }

    pub fn into_inner(self) -> RealVector {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<RealVector> for ParamVector {
    fn from(v: RealVector) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Multinomial logistic regression, `logits = W u + b`.
    SoftmaxLinear,
    /// `logits = W2 tanh(W1 u + b1) + b2`.
    TwoLayerTanhMlp,
    /// Binary logistic regression without bias, `logits = (0, w . u)`.
    ScalarLogistic,
}

/// Loss value with both gradients at one `(w, delta)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub grad_w: RealVector,
    pub grad_delta: RealVector,
}

/// Anything that can serve as the per-sample min-max objective.
///
/// Trainers, attacks, and constant estimators are generic over this so the
/// same loops drive the plain cross-entropy loss, the TRADES surrogate, and
/// test probes.
pub trait LossOracle: Sync {
    fn param_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn loss(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<f64>;
    /// Loss and both gradients, evaluated at the same `(w, delta)`.
    fn evaluate(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<Evaluation>;
}

/// Forward-pass state needed by [`SmoothModel::backward`].
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: RealVector,
    hidden: RealVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothModel {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub class_count: usize,
    pub hidden_dim: usize,
    /// Squash the loss through `u / (1 + u)` so it lies in `[0, 1)`.
    #[serde(default)]
    pub bounded: bool,
}

pub const DEFAULT_INPUT_DIM: usize = 20;
pub const DEFAULT_HIDDEN_DIM: usize = 16;
pub const DEFAULT_CLASS_COUNT: usize = 2;

impl Default for SmoothModel {
    fn default() -> Self {
        Self::mlp(DEFAULT_INPUT_DIM, DEFAULT_HIDDEN_DIM, DEFAULT_CLASS_COUNT)
    }
}

impl SmoothModel {
    pub fn softmax_linear(input_dim: usize, class_count: usize) -> Self {
        Self {
            kind: ModelKind::SoftmaxLinear,
            input_dim,
            class_count,
            hidden_dim: 0,
            bounded: false,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, class_count: usize) -> Self {
        Self {
            kind: ModelKind::TwoLayerTanhMlp,
            input_dim,
            class_count,
            hidden_dim,
            bounded: false,
        }
    }

    pub fn scalar_logistic(input_dim: usize) -> Self {
        Self {
            kind: ModelKind::ScalarLogistic,
            input_dim,
            class_count: 2,
            hidden_dim: 0,
            bounded: false,
        }
    }

    pub fn with_bounded_loss(mut self, bounded: bool) -> Self {
        self.bounded = bounded;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("model input_dim must be >= 1".into()));
        }
        if self.class_count < 2 {
            return Err(Error::InvalidConfig("model needs at least two classes".into()));
        }
        match self.kind {
            ModelKind::TwoLayerTanhMlp if self.hidden_dim == 0 => {
                Err(Error::InvalidConfig("mlp hidden_dim must be >= 1".into()))
            }
            ModelKind::ScalarLogistic if self.class_count != 2 => Err(Error::InvalidConfig(
                "scalar logistic model is binary".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn param_dim(&self) -> usize {
        let (d, c, h) = (self.input_dim, self.class_count, self.hidden_dim);
        match self.kind {
            ModelKind::SoftmaxLinear => c * d + c,
            ModelKind::TwoLayerTanhMlp => h * d + h + c * h + c,
            ModelKind::ScalarLogistic => d,
        }
    }

    /// Gaussian weights with standard deviation `1 / sqrt(fan_in)`, zero biases.
    /// Draw count depends only on the architecture.
    pub fn init_params(&self, rng: &mut SeededRng) -> ParamVector {
        let (d, c, h) = (self.input_dim, self.class_count, self.hidden_dim);
        let mut w = Vec::with_capacity(self.param_dim());
        let mut gauss = |n: usize, fan_in: usize, w: &mut Vec<f64>| {
            let s = 1.0 / (fan_in as f64).sqrt();
            w.extend((0..n).map(|_| s * rng.gaussian()));
        };
        match self.kind {
            ModelKind::SoftmaxLinear => {
                gauss(c * d, d, &mut w);
                w.extend(std::iter::repeat(0.0).take(c));
            }
            ModelKind::TwoLayerTanhMlp => {
                gauss(h * d, d, &mut w);
                w.extend(std::iter::repeat(0.0).take(h));
                gauss(c * h, h, &mut w);
                w.extend(std::iter::repeat(0.0).take(c));
            }
            ModelKind::ScalarLogistic => gauss(d, d, &mut w),
        }
        ParamVector(w)
    }

    fn check(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<()> {
        ensure_len("weights", w.len(), self.param_dim())?;
        ensure_len("delta", delta.len(), self.input_dim)?;
        ensure_len("sample features", sample.x.len(), self.input_dim)?;
        if sample.y >= self.class_count {
            return Err(Error::InvalidInput(format!(
                "label {} >= class count {}",
                sample.y, self.class_count
            )));
        }
        Ok(())
    }

    /// Logits at an already-perturbed input. Panics on length mismatch; the
    /// checked entry points are [`LossOracle::loss`] and [`LossOracle::evaluate`].
    pub fn forward(&self, w: &[f64], input: &[f64]) -> Forward {
        let (d, c, h) = (self.input_dim, self.class_count, self.hidden_dim);
        match self.kind {
            ModelKind::SoftmaxLinear => {
                let (wm, b) = w.split_at(c * d);
                let logits = (0..c)
                    .map(|k| numcore::dot(&wm[k * d..(k + 1) * d], input) + b[k])
                    .collect();
                Forward {
                    logits,
                    hidden: Vec::new(),
                }
            }
            ModelKind::TwoLayerTanhMlp => {
                let (w1, rest) = w.split_at(h * d);
                let (b1, rest) = rest.split_at(h);
                let (w2, b2) = rest.split_at(c * h);
                let hidden: RealVector = (0..h)
                    .map(|j| (numcore::dot(&w1[j * d..(j + 1) * d], input) + b1[j]).tanh())
                    .collect();
                let logits = (0..c)
                    .map(|k| numcore::dot(&w2[k * h..(k + 1) * h], &hidden) + b2[k])
                    .collect();
                Forward { logits, hidden }
            }
            ModelKind::ScalarLogistic => Forward {
                logits: vec![0.0, numcore::dot(w, input)],
                hidden: Vec::new(),
            },
        }
    }

    /// Accumulate the gradients of `dlogits . logits` into `grad_w` and
    /// `grad_input`.
    pub fn backward(
        &self,
        w: &[f64],
        input: &[f64],
        fwd: &Forward,
        dlogits: &[f64],
        grad_w: &mut [f64],
        grad_input: &mut [f64],
    ) {
        let (d, c, h) = (self.input_dim, self.class_count, self.hidden_dim);
        match self.kind {
            ModelKind::SoftmaxLinear => {
                let wm = &w[..c * d];
                for k in 0..c {
                    let g = dlogits[k];
                    let row = &mut grad_w[k * d..(k + 1) * d];
                    numcore::axpy(row, g, input);
                    grad_w[c * d + k] += g;
                    numcore::axpy(grad_input, g, &wm[k * d..(k + 1) * d]);
                }
            }
            ModelKind::TwoLayerTanhMlp => {
                let w1 = &w[..h * d];
                let w2 = &w[h * d + h..h * d + h + c * h];
                let o_w2 = h * d + h;
                let o_b2 = o_w2 + c * h;
                let mut da = vec![0.0; h];
                for k in 0..c {
                    let g = dlogits[k];
                    numcore::axpy(&mut grad_w[o_w2 + k * h..o_w2 + (k + 1) * h], g, &fwd.hidden);
                    grad_w[o_b2 + k] += g;
                    numcore::axpy(&mut da, g, &w2[k * h..(k + 1) * h]);
                }
                for j in 0..h {
                    let a = fwd.hidden[j];
                    da[j] *= 1.0 - a * a;
                }
                for j in 0..h {
                    numcore::axpy(&mut grad_w[j * d..(j + 1) * d], da[j], input);
                    grad_w[h * d + j] += da[j];
                    numcore::axpy(grad_input, da[j], &w1[j * d..(j + 1) * d]);
                }
            }
            ModelKind::ScalarLogistic => {
                let g = dlogits[1];
                numcore::axpy(grad_w, g, input);
                numcore::axpy(grad_input, g, w);
            }
        }
    }

    /// Predicted class at `input` (ties go to the lowest index).
    pub fn predict(&self, w: &[f64], input: &[f64]) -> usize {
        argmax(&self.forward(w, input).logits)
    }

    /// Apply the optional bounded-loss squashing. Returns the transformed
    /// value and the chain-rule factor.
    pub fn squash(&self, raw: f64) -> (f64, f64) {
        if self.bounded {
            let d = 1.0 + raw;
            (raw / d, 1.0 / (d * d))
        } else {
            (raw, 1.0)
        }
    }

    pub fn perturbed(x: &[f64], delta: &[f64]) -> RealVector {
        numcore::add(x, delta)
    }
}

impl LossOracle for SmoothModel {
    fn param_dim(&self) -> usize {
        SmoothModel::param_dim(self)
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn loss(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<f64> {
        self.check(w, delta, sample)?;
        let input = Self::perturbed(&sample.x, delta);
        let fwd = self.forward(w, &input);
        Ok(self.squash(cross_entropy(&fwd.logits, sample.y)).0)
    }

    fn evaluate(&self, w: &[f64], delta: &[f64], sample: &LabeledSample) -> Result<Evaluation> {
        self.check(w, delta, sample)?;
        let input = Self::perturbed(&sample.x, delta);
        let fwd = self.forward(w, &input);
        let (raw, mut dlogits) = cross_entropy_with_grad(&fwd.logits, sample.y);
        let (loss, factor) = self.squash(raw);
        if factor != 1.0 {
            dlogits.iter_mut().for_each(|g| *g *= factor);
        }
        let mut grad_w = vec![0.0; SmoothModel::param_dim(self)];
        let mut grad_delta = vec![0.0; self.input_dim];
        self.backward(w, &input, &fwd, &dlogits, &mut grad_w, &mut grad_delta);
        Ok(Evaluation {
            loss,
            grad_w,
            grad_delta,
        })
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> RealVector {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: RealVector = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Log-probabilities, `z - logsumexp(z)`.
pub fn log_softmax(z: &[f64]) -> RealVector {
    let l = log_sum_exp(z);
    z.iter().map(|v| v - l).collect()
}

pub fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    // Clamp at zero: rounding can push a near-certain prediction to -1e-17.
    (log_sum_exp(logits) - logits[y]).max(0.0)
}

/// Cross-entropy and its gradient `softmax(z) - onehot(y)`.
pub fn cross_entropy_with_grad(logits: &[f64], y: usize) -> (f64, RealVector) {
    let mut g = softmax(logits);
    g[y] -= 1.0;
    (cross_entropy(logits, y), g)
}

/// Mean `w`-gradient over a batch plus the per-sample `delta`-gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradients {
    pub mean_grad_w: RealVector,
    pub grad_deltas: Vec<RealVector>,
    pub mean_loss: f64,
}

pub fn batch_grads<O: LossOracle + ?Sized>(
    oracle: &O,
    w: &[f64],
    deltas: &[RealVector],
    batch: &[&LabeledSample],
) -> Result<BatchGradients> {
    if deltas.len() != batch.len() {
        return Err(Error::InvalidInput(format!(
            "{} perturbations for a batch of {}",
            deltas.len(),
            batch.len()
        )));
    }
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut sum = vec![0.0; oracle.param_dim()];
    let mut grad_deltas = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for (delta, sample) in deltas.iter().zip(batch) {
        let ev = oracle.evaluate(w, delta, sample)?;
        numcore::axpy(&mut sum, 1.0, &ev.grad_w);
        grad_deltas.push(ev.grad_delta);
        loss += ev.loss;
    }
    let b = batch.len() as f64;
    sum.iter_mut().for_each(|g| *g /= b);
    Ok(BatchGradients {
        mean_grad_w: sum,
        grad_deltas,
        mean_loss: loss / b,
    })
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = numcore::norm2(a).max(numcore::norm2(b)).max(1e-8);
    numcore::distance(a, b) / scale
}

/// Worst relative discrepancy between the analytic gradients and central
/// differences with step `h`, at one point. The `w` and `delta` blocks are
/// compared separately.
pub fn finite_diff_error<O: LossOracle + ?Sized>(
    oracle: &O,
    w: &[f64],
    delta: &[f64],
    sample: &LabeledSample,
    h: f64,
) -> Result<f64> {
    let ev = oracle.evaluate(w, delta, sample)?;
    let mut wp = w.to_vec();
    let mut fd_w = vec![0.0; w.len()];
    for i in 0..w.len() {
        let orig = wp[i];
        wp[i] = orig + h;
        let up = oracle.loss(&wp, delta, sample)?;
        wp[i] = orig - h;
        let down = oracle.loss(&wp, delta, sample)?;
        wp[i] = orig;
        fd_w[i] = (up - down) / (2.0 * h);
    }
    let mut dp = delta.to_vec();
    let mut fd_d = vec![0.0; delta.len()];
    for i in 0..delta.len() {
        let orig = dp[i];
        dp[i] = orig + h;
        let up = oracle.loss(w, &dp, sample)?;
        dp[i] = orig - h;
        let down = oracle.loss(w, &dp, sample)?;
        dp[i] = orig;
        fd_d[i] = (up - down) / (2.0 * h);
    }
    Ok(relative_error(&ev.grad_w, &fd_w).max(relative_error(&ev.grad_delta, &fd_d)))
}

/// Random `(w, delta, x, y)` for gradient checks: weights at initialization
/// scale, `delta` in the radius-0.5 L2 ball, standard normal features.
pub fn random_configuration(
    model: &SmoothModel,
    rng: &mut SeededRng,
) -> (ParamVector, RealVector, LabeledSample) {
    let w = model.init_params(rng);
    let delta = numcore::sample_uniform_l2_ball(rng, model.input_dim, 0.5)
        .expect("input_dim validated by caller");
    let x = rng.gaussian_vec(model.input_dim);
    let y = rng.index(model.class_count);
    (w, delta, LabeledSample::new(x, y))
}

/// Worst analytic-vs-central-difference relative error over `trials` random
/// configurations. Zero trials give zero.
pub fn finite_diff_report(model: &SmoothModel, trials: usize, h: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step h must be positive, got {h}")));
    }
    model.validate()?;
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let (w, delta, sample) = random_configuration(model, rng);
        worst = worst.max(finite_diff_error(model, &w, &delta, &sample, h)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_kinds() -> Vec<SmoothModel> {
        vec![
            SmoothModel::softmax_linear(5, 3),
            SmoothModel::mlp(4, 6, 3),
            SmoothModel::scalar_logistic(3),
        ]
    }

    #[test]
    fn softmax_linear_at_zero_is_log_c() {
        let m = SmoothModel::softmax_linear(4, 5);
        let w = ParamVector::zeros(m.param_dim());
        let s = LabeledSample::new(vec![1.0, -2.0, 0.5, 3.0], 2);
        let l = m.loss(&w, &[0.1, 0.2, 0.3, 0.4], &s).unwrap();
        assert!((l - (5.0_f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn scalar_logistic_at_zero() {
        let m = SmoothModel::scalar_logistic(1);
        let s = LabeledSample::new(vec![1.0], 1);
        let ev = m.evaluate(&[0.0], &[0.0], &s).unwrap();
        assert!((ev.loss - 2f64.ln()).abs() < 1e-15);
        assert_eq!(ev.grad_w, vec![-0.5]);
    }

    #[test]
    fn mlp_matches_straightforward_forward_pass() {
        let m = SmoothModel::mlp(3, 4, 2);
        let mut rng = SeededRng::new(21, 0);
        for _ in 0..20 {
            let (w, delta, s) = random_configuration(&m, &mut rng);
            let u: Vec<f64> = s.x.iter().zip(&delta).map(|(a, b)| a + b).collect();
            // Independent re-implementation with explicit index arithmetic.
            let mut hidden = [0.0; 4];
            for j in 0..4 {
                let mut a = w[12 + j];
                for i in 0..3 {
                    a += w[j * 3 + i] * u[i];
                }
                hidden[j] = a.tanh();
            }
            let mut z = [0.0; 2];
            for k in 0..2 {
                z[k] = w[16 + 8 + k];
                for j in 0..4 {
                    z[k] += w[16 + k * 4 + j] * hidden[j];
                }
            }
            let lse = (z[0].exp() + z[1].exp()).ln();
            let expected = lse - z[s.y];
            assert!((m.loss(&w, &delta, &s).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_delta_gradient_closed_form() {
        let m = SmoothModel::softmax_linear(3, 4);
        let mut rng = SeededRng::new(4, 0);
        for _ in 0..20 {
            let (w, delta, s) = random_configuration(&m, &mut rng);
            let ev = m.evaluate(&w, &delta, &s).unwrap();
            let u: Vec<f64> = s.x.iter().zip(&delta).map(|(a, b)| a + b).collect();
            let z: Vec<f64> = (0..4)
                .map(|k| (0..3).map(|i| w[k * 3 + i] * u[i]).sum::<f64>() + w[12 + k])
                .collect();
            let zmax = z.iter().cloned().fold(f64::MIN, f64::max);
            let ez: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
            let tot: f64 = ez.iter().sum();
            let mut expected = [0.0; 3];
            for k in 0..4 {
                let r = ez[k] / tot - if k == s.y { 1.0 } else { 0.0 };
                for i in 0..3 {
                    expected[i] += w[k * 3 + i] * r;
                }
            }
            for i in 0..3 {
                assert!((ev.grad_delta[i] - expected[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_zero_weights_give_zero_delta_gradient() {
        let m = SmoothModel::softmax_linear(3, 2);
        let s = LabeledSample::new(vec![0.3, -1.0, 2.0], 0);
        let ev = m.evaluate(&vec![0.0; m.param_dim()], &[0.2, 0.0, -0.1], &s).unwrap();
        assert!(ev.grad_delta.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(99, 0);
        for m in all_kinds() {
            for bounded in [false, true] {
                let m = m.with_bounded_loss(bounded);
                let err = finite_diff_report(&m, 30, 1e-5, &mut rng).unwrap();
                assert!(err < 1e-6, "{:?} bounded={bounded}: {err}", m.kind);
            }
        }
    }

    #[test]
    fn finite_diff_report_edge_cases() {
        let mut rng = SeededRng::new(1, 0);
        let m = SmoothModel::scalar_logistic(2);
        assert_eq!(finite_diff_report(&m, 0, 1e-5, &mut rng).unwrap(), 0.0);
        assert!(finite_diff_report(&m, 10, 1e-5, &mut rng).unwrap() < 1e-7);
        assert!(finite_diff_report(&m, 1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn bounded_loss_lies_in_unit_interval() {
        let m = SmoothModel::mlp(3, 5, 3).with_bounded_loss(true);
        let mut rng = SeededRng::new(8, 0);
        for _ in 0..200 {
            let (w, delta, s) = random_configuration(&m, &mut rng);
            let w: Vec<f64> = w.iter().map(|v| v * 10.0).collect();
            let l = m.loss(&w, &delta, &s).unwrap();
            assert!((0.0..=1.0).contains(&l));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = SmoothModel::softmax_linear(3, 2);
        let s = LabeledSample::new(vec![0.0; 3], 0);
        let w = vec![0.0; m.param_dim()];
        assert!(m.loss(&w, &[0.0; 2], &s).is_err());
        assert!(m.evaluate(&w[1..], &[0.0; 3], &s).is_err());
        let bad = LabeledSample::new(vec![0.0; 3], 2);
        assert!(m.loss(&w, &[0.0; 3], &bad).is_err());
    }

    #[test]
    fn batch_grads_is_mean_of_singles() {
        let m = SmoothModel::mlp(4, 3, 2);
        let mut rng = SeededRng::new(5, 0);
        let w = m.init_params(&mut rng);
        let samples: Vec<LabeledSample> = (0..8)
            .map(|i| LabeledSample::new(rng.gaussian_vec(4), i % 2))
            .collect();
        let deltas: Vec<RealVector> = (0..8)
            .map(|_| numcore::sample_uniform_l2_ball(&mut rng, 4, 0.3).unwrap())
            .collect();
        let refs: Vec<&LabeledSample> = samples.iter().collect();
        let bg = batch_grads(&m, &w, &deltas, &refs).unwrap();
        let mut naive = vec![0.0; m.param_dim()];
        for (d, s) in deltas.iter().zip(&samples) {
            let ev = m.evaluate(&w, d, s).unwrap();
            for (a, g) in naive.iter_mut().zip(&ev.grad_w) {
                *a += g;
            }
            assert_eq!(bg.grad_deltas.len(), 8);
        }
        for (a, b) in naive.iter().zip(&bg.mean_grad_w) {
            assert!((a / 8.0 - b).abs() < 1e-12);
        }

        let single = batch_grads(&m, &w, &deltas[..1], &refs[..1]).unwrap();
        let ev = m.evaluate(&w, &deltas[0], &samples[0]).unwrap();
        assert_eq!(single.mean_grad_w, ev.grad_w);
        assert_eq!(single.grad_deltas[0], ev.grad_delta);

        let dup_refs: Vec<&LabeledSample> = refs[..1].iter().chain(&refs[..1]).cloned().collect();
        let dup = batch_grads(&m, &w, &[deltas[0].clone(), deltas[0].clone()], &dup_refs).unwrap();
        for (a, b) in dup.mean_grad_w.iter().zip(&ev.grad_w) {
            assert!((a - b).abs() < 1e-15);
        }

        assert!(batch_grads(&m, &w, &deltas[..2], &refs[..3]).is_err());
    }

    #[test]
    fn convex_fit_reaches_stationary_point() {
        // Overlapping labels: the regularization-free softmax fit has a finite minimizer.
        let m = SmoothModel::softmax_linear(2, 2);
        let samples = vec![
            LabeledSample::new(vec![1.0, 0.0], 0),
            LabeledSample::new(vec![1.0, 0.0], 1),
            LabeledSample::new(vec![1.0, 0.0], 1),
            LabeledSample::new(vec![0.0, 1.0], 0),
            LabeledSample::new(vec![0.0, 1.0], 0),
            LabeledSample::new(vec![0.0, 1.0], 1),
            LabeledSample::new(vec![-1.0, -1.0], 0),
            LabeledSample::new(vec![-1.0, -1.0], 1),
        ];
        let refs: Vec<&LabeledSample> = samples.iter().collect();
        let deltas = vec![vec![0.0; 2]; samples.len()];
        let mut w = vec![0.0; m.param_dim()];
        for _ in 0..20_000 {
            let g = batch_grads(&m, &w, &deltas, &refs).unwrap();
            numcore::axpy(&mut w, -1.0, &g.mean_grad_w);
        }
        let g = batch_grads(&m, &w, &deltas, &refs).unwrap();
        assert!(numcore::norm2(&g.mean_grad_w) < 1e-8);
    }

    #[test]
    fn dataset_invariants() {
        assert!(Dataset::new(vec![], 2).is_err());
        let s = vec![
            LabeledSample::new(vec![0.0, 1.0], 0),
            LabeledSample::new(vec![0.0], 1),
        ];
        assert!(Dataset::new(s, 2).is_err());
        let s = vec![LabeledSample::new(vec![0.0, 1.0], 3)];
        assert!(Dataset::new(s, 2).is_err());
        let d = Dataset::new(vec![LabeledSample::new(vec![1.0], 0)], 2).unwrap();
        assert!(d.with_replaced(1, LabeledSample::new(vec![1.0], 0)).is_err());
        assert_eq!(d.duplicated().len(), 2);
    }
}
