//! Estimated Lipschitz, smoothness and gradient-floor constants, the
//! stability exponents of the three algorithms, and the closed-form bounds.
//!
//! All three bounds go through [`recursion_bound`]; the algorithms differ
//! only in the `(nu, xi)` they plug in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LabeledSample, LossOracle, ParamVector};
use crate::numcore::{self, RealVector, SeededRng};
use crate::stability::{ExpansivityMatrix, GrowthRecursion};
use crate::threat::PerturbationSet;
use crate::trainers::TrainTrace;

/// Draws `(w, delta, sample)` probes from a bounded region.
///
/// Weights are drawn uniformly along one of the stored segments and then
/// jittered by isotropic Gaussian noise of scale `margin / sqrt(dim)`;
/// perturbations uniformly from the set; samples uniformly from `points`.
/// Every draw consumes a fixed number of random values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSampler {
    pub segments: Vec<(ParamVector, ParamVector)>,
    pub points: Vec<LabeledSample>,
    pub set: PerturbationSet,
    pub margin: f64,
}

impl RegionSampler {
    pub fn new(
        segments: Vec<(ParamVector, ParamVector)>,
        points: Vec<LabeledSample>,
        set: PerturbationSet,
        margin: f64,
    ) -> Result<Self> {
        if segments.is_empty() || points.is_empty() {
            return Err(Error::InvalidInput(
                "region needs at least one segment and one point".into(),
            ));
        }
        let dim = segments[0].0.len();
        if segments.iter().any(|(a, b)| a.len() != dim || b.len() != dim) {
            return Err(Error::InvalidInput("segments differ in dimension".into()));
        }
        if !(margin >= 0.0) {
            return Err(Error::InvalidInput(format!("margin must be >= 0, got {margin}")));
        }
        Ok(Self {
            segments,
            points,
            set,
            margin,
        })
    }

    /// Region around fixed weight vectors (degenerate segments).
    pub fn around(
        anchors: Vec<ParamVector>,
        points: Vec<LabeledSample>,
        set: PerturbationSet,
        margin: f64,
    ) -> Result<Self> {
        Self::new(
            anchors.into_iter().map(|w| (w.clone(), w)).collect(),
            points,
            set,
            margin,
        )
    }

    pub fn param_dim(&self) -> usize {
        self.segments[0].0.len()
    }

    pub fn describe(&self) -> String {
        format!(
            "{} weight segments + gaussian margin {}, {} data points, {:?} ball radius {}",
            self.segments.len(),
            self.margin,
            self.points.len(),
            self.set.norm,
            self.set.radius
        )
    }

    pub fn sample(&self, rng: &mut SeededRng) -> (ParamVector, RealVector, LabeledSample) {
        let (a, b) = &self.segments[rng.index(self.segments.len())];
        let u = rng.uniform();
        let s = self.margin / (a.len() as f64).sqrt();
        let w: RealVector = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| x + u * (y - x))
            .zip(rng.gaussian_vec(a.len()))
            .map(|(v, g)| v + s * g)
            .collect();
        let delta = self.set.sample(rng);
        let point = self.points[rng.index(self.points.len())].clone();
        (ParamVector(w), delta, point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    /// Largest joint gradient norm `||(grad_w, grad_delta)||`.
    pub joint: f64,
    /// Largest `||grad_w||`.
    pub weight: f64,
}

/// Largest gradient norms over `probes` points of the region.
pub fn estimate_lipschitz<O: LossOracle + ?Sized>(
    oracle: &O,
    region: &RegionSampler,
    probes: usize,
    rng: &mut SeededRng,
) -> Result<LipschitzEstimate> {
    if probes == 0 {
        return Err(Error::InvalidInput("at least one probe is required".into()));
    }
    let mut est = LipschitzEstimate {
        joint: 0.0,
        weight: 0.0,
    };
    for _ in 0..probes {
        let (w, delta, x) = region.sample(rng);
        let ev = oracle.evaluate(&w, &delta, &x)?;
        let gw = numcore::norm2(&ev.grad_w);
        let gd = numcore::norm2(&ev.grad_delta);
        est.weight = est.weight.max(gw);
        est.joint = est.joint.max((gw * gw + gd * gd).sqrt());
    }
    Ok(est)
}

/// Power-iteration refinements per smoothness probe.
pub const DEFAULT_POWER_STEPS: usize = 10;

/// Largest `||grad(z') - grad(z)|| / ||z' - z||` over probe pairs
/// `z' = z + pair_scale * v`, `z = (w, delta)`. The first `v` of each probe
/// is a random unit direction; `power_steps` further directions follow the
/// gradient difference (finite-difference power iteration).
pub fn estimate_smoothness<O: LossOracle + ?Sized>(
    oracle: &O,
    region: &RegionSampler,
    probes: usize,
    pair_scale: f64,
    rng: &mut SeededRng,
) -> Result<f64> {
    estimate_smoothness_refined(oracle, region, probes, pair_scale, DEFAULT_POWER_STEPS, rng)
}

pub fn estimate_smoothness_refined<O: LossOracle + ?Sized>(
    oracle: &O,
    region: &RegionSampler,
    probes: usize,
    pair_scale: f64,
    power_steps: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    if probes == 0 {
        return Err(Error::InvalidInput("at least one probe is required".into()));
    }
    if !(pair_scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "pair scale must be positive, got {pair_scale}"
        )));
    }
    let pd = oracle.param_dim();
    let joint_grad = |w: &[f64], d: &[f64], x: &LabeledSample| -> Result<RealVector> {
        let ev = oracle.evaluate(w, d, x)?;
        let mut g = ev.grad_w;
        g.extend(ev.grad_delta);
        Ok(g)
    };
    let mut best = 0.0_f64;
    for _ in 0..probes {
        let (w, delta, x) = region.sample(rng);
        let g0 = joint_grad(&w, &delta, &x)?;
        let mut v = rng.gaussian_vec(g0.len());
        for _ in 0..=power_steps {
            let nv = numcore::norm2(&v);
            if nv == 0.0 {
                break;
            }
            v.iter_mut().for_each(|e| *e /= nv);
            let mut w2 = w.0.clone();
            numcore::axpy(&mut w2, pair_scale, &v[..pd]);
            let mut d2 = delta.clone();
            numcore::axpy(&mut d2, pair_scale, &v[pd..]);
            let g1 = joint_grad(&w2, &d2, &x)?;
            let moved = (numcore::distance(&w2, &w).powi(2) + numcore::distance(&d2, &delta).powi(2))
                .sqrt();
            if moved == 0.0 {
                break;
            }
            let diff = numcore::sub(&g1, &g0);
            best = best.max(numcore::norm2(&diff) / moved);
            v = diff;
        }
    }
    Ok(best)
}

/// Gradient-floor constant `psi = 1 / max(min ||grad_delta||, floor)` with
/// the series it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub psi: f64,
    pub min_norm: f64,
    /// The floor was engaged: some recorded norm fell to or below it.
    pub degenerate: bool,
    pub series: Vec<f64>,
}

pub const DEFAULT_PSI_FLOOR: f64 = 1e-6;

pub fn estimate_psi(trace: &TrainTrace, floor: f64) -> Result<PsiEstimate> {
    psi_from_series(trace.min_grad_delta_series(), floor)
}

pub fn psi_from_series(series: Vec<f64>, floor: f64) -> Result<PsiEstimate> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty gradient-norm series".into()));
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidInput(format!("psi floor must be positive, got {floor}")));
    }
    let min_norm = series.iter().copied().fold(f64::INFINITY, f64::min);
    let degenerate = !(min_norm > floor);
    if degenerate {
        tracing::warn!(min_norm, floor, "delta-gradient norm reached the psi floor");
    }
    Ok(PsiEstimate {
        psi: 1.0 / min_norm.max(floor),
        min_norm,
        degenerate,
        series,
    })
}

/// Estimated constants with the region they were estimated over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimates {
    /// Joint Lipschitz constant.
    pub lipschitz: f64,
    /// Lipschitz constant in the weights.
    pub lipschitz_w: f64,
    pub beta: f64,
    pub psi: f64,
    pub sample_count: usize,
    pub region: String,
}

impl ConstantEstimates {
    pub fn estimate<O: LossOracle + ?Sized>(
        oracle: &O,
        region: &RegionSampler,
        probes: usize,
        pair_scale: f64,
        psi: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let lip = estimate_lipschitz(oracle, region, probes, rng)?;
        let beta = estimate_smoothness(oracle, region, probes, pair_scale, rng)?;
        Ok(Self {
            lipschitz: lip.joint,
            lipschitz_w: lip.weight,
            beta,
            psi,
            sample_count: probes,
            region: region.describe(),
        })
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and positive, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite and >= 0, got {v}")))
    }
}

/// `beta c`.
pub fn lambda_vanilla(beta: f64, c: f64) -> Result<f64> {
    positive("beta", beta)?;
    positive("c", c)?;
    Ok(beta * c)
}

/// `beta c (1 + beta c / m + attack_lr eps psi beta)^(m - 1)`.
pub fn lambda_free(beta: f64, c: f64, m: usize, attack_lr: f64, eps: f64, psi: f64) -> Result<f64> {
    positive("beta", beta)?;
    positive("c", c)?;
    nonnegative("attack_lr", attack_lr)?;
    nonnegative("eps", eps)?;
    positive("psi", psi)?;
    if m == 0 {
        return Err(Error::InvalidInput("m must be >= 1".into()));
    }
    let base = 1.0 + beta * c / m as f64 + attack_lr * eps * psi * beta;
    Ok(beta * c * base.powi(m as i32 - 1))
}

/// `beta c (1 + fast_step eps psi beta)`.
pub fn lambda_fast(beta: f64, c: f64, fast_step: f64, eps: f64, psi: f64) -> Result<f64> {
    positive("beta", beta)?;
    positive("c", c)?;
    nonnegative("fast_step", fast_step)?;
    nonnegative("eps", eps)?;
    positive("psi", psi)?;
    Ok(beta * c * (1.0 + fast_step * eps * psi * beta))
}

/// Bound implied by `E d_t <= (1 + nu/t) E d_{t-1} + nu xi / (n t)` after
/// `steps` steps:
/// `(b/n) (1 + 1/nu) (L_w xi nu / b)^(1/(nu+1)) steps^(nu/(nu+1))`.
pub fn recursion_bound(
    nu: f64,
    xi: f64,
    n: usize,
    b: usize,
    steps: f64,
    lipschitz_w: f64,
) -> Result<f64> {
    positive("nu", nu)?;
    nonnegative("xi", xi)?;
    nonnegative("L_w", lipschitz_w)?;
    if n == 0 || b == 0 {
        return Err(Error::InvalidInput("n and b must be >= 1".into()));
    }
    let (n, b) = (n as f64, b as f64);
    let e = 1.0 / (nu + 1.0);
    Ok(b / n * (1.0 + 1.0 / nu) * (lipschitz_w * xi * nu / b).powf(e) * steps.powf(nu * e))
}

/// The conditioning step that minimizes the bound:
/// `(L_w xi steps^nu nu / b)^(1/(nu+1))`.
pub fn optimal_t0(nu: f64, xi: f64, b: usize, steps: f64, lipschitz_w: f64) -> f64 {
    (lipschitz_w * xi * steps.powf(nu) * nu / b as f64).powf(1.0 / (nu + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub b: usize,
    /// Total weight updates.
    pub t: usize,
    pub m: usize,
    pub c: f64,
    pub eps: f64,
    pub attack_lr: f64,
    pub fast_step: f64,
    pub constants: ConstantEstimates,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.b == 0 || self.t == 0 || self.m == 0 {
            return Err(Error::InvalidInput("n, b, T and m must be >= 1".into()));
        }
        positive("c", self.c)?;
        nonnegative("eps", self.eps)?;
        positive("beta", self.constants.beta)?;
        nonnegative("L", self.constants.lipschitz)?;
        nonnegative("L_w", self.constants.lipschitz_w)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub algorithm: String,
    pub lambda: f64,
    pub recursion: GrowthRecursion,
    pub bound_value: f64,
    pub measured_gap: Option<f64>,
    /// `bound / gap` when the gap is positive.
    pub ratio: Option<f64>,
    /// Free only: its asymptotic rate divided by vanilla's at the same
    /// `T, n`: `(T/n)^(1/(lv+1)) (1/T)^(1/(lf+1))`.
    pub asymptotic_ratio: Option<f64>,
}

impl BoundReport {
    pub fn with_measured_gap(mut self, gap: f64) -> Self {
        self.measured_gap = Some(gap);
        self.ratio = (gap > 0.0).then(|| self.bound_value / gap);
        self
    }
}

fn report(
    algorithm: &str,
    lambda: f64,
    xi: f64,
    inputs: &BoundInputs,
    steps: f64,
) -> Result<BoundReport> {
    let lw = inputs.constants.lipschitz_w;
    let bound_value = recursion_bound(lambda, xi, inputs.n, inputs.b, steps, lw)?;
    Ok(BoundReport {
        algorithm: algorithm.into(),
        lambda,
        recursion: GrowthRecursion {
            nu: lambda,
            xi,
            t0: optimal_t0(lambda, xi, inputs.b, steps, lw),
        },
        bound_value,
        measured_gap: None,
        ratio: None,
        asymptotic_ratio: None,
    })
}

/// `nu = beta c`, `xi = 2 eps n + 2 L / beta`, over `T` steps.
pub fn bound_vanilla(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let k = &inputs.constants;
    let lambda = lambda_vanilla(k.beta, inputs.c)?;
    let xi = 2.0 * inputs.eps * inputs.n as f64 + 2.0 * k.lipschitz / k.beta;
    report("vanilla", lambda, xi, inputs, inputs.t as f64)
}

/// `nu = lambda_free`, `xi = 2 L / beta`, over `T / m` steps.
pub fn bound_free(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    if inputs.t % inputs.m != 0 {
        return Err(Error::InvalidInput(format!(
            "T = {} not divisible by m = {}",
            inputs.t, inputs.m
        )));
    }
    let k = &inputs.constants;
    let lambda = lambda_free(k.beta, inputs.c, inputs.m, inputs.attack_lr, inputs.eps, k.psi)?;
    let xi = 2.0 * k.lipschitz / k.beta;
    let mut r = report("free", lambda, xi, inputs, (inputs.t / inputs.m) as f64)?;
    let lv = lambda_vanilla(k.beta, inputs.c)?;
    let (t, n) = (inputs.t as f64, inputs.n as f64);
    r.asymptotic_ratio = Some((t / n).powf(1.0 / (lv + 1.0)) * (1.0 / t).powf(1.0 / (lambda + 1.0)));
    Ok(r)
}

/// `nu = lambda_fast`, `xi = 2 L / (beta (1 + fast_step eps psi beta))`,
/// over `T` steps.
pub fn bound_fast(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let k = &inputs.constants;
    let lambda = lambda_fast(k.beta, inputs.c, inputs.fast_step, inputs.eps, k.psi)?;
    let xi = 2.0 * k.lipschitz / (k.beta * (1.0 + inputs.fast_step * inputs.eps * k.psi * k.beta));
    report("fast", lambda, xi, inputs, inputs.t as f64)
}

/// `eta^m` by repeated multiplication, and the closed-form top-left entry
/// `(r + (1 + alpha (r + 1))^m) / (r + 1)` from the eigendecomposition.
pub fn expansivity_power(matrix: &ExpansivityMatrix, m: usize) -> ([[f64; 2]; 2], f64) {
    let e = matrix.entries;
    let mut p = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..m {
        p = [
            [
                p[0][0] * e[0][0] + p[0][1] * e[1][0],
                p[0][0] * e[0][1] + p[0][1] * e[1][1],
            ],
            [
                p[1][0] * e[0][0] + p[1][1] * e[1][0],
                p[1][0] * e[0][1] + p[1][1] * e[1][1],
            ],
        ];
    }
    let (a, r) = (matrix.alpha, matrix.r);
    let closed = (r + (1.0 + a * (r + 1.0)).powi(m as i32)) / (r + 1.0);
    (p, closed)
}

/// Upper estimate `1 + alpha m (1 + alpha (r + 1))^(m - 1)` of the
/// closed-form top-left entry.
pub fn stepwise_factor(alpha: f64, r: f64, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    1.0 + alpha * m as f64 * (1.0 + alpha * (r + 1.0)).powi(m as i32 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Evaluation, SmoothModel};
    use crate::trainers::{Algorithm, IterationRecord};

    struct Constant;

    impl LossOracle for Constant {
        fn param_dim(&self) -> usize {
            3
        }
        fn input_dim(&self) -> usize {
            2
        }
        fn loss(&self, _: &[f64], _: &[f64], _: &LabeledSample) -> Result<f64> {
            Ok(0.7)
        }
        fn evaluate(&self, _: &[f64], _: &[f64], _: &LabeledSample) -> Result<Evaluation> {
            Ok(Evaluation {
                loss: 0.7,
                grad_w: vec![0.0; 3],
                grad_delta: vec![0.0; 2],
            })
        }
    }

    /// `a w^2 / 2` in a single weight.
    struct Quadratic(f64);

    impl LossOracle for Quadratic {
        fn param_dim(&self) -> usize {
            1
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn loss(&self, w: &[f64], _: &[f64], _: &LabeledSample) -> Result<f64> {
            Ok(0.5 * self.0 * w[0] * w[0])
        }
        fn evaluate(&self, w: &[f64], _: &[f64], _: &LabeledSample) -> Result<Evaluation> {
            Ok(Evaluation {
                loss: 0.5 * self.0 * w[0] * w[0],
                grad_w: vec![self.0 * w[0]],
                grad_delta: vec![0.0],
            })
        }
    }

    fn point(dim: usize) -> Vec<LabeledSample> {
        vec![LabeledSample::new(vec![0.5; dim], 1)]
    }

    fn inputs(n: usize, b: usize, t: usize, m: usize) -> BoundInputs {
        BoundInputs {
            n,
            b,
            t,
            m,
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
                region: String::new(),
            },
        }
    }

    #[test]
    fn constant_model_has_zero_constants() {
        let region = RegionSampler::around(
            vec![ParamVector(vec![0.1, 0.2, 0.3])],
            point(2),
            PerturbationSet::l2(0.5, 2).unwrap(),
            1.0,
        )
        .unwrap();
        let mut rng = SeededRng::new(1, 0);
        let l = estimate_lipschitz(&Constant, &region, 50, &mut rng).unwrap();
        assert_eq!((l.joint, l.weight), (0.0, 0.0));
        assert_eq!(estimate_smoothness(&Constant, &region, 20, 1e-3, &mut rng).unwrap(), 0.0);
        assert!(estimate_lipschitz(&Constant, &region, 0, &mut rng).is_err());
        assert!(estimate_smoothness(&Constant, &region, 5, 0.0, &mut rng).is_err());
    }

    #[test]
    fn quadratic_curvature_is_recovered() {
        let region = RegionSampler::around(
            vec![ParamVector(vec![0.3])],
            point(1),
            PerturbationSet::l2(0.1, 1).unwrap(),
            2.0,
        )
        .unwrap();
        let mut rng = SeededRng::new(2, 0);
        let beta = estimate_smoothness(&Quadratic(3.5), &region, 10, 1e-3, &mut rng).unwrap();
        assert!((beta - 3.5).abs() < 1e-6);
    }

    #[test]
    fn logistic_lipschitz_respects_analytic_cap() {
        let model = SmoothModel::scalar_logistic(1);
        let eps = 0.3;
        let points: Vec<LabeledSample> = (0..21)
            .map(|i| LabeledSample::new(vec![-1.0 + 0.1 * i as f64], i % 2))
            .collect();
        let region = RegionSampler::around(
            vec![ParamVector(vec![0.0])],
            points,
            PerturbationSet::l2(eps, 1).unwrap(),
            3.0,
        )
        .unwrap();
        let mut rng = SeededRng::new(3, 0);
        let l = estimate_lipschitz(&model, &region, 2000, &mut rng).unwrap();
        assert!(l.weight <= 1.0 + eps);
        assert!(l.weight <= l.joint);
    }

    #[test]
    fn estimates_are_monotone_in_probes() {
        let model = SmoothModel::mlp(3, 4, 2);
        let mut rng = SeededRng::new(4, 0);
        let w = model.init_params(&mut rng);
        let region = RegionSampler::around(
            vec![w],
            vec![LabeledSample::new(vec![0.2, -0.4, 1.0], 0)],
            PerturbationSet::l2(0.3, 3).unwrap(),
            0.5,
        )
        .unwrap();
        let mut last = (0.0, 0.0);
        for probes in [1, 5, 20, 80] {
            let mut r = SeededRng::new(9, 0);
            let l = estimate_lipschitz(&model, &region, probes, &mut r).unwrap().joint;
            let mut r = SeededRng::new(9, 0);
            let b = estimate_smoothness(&model, &region, probes, 1e-4, &mut r).unwrap();
            assert!(l >= last.0 && b >= last.1);
            last = (l, b);
        }
    }

    fn trace_with(norms: &[f64]) -> TrainTrace {
        TrainTrace {
            algorithm: Algorithm::Free,
            records: norms
                .iter()
                .enumerate()
                .map(|(i, &v)| IterationRecord {
                    iteration: i + 1,
                    step: i + 1,
                    inner: 0,
                    lr: 0.1,
                    batch: vec![0],
                    grad_w_norm: 1.0,
                    min_grad_delta_norm: v,
                    loss: 0.5,
                    oracle_calls: i + 1,
                })
                .collect(),
            final_w: ParamVector(vec![0.0]),
        }
    }

    #[test]
    fn psi_examples() {
        let p = estimate_psi(&trace_with(&[0.5, 0.01, 0.2]), DEFAULT_PSI_FLOOR).unwrap();
        assert!(p.psi <= 100.0 + 1e-9 && !p.degenerate);
        let p = estimate_psi(&trace_with(&[0.5, 0.0]), 1e-6).unwrap();
        assert_eq!(p.psi, 1e6);
        assert!(p.degenerate);
        let p = estimate_psi(&trace_with(&[2e-3, 0.4]), 1e-6).unwrap();
        assert!((p.psi - 500.0).abs() < 1e-9);
        assert_eq!(p.series.len(), 2);
        assert!(matches!(estimate_psi(&trace_with(&[]), 1e-6), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_vanilla(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(lambda_vanilla(1.0, 1.0).unwrap(), 1.0);
        assert!((lambda_vanilla(3.7, 0.2).unwrap() - 0.74).abs() < 1e-15);
        assert_eq!(lambda_free(1.3, 0.7, 1, 0.4, 0.5, 3.0).unwrap(), 1.3 * 0.7);
        assert_eq!(lambda_free(1.0, 1.0, 2, 0.0, 0.5, 3.0).unwrap(), 1.5);
        assert!((lambda_free(1.0, 1.0, 4, 0.1, 0.5, 10.0).unwrap() - 5.359375).abs() < 1e-12);
        assert_eq!(lambda_fast(1.3, 0.7, 0.0, 0.5, 2.0).unwrap(), 1.3 * 0.7);
        assert_eq!(lambda_fast(1.0, 1.0, 1.0, 1.0, 1.0).unwrap(), 2.0);
        assert!((lambda_fast(2.0, 0.3, 0.5, 0.4, 5.0).unwrap() - 1.8).abs() < 1e-12);
        assert!(lambda_vanilla(0.0, 1.0).is_err());
        assert!(lambda_free(1.0, -1.0, 2, 0.1, 0.1, 1.0).is_err());
        assert!(lambda_fast(1.0, 1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn hand_checked_bounds() {
        let v = bound_vanilla(&inputs(1, 1, 1, 1)).unwrap();
        assert!((v.bound_value - 4.0).abs() < 1e-12);
        let f = bound_free(&inputs(1, 1, 1, 1)).unwrap();
        assert!((f.bound_value - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let mut i = inputs(1, 1, 1, 1);
        i.c = 1.0;
        let fast = bound_fast(&i).unwrap();
        assert!((fast.bound_value - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(bound_free(&inputs(1, 1, 5, 2)).is_err());
    }

    #[test]
    fn bound_monotonicity() {
        let a = bound_vanilla(&inputs(10, 2, 100, 1)).unwrap().bound_value;
        let b = bound_vanilla(&inputs(20, 2, 100, 1)).unwrap().bound_value;
        assert!(b < a);
        let mut prev = 0.0;
        for lr in [0.01, 0.1, 1.0] {
            let mut i = inputs(10, 2, 100, 4);
            i.attack_lr = lr;
            let v = bound_free(&i).unwrap().bound_value;
            assert!(v > prev);
            prev = v;
        }
        let f1 = bound_fast(&inputs(10, 2, 100, 1)).unwrap().bound_value;
        let f2 = bound_fast(&inputs(10, 2, 200, 1)).unwrap().bound_value;
        assert!(f2 > f1);
    }

    #[test]
    fn expansivity_power_examples() {
        let m = ExpansivityMatrix::from_shorthand(0.3, 1.7);
        let (p, c) = expansivity_power(&m, 0);
        assert_eq!(p, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(c, 1.0);
        let m = ExpansivityMatrix::from_shorthand(0.0, 2.0);
        for k in 0..6 {
            assert_eq!(expansivity_power(&m, k).0[0][0], 1.0);
        }
        let m = ExpansivityMatrix::from_shorthand(0.1, 2.0);
        let (p, c) = expansivity_power(&m, 4);
        assert!((p[0][0] - c).abs() < 1e-12);
        assert!(c <= stepwise_factor(0.1, 2.0, 4));
    }

    #[test]
    fn measured_gap_ratio() {
        let r = bound_vanilla(&inputs(4, 1, 10, 1)).unwrap().with_measured_gap(0.5);
        assert_eq!(r.ratio, Some(r.bound_value / 0.5));
        let r = r.with_measured_gap(-0.1);
        assert_eq!(r.ratio, None);
    }
}
