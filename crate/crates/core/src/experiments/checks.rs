//! Built-in verification suites run by the `check` command: gradient
//! correctness, projection algebra, expansivity algebra, exponent reductions
//! and coupling soundness. Each returns a named pass/fail outcome.

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::Result;
use crate::models::{self, Dataset, LabeledSample, SmoothModel};
use crate::numcore::{self, SeededRng};
use crate::stability::{self, ExpansivityMatrix};
use crate::threat::PerturbationSet;
use crate::trainers::{Algorithm, StepSchedule, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

/// Analytic gradients against central differences (`h = 1e-5`) for every
/// model kind.
pub fn check_gradients(configs: usize, rng: &mut SeededRng) -> Result<CheckOutcome> {
    let kinds = [
        SmoothModel::softmax_linear(5, 3),
        SmoothModel::mlp(6, 5, 3),
        SmoothModel::mlp(4, 3, 2).with_bounded_loss(true),
        SmoothModel::scalar_logistic(4),
    ];
    let mut worst = 0.0_f64;
    for m in &kinds {
        worst = worst.max(models::finite_diff_report(m, configs, 1e-5, rng)?);
    }
    Ok(CheckOutcome::new(
        "gradients",
        worst < 1e-6,
        format!("worst relative error {worst:.3e} over {configs} configurations per model"),
    ))
}

/// Euclidean projection against the clamp / scaling closed forms, and the
/// extreme-point identity `pi(g) = P(eps psi g)` for `||g|| >= 1/psi`.
pub fn check_projections(samples: usize, rng: &mut SeededRng) -> Result<CheckOutcome> {
    let mut worst = 0.0_f64;
    let mut identity_failures = 0;
    let mut identity_checked = 0;
    for _ in 0..samples {
        let dim = 1 + rng.index(6);
        let eps = rng.uniform_range(0.01, 2.0);
        let g: Vec<f64> = rng.gaussian_vec(dim).iter().map(|v| 3.0 * v).collect();
        let l2 = PerturbationSet::l2(eps, dim)?;
        let n = numcore::norm2(&g);
        let expect: Vec<f64> = g.iter().map(|v| v * (eps / n).min(1.0)).collect();
        worst = worst.max(numcore::norm_inf(&numcore::sub(&l2.project(&g)?, &expect)));
        let linf = PerturbationSet::linf(eps, dim)?;
        let expect: Vec<f64> = g.iter().map(|v| v.clamp(-eps, eps)).collect();
        worst = worst.max(numcore::norm_inf(&numcore::sub(&linf.project(&g)?, &expect)));
        let psi = rng.uniform_range(0.1, 10.0);
        if let Some(ok) = l2.projgrad_identity_check(&g, psi)? {
            identity_checked += 1;
            if !ok {
                identity_failures += 1;
            }
        }
    }
    Ok(CheckOutcome::new(
        "projections",
        worst <= 1e-12 && identity_failures == 0,
        format!(
            "closed-form error {worst:.3e}; identity failed {identity_failures}/{identity_checked}"
        ),
    ))
}

/// Eigenvalues `{1 + alpha (r + 1), 1}` and the closed-form top-left entry of
/// the matrix power.
pub fn check_expansivity(samples: usize, rng: &mut SeededRng) -> Result<CheckOutcome> {
    let (mut eig, mut power) = (0.0_f64, 0.0_f64);
    for _ in 0..samples {
        let alpha = rng.uniform_range(0.0, 0.5);
        let r = rng.uniform_range(0.0, 5.0);
        let m = rng.index(11);
        let mat = ExpansivityMatrix::from_shorthand(alpha, r);
        let (got, want) = (mat.eigenvalues(), mat.predicted_eigenvalues());
        eig = eig.max((got[0] - want[0]).abs()).max((got[1] - want[1]).abs());
        let (p, closed) = bounds::expansivity_power(&mat, m);
        power = power.max((p[0][0] - closed).abs() / closed.abs().max(1.0));
    }
    Ok(CheckOutcome::new(
        "expansivity",
        eig <= 1e-10 && power <= 1e-12,
        format!("eigenvalue error {eig:.3e}, power error {power:.3e}"),
    ))
}

/// `lambda_free(m = 1) = lambda_fast(step 0) = beta c`.
pub fn check_reductions(samples: usize, rng: &mut SeededRng) -> Result<CheckOutcome> {
    let mut failures = 0;
    for _ in 0..samples {
        let beta = rng.uniform_range(0.1, 5.0);
        let c = rng.uniform_range(0.01, 2.0);
        let eps = rng.uniform_range(0.0, 1.0);
        let psi = rng.uniform_range(0.1, 100.0);
        let v = bounds::lambda_vanilla(beta, c)?;
        if bounds::lambda_free(beta, c, 1, rng.uniform(), eps, psi)? != v
            || bounds::lambda_fast(beta, c, 0.0, eps, psi)? != v
        {
            failures += 1;
        }
    }
    Ok(CheckOutcome::new(
        "reductions",
        failures == 0,
        format!("{failures}/{samples} reduction mismatches"),
    ))
}

/// Coupled runs on identical datasets never separate.
pub fn check_coupling(seeds: usize) -> Result<CheckOutcome> {
    let mut rng = SeededRng::new(0, 77);
    let samples: Vec<LabeledSample> = (0..12)
        .map(|i| LabeledSample::new(rng.gaussian_vec(3), i % 2))
        .collect();
    let data = Dataset::new(samples, 2)?;
    let model = SmoothModel::mlp(3, 4, 2);
    let mut worst = 0.0_f64;
    for alg in [Algorithm::Vanilla, Algorithm::Free, Algorithm::Fast, Algorithm::FreeTrades] {
        for seed in 0..seeds as u64 {
            let pair = stability::make_neighbor(&data, 0, data.get(0).clone())?;
            let mut cfg = TrainConfig::new(
                alg,
                PerturbationSet::l2(0.3, 3)?,
                StepSchedule::constant(0.1),
                3,
                8,
                seed,
            );
            cfg.inner_attack.steps = 3;
            let trace = stability::coupled_run(&model, &pair, &cfg)?;
            worst = trace.d_w_series().into_iter().fold(worst, f64::max);
        }
    }
    Ok(CheckOutcome::new(
        "coupling",
        worst == 0.0,
        format!("largest distance between identical-data runs {worst:e}"),
    ))
}

/// All suites; `quick` shrinks sample counts.
pub fn run_checks(quick: bool, seed: u64) -> Result<Vec<CheckOutcome>> {
    let n = if quick { 20 } else { 100 };
    let mut rng = SeededRng::new(seed, 90);
    Ok(vec![
        check_gradients(n, &mut rng)?,
        check_projections(10 * n, &mut rng)?,
        check_expansivity(10 * n, &mut rng)?,
        check_reductions(n, &mut rng)?,
        check_coupling(if quick { 2 } else { 10 })?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let out = run_checks(true, 1).unwrap();
        assert_eq!(out.len(), 5);
        for c in &out {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
