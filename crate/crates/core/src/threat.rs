//! Perturbation sets, the two projection operators, PGD, and robust risk.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::models::{Dataset, LabeledSample, LossOracle, SmoothModel};
use crate::numcore::{self, RealVector, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    Linf,
}

/// Norm ball `{delta : ||delta|| <= radius}` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSet {
    pub norm: NormKind,
    pub radius: f64,
    pub dim: usize,
}

impl PerturbationSet {
    pub fn new(norm: NormKind, radius: f64, dim: usize) -> Result<Self> {
        let set = Self { norm, radius, dim };
        set.validate()?;
        Ok(set)
    }

    pub fn l2(radius: f64, dim: usize) -> Result<Self> {
        Self::new(NormKind::L2, radius, dim)
    }

    pub fn linf(radius: f64, dim: usize) -> Result<Self> {
        Self::new(NormKind::Linf, radius, dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidDimension("perturbation set dim must be >= 1".into()));
        }
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "perturbation radius must be finite and >= 0, got {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn norm_of(&self, v: &[f64]) -> f64 {
        match self.norm {
            NormKind::L2 => numcore::norm2(v),
            NormKind::Linf => numcore::norm_inf(v),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        v.len() == self.dim && self.norm_of(v) <= self.radius + tol
    }

    /// Euclidean projection onto the ball.
    pub fn project(&self, g: &[f64]) -> Result<RealVector> {
        ensure_len("projection input", g.len(), self.dim)?;
        let eps = self.radius;
        Ok(match self.norm {
            NormKind::L2 => {
                let n = numcore::norm2(g);
                if n <= eps {
                    g.to_vec()
                } else {
                    let mut v = numcore::scale(g, eps / n);
                    numcore::clamp_l2(&mut v, eps);
                    v
                }
            }
            NormKind::Linf => g.iter().map(|x| x.clamp(-eps, eps)).collect(),
        })
    }

    /// Nearest extreme point of the ball. L2: `eps * g / ||g||` (error at
    /// `g = 0`). Linf: `eps * sign(g)` with `sign(0) = +1`.
    pub fn project_extreme(&self, g: &[f64]) -> Result<RealVector> {
        ensure_len("extreme projection input", g.len(), self.dim)?;
        let eps = self.radius;
        match self.norm {
            NormKind::L2 => {
                let n = numcore::norm2(g);
                if n == 0.0 {
                    return Err(Error::DegenerateGradient(
                        "L2 extreme-point projection of the zero vector".into(),
                    ));
                }
                Ok(numcore::scale(g, eps / n))
            }
            NormKind::Linf => Ok(g
                .iter()
                .map(|x| if *x < 0.0 { -eps } else { eps })
                .collect()),
        }
    }

    /// Checks `pi(g) == P(eps * psi * g)` to 1e-10 (max-abs). `None` when the
    /// precondition `||g|| >= 1/psi` does not hold.
    pub fn projgrad_identity_check(&self, g: &[f64], psi: f64) -> Result<Option<bool>> {
        if self.norm != NormKind::L2 {
            return Err(Error::InvalidInput("identity holds for L2 balls only".into()));
        }
        if !(psi > 0.0) {
            return Err(Error::InvalidInput(format!("psi must be positive, got {psi}")));
        }
        ensure_len("identity input", g.len(), self.dim)?;
        if numcore::norm2(g) < 1.0 / psi {
            return Ok(None);
        }
        let lhs = self.project_extreme(g)?;
        let rhs = self.project(&numcore::scale(g, self.radius * psi))?;
        Ok(Some(numcore::norm_inf(&numcore::sub(&lhs, &rhs)) <= 1e-10))
    }

    /// Uniform draw from the ball.
    pub fn sample(&self, rng: &mut SeededRng) -> RealVector {
        match self.norm {
            NormKind::L2 => numcore::sample_uniform_l2_ball(rng, self.dim, self.radius),
            NormKind::Linf => numcore::sample_uniform_linf_ball(rng, self.dim, self.radius),
        }
        .expect("set validated at construction")
    }

    /// One projected ascent step `P(delta + step * pi(g))`. An all-zero
    /// gradient leaves `delta` unchanged.
    pub fn ascent_step(&self, delta: &[f64], grad: &[f64], step: f64) -> Result<RealVector> {
        if grad.iter().all(|g| *g == 0.0) {
            return Ok(delta.to_vec());
        }
        let dir = self.project_extreme(grad)?;
        let mut moved = delta.to_vec();
        numcore::axpy(&mut moved, step, &dir);
        self.project(&moved)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackInit {
    Zero,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub steps: usize,
    pub step_size: f64,
    pub restarts: usize,
    pub init: AttackInit,
}

impl AttackConfig {
    /// Ten steps of size `eps / 4`, one uniform restart.
    pub fn evaluation_default(eps: f64) -> Self {
        Self {
            steps: 10,
            step_size: eps / 4.0,
            restarts: 1,
            init: AttackInit::Uniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("attack steps must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("attack restarts must be >= 1".into()));
        }
        // Zero is allowed: it is what eps / 4 gives for the eps = 0 ball.
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "attack step size must be finite and >= 0, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Result of one PGD run on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub delta: RealVector,
    pub loss: f64,
    /// Number of gradient evaluations made.
    pub oracle_calls: usize,
    /// Smallest `||grad_delta||` met along the attack.
    pub min_grad_delta_norm: f64,
}

/// PGD with explicit streams: the first random start comes from
/// `first_start`, further restarts from `restarts`. Trainers use this so the
/// first start shares the stream that single-step methods draw from.
#[allow(clippy::too_many_arguments)]
pub fn pgd_attack_with_streams<O: LossOracle + ?Sized>(
    oracle: &O,
    w: &[f64],
    sample: &LabeledSample,
    set: &PerturbationSet,
    cfg: &AttackConfig,
    first_start: &mut SeededRng,
    restarts: &mut SeededRng,
) -> Result<AttackOutcome> {
    pgd_core(oracle, w, sample, set, cfg, |r| {
        if r == 0 {
            set.sample(first_start)
        } else {
            set.sample(restarts)
        }
    })
}

fn pgd_core<O: LossOracle + ?Sized>(
    oracle: &O,
    w: &[f64],
    sample: &LabeledSample,
    set: &PerturbationSet,
    cfg: &AttackConfig,
    mut uniform_start: impl FnMut(usize) -> RealVector,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    ensure_len("attack set dim", set.dim, oracle.input_dim())?;
    let mut best: Option<(RealVector, f64)> = None;
    let mut calls = 0;
    let mut min_norm = f64::INFINITY;
    for r in 0..cfg.restarts {
        let mut delta = match cfg.init {
            AttackInit::Zero => vec![0.0; set.dim],
            AttackInit::Uniform => uniform_start(r),
        };
        for k in 0..cfg.steps {
            let ev = oracle.evaluate(w, &delta, sample)?;
            calls += 1;
            min_norm = min_norm.min(numcore::norm2(&ev.grad_delta));
            if k == 0 && cfg.init == AttackInit::Zero && best.is_none() {
                // The zero start is itself a candidate.
                best = Some((delta.clone(), ev.loss));
            }
            delta = set.ascent_step(&delta, &ev.grad_delta, cfg.step_size)?;
        }
        let loss = oracle.loss(w, &delta, sample)?;
        match &best {
            Some((_, b)) if *b >= loss => {}
            _ => best = Some((delta, loss)),
        }
    }
    let (delta, loss) = best.expect("at least one restart");
    Ok(AttackOutcome {
        delta,
        loss,
        oracle_calls: calls,
        min_grad_delta_norm: min_norm,
    })
}

/// PGD maximizing the oracle's loss over the set; best restart by final loss.
pub fn pgd_attack<O: LossOracle + ?Sized>(
    oracle: &O,
    w: &[f64],
    sample: &LabeledSample,
    set: &PerturbationSet,
    cfg: &AttackConfig,
    rng: &mut SeededRng,
) -> Result<RealVector> {
    Ok(pgd_core(oracle, w, sample, set, cfg, |_| set.sample(rng))?.delta)
}

/// Loss at the PGD perturbation: a lower bound on `max_delta h`, used as its
/// surrogate everywhere.
pub fn robust_loss<O: LossOracle + ?Sized>(
    oracle: &O,
    w: &[f64],
    sample: &LabeledSample,
    set: &PerturbationSet,
    cfg: &AttackConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    let delta = pgd_attack(oracle, w, sample, set, cfg, rng)?;
    oracle.loss(w, &delta, sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustRisk {
    pub risk: f64,
    pub accuracy: f64,
}

/// Mean robust loss over the dataset and the fraction of samples still
/// classified correctly at their attacked point.
pub fn empirical_robust_risk(
    model: &SmoothModel,
    w: &[f64],
    dataset: &Dataset,
    set: &PerturbationSet,
    cfg: &AttackConfig,
    rng: &mut SeededRng,
) -> Result<RobustRisk> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let deltas = craft_attacks(model, w, dataset, set, cfg, rng)?;
    evaluate_under(model, w, dataset, &deltas)
}

/// One PGD perturbation per sample, crafted against `w`.
pub fn craft_attacks<O: LossOracle + ?Sized>(
    oracle: &O,
    w: &[f64],
    dataset: &Dataset,
    set: &PerturbationSet,
    cfg: &AttackConfig,
    rng: &mut SeededRng,
) -> Result<Vec<RealVector>> {
    dataset
        .samples()
        .iter()
        .map(|s| pgd_attack(oracle, w, s, set, cfg, rng))
        .collect()
}

/// Risk and accuracy of `w` at fixed perturbations (possibly crafted against
/// another model).
pub fn evaluate_under(
    model: &SmoothModel,
    w: &[f64],
    dataset: &Dataset,
    deltas: &[RealVector],
) -> Result<RobustRisk> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    ensure_len("perturbations", deltas.len(), dataset.len())?;
    let mut risk = 0.0;
    let mut correct = 0usize;
    for (s, d) in dataset.samples().iter().zip(deltas) {
        risk += model.loss(w, d, s)?;
        if model.predict(w, &SmoothModel::perturbed(&s.x, d)) == s.y {
            correct += 1;
        }
    }
    let n = dataset.len() as f64;
    Ok(RobustRisk {
        risk: risk / n,
        accuracy: correct as f64 / n,
    })
}
