//! Deterministic synthetic classification data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Dataset, LabeledSample};
use crate::numcore::{RealVector, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Class means at `+-separation * e` with `e = (1, ..., 1) / sqrt(dim)`.
    TwoGaussians,
    /// Four clusters at `(+-1, +-1)` in the first two coordinates, labeled by
    /// sign agreement.
    XorClusters,
    /// Two interleaved spiral arms in the first two coordinates.
    Spiral2d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub noise: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    pub seed: u64,
}

fn default_separation() -> f64 {
    1.0
}

const TRAIN_STREAM: u64 = 10;
const TEST_STREAM: u64 = 11;
const EXTRA_STREAM: u64 = 12;

impl SyntheticSpec {
    pub fn two_gaussians(n_train: usize, n_test: usize, dim: usize, noise: f64, seed: u64) -> Self {
        Self {
            kind: SyntheticKind::TwoGaussians,
            n_train,
            n_test,
            dim,
            noise,
            separation: default_separation(),
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train < 2 || self.n_test < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two train and two test samples, got {} / {}",
                self.n_train, self.n_test
            )));
        }
        let min_dim = match self.kind {
            SyntheticKind::TwoGaussians => 1,
            _ => 2,
        };
        if self.dim < min_dim {
            return Err(Error::InvalidDimension(format!(
                "{:?} needs dim >= {min_dim}",
                self.kind
            )));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::InvalidInput(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }

    /// One labeled draw; the label is fixed by the caller.
    fn draw(&self, y: usize, rng: &mut SeededRng) -> LabeledSample {
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let mut x: RealVector = rng.gaussian_vec(self.dim);
        x.iter_mut().for_each(|v| *v *= self.noise);
        match self.kind {
            SyntheticKind::TwoGaussians => {
                let e = self.separation / (self.dim as f64).sqrt();
                x.iter_mut().for_each(|v| *v += sign * e);
            }
            SyntheticKind::XorClusters => {
                let a = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                // label 1 when the two coordinates agree in sign
                x[0] += self.separation * a;
                x[1] += self.separation * a * sign;
            }
            SyntheticKind::Spiral2d => {
                let u = rng.uniform();
                let r = self.separation * (0.25 + u);
                let theta = 3.0 * std::f64::consts::PI * u + if y == 1 { std::f64::consts::PI } else { 0.0 };
                x[0] += r * theta.cos();
                x[1] += r * theta.sin();
            }
        }
        LabeledSample::new(x, y)
    }

    fn draw_set(&self, n: usize, stream: u64) -> Result<Dataset> {
        let mut rng = SeededRng::new(self.seed, stream);
        let samples = (0..n).map(|i| self.draw(i % 2, &mut rng)).collect();
        Dataset::new(samples, 2)
    }

    /// Fresh draws from the same distribution, for neighbor replacements.
    pub fn extra_samples(&self, n: usize) -> Result<Vec<LabeledSample>> {
        self.validate()?;
        let mut rng = SeededRng::new(self.seed, EXTRA_STREAM);
        Ok((0..n).map(|i| self.draw(i % 2, &mut rng)).collect())
    }
}

/// Train and test sets drawn i.i.d. from one distribution; labels alternate,
/// so classes are balanced within one sample.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    Ok((
        spec.draw_set(spec.n_train, TRAIN_STREAM)?,
        spec.draw_set(spec.n_test, TEST_STREAM)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LossOracle, ParamVector, SmoothModel};

    #[test]
    fn replay_and_balance() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::Spiral2d,
            n_train: 500,
            n_test: 11,
            dim: 2,
            noise: 0.05,
            separation: 1.0,
            seed: 3,
        };
        let (a, t) = make_synthetic(&spec).unwrap();
        let (b, _) = make_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let ones = a.samples().iter().filter(|s| s.y == 1).count();
        assert_eq!(ones, 250);
        let ones = t.samples().iter().filter(|s| s.y == 1).count();
        assert!((ones as i64 - 5).abs() <= 1);
        assert_ne!(a.get(0), t.get(0));
    }

    #[test]
    fn too_few_samples() {
        let mut spec = SyntheticSpec::two_gaussians(1, 10, 3, 1.0, 0);
        assert!(matches!(make_synthetic(&spec), Err(Error::InvalidInput(_))));
        spec.n_train = 4;
        spec.kind = SyntheticKind::XorClusters;
        spec.dim = 1;
        assert!(make_synthetic(&spec).is_err());
    }

    #[test]
    fn noiseless_gaussians_are_separable() {
        let spec = SyntheticSpec::two_gaussians(40, 10, 5, 0.0, 1);
        let (train, _) = make_synthetic(&spec).unwrap();
        // perceptron oracle on the logistic parameterization
        let model = SmoothModel::scalar_logistic(5);
        let mut w = ParamVector::zeros(5);
        for _ in 0..100 {
            let mut errors = 0;
            for s in train.samples() {
                let pred = model.predict(&w, &s.x);
                if pred != s.y {
                    errors += 1;
                    let sign = if s.y == 1 { 1.0 } else { -1.0 };
                    for (wi, xi) in w.iter_mut().zip(&s.x) {
                        *wi += sign * xi;
                    }
                }
            }
            if errors == 0 {
                break;
            }
        }
        let zero = vec![0.0; 5];
        let correct = train
            .samples()
            .iter()
            .filter(|s| model.predict(&w, &s.x) == s.y)
            .count();
        assert_eq!(correct, train.len());
        assert!(model.loss(&w, &zero, train.get(0)).unwrap().is_finite());
    }
}
