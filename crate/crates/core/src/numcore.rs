//! Seeded randomness, small vector arithmetic, and uniform sampling from
//! norm balls.
//!
//! Every sampler here consumes a fixed number of draws per call. Coupled
//! training runs rely on this: two runs that share a stream must stay in
//! lockstep no matter what data they see, so rejection sampling is never used.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Dense real vector. Entries are kept finite by every public operation.
pub type RealVector = Vec<f64>;

/// Splittable deterministic generator.
///
/// `(seed, stream_id)` selects a ChaCha8 keystream; distinct stream ids of
/// the same seed are independent streams with no shared state.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A new independent stream derived from this generator's seed.
    pub fn split(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision. One draw.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi]`. One draw.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `0..n` by widening multiply. One draw, no rejection;
    /// the bias is below `n / 2^64`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller. Exactly two draws.
    pub fn gaussian(&mut self) -> f64 {
        // 1 - u lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }

    pub fn gaussian_vec(&mut self, dim: usize) -> RealVector {
        (0..dim).map(|_| self.gaussian()).collect()
    }
}

/// Uniform sample from the solid L2 ball `{v : ||v||_2 <= radius}`.
///
/// Gaussian direction scaled by `radius * u^(1/dim)`; consumes `2 * dim + 1`
/// draws regardless of outcome.
pub fn sample_uniform_l2_ball(rng: &mut SeededRng, dim: usize, radius: f64) -> Result<RealVector> {
    check_ball_args(dim, radius)?;
    let mut v = rng.gaussian_vec(dim);
    let u = rng.uniform();
    let n = norm2(&v);
    let r = radius * libm::pow(u, 1.0 / dim as f64);
    if n == 0.0 {
        // Measure-zero event; keep the draw count fixed and fall back to e1.
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = r;
    } else {
        let s = r / n;
        v.iter_mut().for_each(|x| *x *= s);
    }
    clamp_l2(&mut v, radius);
    Ok(v)
}

/// Uniform sample from the L-infinity ball: each coordinate independently
/// uniform on `[-radius, radius]`. `dim` draws.
pub fn sample_uniform_linf_ball(rng: &mut SeededRng, dim: usize, radius: f64) -> Result<RealVector> {
    check_ball_args(dim, radius)?;
    Ok((0..dim)
        .map(|_| {
            let v = rng.uniform_range(-radius, radius);
            v.clamp(-radius, radius)
        })
        .collect())
}

fn check_ball_args(dim: usize, radius: f64) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidDimension("ball dimension must be >= 1".into()));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidInput(format!(
            "ball radius must be finite and >= 0, got {radius}"
        )));
    }
    Ok(())
}

/// Rescale in place so that `||v||_2 <= radius` holds exactly in floating point.
pub(crate) fn clamp_l2(v: &mut [f64], radius: f64) {
    let n = norm2(v);
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|x| *x *= s);
        // Rounding can leave the norm one ulp above the radius.
        while norm2(v) > radius {
            v.iter_mut().for_each(|x| *x *= 1.0 - f64::EPSILON);
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn add(a: &[f64], b: &[f64]) -> RealVector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> RealVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> RealVector {
    a.iter().map(|x| x * s).collect()
}

/// `y <- y + s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += s * xi);
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    v.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_bit_exact() {
        let mut a = SeededRng::new(11, 3);
        let mut b = SeededRng::new(11, 3);
        for _ in 0..1000 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = SeededRng::new(11, 0);
        let mut b = SeededRng::new(11, 1);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn zero_radius_gives_zero_vector() {
        let mut rng = SeededRng::new(1, 0);
        assert_eq!(sample_uniform_l2_ball(&mut rng, 3, 0.0).unwrap(), vec![0.0; 3]);
        assert_eq!(sample_uniform_linf_ball(&mut rng, 5, 0.0).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn zero_dim_is_rejected() {
        let mut rng = SeededRng::new(1, 0);
        assert!(matches!(
            sample_uniform_l2_ball(&mut rng, 0, 1.0),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            sample_uniform_linf_ball(&mut rng, 0, 1.0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn l2_ball_moments() {
        let mut rng = SeededRng::new(7, 0);
        let draws = 100_000;
        let mut sum = [0.0; 2];
        let mut inner = 0usize;
        for _ in 0..draws {
            let v = sample_uniform_l2_ball(&mut rng, 2, 1.0).unwrap();
            assert!(norm2(&v) <= 1.0);
            sum[0] += v[0];
            sum[1] += v[1];
            if norm2(&v) <= 0.5 {
                inner += 1;
            }
        }
        assert!((sum[0] / draws as f64).abs() < 0.02);
        assert!((sum[1] / draws as f64).abs() < 0.02);
        // area ratio of the radius-1/2 disc
        assert!((inner as f64 / draws as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn linf_ball_mean_and_support() {
        let mut rng = SeededRng::new(3, 0);
        let draws = 100_000;
        let mut s = 0.0;
        for _ in 0..draws {
            let v = sample_uniform_linf_ball(&mut rng, 1, 2.0).unwrap();
            assert!(v[0].abs() <= 2.0);
            s += v[0];
        }
        assert!((s / draws as f64).abs() < 0.03);
        for _ in 0..1000 {
            let v = sample_uniform_linf_ball(&mut rng, 4, 0.1).unwrap();
            assert!(norm_inf(&v) <= 0.1);
        }
    }

    #[test]
    fn draw_count_is_constant() {
        // After one ball sample, both generators must sit at the same position
        // regardless of the radius requested.
        let mut a = SeededRng::new(5, 2);
        let mut b = SeededRng::new(5, 2);
        sample_uniform_l2_ball(&mut a, 6, 0.0).unwrap();
        sample_uniform_l2_ball(&mut b, 6, 3.0).unwrap();
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn index_in_range() {
        let mut rng = SeededRng::new(9, 0);
        for n in 1..50 {
            for _ in 0..20 {
                assert!(rng.index(n) < n);
            }
        }
    }
}
