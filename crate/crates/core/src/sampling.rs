//! Deterministic random streams and low-discrepancy sequences.
//!
//! Every stochastic routine takes a master seed; work unit `i` draws from
//! stream `i` of that seed, so results do not depend on how units are scheduled
//! across threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::torus::TorusPoint;

/// Independent generator for work unit `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Lebesgue-uniform point of `T^n`.
pub fn uniform_point(rng: &mut impl Rng, n: usize) -> TorusPoint {
    TorusPoint::from_lift(DVector::from_fn(n, |_, _| rng.gen::<f64>()))
}

/// Standard Gaussian vector.
pub fn gaussian(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Uniform point of the Euclidean ball of the given radius in `R^n`.
pub fn in_ball(rng: &mut impl Rng, n: usize, radius: f64) -> DVector<f64> {
    let g = gaussian(rng, n);
    let norm = g.norm();
    let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    if norm == 0.0 {
        return DVector::zeros(n);
    }
    g * (r / norm)
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// `index`-th point of the Halton sequence in `[0, 1)^dim` (`dim <= 16`).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence limited to {} dimensions", PRIMES.len());
    (0..dim).map(|d| radical_inverse(index + 1, PRIMES[d])).collect()
}

/// Low-discrepancy Gaussian vectors: Halton points pushed through Box-Muller.
pub fn halton_gaussian(index: u64, dim: usize) -> DVector<f64> {
    let pairs = dim.div_ceil(2);
    let u = halton(index, 2 * pairs);
    let mut out = DVector::zeros(dim);
    for p in 0..pairs {
        let r = (-2.0 * (1.0 - u[2 * p]).ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u[2 * p + 1];
        out[2 * p] = r * phi.cos();
        if 2 * p + 1 < dim {
            out[2 * p + 1] = r * phi.sin();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_first_points() {
        assert_eq!(halton(0, 2), vec![0.5, 1.0 / 3.0]);
        assert_eq!(halton(1, 2), vec![0.25, 2.0 / 3.0]);
        assert_eq!(halton(2, 1), vec![0.75]);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = stream(7, 3).gen();
        let b: f64 = stream(7, 3).gen();
        let c: f64 = stream(7, 4).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = stream(1, 0);
        for _ in 0..1000 {
            assert!(in_ball(&mut rng, 4, 0.3).norm() <= 0.3);
        }
    }

    #[test]
    fn halton_gaussian_is_finite() {
        for i in 0..2000 {
            assert!(halton_gaussian(i, 5).iter().all(|v| v.is_finite()));
        }
    }
}
