//! Lyapunov spectra, Birkhoff sums of the hyperbolicity integrands, occupation
//! of the deformation region and volume decay along `E^cs` and `E^cu`.
//!
//! Frames along an orbit are obtained without re-estimation. `E^cu` is seeded
//! at `x0` and pushed forward by `Df`, which attracts it. `E^cs` is repelling
//! forward in time, so the orbit's Jacobians are stored and a generic frame is
//! pulled back from `f^{n+B}(x0)` by solving with each Jacobian in turn; `B`
//! burn-in steps let it settle onto `E^cs` before the summands are recorded.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{estimate_invariant_splitting, CuDisk};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling;
use crate::stats::{self, CompensatedSum, LineFit};
use crate::torus::{Dynamics, Inverse, TorusPoint};

/// Steps used to seed `E^cu` at the start and to settle `E^cs` at the end of an orbit.
pub const FRAME_BURN_IN: usize = 40;

/// Per-step summands along an orbit `x_j = f^j(x0)`, `j < n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitStats {
    pub log_cs_norm: Vec<f64>,
    pub log_cu_inverse_norm: Vec<f64>,
    pub in_v: Vec<bool>,
    pub log_det_cs: Vec<f64>,
    pub log_det_cu: Vec<f64>,
}

impl OrbitStats {
    pub fn len(&self) -> usize {
        self.in_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_v.is_empty()
    }

    /// Fraction of the recorded iterates lying outside `V`.
    pub fn occupation(&self) -> f64 {
        if self.is_empty() {
            return 1.0;
        }
        self.in_v.iter().filter(|v| !**v).count() as f64 / self.len() as f64
    }
}

fn check_finite(m: &DMatrix<f64>, step: usize) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NanJacobian { step })
    }
}

/// Generic basis near the reference bundle, used to seed power iterations.
fn generic_basis(primary: &DMatrix<f64>, secondary: &DMatrix<f64>) -> DMatrix<f64> {
    if secondary.ncols() == 0 || primary.ncols() == 0 {
        return primary.clone();
    }
    let g = DMatrix::from_fn(secondary.ncols(), primary.ncols(), |i, j| 0.1 * ((2 + i) as f64 * 0.913 + (1 + j) as f64 * 1.377).cos());
    linalg::orthonormalize(&(primary + secondary * g))
}

/// Restricted norms and determinants of `Df` along the first `n` iterates of `x0`.
pub fn orbit_stats<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize) -> Result<OrbitStats> {
    let dim = map.dim();
    let u = map.unstable_dim();
    let s = dim - u;
    let total = n + FRAME_BURN_IN;
    let mut jacobians: Vec<f64> = Vec::with_capacity(total * dim * dim);
    let mut out = OrbitStats {
        log_cs_norm: vec![0.0; n],
        log_cu_inverse_norm: vec![0.0; n],
        in_v: Vec::with_capacity(n),
        log_det_cs: vec![0.0; n],
        log_det_cu: vec![0.0; n],
    };
    let mut cu = if u > 0 && s > 0 {
        estimate_invariant_splitting(map, x0, FRAME_BURN_IN)?.cu().clone()
    } else {
        map.reference_splitting().1
    };
    let mut work = DMatrix::zeros(dim, u);
    let mut r = DMatrix::zeros(u, u);
    let mut jac = DMatrix::zeros(dim, dim);
    let mut x = x0.clone();
    for j in 0..total {
        let in_v = map.advance(&mut x, Some(&mut jac));
        check_finite(&jac, j)?;
        jacobians.extend_from_slice(jac.as_slice());
        if j < n {
            out.in_v.push(in_v);
            if u > 0 {
                let res = linalg::push_subspace(&jac, &mut cu, &mut work, &mut r);
                out.log_cu_inverse_norm[j] = -res.conorm.ln();
                out.log_det_cu[j] = res.det.ln();
            }
        }
    }
    if s > 0 {
        let (cs_ref, cu_ref) = map.reference_splitting();
        let mut cs = generic_basis(&cs_ref, &cu_ref);
        let mut a = DMatrix::zeros(dim, dim);
        let mut rs = DMatrix::zeros(s, s);
        for j in (0..total).rev() {
            a.as_mut_slice().copy_from_slice(&jacobians[j * dim * dim..(j + 1) * dim * dim]);
            if !linalg::solve_in_place(&mut a, &mut cs) {
                return Err(Error::NanJacobian { step: j });
            }
            linalg::qr_in_place(&mut cs, &mut rs);
            if j < n {
                // Df(x_j) maps the new basis onto the old one times R^{-1}
                let (_, smin) = linalg::extreme_singular_values(&rs);
                let det: f64 = (0..s).map(|i| rs[(i, i)].abs()).product();
                out.log_cs_norm[j] = -smin.ln();
                out.log_det_cs[j] = -det.ln();
            }
        }
    }
    if let Some((index, value)) = out.log_cs_norm.iter().chain(&out.log_cu_inverse_norm).copied().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(out)
}

/// Running estimates of the spectrum at one checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub exponents: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Exponents sorted in decreasing order.
    pub exponents: Vec<f64>,
    /// Estimates at `k = 1, 2, 4, ...` and at `k = n`.
    pub history: Vec<Checkpoint>,
    pub n: usize,
    /// Time average of `log |det Df|` along the orbit.
    pub log_det_average: f64,
}

impl LyapunovResult {
    pub fn sum(&self) -> f64 {
        stats::sum(self.exponents.iter().copied())
    }
}

/// Full Lyapunov spectrum by pushing an orthonormal frame of `R^n` forward with
/// re-orthonormalization at every step.
pub fn lyapunov_spectrum<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize) -> Result<LyapunovResult> {
    if n < 100 {
        return Err(Error::Parameter { name: "n", reason: format!("at least 100 iterates are required, got {n}") });
    }
    let dim = map.dim();
    let mut q = DMatrix::<f64>::identity(dim, dim);
    let mut work = DMatrix::zeros(dim, dim);
    let mut r = DMatrix::zeros(dim, dim);
    let mut jac = DMatrix::zeros(dim, dim);
    let mut sums = vec![CompensatedSum::new(); dim];
    let mut det_sum = CompensatedSum::new();
    let mut history = Vec::new();
    let mut next_checkpoint = 1;
    let mut x = x0.clone();
    let snapshot = |sums: &[CompensatedSum], k: usize| -> Vec<f64> {
        let mut e: Vec<f64> = sums.iter().map(|s| s.value() / k as f64).collect();
        e.sort_by(|a, b| b.total_cmp(a));
        e
    };
    for k in 1..=n {
        map.advance(&mut x, Some(&mut jac));
        check_finite(&jac, k - 1)?;
        jac.mul_to(&q, &mut work);
        linalg::qr_in_place(&mut work, &mut r);
        std::mem::swap(&mut q, &mut work);
        let mut log_det = 0.0;
        for i in 0..dim {
            let g = r[(i, i)].abs().ln();
            if !g.is_finite() {
                return Err(Error::Overflow { steps: k });
            }
            sums[i].add(g);
            log_det += g;
        }
        det_sum.add(log_det);
        if k == next_checkpoint || k == n {
            history.push(Checkpoint { k, exponents: snapshot(&sums, k) });
            if k == next_checkpoint {
                next_checkpoint *= 2;
            }
        }
    }
    Ok(LyapunovResult { exponents: snapshot(&sums, n), history, n, log_det_average: det_sum.value() / n as f64 })
}

/// Running averages `c_k = (1/k) sum_{j<k} a_j` for `k = 1..=len`.
pub fn running_averages(values: &[f64]) -> Vec<f64> {
    let mut s = CompensatedSum::new();
    values
        .iter()
        .enumerate()
        .map(|(j, v)| {
            s.add(*v);
            s.value() / (j + 1) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BirkhoffSeries {
    pub running: Vec<f64>,
    pub terminal: f64,
}

impl BirkhoffSeries {
    fn from_summands(values: &[f64]) -> Self {
        let running = running_averages(values);
        let terminal = running.last().copied().unwrap_or(0.0);
        Self { running, terminal }
    }

    /// `(k, c_k)` at `k = 1, 2, 4, ...` and at the final `k`.
    pub fn checkpoints(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut k = 1;
        while k <= self.running.len() {
            out.push((k, self.running[k - 1]));
            k *= 2;
        }
        if let Some(&(last, _)) = out.last() {
            if last != self.running.len() {
                out.push((self.running.len(), self.terminal));
            }
        }
        out
    }
}

/// Running averages of `log ||Df|E^cs||` along the orbit of `x0`.
pub fn cs_birkhoff<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize) -> Result<BirkhoffSeries> {
    Ok(BirkhoffSeries::from_summands(&orbit_stats(map, x0, n)?.log_cs_norm))
}

/// Running averages of `log ||(Df|E^cu)^{-1}||` along the orbit of `x0`.
pub fn cu_birkhoff<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize) -> Result<BirkhoffSeries> {
    Ok(BirkhoffSeries::from_summands(&orbit_stats(map, x0, n)?.log_cu_inverse_norm))
}

/// Fraction of `x0, ..., f^{n-1}(x0)` lying outside `V`.
pub fn occupation_fraction<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter { name: "n", reason: "at least one iterate is required".into() });
    }
    let mut x = x0.clone();
    let mut outside = 0usize;
    for _ in 0..n {
        if !map.advance(&mut x, None) {
            outside += 1;
        }
    }
    Ok(outside as f64 / n as f64)
}

/// Terminal Birkhoff averages and occupation of one orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub cs_terminal: f64,
    pub cu_terminal: f64,
    pub occupation: f64,
}

pub fn orbit_summary<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize) -> Result<OrbitSummary> {
    let st = orbit_stats(map, x0, n)?;
    Ok(OrbitSummary {
        cs_terminal: stats::sum(st.log_cs_norm.iter().copied()) / n as f64,
        cu_terminal: stats::sum(st.log_cu_inverse_norm.iter().copied()) / n as f64,
        occupation: st.occupation(),
    })
}

/// Lebesgue-random start number `index` under `seed`.
pub fn random_start(n: usize, seed: u64, index: usize) -> TorusPoint {
    sampling::uniform_point(&mut sampling::stream(seed, index as u64), n)
}

/// [`orbit_summary`] for `starts` Lebesgue-random initial points.
pub fn hyperbolicity_survey<M: Dynamics + ?Sized>(map: &M, starts: usize, n: usize, seed: u64) -> Result<Vec<OrbitSummary>> {
    (0..starts).into_par_iter().map(|i| orbit_summary(map, &random_start(map.dim(), seed, i), n)).collect()
}

/// [`occupation_fraction`] for `starts` Lebesgue-random initial points.
pub fn occupation_survey<M: Dynamics + ?Sized>(map: &M, starts: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    (0..starts).into_par_iter().map(|i| occupation_fraction(map, &random_start(map.dim(), seed, i), n)).collect()
}

/// Rate `c0` such that a fraction `1 - q` of the surveyed orbits have both
/// terminal averages at most `-c0`.
pub fn c0_estimate(summaries: &[OrbitSummary], q: f64) -> f64 {
    let worst: Vec<f64> = summaries.iter().map(|s| s.cs_terminal.max(s.cu_terminal)).collect();
    -stats::quantile(&worst, 1.0 - q)
}

/// The rate `-log(sigma^eps (1 + delta0)^(1 - eps))` guaranteed by an
/// occupation fraction `eps` outside `V`.
pub fn occupation_rate_bound(sigma: f64, delta0: f64, eps: f64) -> f64 {
    -(eps * sigma.ln() + (1.0 - eps) * (1.0 + delta0).ln())
}

/// Monte Carlo estimate for one orbit length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItineraryTail {
    pub n: usize,
    pub epsilon: f64,
    pub samples: usize,
    /// Disk points with fewer than `epsilon * n` of their first `n` iterates outside `V`.
    pub hits: usize,
    pub fraction: f64,
    /// Binomial standard error of `fraction`.
    pub std_error: f64,
}

/// Counts of iterates outside `V` among the first `n` of each sampled disk
/// point, for every `n` in `lengths`.
fn outside_counts<M: Dynamics + ?Sized>(map: &M, disk: &CuDisk, lengths: &[usize], samples: usize, seed: u64) -> Vec<Vec<usize>> {
    let longest = lengths.iter().copied().max().unwrap_or(0);
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream(seed, i as u64);
            let (_, mut x) = disk.sample(&mut rng);
            let mut counts = vec![0usize; lengths.len()];
            let mut outside = 0usize;
            for step in 1..=longest {
                if !map.advance(&mut x, None) {
                    outside += 1;
                }
                for (li, &l) in lengths.iter().enumerate() {
                    if l == step {
                        counts[li] = outside;
                    }
                }
            }
            counts
        })
        .collect()
}

/// Fraction of disk points whose occupation of `T^n \ V` over the first `n`
/// iterates is below `epsilon`.
pub fn itinerary_tail<M: Dynamics + ?Sized>(map: &M, disk: &CuDisk, n: usize, epsilon: f64, samples: usize, seed: u64) -> Result<ItineraryTail> {
    Ok(itinerary_tails(map, disk, &[n], epsilon, samples, seed)?.remove(0))
}

/// [`itinerary_tail`] at several orbit lengths from one set of disk samples.
pub fn itinerary_tails<M: Dynamics + ?Sized>(
    map: &M,
    disk: &CuDisk,
    lengths: &[usize],
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<ItineraryTail>> {
    if samples < 1000 {
        return Err(Error::Parameter { name: "samples", reason: format!("at least 1000 samples are required, got {samples}") });
    }
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(Error::Parameter { name: "n", reason: "orbit lengths must be positive".into() });
    }
    let counts = outside_counts(map, disk, lengths, samples, seed);
    Ok(lengths
        .iter()
        .enumerate()
        .map(|(li, &n)| {
            let hits = counts.iter().filter(|c| (c[li] as f64) < epsilon * n as f64).count();
            let p = hits as f64 / samples as f64;
            ItineraryTail { n, epsilon, samples, hits, fraction: p, std_error: (p * (1.0 - p) / samples as f64).sqrt() }
        })
        .collect())
}

/// Log-linear fit of tail fractions against `n`, weighted by binomial
/// variances of the log fractions (with a half-count continuity correction).
pub fn tail_decay_fit(tails: &[ItineraryTail]) -> Result<LineFit> {
    let x: Vec<f64> = tails.iter().map(|t| t.n as f64).collect();
    let mut y = Vec::with_capacity(tails.len());
    let mut w = Vec::with_capacity(tails.len());
    for t in tails {
        let p = (t.hits as f64 + 0.5) / (t.samples as f64 + 1.0);
        y.push(p.ln());
        w.push(t.samples as f64 * p / (1.0 - p).max(0.5 / t.samples as f64));
    }
    stats::fit_line(&x, &y, Some(&w), 2)
}

/// Logarithm of the counting envelope `C e^{beta0 n} p^{eps n} sigma1^{-n}`.
pub fn tail_envelope_log(n: usize, epsilon: f64, partition_size: usize, log_sigma1: f64, log_c: f64, beta0: f64) -> f64 {
    let n = n as f64;
    log_c + beta0 * n + epsilon * n * (partition_size as f64).ln() - n * log_sigma1
}

/// Least-squares rates of volume decay along the bundles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeRates {
    /// Slope of `log |det(Df^k | E^cs)|` against `k`.
    pub rate_cs: f64,
    /// Slope of `log |det(Df^{-k} | E^cu)|` against `k` along the backward orbit.
    pub rate_cu: f64,
    /// Slope of `log |det(Df^k | E^cu)|` against `k`.
    pub rate_cu_forward: f64,
}

impl VolumeRates {
    /// `log sigma1`: the slowest of the two decay rates.
    pub fn log_sigma1(&self) -> f64 {
        -self.rate_cs.max(self.rate_cu)
    }
}

fn cumulative_slope(values: &[f64]) -> Result<f64> {
    let mut s = CompensatedSum::new();
    let mut x = Vec::with_capacity(values.len());
    let mut y = Vec::with_capacity(values.len());
    for (k, v) in values.iter().enumerate() {
        s.add(*v);
        x.push((k + 1) as f64);
        y.push(s.value());
    }
    Ok(stats::fit_line(&x, &y, None, 10)?.slope)
}

pub fn volume_decay_rates<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize) -> Result<VolumeRates> {
    if n < 10 {
        return Err(Error::TooFewPoints { needed: 10, got: n });
    }
    let forward = orbit_stats(map, x0, n)?;
    let backward = orbit_stats(&Inverse(map), x0, n)?;
    Ok(VolumeRates {
        rate_cs: cumulative_slope(&forward.log_det_cs)?,
        rate_cu: cumulative_slope(&backward.log_det_cs)?,
        rate_cu_forward: cumulative_slope(&forward.log_det_cu)?,
    })
}

/// Terminal cs-Birkhoff averages for a list of points (used on push-forward
/// clouds).
pub fn cs_terminals<M: Dynamics + ?Sized>(map: &M, points: &[TorusPoint], n: usize) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|x| {
            let st = orbit_stats(map, x, n)?;
            Ok(stats::sum(st.log_cs_norm.iter().copied()) / n as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{build_example, DeformedMap, ExampleParams, LinearChart, LinearToralMap};
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn big_l() -> f64 {
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    fn base4() -> DeformedMap {
        build_example(&ExampleParams::default()).unwrap()
    }

    fn start() -> TorusPoint {
        TorusPoint::new(vec![0.123, 0.456, 0.789, 0.321]).unwrap()
    }

    #[test]
    fn base_spectrum_matches_eigenvalues() {
        let r = lyapunov_spectrum(&base4(), &start(), 20_000).unwrap();
        let l = big_l();
        for (e, want) in r.exponents.iter().zip([2.0 * l, l, -l, -2.0 * l]) {
            assert_abs_diff_eq!(*e, want, epsilon = 1e-3);
        }
        assert_abs_diff_eq!(r.log_det_average, 0.0, epsilon = 1e-12);
        assert_eq!(r.history.first().unwrap().k, 1);
        assert_eq!(r.history.last().unwrap().k, 20_000);
    }

    #[test]
    fn identity_spectrum_is_zero() {
        let id = LinearChart::new(DMatrix::identity(3, 3), 1).unwrap();
        let r = lyapunov_spectrum(&id, &TorusPoint::origin(3), 100).unwrap();
        assert!(r.exponents.iter().all(|e| e.abs() < 1e-15));
        assert!(lyapunov_spectrum(&id, &TorusPoint::origin(3), 99).is_err());
    }

    #[test]
    fn deformed_spectrum_sums_to_zero_and_inverts() {
        let map = base4().with_uniform_strength(0.5).unwrap();
        let x = map.sites()[0].center.translate(&DVector::from_vec(vec![0.01, 0.0, 0.005, -0.01]));
        let fwd = lyapunov_spectrum(&map, &x, 5000).unwrap();
        assert!(fwd.sum().abs() < 1e-3, "sum {}", fwd.sum());
        let back = lyapunov_spectrum(&Inverse(&map), &x, 5000).unwrap();
        for (a, b) in fwd.exponents.iter().zip(back.exponents.iter().rev()) {
            assert!((a + b).abs() < 2e-2, "{a} vs {b}");
        }
    }

    #[test]
    fn undeformed_birkhoff_sums_are_constant() {
        let map = base4();
        let cs = cs_birkhoff(&map, &start(), 500).unwrap();
        let cu = cu_birkhoff(&map, &start(), 500).unwrap();
        assert!(cs.running.iter().all(|c| (c + big_l()).abs() < 1e-12));
        assert!(cu.running.iter().all(|c| (c + big_l()).abs() < 1e-12));
        assert_eq!(cs.checkpoints().last().unwrap().0, 500);
    }

    #[test]
    fn identity_birkhoff_is_zero() {
        let id = LinearChart::new(DMatrix::identity(4, 4), 2).unwrap();
        assert!(cu_birkhoff(&id, &TorusPoint::origin(4), 50).unwrap().running.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn pinned_flip_orbit_loses_contraction() {
        let map = base4().with_uniform_strength(1.0).unwrap();
        let p = map.sites()[0].center.clone();
        // rounding error grows like mu^(2k), so the float orbit stays in V for about 15 steps
        let cs = cs_birkhoff(&map, &p, 12).unwrap();
        assert!(cs.terminal >= -(1.1f64).ln(), "{}", cs.terminal);
        assert_abs_diff_eq!(occupation_fraction(&map, &p, 12).unwrap(), 0.0);
    }

    #[test]
    fn occupation_without_sites_is_one() {
        let map = DeformedMap::undeformed(LinearToralMap::new(vec![vec![2, 1], vec![1, 1]]).unwrap());
        assert_abs_diff_eq!(occupation_fraction(&map, &TorusPoint::new(vec![0.3, 0.1]).unwrap(), 1000).unwrap(), 1.0);
    }

    #[test]
    fn undeformed_volume_rates_match_log_determinants() {
        let r = volume_decay_rates(&base4(), &start(), 200).unwrap();
        assert_abs_diff_eq!(r.rate_cs, -3.0 * big_l(), epsilon = 1e-9);
        assert_abs_diff_eq!(r.rate_cu, -3.0 * big_l(), epsilon = 1e-9);
        assert_abs_diff_eq!(r.rate_cu_forward, 3.0 * big_l(), epsilon = 1e-9);
        assert!(volume_decay_rates(&base4(), &start(), 9).is_err());
        let id = LinearChart::new(DMatrix::identity(4, 4), 2).unwrap();
        let r = volume_decay_rates(&id, &TorusPoint::origin(4), 20).unwrap();
        assert!(r.rate_cs.abs() < 1e-14 && r.rate_cu.abs() < 1e-14);
    }

    #[test]
    fn conservative_volume_rates_cancel() {
        let map = base4().with_uniform_strength(0.5).unwrap();
        let x = map.sites()[1].center.translate(&DVector::from_vec(vec![0.0, 0.01, 0.01, 0.0]));
        let r = volume_decay_rates(&map, &x, 300).unwrap();
        assert!((r.rate_cs + r.rate_cu_forward).abs() < 1e-9);
    }

    #[test]
    fn trivial_itinerary_tails() {
        let map = DeformedMap::undeformed(LinearToralMap::new(vec![vec![2, 1], vec![1, 1]]).unwrap());
        let disk = CuDisk::along_splitting(&map, TorusPoint::new(vec![0.2, 0.3]).unwrap(), 0.01, 20).unwrap();
        assert_eq!(itinerary_tail(&map, &disk, 10, 0.5, 1000, 1).unwrap().hits, 0);
        let deformed = base4().with_uniform_strength(0.5).unwrap();
        let disk = CuDisk::along_splitting(&deformed, deformed.sites()[0].center.clone(), 0.02, 20).unwrap();
        assert_eq!(itinerary_tail(&deformed, &disk, 10, 0.0, 1000, 1).unwrap().hits, 0);
        assert!(itinerary_tail(&deformed, &disk, 10, 0.5, 10, 1).is_err());
    }

    #[test]
    fn rate_bound_formula() {
        assert_abs_diff_eq!(occupation_rate_bound(0.5, 0.1, 1.0), 2f64.ln());
        assert_abs_diff_eq!(occupation_rate_bound(0.5, 0.1, 0.0), -(1.1f64).ln());
    }
}
