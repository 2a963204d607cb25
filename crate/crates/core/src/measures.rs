//! Push-forward averages of Lebesgue measure on cu-disks, Birkhoff averages of
//! smooth observables, and the dispersion and distance statistics built on them.

use std::f64::consts::TAU;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{plane_aperture, Bundle, CuDisk, SplittingFrame};
use crate::error::{Error, Result};
use crate::sampling;
use crate::stats::{self, CompensatedSum};
use crate::torus::{bump, verify_map_conditions, DeformedMap, Dynamics, TorusPoint, VerifyOptions};

/// One test function on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Constant { value: f64 },
    /// `cos(2 pi <m, x>)`.
    Cos { m: Vec<i32> },
    /// `sin(2 pi <m, x>)`.
    Sin { m: Vec<i32> },
    /// Smooth indicator of a ball: `1` within `radius / 2`, `0` beyond `radius`.
    Bump { center: Vec<f64>, radius: f64 },
}

impl Observable {
    pub fn name(&self) -> String {
        let vec = |m: &[i32]| m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Observable::Constant { value } => format!("const({value})"),
            Observable::Cos { m } => format!("cos[{}]", vec(m)),
            Observable::Sin { m } => format!("sin[{}]", vec(m)),
            Observable::Bump { center, radius } => {
                format!("bump[{}; {radius}]", center.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Observable::Constant { value } => value.abs(),
            _ => 1.0,
        }
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let x = x.as_slice();
        let phase = |m: &[i32]| TAU * m.iter().zip(x).map(|(&k, v)| k as f64 * v).sum::<f64>();
        match self {
            Observable::Constant { value } => *value,
            Observable::Cos { m } => phase(m).cos(),
            Observable::Sin { m } => phase(m).sin(),
            Observable::Bump { center, radius } => {
                let d2: f64 = center
                    .iter()
                    .zip(x)
                    .map(|(c, v)| {
                        let d = v - c;
                        let d = d - crate::torus::floor(d + 0.5);
                        d * d
                    })
                    .sum();
                bump(d2.sqrt() / radius).0
            }
        }
    }
}

/// An ordered list of observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub observables: Vec<Observable>,
}

impl ObservableSet {
    pub fn new(observables: Vec<Observable>) -> Self {
        Self { observables }
    }

    /// `cos` and `sin` of `2 pi <m, x>` for every non-zero `m` with entries in
    /// `{-1, 0, 1}`, one `m` of each pair `+-m`, in lexicographic order of `m`
    /// read from the last coordinate.
    pub fn fourier(n: usize) -> Self {
        let mut out = Vec::new();
        for k in 0..3usize.pow(n as u32) {
            let mut m = vec![0i32; n];
            let mut r = k;
            for entry in m.iter_mut() {
                *entry = (r % 3) as i32 - 1;
                r /= 3;
            }
            // keep m whose first non-zero entry is positive
            match m.iter().find(|v| **v != 0) {
                Some(v) if *v > 0 => {}
                _ => continue,
            }
            out.push(Observable::Cos { m: m.clone() });
            out.push(Observable::Sin { m });
        }
        // lowest frequencies first: unit vectors lead
        out.sort_by_key(|o| match o {
            Observable::Cos { m } | Observable::Sin { m } => m.iter().map(|v| v.unsigned_abs()).sum::<u32>(),
            _ => 0,
        });
        Self { observables: out }
    }

    /// The first `count - 1` Fourier observables of [`fourier`](Self::fourier)
    /// and a mollified indicator of the first deformation site (or all Fourier
    /// observables when the map has no site).
    pub fn standard(map: &DeformedMap, count: usize) -> Self {
        let mut set = Self::fourier(map.dim()).observables;
        match map.sites().first() {
            Some(site) if count > 0 => {
                set.truncate(count - 1);
                set.push(Observable::Bump { center: site.center.as_slice().to_vec(), radius: site.radius });
            }
            _ => set.truncate(count),
        }
        Self { observables: set }
    }

    pub fn len(&self) -> usize {
        self.observables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observables.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.observables.iter().map(|o| o.name()).collect()
    }

    pub fn max_sup_norm(&self) -> f64 {
        self.observables.iter().map(|o| o.sup_norm()).fold(0.0, f64::max)
    }

    fn eval_into(&self, x: &TorusPoint, out: &mut [f64]) {
        let mut last: Option<(&[i32], f64, f64)> = None;
        for (o, v) in self.observables.iter().zip(out.iter_mut()) {
            let m = match o {
                Observable::Cos { m } | Observable::Sin { m } => m.as_slice(),
                _ => {
                    *v = o.eval(x);
                    continue;
                }
            };
            let (sin, cos) = match last {
                Some((prev, sin, cos)) if prev == m => (sin, cos),
                _ => {
                    let phase: f64 = m.iter().zip(x.as_slice()).map(|(&k, v)| k as f64 * v).sum();
                    let (sin, cos) = (TAU * phase).sin_cos();
                    last = Some((m, sin, cos));
                    (sin, cos)
                }
            };
            *v = if matches!(o, Observable::Cos { .. }) { cos } else { sin };
        }
    }
}

/// Weighted sample cloud of a probability measure, summarized by its
/// two-dimensional coordinate marginals and its observable integrals.
///
/// Explicit weighted points are kept only up to a configured count; the
/// marginals and integrals always cover every sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub dim: usize,
    pub grid: usize,
    /// Coordinate pairs `(i, j)`, `i < j`, in the order of `marginals`.
    pub pairs: Vec<(usize, usize)>,
    /// `grid x grid` masses per pair, row index from coordinate `i`.
    pub marginals: Vec<Vec<f64>>,
    pub observable_names: Vec<String>,
    pub integrals: Vec<f64>,
    /// Weight carried by each sample point.
    pub weight: f64,
    pub total_samples: u64,
    /// Explicit weighted samples, when few enough were requested.
    pub samples: Option<Vec<(TorusPoint, f64)>>,
    /// Positions of the disk samples after the last step.
    pub final_cloud: Vec<TorusPoint>,
}

impl EmpiricalMeasure {
    pub fn total_mass(&self) -> f64 {
        stats::sum(self.marginals.first().map(|m| m.clone()).unwrap_or_default())
    }

    /// Largest total-variation distance between corresponding marginals.
    pub fn marginal_tv(&self, other: &EmpiricalMeasure) -> Result<f64> {
        if self.grid != other.grid || self.pairs != other.pairs {
            return Err(Error::Parameter { name: "grid", reason: "measures use different marginal grids".into() });
        }
        Ok(self
            .marginals
            .iter()
            .zip(&other.marginals)
            .map(|(a, b)| 0.5 * stats::sum(a.iter().zip(b).map(|(x, y)| (x - y).abs())))
            .fold(0.0, f64::max))
    }

    /// Largest total-variation distance of a marginal from the uniform one.
    pub fn tv_to_uniform(&self) -> f64 {
        let cell = 1.0 / (self.grid * self.grid) as f64;
        self.marginals.iter().map(|m| 0.5 * stats::sum(m.iter().map(|x| (x - cell).abs()))).fold(0.0, f64::max)
    }

    pub fn max_integral_difference(&self, other: &EmpiricalMeasure) -> f64 {
        self.integrals.iter().zip(&other.integrals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// CSV of the marginal grids: `pair_i, pair_j, row, col, mass`.
    pub fn write_marginals_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "j", "row", "col", "mass"])?;
        for (&(i, j), m) in self.pairs.iter().zip(&self.marginals) {
            for r in 0..self.grid {
                for c in 0..self.grid {
                    w.write_record(&[i.to_string(), j.to_string(), r.to_string(), c.to_string(), format!("{:e}", m[r * self.grid + c])])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// CSV of the explicit samples (point coordinates and weight); empty when
    /// they were not kept.
    pub fn write_samples_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("weight".into());
        w.write_record(&header)?;
        for (p, wt) in self.samples.iter().flatten() {
            let mut row: Vec<String> = p.as_slice().iter().map(|v| format!("{v:e}")).collect();
            row.push(format!("{wt:e}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureOptions {
    /// Cells per axis of every two-dimensional marginal.
    pub grid: usize,
    /// Aperture of the reference cu cone the disk must lie in.
    pub aperture: f64,
    /// Keep explicit weighted samples when `n * samples` is at most this.
    pub keep_samples: usize,
    /// Smallest accepted number of disk samples.
    pub min_samples: usize,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self { grid: 64, aperture: 0.05, keep_samples: 100_000, min_samples: 1000 }
    }
}

/// Samples handled by one deterministic work unit.
const CHUNK: usize = 64;

struct Accumulator {
    counts: Vec<Vec<u64>>,
    sums: Vec<CompensatedSum>,
    kept: Vec<(TorusPoint, f64)>,
    last: Vec<TorusPoint>,
}

/// `mu_n = (1/n) sum_{j<n} f^j_* Leb_D` estimated from `samples` uniform points
/// of the disk, each followed for `n - 1` steps with weight `1 / (n samples)`.
pub fn pushforward_average<M: Dynamics + ?Sized>(
    map: &M,
    disk: &CuDisk,
    n: usize,
    samples: usize,
    seed: u64,
    observables: &ObservableSet,
    opts: &MeasureOptions,
) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::Parameter { name: "n", reason: "at least one step".into() });
    }
    if samples < opts.min_samples {
        return Err(Error::TooFewPoints { needed: opts.min_samples, got: samples });
    }
    if opts.grid == 0 {
        return Err(Error::Parameter { name: "grid", reason: "must be positive".into() });
    }
    let reference = SplittingFrame::reference(map, disk.center())?;
    let aperture = plane_aperture(Bundle::CenterUnstable, &reference, disk.basis())?;
    if aperture > opts.aperture {
        return Err(Error::DiskNotInCone { aperture, limit: opts.aperture });
    }
    let dim = map.dim();
    let g = opts.grid;
    let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i + 1..dim).map(move |j| (i, j))).collect();
    let weight = 1.0 / (n as f64 * samples as f64);
    let keep = n.saturating_mul(samples) <= opts.keep_samples;
    let k = observables.len();
    let chunks: Vec<Accumulator> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator {
                counts: vec![vec![0u64; g * g]; pairs.len()],
                sums: vec![CompensatedSum::new(); k],
                kept: Vec::new(),
                last: Vec::new(),
            };
            let mut values = vec![0.0; k];
            let mut cells = vec![0usize; disk.center().dim()];
            let mut chunk_sums = vec![CompensatedSum::new(); k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut rng = sampling::stream(seed, i as u64);
                let (_, mut x) = disk.sample(&mut rng);
                for step in 0..n {
                    if step > 0 {
                        map.advance(&mut x, None);
                    }
                    for (cell, v) in cells.iter_mut().zip(x.as_slice()) {
                        *cell = ((v * g as f64) as usize).min(g - 1);
                    }
                    for (p, &(a, b)) in pairs.iter().enumerate() {
                        acc.counts[p][cells[a] * g + cells[b]] += 1;
                    }
                    observables.eval_into(&x, &mut values);
                    for (s, v) in chunk_sums.iter_mut().zip(&values) {
                        s.add(*v);
                    }
                    if keep {
                        acc.kept.push((x.clone(), weight));
                    }
                }
                acc.last.push(x);
            }
            for (s, c) in acc.sums.iter_mut().zip(&chunk_sums) {
                s.merge(c);
            }
            acc
        })
        .collect();
    let mut counts = vec![vec![0u64; g * g]; pairs.len()];
    let mut sums = vec![CompensatedSum::new(); k];
    let mut kept = Vec::new();
    let mut final_cloud = Vec::with_capacity(samples);
    for acc in chunks {
        for (total, part) in counts.iter_mut().zip(&acc.counts) {
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        for (s, p) in sums.iter_mut().zip(&acc.sums) {
            s.merge(p);
        }
        kept.extend(acc.kept);
        final_cloud.extend(acc.last);
    }
    let marginals = counts.into_iter().map(|c| c.into_iter().map(|v| v as f64 * weight).collect()).collect();
    let integrals = sums.iter().map(|s| s.value() * weight).collect();
    Ok(EmpiricalMeasure {
        dim,
        grid: g,
        pairs,
        marginals,
        observable_names: observables.names(),
        integrals,
        weight,
        total_samples: (n * samples) as u64,
        samples: keep.then_some(kept),
        final_cloud,
    })
}

/// `(1/n) sum_{j<n} phi(f^j x0)` for every observable.
pub fn birkhoff_average<M: Dynamics + ?Sized>(map: &M, x0: &TorusPoint, n: usize, obs: &ObservableSet) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Parameter { name: "n", reason: "at least one step".into() });
    }
    let mut x = x0.clone();
    let mut sums = vec![CompensatedSum::new(); obs.len()];
    let mut values = vec![0.0; obs.len()];
    for step in 0..n {
        if step > 0 {
            map.advance(&mut x, None);
        }
        obs.eval_into(&x, &mut values);
        for (s, v) in sums.iter_mut().zip(&values) {
            s.add(*v);
        }
    }
    Ok(sums.iter().map(|s| s.value() / n as f64).collect())
}

/// Spread of Birkhoff averages over random starting points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersionReport {
    pub starts: usize,
    pub n: usize,
    pub names: Vec<String>,
    /// Sample standard deviation of the averages, per observable.
    pub std_devs: Vec<f64>,
    /// Mean of the averages, per observable.
    pub means: Vec<f64>,
    /// Largest entry of `std_devs`.
    pub dispersion: f64,
    /// `5 n^{-1/2} max ||phi||`.
    pub envelope: f64,
    pub pass: bool,
}

/// Birkhoff averages from `starts` Lebesgue-random points (or all from the
/// same point when `same_start`), summarized by their spread.
pub fn ergodicity_dispersion<M: Dynamics + ?Sized>(
    map: &M,
    starts: usize,
    n: usize,
    obs: &ObservableSet,
    seed: u64,
    same_start: bool,
) -> Result<DispersionReport> {
    if starts < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: starts });
    }
    let averages: Vec<Vec<f64>> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream(seed, if same_start { 0 } else { i as u64 });
            birkhoff_average(map, &sampling::uniform_point(&mut rng, map.dim()), n, obs)
        })
        .collect::<Result<_>>()?;
    let column = |k: usize| averages.iter().map(|a| a[k]).collect::<Vec<f64>>();
    let std_devs: Vec<f64> = (0..obs.len()).map(|k| stats::std_dev(&column(k))).collect();
    let means: Vec<f64> = (0..obs.len()).map(|k| stats::mean(&column(k))).collect();
    let dispersion = std_devs.iter().copied().fold(0.0, f64::max);
    let envelope = 5.0 * obs.max_sup_norm() / (n as f64).sqrt();
    Ok(DispersionReport { starts, n, names: obs.names(), std_devs, means, dispersion, envelope, pass: dispersion <= envelope })
}

/// Distance between the push-forward averages of two disks, with a noise
/// baseline from independent re-runs on the first disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Largest marginal TV distance plus largest observable-integral difference.
    pub distance: f64,
    pub marginal_tv: f64,
    pub integral_difference: f64,
    /// Distances between the first-disk measure and its re-runs.
    pub baseline: Vec<f64>,
    pub baseline_mean: f64,
    pub baseline_sd: f64,
    /// `baseline_mean + 3 baseline_sd`.
    pub threshold: f64,
    pub pass: bool,
    pub a: EmpiricalMeasure,
    pub b: EmpiricalMeasure,
}

/// Seed offset separating the second disk's streams from the first.
const SECOND_DISK_STREAM: u64 = 0x5eed_0000_0000_0001;

pub fn measure_distance(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<(f64, f64, f64)> {
    let tv = a.marginal_tv(b)?;
    let obs = a.max_integral_difference(b);
    Ok((tv + obs, tv, obs))
}

/// Compares `pushforward_average` on the two disks. The second disk uses
/// `seed` too unless the disks differ, in which case its streams are offset so
/// the two samples are independent. The baseline repeats the first disk with
/// `resamples` further seeds.
#[allow(clippy::too_many_arguments)]
pub fn srb_uniqueness_distance<M: Dynamics + ?Sized>(
    map: &M,
    disk_a: &CuDisk,
    disk_b: &CuDisk,
    n: usize,
    samples: usize,
    seed: u64,
    resamples: usize,
    observables: &ObservableSet,
    opts: &MeasureOptions,
) -> Result<UniquenessReport> {
    let same_disk = disk_a.center() == disk_b.center() && disk_a.basis() == disk_b.basis() && disk_a.radius() == disk_b.radius();
    let a = pushforward_average(map, disk_a, n, samples, seed, observables, opts)?;
    let seed_b = if same_disk { seed } else { seed.wrapping_add(SECOND_DISK_STREAM) };
    let b = pushforward_average(map, disk_b, n, samples, seed_b, observables, opts)?;
    let (distance, marginal_tv, integral_difference) = measure_distance(&a, &b)?;
    let mut baseline = Vec::with_capacity(resamples);
    for r in 0..resamples {
        let rerun = pushforward_average(map, disk_a, n, samples, seed.wrapping_add(1 + r as u64), observables, opts)?;
        baseline.push(measure_distance(&a, &rerun)?.0);
    }
    let baseline_mean = if baseline.is_empty() { 0.0 } else { stats::mean(&baseline) };
    let baseline_sd = stats::std_dev(&baseline);
    let threshold = baseline_mean + 3.0 * baseline_sd;
    Ok(UniquenessReport {
        distance,
        marginal_tv,
        integral_difference,
        baseline,
        baseline_mean,
        baseline_sd,
        threshold,
        pass: distance <= threshold,
        a,
        b,
    })
}

/// One row of a strength scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub strength: f64,
    pub conditions_pass: bool,
    /// Largest `measured / bound` over the condition checks.
    pub worst_check_ratio: f64,
    /// Absent when the conditions failed and the probe was skipped.
    pub dispersion: Option<DispersionReport>,
}

/// Dispersion probe across a grid of uniform site strengths of `map`.
pub fn stability_scan(
    map: &DeformedMap,
    strengths: &[f64],
    verify: &VerifyOptions,
    starts: usize,
    n: usize,
    observable_count: usize,
    seed: u64,
) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(strengths.len());
    for &t in strengths {
        let family = match map.with_uniform_strength(t) {
            Ok(m) => m,
            Err(_) => {
                rows.push(ScanRow { strength: t, conditions_pass: false, worst_check_ratio: f64::INFINITY, dispersion: None });
                continue;
            }
        };
        let report = verify_map_conditions(&family, verify)?;
        let worst = report.checks.iter().map(|c| c.value / c.bound).fold(0.0, f64::max);
        let dispersion = if report.pass {
            let obs = ObservableSet::standard(&family, observable_count);
            Some(ergodicity_dispersion(&family, starts, n, &obs, seed, false)?)
        } else {
            None
        };
        rows.push(ScanRow { strength: t, conditions_pass: report.pass, worst_check_ratio: worst, dispersion });
    }
    Ok(rows)
}
