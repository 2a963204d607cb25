//! Stable holonomy between centre-unstable disks, measure-ratio estimates
//! for it, and bounded-distortion and angle-decay measurements along
//! stable-leaf pairs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{domination_ratio, estimate_invariant_splitting, subspace_angle, CuDisk};
use crate::linalg;
use crate::manifolds::SLOPE_FLOOR;
use crate::sampling;
use crate::stats::{fit_line, LineFit};
use crate::torus::{nearest_offset, Dynamics, TorusPoint};
use crate::{Error, Result};

/// Smallest volume of `[E^s | disk basis]` accepted as a transverse crossing.
pub const MIN_TRANSVERSALITY: f64 = 1e-4;

/// Matched samples a sub-disk needs before its area ratio is estimated.
pub const MIN_SUBDISK_MATCHES: usize = 10;

/// Pairs an angle fit needs before it reports anything.
pub const MIN_FIT_PAIRS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolonomyOptions {
    /// Forward steps after which the offset must lie in `E^cs`.
    pub steps: usize,
    /// Largest accepted distance between a point and its image.
    pub reach: f64,
    pub max_newton: usize,
    /// Steps over which the per-match contraction rate is measured.
    pub rate_steps: usize,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        Self { steps: 16, reach: 0.05, max_newton: 30, rate_steps: 10 }
    }
}

/// One source point slid along its local stable leaf onto the target disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolonomyMatch {
    /// Index into [`HolonomyPair::params`].
    pub index: usize,
    pub target_param: Vec<f64>,
    pub source_point: Vec<f64>,
    pub target_point: Vec<f64>,
    /// Length of the straight chord from the source point to its image.
    pub stable_distance: f64,
    /// `(|f^k y - f^k x| / |y - x|)^(1/k)` with `k` the rate steps.
    pub contraction_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolonomyPair {
    pub source: CuDisk,
    pub target: CuDisk,
    /// Disk coordinates of the source points.
    pub params: Vec<Vec<f64>>,
    pub matches: Vec<HolonomyMatch>,
    pub unmatched: Vec<usize>,
    pub steps: usize,
}

impl HolonomyPair {
    pub fn match_fraction(&self) -> f64 {
        if self.params.is_empty() {
            return 0.0;
        }
        self.matches.len() as f64 / self.params.len() as f64
    }

    pub fn max_contraction_rate(&self) -> f64 {
        self.matches.iter().map(|m| m.contraction_rate).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let u = self.source.dim();
        let n = self.source.center().dim();
        let mut header = vec!["index".to_string()];
        header.extend((0..u).map(|i| format!("source_c{i}")));
        header.extend((0..u).map(|i| format!("target_c{i}")));
        header.extend((0..n).map(|i| format!("source_x{i}")));
        header.extend((0..n).map(|i| format!("target_x{i}")));
        header.push("stable_distance".into());
        header.push("contraction_rate".into());
        w.write_record(&header)?;
        for m in &self.matches {
            let mut row = vec![m.index.to_string()];
            row.extend(self.params[m.index].iter().map(|v| v.to_string()));
            row.extend(m.target_param.iter().map(|v| v.to_string()));
            row.extend(m.source_point.iter().map(|v| v.to_string()));
            row.extend(m.target_point.iter().map(|v| v.to_string()));
            row.push(m.stable_distance.to_string());
            row.push(m.contraction_rate.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Disk coordinates of a regular grid with `per_axis` nodes on each axis of
/// `[-radius, radius]^dim`, restricted to the closed ball.
pub fn grid_params(dim: usize, radius: f64, per_axis: usize) -> Vec<DVector<f64>> {
    if per_axis < 2 || dim == 0 {
        return vec![DVector::zeros(dim)];
    }
    let step = 2.0 * radius / (per_axis - 1) as f64;
    let total = per_axis.pow(dim as u32);
    (0..total)
        .filter_map(|k| {
            let mut r = k;
            let c = DVector::from_fn(dim, |_, _| {
                let i = r % per_axis;
                r /= per_axis;
                -radius + step * i as f64
            });
            (c.norm() <= radius * (1.0 + 1e-12)).then_some(c)
        })
        .collect()
}

/// Rows of `[E^cs | E^cu]^{-1}` giving the `E^cu` coefficients of a vector,
/// for the reference splitting of `map`.
fn cu_projection<M: Dynamics + ?Sized>(map: &M) -> Result<DMatrix<f64>> {
    let (cs, cu) = map.reference_splitting();
    let n = map.dim();
    let mut full = DMatrix::zeros(n, n);
    full.columns_mut(0, cs.ncols()).copy_from(&cs);
    full.columns_mut(cs.ncols(), cu.ncols()).copy_from(&cu);
    let inv = full.try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    Ok(inv.rows(cs.ncols(), cu.ncols()).into_owned())
}

/// Solves `a x = b` for square `a`, or `None` when `a` is singular.
fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let mut a = a.clone();
    let mut rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    linalg::solve_in_place(&mut a, &mut rhs).then(|| rhs.column(0).into_owned())
}

struct Shot {
    t: DVector<f64>,
    offsets: Vec<DVector<f64>>,
}

/// Finds disk coordinates `t` such that `y = x + origin + basis * t` satisfies
/// `proj (f^N y - f^N x) = 0`, continuing in `N` from one step up to `steps`.
fn shoot<M: Dynamics + ?Sized>(
    map: &M,
    orbit: &[TorusPoint],
    origin: &DVector<f64>,
    basis: &DMatrix<f64>,
    proj: &DMatrix<f64>,
    t0: DVector<f64>,
    opts: &HolonomyOptions,
) -> Option<Shot> {
    let steps = orbit.len() - 1;
    let mut levels = Vec::new();
    let mut level = 1;
    while level < steps {
        levels.push(level);
        level *= 2;
    }
    levels.push(steps);
    let mut t = t0;
    let mut offsets = Vec::new();
    for &level in &levels {
        let mut converged = false;
        for _ in 0..opts.max_newton {
            let mut delta = origin + basis * &t;
            let mut tangent = basis.clone();
            offsets.clear();
            offsets.push(delta.clone());
            for x in &orbit[..level] {
                let j = map.jacobian(&x.translate(&delta));
                tangent = j * tangent;
                delta = map.displace(x, &delta);
                if !(delta.amax() < 0.25) {
                    return None;
                }
                offsets.push(delta.clone());
            }
            let residual = proj * &delta;
            let step = solve(&(proj * &tangent), &(-residual))?;
            t += &step;
            if step.amax() <= 1e-14 * t.amax().max(1e-3) {
                converged = true;
                break;
            }
        }
        if !converged {
            return None;
        }
    }
    // offsets of the accepted coordinates
    let mut delta = origin + basis * &t;
    offsets.clear();
    offsets.push(delta.clone());
    for x in &orbit[..steps] {
        delta = map.displace(x, &delta);
        offsets.push(delta.clone());
    }
    Some(Shot { t, offsets })
}

/// Slides each source point `source.point(c)` along its local stable leaf to
/// the target disk.
///
/// The image `y` is the point of the target disk whose forward orbit stays in
/// the centre-stable direction of the orbit of `x` for `opts.steps` steps;
/// Newton's method is continued in the number of steps starting from the
/// projection along the reference `E^cs`. Points whose leaf does not reach
/// the disk within `opts.reach`, or whose image leaves the disk, are reported
/// as unmatched.
pub fn stable_holonomy<M: Dynamics + ?Sized>(
    map: &M,
    source: &CuDisk,
    params: &[DVector<f64>],
    target: &CuDisk,
    opts: &HolonomyOptions,
) -> Result<HolonomyPair> {
    let n = map.dim();
    if source.center().dim() != n || target.center().dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: target.center().dim() });
    }
    if target.dim() != map.unstable_dim() {
        return Err(Error::DimensionMismatch { expected: map.unstable_dim(), got: target.dim() });
    }
    if let Some(p) = params.iter().find(|p| p.len() != source.dim()) {
        return Err(Error::DimensionMismatch { expected: source.dim(), got: p.len() });
    }
    if opts.steps == 0 {
        return Err(Error::Parameter { name: "steps", reason: "at least one step is required".into() });
    }
    if !(opts.reach > 0.0 && opts.reach < 0.25) {
        return Err(Error::Parameter { name: "reach", reason: format!("{} not in (0, 0.25)", opts.reach) });
    }
    let (cs, _) = map.reference_splitting();
    let mut crossing = DMatrix::zeros(n, n);
    crossing.columns_mut(0, cs.ncols()).copy_from(&cs);
    crossing.columns_mut(cs.ncols(), target.dim()).copy_from(target.basis());
    let volume = linalg::column_volume(&crossing);
    if volume < MIN_TRANSVERSALITY {
        return Err(Error::DegenerateTangency { sigma: volume });
    }
    let proj = cu_projection(map)?;
    let basis = target.basis();
    let guess_matrix = (&proj * basis).try_inverse().ok_or(Error::DegenerateTangency { sigma: 0.0 })?;
    let results: Vec<Option<HolonomyMatch>> = params
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let x = source.point(c);
            let mut orbit = Vec::with_capacity(opts.steps + 1);
            orbit.push(x.clone());
            for _ in 0..opts.steps {
                let next = map.apply(orbit.last().expect("orbit is non-empty"));
                orbit.push(next);
            }
            let origin = nearest_offset(&x, target.center());
            let t0 = -(&guess_matrix * (&proj * &origin));
            let shot = shoot(map, &orbit, &origin, basis, &proj, t0, opts)?;
            if shot.t.norm() > target.radius() * (1.0 + 1e-9) {
                return None;
            }
            let d0 = shot.offsets[0].norm();
            if d0 > opts.reach {
                return None;
            }
            let k = opts.rate_steps.clamp(1, opts.steps);
            let contraction_rate = if d0 > 0.0 { (shot.offsets[k].norm() / d0).powf(1.0 / k as f64) } else { 0.0 };
            let y = target.point(&shot.t);
            Some(HolonomyMatch {
                index,
                target_param: shot.t.as_slice().to_vec(),
                source_point: x.as_slice().to_vec(),
                target_point: y.as_slice().to_vec(),
                stable_distance: d0,
                contraction_rate,
            })
        })
        .collect();
    let mut matches = Vec::new();
    let mut unmatched = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(m) => matches.push(m),
            None => unmatched.push(i),
        }
    }
    Ok(HolonomyPair {
        source: source.clone(),
        target: target.clone(),
        params: params.iter().map(|p| p.as_slice().to_vec()).collect(),
        matches,
        unmatched,
        steps: opts.steps,
    })
}

/// The point `y` on the local stable leaf of `x` that lies on the flat
/// centre-unstable disk through `x + v`, or `None` when no such point is found.
pub fn stable_partner<M: Dynamics + ?Sized>(
    map: &M,
    x: &TorusPoint,
    v: &DVector<f64>,
    opts: &HolonomyOptions,
) -> Result<Option<TorusPoint>> {
    let (_, cu) = map.reference_splitting();
    let source = CuDisk::new(x.clone(), &cu, 0.0)?;
    let target = CuDisk::new(x.translate(v), &cu, opts.reach)?;
    let pair = stable_holonomy(map, &source, &[DVector::zeros(cu.ncols())], &target, opts)?;
    Ok(pair.matches.first().map(|m| TorusPoint::from_lift(DVector::from_column_slice(&m.target_point))))
}

/// `count` same-leaf pairs `(x, y)` whose orbits enter the deformation region
/// `lead` steps after `x`.
///
/// `x` is the `lead`-th preimage of a uniform point of a uniformly chosen site
/// ball and `y` its stable partner through `x + separation * e` for a random
/// unit vector `e` of the reference `E^cs`. Starts without a partner are
/// redrawn up to `10 * count` times.
pub fn sample_stable_pairs<M: Dynamics + ?Sized>(
    map: &M,
    sites: &[(TorusPoint, f64)],
    count: usize,
    separation: f64,
    lead: usize,
    seed: u64,
    opts: &HolonomyOptions,
) -> Result<Vec<(TorusPoint, TorusPoint)>> {
    if sites.is_empty() {
        return Err(Error::Parameter { name: "sites", reason: "at least one site ball is required".into() });
    }
    let (cs, _) = map.reference_splitting();
    let n = map.dim();
    let mut out = Vec::with_capacity(count);
    let mut draws = 0u64;
    while out.len() < count {
        if draws >= 10 * count as u64 {
            return Err(Error::TooFewPoints { needed: count, got: out.len() });
        }
        let mut rng = sampling::stream(seed, draws);
        draws += 1;
        let (center, radius) = &sites[rng.gen_range(0..sites.len())];
        let mut x = center.translate(&sampling::in_ball(&mut rng, n, *radius));
        for _ in 0..lead {
            x = map.apply_inverse(&x);
        }
        let w = &cs * sampling::gaussian(&mut rng, cs.ncols());
        let v = w.normalize() * separation;
        if let Some(y) = stable_partner(map, &x, &v, opts)? {
            out.push((x, y));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedSubdisk {
    pub center: Vec<f64>,
    pub matches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub radius: f64,
    pub centers: Vec<Vec<f64>>,
    pub ratios: Vec<f64>,
    pub skipped: Vec<SkippedSubdisk>,
    /// Largest ratio `K`, absent when every sub-disk was skipped.
    pub max_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
}

/// Convex-hull volume of parameter points in dimension one or two.
fn hull_volume(points: &[&[f64]]) -> Result<f64> {
    let dim = points.first().map_or(0, |p| p.len());
    match dim {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            Ok(hi - lo)
        }
        2 => {
            let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
            pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
            pts.dedup();
            if pts.len() < 3 {
                return Ok(0.0);
            }
            let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
            let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
            for pass in 0..2 {
                let start = hull.len();
                let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
                    if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
                for &p in iter {
                    while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                        hull.pop();
                    }
                    hull.push(p);
                }
                hull.pop();
            }
            let area: f64 = (0..hull.len())
                .map(|i| {
                    let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                    a.0 * b.1 - a.1 * b.0
                })
                .sum();
            Ok(0.5 * area.abs())
        }
        _ => Err(Error::Unsupported(format!("hull areas of {dim}-dimensional disks"))),
    }
}

/// Area ratios `Leb(pi(D)) / Leb(D)` for `count` random sub-disks `D` of
/// radius `r` inside the source disk, each estimated by the ratio of the
/// convex hulls of the matched samples in `D` and of their images.
pub fn holonomy_measure_ratio(pair: &HolonomyPair, r: f64, count: usize, seed: u64) -> Result<RatioReport> {
    let big = pair.source.radius();
    if !(r > 0.0 && r < big) {
        return Err(Error::Parameter { name: "subdisk_radius", reason: format!("{r} not in (0, {big})") });
    }
    let u = pair.source.dim();
    let mut rng = sampling::stream(seed, 0);
    let mut report = RatioReport { radius: r, centers: Vec::new(), ratios: Vec::new(), skipped: Vec::new(), max_ratio: None, min_ratio: None };
    for _ in 0..count {
        let center = sampling::in_ball(&mut rng, u, big - r);
        let inside: Vec<&HolonomyMatch> = pair
            .matches
            .iter()
            .filter(|m| {
                let c = &pair.params[m.index];
                c.iter().zip(center.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r * r
            })
            .collect();
        let center = center.as_slice().to_vec();
        if inside.len() < MIN_SUBDISK_MATCHES {
            report.skipped.push(SkippedSubdisk { center, matches: inside.len() });
            continue;
        }
        let src: Vec<&[f64]> = inside.iter().map(|m| pair.params[m.index].as_slice()).collect();
        let dst: Vec<&[f64]> = inside.iter().map(|m| m.target_param.as_slice()).collect();
        let a = hull_volume(&src)?;
        if a <= 0.0 {
            report.skipped.push(SkippedSubdisk { center, matches: inside.len() });
            continue;
        }
        report.ratios.push(hull_volume(&dst)? / a);
        report.centers.push(center);
    }
    report.max_ratio = report.ratios.iter().copied().reduce(f64::max);
    report.min_ratio = report.ratios.iter().copied().reduce(f64::min);
    Ok(report)
}

/// Closed-form holonomy Jacobian for a linear foliation by translates of the
/// reference `E^cs`: `|det (P B_t)^{-1} P B_s|` with `P` the `E^cu`
/// coefficient map.
pub fn linear_holonomy_jacobian<M: Dynamics + ?Sized>(map: &M, source: &CuDisk, target: &CuDisk) -> Result<f64> {
    let proj = cu_projection(map)?;
    let t = (&proj * target.basis()).try_inverse().ok_or(Error::DegenerateTangency { sigma: 0.0 })?;
    Ok((t * (&proj * source.basis())).determinant().abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionOptions {
    /// Keep `A1`, `A2` fixed instead of pushing them along the orbits.
    pub frozen: bool,
    /// Offset below which the two orbits are treated as one.
    pub merge_below: f64,
}

impl Default for DistortionOptions {
    fn default() -> Self {
        Self { frozen: false, merge_below: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionRecord {
    pub n_max: usize,
    /// `gaps[k - 1] = |log J f^k(x, A1) - log J f^k(y, A2)|`.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    /// Line through the gaps over the second half of the range.
    pub fit: Option<LineFit>,
    pub initial_distance: f64,
    /// Angle between `A1` and `A2`, absent when one is not a graph over the other.
    pub initial_angle: Option<f64>,
    /// Step at which the orbits became indistinguishable.
    pub merged_at: Option<usize>,
    /// Step at which a non-finite log-determinant stopped the computation.
    pub truncated_at: Option<usize>,
}

impl DistortionRecord {
    /// 95% interval of the fitted slope.
    pub fn slope_interval(&self) -> Option<(f64, f64)> {
        self.fit.map(|f| (f.slope - 1.96 * f.slope_se, f.slope + 1.96 * f.slope_se))
    }
}

/// Gaps between the accumulated log-Jacobians of `f^k` restricted to `A1`
/// along the orbit of `x` and to `A2` along the orbit of `y`, `k = 1..n_max`.
///
/// Each step adds the log-determinant of `Df` on the current subspace and
/// then replaces the subspace by its image; `y` is followed as an offset from
/// `x` so that converging orbits keep full relative precision.
pub fn distortion_ratio<M: Dynamics + ?Sized>(
    map: &M,
    x: &TorusPoint,
    y: &TorusPoint,
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    n_max: usize,
    opts: &DistortionOptions,
) -> Result<DistortionRecord> {
    let n = map.dim();
    for a in [a1, a2] {
        if a.nrows() != n || a.ncols() != map.unstable_dim() {
            return Err(Error::DimensionMismatch { expected: map.unstable_dim(), got: a.ncols() });
        }
    }
    if x.dim() != n || y.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.dim() });
    }
    if n_max < 4 {
        return Err(Error::Parameter { name: "n_max", reason: format!("{n_max} < 4 leaves too few points for a slope") });
    }
    let u = a1.ncols();
    let mut b1 = linalg::orthonormalize(a1);
    let mut b2 = linalg::orthonormalize(a2);
    let (fixed1, fixed2) = (b1.clone(), b2.clone());
    let mut work = DMatrix::zeros(n, u);
    let mut r = DMatrix::zeros(u, u);
    let mut xk = x.clone();
    let mut delta = nearest_offset(x, y);
    let initial_distance = delta.norm();
    let initial_angle = subspace_angle(&b1, &b2).ok();
    let mut merged_at = if delta.amax() < opts.merge_below { Some(0) } else { None };
    let mut truncated_at = None;
    let mut acc = 0.0;
    let mut gaps = Vec::with_capacity(n_max);
    for k in 0..n_max {
        let jx = map.jacobian(&xk);
        let jy = if merged_at.is_some() { jx.clone() } else { map.jacobian(&xk.translate(&delta)) };
        let (d1, d2) = if opts.frozen {
            (linalg::restriction(&jx, &fixed1).det, linalg::restriction(&jy, &fixed2).det)
        } else {
            let d1 = linalg::push_subspace(&jx, &mut b1, &mut work, &mut r).det;
            let d2 = linalg::push_subspace(&jy, &mut b2, &mut work, &mut r).det;
            (d1, d2)
        };
        let term = d1.ln() - d2.ln();
        if !term.is_finite() {
            truncated_at = Some(k + 1);
            break;
        }
        acc += term;
        gaps.push(acc.abs());
        if merged_at.is_none() {
            delta = map.displace(&xk, &delta);
            if delta.amax() < opts.merge_below {
                merged_at = Some(k + 1);
            }
        }
        map.advance(&mut xk, None);
    }
    let half = gaps.len() / 2;
    let ks: Vec<f64> = (half + 1..=gaps.len()).map(|k| k as f64).collect();
    let fit = fit_line(&ks, &gaps[half..], None, 3).ok();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(DistortionRecord { n_max, gaps, max_gap, fit, initial_distance, initial_angle, merged_at, truncated_at })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSample {
    pub pair: usize,
    pub k: usize,
    /// Angle between the pushed subspaces; `same_point` samples start from a
    /// tilted and an untilted subspace at `x`, the others from the reference
    /// `E^cu` at `x` and at `y`.
    pub angle: f64,
    pub distance: f64,
    pub same_point: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub n: usize,
    pub pairs_used: usize,
    /// Per-step decay factor of angles between subspaces at one point.
    pub theta: f64,
    pub theta_squared: f64,
    /// Largest domination ratio at the base points of the pairs.
    pub lambda_dom: f64,
    /// Exponent `alpha` clamped to at most one; absent when no angle between
    /// distinct points rises above the noise floor.
    pub alpha: Option<f64>,
    pub alpha_raw: Option<f64>,
    /// Smallest `C` with `angle <= C (theta^k + d_k^alpha)` on every sample
    /// above the noise floor.
    pub constant: f64,
    pub samples: Vec<AngleSample>,
}

/// Tilt of the reference `E^cu` applied to the same-point subspace.
const TILT: f64 = 0.1;

/// Pooled slope of `y` against `x` with a separate intercept per group.
fn within_slope(groups: &[Vec<(f64, f64)>]) -> Option<f64> {
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for g in groups.iter().filter(|g| g.len() >= 3) {
        let mx = g.iter().map(|p| p.0).sum::<f64>() / g.len() as f64;
        let my = g.iter().map(|p| p.1).sum::<f64>() / g.len() as f64;
        sxy += g.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
        sxx += g.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// The later half of the samples whose angle is above the noise floor.
fn usable_tail(samples: &[AngleSample]) -> Vec<&AngleSample> {
    let above: Vec<&AngleSample> = samples.iter().filter(|s| s.angle > SLOPE_FLOOR).collect();
    let skip = above.len() / 2;
    above.into_iter().skip(skip).collect()
}

/// Fits angle decay between pushed subspaces along stable-leaf pairs.
///
/// For each pair, a tilted copy of the reference `E^cu` and the reference
/// itself are pushed along the orbit of `x`; the pooled log-slope of their
/// angle gives `theta`. The reference `E^cu` pushed along the orbits of `x`
/// and of `y` gives angles whose log-slope against the log-distance of the
/// orbits gives `alpha`. Only the later half of the angles above the noise
/// floor enter each fit.
pub fn angle_holder_fit<M: Dynamics + ?Sized>(
    map: &M,
    pairs: &[(TorusPoint, TorusPoint)],
    n: usize,
    seed: u64,
) -> Result<HolderFit> {
    if n < 2 {
        return Err(Error::Parameter { name: "n", reason: "at least two steps are required".into() });
    }
    let (cs, cu) = map.reference_splitting();
    let per_pair: Vec<Result<(Vec<AngleSample>, Vec<AngleSample>, f64)>> = pairs
        .par_iter()
        .enumerate()
        .map(|(index, (x, y))| {
            let mut rng = sampling::stream(seed, index as u64);
            let g = DMatrix::from_fn(cs.ncols(), cu.ncols(), |_, _| rng.gen_range(-1.0..1.0));
            let tilted = linalg::orthonormalize(&(&cu + &cs * g * TILT));
            let mut s_tilted = tilted;
            let mut s_x = cu.clone();
            let mut s_y = cu.clone();
            let mut xk = x.clone();
            let mut delta = nearest_offset(x, y);
            let mut same = Vec::with_capacity(n);
            let mut apart = Vec::with_capacity(n);
            for k in 1..=n {
                let jx = map.jacobian(&xk);
                let jy = map.jacobian(&xk.translate(&delta));
                s_tilted = linalg::orthonormalize(&(&jx * &s_tilted));
                s_x = linalg::orthonormalize(&(&jx * &s_x));
                s_y = linalg::orthonormalize(&(&jy * &s_y));
                delta = map.displace(&xk, &delta);
                map.advance(&mut xk, None);
                let distance = delta.norm();
                same.push(AngleSample { pair: index, k, angle: subspace_angle(&s_x, &s_tilted)?, distance: 0.0, same_point: true });
                apart.push(AngleSample { pair: index, k, angle: subspace_angle(&s_x, &s_y)?, distance, same_point: false });
            }
            let frame = estimate_invariant_splitting(map, x, 40)?;
            Ok((same, apart, domination_ratio(map, &frame)))
        })
        .collect();
    let mut same_groups = Vec::new();
    let mut apart_groups = Vec::new();
    let mut samples = Vec::new();
    let mut lambda_dom: f64 = 0.0;
    let mut pairs_used = 0;
    for r in per_pair {
        let (same, apart, dom) = r?;
        lambda_dom = lambda_dom.max(dom);
        let tail: Vec<(f64, f64)> = usable_tail(&same).iter().map(|s| (s.k as f64, s.angle.ln())).collect();
        if tail.len() >= 3 {
            pairs_used += 1;
        }
        same_groups.push(tail);
        apart_groups.push(
            usable_tail(&apart)
                .iter()
                .filter(|s| s.distance > 0.0)
                .map(|s| (s.distance.ln(), s.angle.ln()))
                .collect::<Vec<_>>(),
        );
        samples.extend(same);
        samples.extend(apart);
    }
    if pairs_used < MIN_FIT_PAIRS {
        return Err(Error::TooFewPoints { needed: MIN_FIT_PAIRS, got: pairs_used });
    }
    let theta = within_slope(&same_groups).map(f64::exp).ok_or(Error::TooFewPoints { needed: 3, got: 0 })?;
    let alpha_raw = within_slope(&apart_groups);
    let alpha = alpha_raw.map(|a| a.min(1.0));
    let constant = samples
        .iter()
        .filter(|s| s.angle > SLOPE_FLOOR)
        .map(|s| {
            let distance_term = match alpha {
                Some(a) if s.distance > 0.0 => s.distance.powf(a),
                _ => 0.0,
            };
            s.angle / (theta.powi(s.k as i32) + distance_term)
        })
        .fold(0.0, f64::max);
    Ok(HolderFit { n, pairs_used, theta, theta_squared: theta * theta, lambda_dom, alpha, alpha_raw, constant, samples })
}
