use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{estimate_invariant_splitting, plane_aperture, Bundle, CuDisk, SplittingFrame};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sampling;
use crate::torus::{torus_distance, Dynamics, TorusPoint};

/// Sampled piece of the unstable manifold of a fixed point, parametrized by a
/// regular grid of eigen-coordinates at the fixed point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSegment {
    dim: usize,
    /// Points per parameter axis; their product is the sample count.
    shape: Vec<usize>,
    /// Half-widths of the parameter box.
    half_widths: Vec<f64>,
    /// Lifts to `R^n`, flat and point-major; consecutive samples are close.
    lifts: Vec<f64>,
    /// Cumulative arc length, for one-dimensional pieces.
    pub arc_length: Option<Vec<f64>>,
    /// Largest distance between grid neighbours.
    pub max_gap: f64,
    /// Largest aperture of a sampled tangent plane against the reference cu cone.
    pub tangent_aperture: f64,
    /// Number of iterates applied to the seed box.
    pub steps: usize,
    /// Eigenvalues of `Df` on the unstable bundle at the fixed point.
    pub eigenvalues: Vec<f64>,
}

impl CurveSegment {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.lifts.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.lifts.is_empty()
    }

    pub fn lift(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.lifts[i * self.dim..(i + 1) * self.dim])
    }

    pub fn point(&self, i: usize) -> TorusPoint {
        TorusPoint::from_lift(self.lift(i))
    }

    pub fn points(&self) -> impl Iterator<Item = TorusPoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }

    /// Grid cells as lists of corner indices (two corners per cell for curves,
    /// four for sheets, counter-clockwise).
    pub fn cells(&self) -> Vec<Vec<usize>> {
        match self.shape.as_slice() {
            [m] => (0..m.saturating_sub(1)).map(|i| vec![i, i + 1]).collect(),
            [m0, m1] => {
                let mut out = Vec::with_capacity(m0.saturating_sub(1) * m1.saturating_sub(1));
                for i in 0..m0.saturating_sub(1) {
                    for j in 0..m1.saturating_sub(1) {
                        let k = i * m1 + j;
                        out.push(vec![k, k + m1, k + m1 + 1, k + 1]);
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.extend((0..self.dim).map(|j| format!("lift{j}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let lift = self.lift(i);
            let p = self.point(i);
            let row: Vec<String> = p.as_slice().iter().chain(lift.iter()).map(|v| format!("{v:e}")).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowOptions {
    /// Size of the seed box at the fixed point.
    pub seed_radius: f64,
    /// Largest allowed distance between grid neighbours.
    pub resolution: f64,
    /// Largest number of samples.
    pub budget: usize,
    /// Cone aperture for the tangent certificate.
    pub aperture: f64,
}

impl Default for GrowOptions {
    fn default() -> Self {
        Self { seed_radius: 1e-4, resolution: 0.05, budget: 2_000_000, aperture: 0.05 }
    }
}

/// Unstable eigenvalues and unit eigenvectors of `Df(q)` at a fixed point.
fn unstable_eigen<M: Dynamics + ?Sized>(map: &M, q: &TorusPoint) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let frame = estimate_invariant_splitting(map, q, 40)?;
    let cu = frame.cu();
    let r = cu.transpose() * map.jacobian(q) * cu;
    match r.nrows() {
        1 => Ok((vec![r[(0, 0)]], cu.clone())),
        2 => {
            let tr = r[(0, 0)] + r[(1, 1)];
            let det = r.determinant();
            let disc = tr * tr / 4.0 - det;
            if disc <= 0.0 {
                return Err(Error::Unsupported("complex or repeated unstable eigenvalues".into()));
            }
            let lams = [tr / 2.0 + disc.sqrt(), tr / 2.0 - disc.sqrt()];
            let mut e = DMatrix::zeros(cu.nrows(), 2);
            for (j, &l) in lams.iter().enumerate() {
                let a = DVector::from_vec(vec![r[(0, 1)], l - r[(0, 0)]]);
                let b = DVector::from_vec(vec![l - r[(1, 1)], r[(1, 0)]]);
                let v = if a.norm() >= b.norm() { a } else { b };
                let col = cu * v;
                e.set_column(j, &(&col / col.norm()));
            }
            Ok((lams.to_vec(), e))
        }
        u => Err(Error::Unsupported(format!("unstable dimension {u}; only 1 and 2 are supported"))),
    }
}

/// Grows the unstable manifold of the fixed point `q` until it spans about
/// `target_length` along every unstable eigendirection.
///
/// A box of half-widths `r_i = target_length / |lambda_i|^k` (all at most the
/// seed radius) in the eigen-coordinates at `q` is iterated `k` times in the
/// lift; the grid is refined axis by axis until neighbouring images are within
/// the resolution. Every tangent plane is pushed along its orbit and checked
/// against the reference cu cone.
pub fn grow_unstable_manifold<M: Dynamics + ?Sized>(
    map: &M,
    q: &TorusPoint,
    target_length: f64,
    opts: &GrowOptions,
) -> Result<CurveSegment> {
    if !(target_length >= 0.0 && target_length.is_finite()) {
        return Err(Error::Parameter { name: "target_length", reason: format!("must be finite and non-negative, got {target_length}") });
    }
    let fixed_error = torus_distance(&map.apply(q), q)?;
    if fixed_error > 1e-12 {
        return Err(Error::Parameter { name: "q", reason: format!("not a fixed point (moves by {fixed_error:e})") });
    }
    let n = map.dim();
    let (lams, e) = unstable_eigen(map, q)?;
    let u = lams.len();
    if target_length == 0.0 {
        return Ok(CurveSegment {
            dim: n,
            shape: vec![1; u],
            half_widths: vec![0.0; u],
            lifts: q.as_slice().to_vec(),
            arc_length: (u == 1).then(|| vec![0.0]),
            max_gap: 0.0,
            tangent_aperture: 0.0,
            steps: 0,
            eigenvalues: lams,
        });
    }
    let weakest = lams.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
    if !(weakest > 1.0) {
        return Err(Error::NotAnosov { modulus: weakest });
    }
    let steps = ((target_length / opts.seed_radius).ln() / weakest.ln()).ceil().max(0.0) as usize;
    let half_widths: Vec<f64> = lams.iter().map(|l| target_length / l.abs().powi(steps as i32)).collect();
    let base = q.coords().clone();
    let image = |c: &[f64]| -> DVector<f64> {
        let mut lift = &base + &e * DVector::from_column_slice(c);
        for _ in 0..steps {
            lift = map.lift_apply(&lift);
        }
        lift
    };
    let mut shape = vec![3usize; u];
    loop {
        let count: usize = shape.iter().product();
        if count > opts.budget {
            return Err(Error::ResolutionBudget { needed: count, budget: opts.budget });
        }
        let params = grid_params(&shape, &half_widths);
        let lifts: Vec<f64> = params.par_iter().flat_map_iter(|c| image(c).data.as_vec().clone()).collect();
        let gaps = axis_gaps(&lifts, n, &shape);
        let mut refined = false;
        for (a, &g) in gaps.iter().enumerate() {
            if g > opts.resolution {
                shape[a] = 2 * shape[a] - 1;
                refined = true;
            }
        }
        if refined {
            continue;
        }
        let reference = SplittingFrame::reference(map, q)?;
        let apertures: Vec<Result<f64>> = params
            .par_iter()
            .map(|c| {
                let mut lift = &base + &e * DVector::from_column_slice(c);
                let mut tangent = e.clone();
                let mut work = DMatrix::zeros(n, u);
                let mut r = DMatrix::zeros(u, u);
                for _ in 0..steps {
                    let j = map.jacobian(&TorusPoint::from_lift(lift.clone()));
                    linalg::push_subspace(&j, &mut tangent, &mut work, &mut r);
                    lift = map.lift_apply(&lift);
                }
                plane_aperture(Bundle::CenterUnstable, &reference, &tangent)
            })
            .collect();
        let mut tangent_aperture: f64 = 0.0;
        for a in apertures {
            tangent_aperture = tangent_aperture.max(a?);
        }
        if tangent_aperture > opts.aperture {
            return Err(Error::DiskNotInCone { aperture: tangent_aperture, limit: opts.aperture });
        }
        let arc_length = (u == 1).then(|| {
            let mut acc = vec![0.0];
            for i in 1..shape[0] {
                let d: f64 = (0..n).map(|j| (lifts[i * n + j] - lifts[(i - 1) * n + j]).powi(2)).sum::<f64>().sqrt();
                acc.push(acc[i - 1] + d);
            }
            acc
        });
        let max_gap = gaps.iter().copied().fold(0.0, f64::max);
        return Ok(CurveSegment { dim: n, shape, half_widths, lifts, arc_length, max_gap, tangent_aperture, steps, eigenvalues: lams });
    }
}

fn grid_params(shape: &[usize], half_widths: &[f64]) -> Vec<Vec<f64>> {
    let count: usize = shape.iter().product();
    (0..count)
        .map(|mut k| {
            let mut c = vec![0.0; shape.len()];
            for a in (0..shape.len()).rev() {
                let i = k % shape[a];
                k /= shape[a];
                c[a] = if shape[a] == 1 { 0.0 } else { -half_widths[a] + 2.0 * half_widths[a] * i as f64 / (shape[a] - 1) as f64 };
            }
            c
        })
        .collect()
}

/// Largest neighbour distance along each parameter axis.
fn axis_gaps(lifts: &[f64], n: usize, shape: &[usize]) -> Vec<f64> {
    let count: usize = shape.iter().product();
    let mut strides = vec![1usize; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    (0..shape.len())
        .map(|a| {
            let mut worst: f64 = 0.0;
            for k in 0..count {
                if (k / strides[a]) % shape[a] + 1 < shape[a] {
                    let l = k + strides[a];
                    let d: f64 = (0..n).map(|j| (lifts[l * n + j] - lifts[k * n + j]).powi(2)).sum::<f64>().sqrt();
                    worst = worst.max(d);
                }
            }
            worst
        })
        .collect()
}

/// Result of probing a sheet with transverse disks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub epsilon0: f64,
    pub trials: usize,
    pub hits: usize,
    pub fraction: f64,
    /// Largest distance from a disk centre to the nearest intersection, over
    /// all trials (infinite when some trial found none within the search radius).
    pub max_gap: f64,
}

/// For `trials` random centres, the smallest `|c|` such that `centre + B c`
/// lies on `sheet`, searched within `|c| <= search_radius`.
///
/// `basis` spans the transverse disks and must be complementary to the sheet.
/// Candidate cells are found through a spatial hash; the intersection with
/// each candidate is solved by Newton's method on the cell parameters and the
/// disk coordinates together.
pub fn transverse_gaps(
    sheet: &CurveSegment,
    basis: &DMatrix<f64>,
    search_radius: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    let n = sheet.dim();
    let p = sheet.param_dim();
    let b = linalg::orthonormalize(basis);
    if b.nrows() != n || b.ncols() + p != n {
        return Err(Error::DimensionMismatch { expected: n - p, got: b.ncols() });
    }
    let cells = sheet.cells();
    let diam = cells
        .iter()
        .map(|cell| {
            let l0 = sheet.lift(cell[0]);
            cell.iter().map(|&k| (sheet.lift(k) - &l0).norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let reach = search_radius + diam;
    let bins = ((1.0 / reach).floor() as i64).clamp(1, 64);
    let bin_of = |x: &TorusPoint| -> Vec<i64> { x.as_slice().iter().map(|v| ((v * bins as f64) as i64).min(bins - 1)).collect() };
    let mut hash: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (ci, cell) in cells.iter().enumerate() {
        hash.entry(bin_of(&sheet.point(cell[0]))).or_default().push(ci);
    }
    let corners: Vec<f64> = cells.iter().flat_map(|cell| sheet.point(cell[0]).as_slice().to_vec()).collect();
    let bt = b.transpose();
    let neighbours: Vec<Vec<i64>> = (0..3i64.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let d = k % 3 - 1;
                    k /= 3;
                    d
                })
                .collect()
        })
        .collect();
    let gaps = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = sampling::stream(seed, t as u64);
            let centre = sampling::uniform_point(&mut rng, n);
            let home = bin_of(&centre);
            let keys: std::collections::BTreeSet<Vec<i64>> =
                neighbours.iter().map(|off| home.iter().zip(off).map(|(h, o)| (h + o).rem_euclid(bins)).collect()).collect();
            let seen = keys.iter().filter_map(|k| hash.get(k)).flatten().copied();
            let mut best: Option<f64> = None;
            let mut o = DVector::zeros(n);
            for ci in seen {
                let cell = &cells[ci];
                for j in 0..n {
                    let d = corners[ci * n + j] - centre.as_slice()[j];
                    o[j] = d - d.round();
                }
                let along: f64 = (0..bt.nrows()).map(|i| (0..n).map(|j| bt[(i, j)] * o[j]).sum::<f64>().powi(2)).sum();
                let total = o.norm_squared();
                if total - along > diam * diam || along > reach * reach {
                    continue;
                }
                if let Some(c) = intersect_cell(sheet, cell, &o, &b) {
                    if c <= search_radius && best.map_or(true, |v| c < v) {
                        best = Some(c);
                    }
                }
            }
            best
        })
        .collect();
    Ok(gaps)
}

/// Solves `o + S(s) - S(0) = B c` on one cell, `S` the bilinear (or linear)
/// interpolation of the corner lifts; returns `|c|` when `s` lies in the cell.
fn intersect_cell(sheet: &CurveSegment, cell: &[usize], o: &DVector<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let n = sheet.dim();
    let p = sheet.param_dim();
    let l0 = sheet.lift(cell[0]);
    let rel: Vec<DVector<f64>> = cell.iter().map(|&k| sheet.lift(k) - &l0).collect();
    let surface = |s: &[f64]| -> (DVector<f64>, DMatrix<f64>) {
        match p {
            1 => {
                let d = &rel[1];
                (d * s[0], DMatrix::from_column_slice(n, 1, d.as_slice()))
            }
            _ => {
                // corners in order (0,0), (1,0), (1,1), (0,1)
                let (a, bb, c, d) = (&rel[0], &rel[1], &rel[2], &rel[3]);
                let (u, v) = (s[0], s[1]);
                let value = a * ((1.0 - u) * (1.0 - v)) + bb * (u * (1.0 - v)) + c * (u * v) + d * ((1.0 - u) * v);
                let du = (bb - a) * (1.0 - v) + (c - d) * v;
                let dv = (d - a) * (1.0 - u) + (c - bb) * u;
                let mut j = DMatrix::zeros(n, 2);
                j.set_column(0, &du);
                j.set_column(1, &dv);
                (value, j)
            }
        }
    };
    let mut s = vec![0.5; p];
    let mut c = DVector::zeros(b.ncols());
    let scale = o.norm() + rel.iter().map(|r| r.norm()).fold(0.0, f64::max);
    for _ in 0..30 {
        let (value, js) = surface(&s);
        let residual = o + value - b * &c;
        if residual.amax() <= 1e-13 * scale.max(1e-300) {
            let inside = s.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v));
            return inside.then(|| c.norm());
        }
        let mut jac = DMatrix::zeros(n, n);
        jac.columns_mut(0, p).copy_from(&js);
        jac.columns_mut(p, b.ncols()).copy_from(&(-b));
        let mut rhs = DMatrix::from_column_slice(n, 1, (-residual).as_slice());
        if !linalg::solve_in_place(&mut jac, &mut rhs) {
            return None;
        }
        for a in 0..p {
            s[a] += rhs[(a, 0)];
        }
        for a in 0..b.ncols() {
            c[a] += rhs[(p + a, 0)];
        }
        if s.iter().any(|v| v.abs() > 10.0) {
            return None;
        }
    }
    None
}

/// Fraction of `trials` random disks of radius `epsilon0` along `basis` that
/// meet `sheet`.
pub fn density_check(sheet: &CurveSegment, basis: &DMatrix<f64>, epsilon0: f64, trials: usize, seed: u64) -> Result<DensityReport> {
    if !(epsilon0 > 0.0) || trials == 0 {
        return Ok(DensityReport { epsilon0, trials, hits: 0, fraction: 0.0, max_gap: f64::INFINITY });
    }
    let gaps = transverse_gaps(sheet, basis, epsilon0, trials, seed)?;
    let hits = gaps.iter().filter(|g| g.is_some()).count();
    let max_gap = gaps.iter().map(|g| g.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    Ok(DensityReport { epsilon0, trials, hits, fraction: hits as f64 / trials as f64, max_gap })
}

/// Largest and mean area of `f^n(W)` inside the unit cubes of `R^n` met by its lift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub n: usize,
    pub cubes: usize,
    pub max_area: f64,
    pub mean_area: f64,
    pub areas: Vec<f64>,
}

/// Area of the lift of `f^n(disk)` inside unit cubes met by it.
///
/// For each of `cubes` random points `c0` of the disk, the cube containing the
/// lift of `f^n(c0)` is examined: a parameter box around `c0`, stretched along
/// the singular directions of `D f^n` so that its image covers everything
/// within distance 2.5 of `f^n(c0)`, is cut into `grid^u` cells whose images
/// are split into triangles; cells whose parameter centre lies in the disk and
/// whose image centroid lies in the cube contribute their area.
pub fn dynamical_flatness<M: Dynamics + ?Sized>(
    map: &M,
    disk: &CuDisk,
    n: usize,
    cubes: usize,
    grid: usize,
    seed: u64,
) -> Result<FlatnessReport> {
    let u = disk.dim();
    if !(1..=2).contains(&u) {
        return Err(Error::Unsupported(format!("flatness for {u}-dimensional disks")));
    }
    if grid < 2 || cubes == 0 {
        return Err(Error::Parameter { name: "grid", reason: "need at least two cells per axis and one cube".into() });
    }
    let basis = disk.basis().clone();
    let r = disk.radius();
    let image = |c: &DVector<f64>| -> DVector<f64> {
        let mut lift = disk.center().coords() + &basis * c;
        for _ in 0..n {
            lift = map.lift_apply(&lift);
        }
        lift
    };
    let areas: Vec<f64> = (0..cubes)
        .into_par_iter()
        .map(|k| {
            let mut rng = sampling::stream(seed, k as u64);
            let c0 = sampling::in_ball(&mut rng, u, r);
            let mut lift = disk.center().coords() + &basis * &c0;
            let mut g = basis.clone();
            for _ in 0..n {
                g = map.jacobian(&TorusPoint::from_lift(lift.clone())) * g;
                lift = map.lift_apply(&lift);
            }
            let cube: Vec<f64> = lift.iter().map(|v| v.floor()).collect();
            let svd = g.svd(false, true);
            let v_t = svd.v_t.expect("requested");
            let sig = svd.singular_values;
            let half: Vec<f64> = (0..u).map(|i| (2.02 * sig[i] * r).min(2.5)).collect();
            let to_param = |w: &[f64]| -> DVector<f64> {
                let mut c = c0.clone();
                for i in 0..u {
                    c += v_t.row(i).transpose() * (w[i] / sig[i]);
                }
                c
            };
            let steps: Vec<usize> = (0..u).map(|_| grid).collect();
            let nodes: Vec<usize> = steps.iter().map(|s| s + 1).collect();
            let w_of = |idx: &[usize]| -> Vec<f64> { (0..u).map(|i| -half[i] + 2.0 * half[i] * idx[i] as f64 / grid as f64).collect() };
            let count: usize = nodes.iter().product();
            let mut params = Vec::with_capacity(count);
            let mut images = Vec::with_capacity(count);
            for k in 0..count {
                let idx: Vec<usize> = if u == 1 { vec![k] } else { vec![k / nodes[1], k % nodes[1]] };
                let c = to_param(&w_of(&idx));
                images.push(image(&c));
                params.push(c);
            }
            let mut area = crate::stats::CompensatedSum::new();
            if u == 1 {
                for i in 0..grid {
                    let cm = (&params[i] + &params[i + 1]) / 2.0;
                    if cm.norm() <= r {
                        area.add(clipped_length(&images[i], &images[i + 1], &cube));
                    }
                }
            } else {
                let m1 = nodes[1];
                for i in 0..grid {
                    for j in 0..grid {
                        let k = [i * m1 + j, (i + 1) * m1 + j, (i + 1) * m1 + j + 1, i * m1 + j + 1];
                        let cm = (&params[k[0]] + &params[k[1]] + &params[k[2]] + &params[k[3]]) / 4.0;
                        if cm.norm() <= r {
                            area.add(clipped_area(&[&images[k[0]], &images[k[1]], &images[k[2]]], &cube));
                            area.add(clipped_area(&[&images[k[0]], &images[k[2]], &images[k[3]]], &cube));
                        }
                    }
                }
            }
            area.value()
        })
        .collect();
    let max_area = areas.iter().copied().fold(0.0, f64::max);
    let mean_area = crate::stats::mean(&areas);
    Ok(FlatnessReport { n, cubes, max_area, mean_area, areas })
}

/// Area of the part of a triangle inside the unit cube with lower corner `cube`.
fn clipped_area(triangle: &[&DVector<f64>; 3], cube: &[f64]) -> f64 {
    let mut poly: Vec<DVector<f64>> = triangle.iter().map(|v| (*v).clone()).collect();
    for (axis, &lo) in cube.iter().enumerate() {
        for (bound, keep_above) in [(lo, true), (lo + 1.0, false)] {
            poly = clip_polygon(&poly, axis, bound, keep_above);
            if poly.len() < 3 {
                return 0.0;
            }
        }
    }
    (1..poly.len() - 1).map(|i| triangle_area(&poly[0], &poly[i], &poly[i + 1])).sum()
}

/// Sutherland-Hodgman step against the half-space `x[axis] >= bound` (or `<=`).
fn clip_polygon(poly: &[DVector<f64>], axis: usize, bound: f64, keep_above: bool) -> Vec<DVector<f64>> {
    let inside = |p: &DVector<f64>| if keep_above { p[axis] >= bound } else { p[axis] <= bound };
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = &poly[i];
        let b = &poly[(i + 1) % poly.len()];
        match (inside(a), inside(b)) {
            (true, true) => out.push(b.clone()),
            (true, false) => out.push(crossing(a, b, axis, bound)),
            (false, true) => {
                out.push(crossing(a, b, axis, bound));
                out.push(b.clone());
            }
            (false, false) => {}
        }
    }
    out
}

fn crossing(a: &DVector<f64>, b: &DVector<f64>, axis: usize, bound: f64) -> DVector<f64> {
    let t = (bound - a[axis]) / (b[axis] - a[axis]);
    a + (b - a) * t
}

/// Length of the part of a segment inside the unit cube with lower corner `cube`.
fn clipped_length(a: &DVector<f64>, b: &DVector<f64>, cube: &[f64]) -> f64 {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (axis, &lo) in cube.iter().enumerate() {
        let d = b[axis] - a[axis];
        if d == 0.0 {
            if a[axis] < lo || a[axis] > lo + 1.0 {
                return 0.0;
            }
            continue;
        }
        let (s0, s1) = ((lo - a[axis]) / d, (lo + 1.0 - a[axis]) / d);
        t0 = t0.max(s0.min(s1));
        t1 = t1.min(s0.max(s1));
    }
    if t1 <= t0 {
        return 0.0;
    }
    (b - a).norm() * (t1 - t0)
}

fn triangle_area(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    let u = b - a;
    let v = c - a;
    let (uu, vv, uv) = (u.dot(&u), v.dot(&v), u.dot(&v));
    0.5 * (uu * vv - uv * uv).max(0.0).sqrt()
}
