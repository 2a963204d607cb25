//! Subspace angles, cone fields and estimates of the invariant splitting
//! `TM = E^cs + E^cu`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Restriction};
use crate::sampling;
use crate::torus::{Dynamics, TorusPoint};

/// Which bundle a cone is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bundle {
    CenterStable,
    CenterUnstable,
}

impl Bundle {
    pub fn other(self) -> Bundle {
        match self {
            Bundle::CenterStable => Bundle::CenterUnstable,
            Bundle::CenterUnstable => Bundle::CenterStable,
        }
    }
}

/// Orthonormal bases of `E^cs` and `E^cu` at a point. The two bundles are in
/// general not orthogonal; `coords` maps a vector to its coefficients in the
/// combined basis `[cs | cu]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplittingFrame {
    point: TorusPoint,
    cs: DMatrix<f64>,
    cu: DMatrix<f64>,
    coords: DMatrix<f64>,
    condition: f64,
    /// Frame distance between the last two refinement stages (0 if exact).
    pub convergence: f64,
}

/// Largest admissible condition number of `[cs | cu]`.
pub const MAX_FRAME_CONDITION: f64 = 1e3;

impl SplittingFrame {
    /// Orthonormalizes both bases and checks that together they span `R^n`
    /// with condition number below [`MAX_FRAME_CONDITION`].
    pub fn new(point: TorusPoint, cs: &DMatrix<f64>, cu: &DMatrix<f64>) -> Result<Self> {
        let n = point.dim();
        if cs.nrows() != n || cu.nrows() != n || cs.ncols() + cu.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cs.ncols() + cu.ncols() });
        }
        Self::from_orthonormal(point, linalg::orthonormalize(cs), linalg::orthonormalize(cu))
    }

    /// Builds a frame from bases that are already orthonormal, keeping them
    /// bit for bit.
    pub fn from_orthonormal(point: TorusPoint, cs: DMatrix<f64>, cu: DMatrix<f64>) -> Result<Self> {
        let n = point.dim();
        if cs.nrows() != n || cu.nrows() != n || cs.ncols() + cu.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: cs.ncols() + cu.ncols() });
        }
        for b in [&cs, &cu] {
            let gram = b.transpose() * b;
            if (gram - DMatrix::identity(b.ncols(), b.ncols())).amax() > 1e-10 {
                return Err(Error::Parameter { name: "basis", reason: "not orthonormal".into() });
            }
        }
        let mut full = DMatrix::zeros(n, n);
        full.columns_mut(0, cs.ncols()).copy_from(&cs);
        full.columns_mut(cs.ncols(), cu.ncols()).copy_from(&cu);
        let condition = linalg::condition_number(&full);
        if !(condition < MAX_FRAME_CONDITION) {
            return Err(Error::IllConditioned { cond: condition });
        }
        let coords = full.try_inverse().ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
        Ok(Self { point, cs, cu, coords, condition, convergence: 0.0 })
    }

    /// The splitting of the base map (or any reference splitting) at `x`.
    pub fn reference<M: Dynamics + ?Sized>(map: &M, x: &TorusPoint) -> Result<Self> {
        let (cs, cu) = map.reference_splitting();
        Self::new(x.clone(), &cs, &cu)
    }

    /// The frame of the inverse map: the two bundles exchange roles.
    pub fn swapped(&self) -> Self {
        let n = self.point.dim();
        let s = self.cs.ncols();
        let u = self.cu.ncols();
        // rows of `coords` are ordered [cs | cu]; reorder them to [cu | cs]
        let mut coords = DMatrix::zeros(n, n);
        coords.rows_mut(0, u).copy_from(&self.coords.rows(s, u));
        coords.rows_mut(u, s).copy_from(&self.coords.rows(0, s));
        Self { point: self.point.clone(), cs: self.cu.clone(), cu: self.cs.clone(), coords, condition: self.condition, convergence: self.convergence }
    }

    /// The same bases attached to another point.
    pub fn relocated(&self, x: TorusPoint) -> Self {
        Self { point: x, ..self.clone() }
    }

    pub fn point(&self) -> &TorusPoint {
        &self.point
    }

    pub fn cs(&self) -> &DMatrix<f64> {
        &self.cs
    }

    pub fn cu(&self) -> &DMatrix<f64> {
        &self.cu
    }

    pub fn bundle(&self, b: Bundle) -> &DMatrix<f64> {
        match b {
            Bundle::CenterStable => &self.cs,
            Bundle::CenterUnstable => &self.cu,
        }
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Sine of the smallest principal angle between the two bundles.
    pub fn inter_bundle_angle(&self) -> f64 {
        if self.cs.ncols() == 0 || self.cu.ncols() == 0 {
            return 1.0;
        }
        let cross = self.cs.transpose() * &self.cu;
        let (cmax, _) = linalg::extreme_singular_values(&cross);
        (1.0 - cmax.min(1.0).powi(2)).max(0.0).sqrt()
    }

    /// Lengths `(|v_on|, |v_off|)` of the components of `v` along `bundle` and
    /// along the complementary bundle.
    pub fn component_norms(&self, bundle: Bundle, v: &DVector<f64>) -> (f64, f64) {
        let c = &self.coords * v;
        let s = self.cs.ncols();
        let cs_norm = c.rows(0, s).norm();
        let cu_norm = c.rows(s, self.cu.ncols()).norm();
        match bundle {
            Bundle::CenterStable => (cs_norm, cu_norm),
            Bundle::CenterUnstable => (cu_norm, cs_norm),
        }
    }

    /// Coefficient blocks `(on, off)` of the columns of `basis` in this frame.
    pub fn coefficient_blocks(&self, bundle: Bundle, basis: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let c = &self.coords * basis;
        let s = self.cs.ncols();
        let cs = c.rows(0, s).into_owned();
        let cu = c.rows(s, self.cu.ncols()).into_owned();
        match bundle {
            Bundle::CenterStable => (cs, cu),
            Bundle::CenterUnstable => (cu, cs),
        }
    }

    /// Largest principal-angle distance to another frame over both bundles.
    pub fn distance(&self, other: &SplittingFrame) -> f64 {
        let mut d: f64 = 0.0;
        if self.cs.ncols() > 0 {
            d = d.max(linalg::subspace_gap(&self.cs, &other.cs));
        }
        if self.cu.ncols() > 0 {
            d = d.max(linalg::subspace_gap(&self.cu, &other.cu));
        }
        d
    }
}

/// `C_a = { v_on + v_off : |v_off| <= a |v_on| }` around one bundle of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub bundle: Bundle,
    pub aperture: f64,
}

impl Cone {
    pub fn new(bundle: Bundle, aperture: f64) -> Result<Self> {
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(Error::Parameter { name: "aperture", reason: format!("{aperture} must be positive") });
        }
        Ok(Self { bundle, aperture })
    }

    pub fn cu(aperture: f64) -> Result<Self> {
        Self::new(Bundle::CenterUnstable, aperture)
    }

    pub fn cs(aperture: f64) -> Result<Self> {
        Self::new(Bundle::CenterStable, aperture)
    }
}

/// Norm of the operator `L: E -> E^perp` whose graph is `F`.
///
/// This is the tangent of the largest principal angle between `E` and `F` and
/// is therefore symmetric in `E` and `F` whenever both sides are defined.
pub fn subspace_angle(e: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<f64> {
    if e.nrows() != f.nrows() || e.ncols() != f.ncols() {
        return Err(Error::DimensionMismatch { expected: e.ncols(), got: f.ncols() });
    }
    let k = e.ncols();
    if k == 0 || k == e.nrows() {
        return Ok(0.0);
    }
    let qe = linalg::orthonormalize(e);
    let qf = linalg::orthonormalize(f);
    let perp = linalg::complement(&qe);
    let p = qe.transpose() * &qf;
    let r = perp.transpose() * &qf;
    let (_, smin) = linalg::extreme_singular_values(&p);
    if smin < 1e-8 {
        return Err(Error::AngleUndefined { sigma: smin });
    }
    let l = r * p.try_inverse().ok_or(Error::AngleUndefined { sigma: smin })?;
    Ok(l.svd(false, false).singular_values.max())
}

/// Membership of a non-zero vector in a cone; the boundary belongs to the cone.
pub fn cone_contains(cone: &Cone, frame: &SplittingFrame, v: &DVector<f64>) -> Result<bool> {
    if v.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroVector);
    }
    let (on, off) = frame.component_norms(cone.bundle, v);
    // tolerate rounding in the decomposition so that exact boundary vectors count
    Ok(off <= cone.aperture * on * (1.0 + 1e-12) + 1e-15 * v.norm())
}

/// Smallest `a` such that the subspace spanned by `basis` lies in `C_a`
/// (`+inf` when the subspace is not a graph over the cone's bundle).
pub fn plane_aperture(bundle: Bundle, frame: &SplittingFrame, basis: &DMatrix<f64>) -> Result<f64> {
    let (on, off) = frame.coefficient_blocks(bundle, basis);
    if on.nrows() != basis.ncols() {
        return Err(Error::DimensionMismatch { expected: on.nrows(), got: basis.ncols() });
    }
    if on.nrows() == 0 {
        return Ok(0.0);
    }
    if off.nrows() == 0 {
        return Ok(0.0);
    }
    let (_, smin) = linalg::extreme_singular_values(&on);
    if smin < 1e-12 * on.norm().max(1e-300) {
        return Ok(f64::INFINITY);
    }
    let inv = on.try_inverse().ok_or(Error::AngleUndefined { sigma: smin })?;
    Ok((off * inv).svd(false, false).singular_values.max())
}

/// Random subspace of dimension `dim bundle` inside `C_a`: the graph of a
/// Gaussian operator rescaled to norm `a * fraction`.
pub fn sample_cone_plane(cone: &Cone, frame: &SplittingFrame, fraction: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let on = frame.bundle(cone.bundle);
    let off = frame.bundle(cone.bundle.other());
    let (k, m) = (on.ncols(), off.ncols());
    if k == 0 || m == 0 {
        return on.clone();
    }
    let g = DMatrix::from_fn(m, k, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let norm = g.clone().svd(false, false).singular_values.max();
    let l = if norm > 0.0 { g * (cone.aperture * fraction / norm) } else { g };
    linalg::orthonormalize(&(on + off * l))
}

/// Number of low-discrepancy boundary samples in [`image_aperture`].
const APERTURE_SAMPLES: usize = 1024;

thread_local! {
    static DIRECTIONS: std::cell::RefCell<std::collections::HashMap<usize, std::rc::Rc<Vec<f64>>>> =
        std::cell::RefCell::new(std::collections::HashMap::new());
}

/// Halton-Gaussian vectors of length `dim` for indices `0..count`, flattened and
/// cached per thread.
fn direction_table(dim: usize, count: usize) -> std::rc::Rc<Vec<f64>> {
    DIRECTIONS.with(|cell| {
        let mut map = cell.borrow_mut();
        let entry = map.entry(dim).or_insert_with(|| std::rc::Rc::new(Vec::new()));
        if entry.len() < dim * count {
            let mut table = Vec::with_capacity(dim * count);
            for i in 0..count {
                table.extend(sampling::halton_gaussian(i as u64, dim).iter());
            }
            *entry = std::rc::Rc::new(table);
        }
        entry.clone()
    })
}

/// Smallest `a'` with `L(C_a(from)) ⊂ C_{a'}(to)` for a linear map `L`,
/// estimated by maximizing over cone directions: 1024 low-discrepancy samples
/// followed by deterministic local refinement of the best candidates.
pub fn image_aperture_linear(l: &DMatrix<f64>, cone: &Cone, from: &SplittingFrame, to: &SplittingFrame) -> f64 {
    let on = from.bundle(cone.bundle);
    let off = from.bundle(cone.bundle.other());
    let (k, m) = (on.ncols(), off.ncols());
    if k == 0 || m == 0 {
        return 0.0;
    }
    // blocks of L in frame coordinates: rows split by the target bundles
    let (pe, re) = to.coefficient_blocks(cone.bundle, &(l * on));
    let (qd, sd) = to.coefficient_blocks(cone.bundle, &(l * off));
    let dim = k + m + 1;
    let table = direction_table(dim, 2 * APERTURE_SAMPLES);
    let mut a_buf = DVector::zeros(k);
    let mut b_buf = DVector::zeros(m);
    let mut ratio = |g: &[f64]| -> f64 {
        let e = &g[..k];
        let d = &g[k..k + m];
        let s = g[k + m].clamp(0.0, 1.0);
        let en = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if en == 0.0 {
            return 0.0;
        }
        let scale = if dn > 0.0 { cone.aperture * s / dn } else { 0.0 };
        a_buf.fill(0.0);
        b_buf.fill(0.0);
        for j in 0..k {
            let c = e[j] / en;
            for i in 0..k {
                a_buf[i] += pe[(i, j)] * c;
            }
            for i in 0..m {
                b_buf[i] += re[(i, j)] * c;
            }
        }
        for j in 0..m {
            let c = d[j] * scale;
            for i in 0..k {
                a_buf[i] += qd[(i, j)] * c;
            }
            for i in 0..m {
                b_buf[i] += sd[(i, j)] * c;
            }
        }
        let a = a_buf.norm();
        if a == 0.0 {
            f64::INFINITY
        } else {
            b_buf.norm() / a
        }
    };
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::with_capacity(APERTURE_SAMPLES);
    let mut g = vec![0.0; dim];
    for i in 0..APERTURE_SAMPLES {
        g.copy_from_slice(&table[i * dim..(i + 1) * dim]);
        // half the samples on the boundary, the rest spread through the interior
        g[k + m] = if i % 2 == 0 { 1.0 } else { sampling::halton(i as u64, 1)[0] };
        candidates.push((ratio(&g), g.clone()));
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = candidates[0].0;
    let mut trial = vec![0.0; dim];
    for (r0, g0) in candidates.into_iter().take(8) {
        let (mut r, mut g) = (r0, g0);
        let mut step = 0.25;
        let mut j = APERTURE_SAMPLES;
        while step > 1e-7 {
            let mut improved = false;
            for _ in 0..4 {
                j = if j + 1 >= 2 * APERTURE_SAMPLES { APERTURE_SAMPLES } else { j + 1 };
                let dir = &table[j * dim..(j + 1) * dim];
                let en = g[..k].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
                let dn = g[k..k + m].iter().map(|v| v * v).sum::<f64>().sqrt();
                for i in 0..k {
                    trial[i] = g[i] / en + dir[i] * step;
                }
                for i in k..k + m {
                    trial[i] = if dn > 0.0 { g[i] / dn } else { g[i] } + dir[i] * step;
                }
                trial[k + m] = (g[k + m] + dir[k + m] * step).clamp(0.0, 1.0);
                let r2 = ratio(&trial);
                if r2 > r {
                    r = r2;
                    g.copy_from_slice(&trial);
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(r);
    }
    best
}

/// [`image_aperture_linear`] for `Df` at the point of `from`.
pub fn image_aperture<M: Dynamics + ?Sized>(map: &M, cone: &Cone, from: &SplittingFrame, to: &SplittingFrame) -> f64 {
    image_aperture_linear(&map.jacobian(from.point()), cone, from, to)
}

/// Deterministic generic perturbation of a reference basis.
fn generic_frame(primary: &DMatrix<f64>, secondary: &DMatrix<f64>) -> DMatrix<f64> {
    if secondary.ncols() == 0 {
        return primary.clone();
    }
    let g = DMatrix::from_fn(secondary.ncols(), primary.ncols(), |i, j| {
        0.1 * ((1 + i) as f64 * 1.618_033_988 + (1 + j) as f64 * 0.707_106_781).sin()
    });
    linalg::orthonormalize(&(primary + secondary * g))
}

/// Pushes `basis` through the Jacobians along `points` (in order), using the
/// forward derivative (`forward = true`) or the inverse derivative.
fn push_along<M: Dynamics + ?Sized>(
    map: &M,
    points: &[TorusPoint],
    basis: &DMatrix<f64>,
    forward: bool,
) -> Result<DMatrix<f64>> {
    let mut b = basis.clone();
    let mut work = DMatrix::zeros(b.nrows(), b.ncols());
    let mut r = DMatrix::zeros(b.ncols(), b.ncols());
    for (step, y) in points.iter().enumerate() {
        let j = if forward { map.jacobian(y) } else { map.inverse_jacobian(y) };
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NanJacobian { step });
        }
        linalg::push_subspace(&j, &mut b, &mut work, &mut r);
        if b.iter().any(|v| !v.is_finite()) || (0..r.ncols()).any(|i| !r[(i, i)].is_finite()) {
            return Err(Error::Overflow { steps: step + 1 });
        }
    }
    Ok(b)
}

/// Power-iteration estimate of the invariant splitting at `x`.
///
/// `E^cu` is the image under `Df^k` of a generic `u`-frame placed at
/// `f^{-k}(x)`; `E^cs` is the image of a generic frame at `f^k(x)` under
/// `Df^{-k}`. The frame distance to the estimate with `k - 1` steps is stored in
/// [`SplittingFrame::convergence`].
pub fn estimate_invariant_splitting<M: Dynamics + ?Sized>(map: &M, x: &TorusPoint, k: usize) -> Result<SplittingFrame> {
    if k == 0 {
        return Err(Error::Parameter { name: "k", reason: "at least one step is required".into() });
    }
    let (cs_ref, cu_ref) = map.reference_splitting();
    let cu0 = generic_frame(&cu_ref, &cs_ref);
    let cs0 = generic_frame(&cs_ref, &cu_ref);
    // backward[j] = f^{-(j+1)}(x), forward[j] = f^{j+1}(x)
    let mut backward = Vec::with_capacity(k);
    let mut forward = Vec::with_capacity(k);
    let (mut b, mut f) = (x.clone(), x.clone());
    for _ in 0..k {
        b = map.apply_inverse(&b);
        f = map.apply(&f);
        backward.push(b.clone());
        forward.push(f.clone());
    }
    let estimate = |steps: usize| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let back: Vec<TorusPoint> = backward[..steps].iter().rev().cloned().collect();
        let fwd: Vec<TorusPoint> = forward[..steps].iter().rev().cloned().collect();
        let cu = if cu0.ncols() == 0 { cu0.clone() } else { push_along(map, &back, &cu0, true)? };
        let cs = if cs0.ncols() == 0 { cs0.clone() } else { push_along(map, &fwd, &cs0, false)? };
        Ok((cs, cu))
    };
    let (cs, cu) = estimate(k)?;
    let mut frame = SplittingFrame::new(x.clone(), &cs, &cu)?;
    if k > 1 {
        let (cs1, cu1) = estimate(k - 1)?;
        let mut d: f64 = 0.0;
        if cs.ncols() > 0 {
            d = d.max(linalg::subspace_gap(&cs, &cs1));
        }
        if cu.ncols() > 0 {
            d = d.max(linalg::subspace_gap(&cu, &cu1));
        }
        frame.convergence = d;
    }
    Ok(frame)
}

/// Image of a frame under `Df`: the frame at `f(x)`.
pub fn push_frame<M: Dynamics + ?Sized>(map: &M, frame: &SplittingFrame) -> Result<SplittingFrame> {
    let j = map.jacobian(frame.point());
    let mut out = SplittingFrame::new(map.apply(frame.point()), &(&j * frame.cs()), &(&j * frame.cu()))?;
    out.convergence = frame.convergence;
    Ok(out)
}

/// `||Df|E^cs_x|| * ||(Df|E^cu_x)^{-1}||`; values below one certify domination at `x`.
pub fn domination_ratio<M: Dynamics + ?Sized>(map: &M, frame: &SplittingFrame) -> f64 {
    let j = map.jacobian(frame.point());
    domination_ratio_linear(&j, frame)
}

pub fn domination_ratio_linear(j: &DMatrix<f64>, frame: &SplittingFrame) -> f64 {
    let cs = if frame.cs().ncols() > 0 { linalg::restriction(j, frame.cs()).norm } else { 0.0 };
    let cu = if frame.cu().ncols() > 0 { linalg::restriction(j, frame.cu()).inverse_norm() } else { 0.0 };
    if frame.cs().ncols() == 0 || frame.cu().ncols() == 0 {
        return cs.max(cu);
    }
    cs * cu
}

/// Restriction of `Df(x)` to the span of an orthonormal basis.
pub fn restricted<M: Dynamics + ?Sized>(map: &M, x: &TorusPoint, basis: &DMatrix<f64>) -> Restriction {
    linalg::restriction(&map.jacobian(x), basis)
}

/// Flat disk `{ center + basis * c : |c| <= radius }` meant to be tangent to
/// the centre-unstable cone field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuDisk {
    center: TorusPoint,
    basis: DMatrix<f64>,
    radius: f64,
}

impl CuDisk {
    pub fn new(center: TorusPoint, basis: &DMatrix<f64>, radius: f64) -> Result<Self> {
        if basis.nrows() != center.dim() {
            return Err(Error::DimensionMismatch { expected: center.dim(), got: basis.nrows() });
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Parameter { name: "radius", reason: format!("must be finite and non-negative, got {radius}") });
        }
        let basis = linalg::orthonormalize(basis);
        if (0..basis.ncols()).any(|j| basis.column(j).norm() < 0.5) {
            return Err(Error::Parameter { name: "basis", reason: "columns are linearly dependent".into() });
        }
        Ok(Self { center, basis, radius })
    }

    /// Disk through `center` along the centre-unstable bundle estimated with
    /// `k` steps.
    pub fn along_splitting<M: Dynamics + ?Sized>(map: &M, center: TorusPoint, radius: f64, k: usize) -> Result<Self> {
        let frame = estimate_invariant_splitting(map, &center, k)?;
        Self::new(center, frame.cu(), radius)
    }

    pub fn center(&self) -> &TorusPoint {
        &self.center
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// The point with disk coordinates `c`.
    pub fn point(&self, c: &DVector<f64>) -> TorusPoint {
        self.center.translate(&(&self.basis * c))
    }

    /// Lebesgue-uniform point of the disk together with its coordinates.
    pub fn sample(&self, rng: &mut impl Rng) -> (DVector<f64>, TorusPoint) {
        let c = sampling::in_ball(rng, self.dim(), self.radius);
        let x = self.point(&c);
        (c, x)
    }

    /// `u`-dimensional volume of the disk.
    pub fn area(&self) -> f64 {
        ball_volume(self.dim(), self.radius)
    }

    /// Largest aperture of the disk plane relative to splittings estimated
    /// at the centre and at the ends of each coordinate axis; errors when it
    /// exceeds `aperture`.
    pub fn certify<M: Dynamics + ?Sized>(&self, map: &M, aperture: f64, k: usize) -> Result<f64> {
        let mut points = vec![self.center.clone()];
        for j in 0..self.dim() {
            for sign in [-1.0, 1.0] {
                let mut c = DVector::zeros(self.dim());
                c[j] = sign * self.radius;
                points.push(self.point(&c));
            }
        }
        let mut worst: f64 = 0.0;
        for p in points {
            let frame = estimate_invariant_splitting(map, &p, k)?;
            worst = worst.max(plane_aperture(Bundle::CenterUnstable, &frame, &self.basis)?);
        }
        if worst > aperture {
            return Err(Error::DiskNotInCone { aperture: worst, limit: aperture });
        }
        Ok(worst)
    }
}

/// Volume of the Euclidean ball of the given radius in `R^k`.
pub fn ball_volume(k: usize, radius: f64) -> f64 {
    // V_k = V_{k-2} * 2 pi / k with V_0 = 1, V_1 = 2
    let mut v = if k % 2 == 0 { 1.0 } else { 2.0 };
    let mut d = if k % 2 == 0 { 2 } else { 3 };
    while d <= k {
        v *= 2.0 * std::f64::consts::PI / d as f64;
        d += 2;
    }
    v * radius.powi(k as i32)
}

/// Summary of a pointwise domination and angle-contraction survey.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationSurvey {
    pub points: usize,
    pub max_domination: f64,
    pub mean_domination: f64,
    pub violations: usize,
    /// Largest measured `angle(Df S, E^cu(f x)) / angle(S, E^cu(x))`.
    pub angle_contraction: f64,
    pub angle_samples: usize,
    pub max_frame_convergence: f64,
}

/// Domination ratio at `points` Lebesgue-random points and the angle
/// contraction factor over `angle_samples` random subspaces of `C^cu_a`.
pub fn domination_survey<M: Dynamics + ?Sized>(
    map: &M,
    points: usize,
    angle_samples: usize,
    aperture: f64,
    k: usize,
    seed: u64,
) -> Result<DominationSurvey> {
    let cone = Cone::cu(aperture)?;
    let n = map.dim();
    let per_point: Vec<Result<(f64, Option<f64>, f64)>> = (0..points)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream(seed, i as u64);
            let x = sampling::uniform_point(&mut rng, n);
            let frame = estimate_invariant_splitting(map, &x, k)?;
            let ratio = domination_ratio(map, &frame);
            let angle = if i < angle_samples {
                let next = push_frame(map, &frame)?;
                let mut s = sample_cone_plane(&cone, &frame, 1.0, &mut rng);
                let before = subspace_angle(frame.cu(), &s)?;
                s = linalg::orthonormalize(&(map.jacobian(&x) * s));
                let after = subspace_angle(next.cu(), &s)?;
                Some(if before > 0.0 { after / before } else { 0.0 })
            } else {
                None
            };
            Ok((ratio, angle, frame.convergence))
        })
        .collect();
    let mut survey = DominationSurvey {
        points,
        max_domination: 0.0,
        mean_domination: 0.0,
        violations: 0,
        angle_contraction: 0.0,
        angle_samples: angle_samples.min(points),
        max_frame_convergence: 0.0,
    };
    for r in per_point {
        let (ratio, angle, conv) = r?;
        survey.max_domination = survey.max_domination.max(ratio);
        survey.mean_domination += ratio / points as f64;
        if ratio >= 1.0 {
            survey.violations += 1;
        }
        if let Some(a) = angle {
            survey.angle_contraction = survey.angle_contraction.max(a);
        }
        survey.max_frame_convergence = survey.max_frame_convergence.max(conv);
    }
    Ok(survey)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{build_example, DeformedMap, ExampleParams, LinearChart};
    use approx::assert_abs_diff_eq;

    fn mu() -> f64 {
        (3.0 + 5f64.sqrt()) / 2.0
    }

    fn base4() -> DeformedMap {
        build_example(&ExampleParams::default()).unwrap()
    }

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn angle_examples() {
        let e = col(&[1.0, 0.0]);
        assert_eq!(subspace_angle(&e, &e).unwrap(), 0.0);
        for t in [0.3, -2.0, 1e-6] {
            assert_abs_diff_eq!(subspace_angle(&e, &col(&[1.0, t])).unwrap(), t.abs(), epsilon = 1e-12);
        }
        assert!(matches!(subspace_angle(&e, &col(&[0.0, 1.0])), Err(Error::AngleUndefined { .. })));
    }

    #[test]
    fn angle_is_symmetric() {
        let e = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.2, -0.1, 0.05, 0.3]);
        let f = DMatrix::from_row_slice(4, 2, &[1.0, 0.1, 0.0, 1.0, -0.3, 0.0, 0.1, 0.1]);
        assert_abs_diff_eq!(subspace_angle(&e, &f).unwrap(), subspace_angle(&f, &e).unwrap(), epsilon = 1e-12);
        let g = DMatrix::from_row_slice(4, 2, &[2.0, 1.0, 1.0, 3.0, 0.0, 0.0, 0.0, 0.0]);
        let h = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(subspace_angle(&g, &h).unwrap() < 1e-12);
    }

    fn plane_frame() -> SplittingFrame {
        SplittingFrame::new(TorusPoint::origin(2), &col(&[1.0, 0.0]), &col(&[0.0, 1.0])).unwrap()
    }

    #[test]
    fn cone_membership_examples() {
        let frame = plane_frame();
        let cu = Cone::cu(0.3).unwrap();
        assert!(cone_contains(&cu, &frame, &DVector::from_vec(vec![0.0, 2.0])).unwrap());
        assert!(!cone_contains(&cu, &frame, &DVector::from_vec(vec![1.0, 0.0])).unwrap());
        let unit = Cone::cu(1.0).unwrap();
        assert!(cone_contains(&unit, &frame, &DVector::from_vec(vec![1.0, 1.0])).unwrap());
        assert!(matches!(cone_contains(&unit, &frame, &DVector::zeros(2)), Err(Error::ZeroVector)));
        // monotone in the aperture
        let v = DVector::from_vec(vec![0.5, 1.0]);
        assert!(!cone_contains(&Cone::cu(0.4).unwrap(), &frame, &v).unwrap());
        for a in [0.5, 0.6, 2.0] {
            assert!(cone_contains(&Cone::cu(a).unwrap(), &frame, &v).unwrap());
        }
    }

    #[test]
    fn image_aperture_closed_form_in_2d() {
        // A = diag(lu, ls) in its eigenframe: a'/a = ls / lu
        let frame = plane_frame();
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.4, 3.0]));
        let cone = Cone::cu(0.2).unwrap();
        let ratio = image_aperture_linear(&a, &cone, &frame, &frame) / 0.2;
        assert_abs_diff_eq!(ratio, 0.4 / 3.0, epsilon = 1e-12);
        let id = DMatrix::identity(2, 2);
        assert_abs_diff_eq!(image_aperture_linear(&id, &cone, &frame, &frame), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn image_aperture_base_map() {
        let map = base4();
        let x = TorusPoint::new(vec![0.3, 0.6, 0.1, 0.9]).unwrap();
        let frame = SplittingFrame::reference(&map, &x).unwrap();
        let next = SplittingFrame::reference(&map, &map.apply(&x)).unwrap();
        let a = 0.2;
        let r = image_aperture(&map, &Cone::cu(a).unwrap(), &frame, &next) / a;
        assert!(r <= mu().powi(-2) + 1e-12);
        assert_abs_diff_eq!(r, mu().powi(-2), epsilon = 1e-6);
    }

    #[test]
    fn linear_splitting_recovered() {
        let map = base4();
        let x = TorusPoint::new(vec![0.11, 0.52, 0.73, 0.94]).unwrap();
        let frame = estimate_invariant_splitting(&map, &x, 50).unwrap();
        let (cs, cu) = map.reference_splitting();
        assert!(linalg::subspace_gap(frame.cs(), &cs) < 1e-8);
        assert!(linalg::subspace_gap(frame.cu(), &cu) < 1e-8);
        assert_abs_diff_eq!(domination_ratio(&map, &frame), mu().powi(-2), epsilon = 1e-8);
    }

    #[test]
    fn splitting_is_equivariant_for_deformed_map() {
        let map = base4().with_uniform_strength(0.4).unwrap();
        let p = map.sites()[0].center.translate(&DVector::from_vec(vec![0.01, -0.01, 0.005, 0.0]));
        let frame = estimate_invariant_splitting(&map, &p, 40).unwrap();
        let pushed = push_frame(&map, &frame).unwrap();
        let direct = estimate_invariant_splitting(&map, &map.apply(&p), 40).unwrap();
        assert!(pushed.distance(&direct) < 1e-6);
        assert!(domination_ratio(&map, &frame) < 1.0);
    }

    #[test]
    fn fixed_point_frame_is_invariant() {
        let map = base4().with_uniform_strength(0.45).unwrap();
        let p = map.sites()[0].center.clone();
        let frame = estimate_invariant_splitting(&map, &p, 60).unwrap();
        let j = map.jacobian(&p);
        for b in [frame.cs(), frame.cu()] {
            let image = linalg::orthonormalize(&(&j * b));
            assert!(linalg::subspace_gap(&image, b) < 1e-6);
        }
    }

    #[test]
    fn all_unstable_frame() {
        let expanding = LinearChart::new(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0])), 2).unwrap();
        let frame = estimate_invariant_splitting(&expanding, &TorusPoint::origin(2), 5).unwrap();
        assert_eq!(frame.cu().ncols(), 2);
        assert_eq!(frame.cs().ncols(), 0);
        let identity = LinearChart::new(DMatrix::identity(4, 4), 2).unwrap();
        let frame = SplittingFrame::reference(&identity, &TorusPoint::origin(4)).unwrap();
        assert_abs_diff_eq!(domination_ratio(&identity, &frame), 1.0, epsilon = 1e-15);
        let cone = Cone::cu(0.3).unwrap();
        assert_abs_diff_eq!(image_aperture(&identity, &cone, &frame, &frame), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn survey_on_base_map() {
        let s = domination_survey(&base4(), 50, 20, 0.05, 20, 3).unwrap();
        assert_eq!(s.violations, 0);
        assert_abs_diff_eq!(s.max_domination, mu().powi(-2), epsilon = 1e-6);
        assert!(s.angle_contraction < 1.0);
    }
}
