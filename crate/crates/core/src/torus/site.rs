//! Localized deformations supported in small balls around fixed points.
//!
//! A site carries a vector field `X = rho(|y|/delta) * J grad Q` acting in an
//! oriented 2-plane `span(e_a, e_b)`, where `y` is the displacement from the
//! site centre, `rho` is a C^2 bump and `Q` a quadratic profile in the plane
//! coordinates `(a, b) = (<y, e_a>, <y, e_b>)`. The deformation is the time-`t`
//! map of `X` (`t` = strength) computed with the implicit midpoint rule, which is
//! symplectic in the plane and therefore has unit Jacobian determinant.
//! Dissipative maps add `-eta * rho * P y` (`P` the plane projection).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TorusPoint;

/// Quadratic profile of a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteMode {
    /// `Q = k a b`: expands `e_a` by `e^{k t}` and contracts `e_b`. Used in a
    /// stable plane to push the weaker stable eigenvalue up toward `1 + delta0`.
    Flip,
    /// `Q = k (a^2 + b^2) / 2`: rotation by `k t` mixing the two directions.
    Mix,
    /// Same profile as `Flip`, placed in the unstable plane with `e_b` the weaker
    /// unstable direction.
    UnstableFlip,
}

/// `C^2` bump: `1` on `[0, 1/2]`, `0` on `[1, inf)`, quintic smoothstep between.
/// Returns `(rho, rho', rho'')`.
pub fn bump(r: f64) -> (f64, f64, f64) {
    if r <= 0.5 {
        (1.0, 0.0, 0.0)
    } else if r >= 1.0 {
        (0.0, 0.0, 0.0)
    } else {
        let t = 2.0 * r - 1.0;
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        let dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
        (1.0 - s, -2.0 * ds, -4.0 * dds)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeformationSite {
    pub center: TorusPoint,
    pub radius: f64,
    /// Orthonormal pair `(e_a, e_b)` spanning the plane of the deformation.
    pub plane: [DVector<f64>; 2],
    pub strength: f64,
    pub mode: SiteMode,
    /// Coefficient `k` of the quadratic profile.
    pub rate: f64,
}

/// Newton iterations per implicit-midpoint step.
const MAX_NEWTON: usize = 60;

impl DeformationSite {
    /// Displacement `y` from the centre if `x` lies strictly inside the ball.
    pub fn local(&self, x: &TorusPoint) -> Option<DVector<f64>> {
        let mut sq = 0.0;
        for (c, p) in self.center.as_slice().iter().zip(x.as_slice()) {
            let mut d = p - c;
            if d >= 0.5 {
                d -= 1.0;
            } else if d < -0.5 {
                d += 1.0;
            }
            sq += d * d;
        }
        if sq >= self.radius * self.radius {
            return None;
        }
        let y = super::nearest_offset(&self.center, x);
        (y.norm() < self.radius).then_some(y)
    }

    pub fn contains(&self, x: &TorusPoint) -> bool {
        self.local(x).is_some()
    }

    fn quadratic(&self, a: f64, b: f64) -> (f64, f64, f64, [[f64; 2]; 2]) {
        let k = self.rate;
        match self.mode {
            SiteMode::Flip | SiteMode::UnstableFlip => (k * a * b, k * b, k * a, [[0.0, k], [k, 0.0]]),
            SiteMode::Mix => (0.5 * k * (a * a + b * b), k * a, k * b, [[k, 0.0], [0.0, k]]),
        }
    }

    /// Vector field and its derivative at local displacement `y`.
    fn field(&self, y: &DVector<f64>, dissipation: f64, want_jacobian: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let n = y.len();
        let (ea, eb) = (&self.plane[0], &self.plane[1]);
        let r = y.norm();
        let delta = self.radius;
        let (rho, drho, ddrho) = bump(r / delta);
        if rho == 0.0 {
            return (DVector::zeros(n), want_jacobian.then(|| DMatrix::zeros(n, n)));
        }
        let a = ea.dot(y);
        let b = eb.dot(y);
        let (q, qa, qb, hess) = self.quadratic(a, b);
        let grad_q = ea * qa + eb * qb;
        // d rho / d y = (rho' / (delta r)) y, zero on the plateau
        let g = if drho != 0.0 { drho / (delta * r) } else { 0.0 };
        let grad_h = y * (g * q) + &grad_q * rho;
        // X = J_P grad H with J_P = e_a e_b^T - e_b e_a^T
        let mut x = ea * eb.dot(&grad_h) - eb * ea.dot(&grad_h);
        if dissipation != 0.0 {
            x -= (ea * a + eb * b) * (dissipation * rho);
        }
        if !want_jacobian {
            return (x, None);
        }
        let mut hess_h = DMatrix::zeros(n, n);
        if drho != 0.0 {
            let u = y / r;
            let uu = &u * u.transpose();
            hess_h += &uu * (q * ddrho / (delta * delta));
            hess_h += (DMatrix::identity(n, n) - &uu) * (q * g);
            let cross = &u * grad_q.transpose();
            hess_h += (&cross + cross.transpose()) * (drho / delta);
        }
        let e = DMatrix::from_columns(&[ea.clone(), eb.clone()]);
        let h2 = DMatrix::from_row_slice(2, 2, &[hess[0][0], hess[0][1], hess[1][0], hess[1][1]]);
        hess_h += &e * h2 * e.transpose() * rho;
        let jp = ea * eb.transpose() - eb * ea.transpose();
        let mut dx = jp * hess_h;
        if dissipation != 0.0 {
            let p = &e * e.transpose();
            let py = &p * y;
            dx -= (&p * rho + py * y.transpose() * g) * dissipation;
        }
        (x, Some(dx))
    }

    /// One implicit-midpoint step `z = y + h X((y + z)/2)`; returns `z` and, if
    /// requested, `dz/dy = (I - h/2 DX(m))^{-1} (I + h/2 DX(m))`.
    fn midpoint_step(
        &self,
        y: &DVector<f64>,
        h: f64,
        dissipation: f64,
        want_jacobian: bool,
    ) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let n = y.len();
        let (x0, _) = self.field(y, dissipation, false);
        let mut z = y + x0 * h;
        for _ in 0..MAX_NEWTON {
            let m = (y + &z) * 0.5;
            let (xm, dxm) = self.field(&m, dissipation, true);
            let resid = &z - y - xm * h;
            let lhs = DMatrix::identity(n, n) - dxm.unwrap() * (0.5 * h);
            let delta = lhs.lu().solve(&resid).expect("implicit midpoint Newton matrix is invertible for small steps");
            z -= &delta;
            if delta.amax() <= 1e-16 * (1.0 + z.amax()) {
                break;
            }
        }
        if !want_jacobian {
            return (z, None);
        }
        let m = (y + &z) * 0.5;
        let (_, dxm) = self.field(&m, dissipation, true);
        let k = dxm.unwrap() * (0.5 * h);
        let eye = DMatrix::identity(n, n);
        let lhs = &eye - &k;
        let rhs = &eye + &k;
        let jac = lhs.lu().solve(&rhs).expect("invertible");
        (z, Some(jac))
    }

    /// Time-`time` map of the site field from local displacement `y`
    /// (negative `time` runs the exact inverse of the positive-time scheme).
    pub(crate) fn flow(
        &self,
        y: &DVector<f64>,
        time: f64,
        max_step: f64,
        dissipation: f64,
        want_jacobian: bool,
    ) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let n = y.len();
        if time == 0.0 {
            return (y.clone(), want_jacobian.then(|| DMatrix::identity(n, n)));
        }
        let steps = (time.abs() / max_step - 1e-12).ceil().max(1.0) as usize;
        let h = time / steps as f64;
        let mut z = y.clone();
        let mut jac = want_jacobian.then(|| DMatrix::identity(n, n));
        for _ in 0..steps {
            let (next, step_jac) = self.midpoint_step(&z, h, dissipation, want_jacobian);
            z = next;
            if let (Some(j), Some(s)) = (jac.as_mut(), step_jac) {
                *j = s * &*j;
            }
        }
        (z, jac)
    }

    /// Forward deformation displacement `g(x) - x` in local coordinates.
    pub(crate) fn forward(&self, y: &DVector<f64>, max_step: f64, dissipation: f64, jac: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        self.flow(y, self.strength, max_step, dissipation, jac)
    }

    pub(crate) fn backward(&self, y: &DVector<f64>, max_step: f64, dissipation: f64, jac: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        self.flow(y, -self.strength, max_step, dissipation, jac)
    }
}
