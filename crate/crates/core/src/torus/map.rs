use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{torus_distance, Dynamics, DeformationSite, LinearToralMap, TorusPoint};
use crate::error::{Error, Result};

/// Largest admissible site radius, a quarter of the injectivity radius 1/2.
pub const MAX_SITE_RADIUS: f64 = 0.125;

/// Largest admissible integrator step.
pub const MAX_INTEGRATOR_STEP: f64 = 0.05;

/// Below this offset length, differences of site displacements lose too many
/// digits and the linearization `Df(x) v` is returned instead.
const LINEARIZE_BELOW: f64 = 2e-10;

/// `f = A o g` where `A` is a hyperbolic toral automorphism and `g` is the
/// product of the commuting, disjointly supported site deformations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeformedMap {
    base: LinearToralMap,
    sites: Vec<DeformationSite>,
    conservative: bool,
    dissipation: f64,
    integrator_step: f64,
}

impl DeformedMap {
    pub fn new(
        base: LinearToralMap,
        sites: Vec<DeformationSite>,
        conservative: bool,
        dissipation: f64,
        integrator_step: f64,
    ) -> Result<Self> {
        if !(integrator_step > 0.0 && integrator_step <= MAX_INTEGRATOR_STEP) {
            return Err(Error::Parameter {
                name: "integrator_step",
                reason: format!("{integrator_step} not in (0, {MAX_INTEGRATOR_STEP}]"),
            });
        }
        if !(dissipation >= 0.0 && dissipation.is_finite()) {
            return Err(Error::Parameter { name: "dissipation", reason: format!("{dissipation} must be >= 0") });
        }
        if conservative && dissipation != 0.0 {
            return Err(Error::Parameter {
                name: "dissipation",
                reason: "a conservative map cannot carry a dissipative term".into(),
            });
        }
        let map = Self { base, sites, conservative, dissipation, integrator_step };
        map.validate_sites()?;
        Ok(map)
    }

    /// The base automorphism with no deformation.
    pub fn undeformed(base: LinearToralMap) -> Self {
        Self { base, sites: Vec::new(), conservative: true, dissipation: 0.0, integrator_step: 0.02 }
    }

    fn validate_sites(&self) -> Result<()> {
        let n = self.base.dim();
        let q = TorusPoint::origin(n);
        for (i, s) in self.sites.iter().enumerate() {
            if s.center.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.center.dim() });
            }
            if !(s.radius > 0.0 && s.radius <= MAX_SITE_RADIUS) {
                return Err(Error::InvalidSites(format!("site {i}: radius {} not in (0, {MAX_SITE_RADIUS}]", s.radius)));
            }
            if !(0.0..=1.0).contains(&s.strength) {
                return Err(Error::InvalidSites(format!("site {i}: strength {} not in [0, 1]", s.strength)));
            }
            if !s.rate.is_finite() {
                return Err(Error::InvalidSites(format!("site {i}: non-finite rate")));
            }
            let [ea, eb] = &s.plane;
            if ea.len() != n || eb.len() != n {
                return Err(Error::InvalidSites(format!("site {i}: plane vectors must have length {n}")));
            }
            if (ea.norm() - 1.0).abs() > 1e-10 || (eb.norm() - 1.0).abs() > 1e-10 || ea.dot(eb).abs() > 1e-10 {
                return Err(Error::InvalidSites(format!("site {i}: plane basis is not orthonormal")));
            }
            let image = self.base.apply(&s.center);
            if torus_distance(&image, &s.center)? > 1e-9 {
                return Err(Error::InvalidSites(format!("site {i}: centre is not a fixed point of the base map")));
            }
            if torus_distance(&s.center, &q)? <= s.radius {
                return Err(Error::InvalidSites(format!("site {i}: ball contains the distinguished fixed point q")));
            }
            for (j, t) in self.sites.iter().enumerate().skip(i + 1) {
                if torus_distance(&s.center, &t.center)? <= s.radius + t.radius {
                    return Err(Error::InvalidSites(format!("sites {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &LinearToralMap {
        &self.base
    }

    pub fn sites(&self) -> &[DeformationSite] {
        &self.sites
    }

    pub fn conservative(&self) -> bool {
        self.conservative
    }

    pub fn dissipation(&self) -> f64 {
        self.dissipation
    }

    pub fn integrator_step(&self) -> f64 {
        self.integrator_step
    }

    /// Same map with the given per-site strengths.
    pub fn with_strengths(&self, strengths: &[f64]) -> Result<Self> {
        if strengths.len() != self.sites.len() {
            return Err(Error::DimensionMismatch { expected: self.sites.len(), got: strengths.len() });
        }
        let mut out = self.clone();
        for (s, &t) in out.sites.iter_mut().zip(strengths) {
            s.strength = t;
        }
        out.validate_sites()?;
        Ok(out)
    }

    /// Same map with every site at strength `t`.
    pub fn with_uniform_strength(&self, t: f64) -> Result<Self> {
        self.with_strengths(&vec![t; self.sites.len()])
    }

    /// Lebesgue measure of `V`, the union of the site balls.
    pub fn perturbation_volume(&self) -> f64 {
        let n = self.base.dim() as f64;
        let unit_ball = std::f64::consts::PI.powf(n / 2.0) / gamma_half_integer(n / 2.0 + 1.0);
        self.sites.iter().map(|s| unit_ball * s.radius.powf(n)).sum()
    }

    /// Index of the site containing `x` and the offset of `x` from its centre.
    pub fn locate(&self, x: &TorusPoint) -> Option<(usize, DVector<f64>)> {
        self.sites.iter().enumerate().find_map(|(i, s)| s.local(x).map(|y| (i, y)))
    }

    /// `g(x) - x` and optionally `Dg(x)`, or `None` outside `V`.
    fn forward_local(&self, x: &TorusPoint, jac: bool) -> Option<(DVector<f64>, Option<DMatrix<f64>>)> {
        let (i, y) = self.locate(x)?;
        let (z, j) = self.sites[i].forward(&y, self.integrator_step, self.dissipation, jac);
        Some((z - y, j))
    }

    fn backward_local(&self, x: &TorusPoint, jac: bool) -> Option<(DVector<f64>, Option<DMatrix<f64>>)> {
        let (i, y) = self.locate(x)?;
        let (z, j) = self.sites[i].backward(&y, self.integrator_step, self.dissipation, jac);
        Some((z - y, j))
    }

    fn shift(&self, x: &TorusPoint) -> Option<DVector<f64>> {
        self.forward_local(x, false).map(|(d, _)| d)
    }

    fn shift_back(&self, x: &TorusPoint) -> Option<DVector<f64>> {
        self.backward_local(x, false).map(|(d, _)| d)
    }
}

/// `Gamma(x)` for `x` a positive integer or half-integer.
fn gamma_half_integer(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-12 {
        (1..x.round() as u64).map(|k| k as f64).product()
    } else {
        let mut g = std::f64::consts::PI.sqrt();
        let mut t = 0.5;
        while t < x - 1e-12 {
            g *= t;
            t += 1.0;
        }
        g
    }
}

impl Dynamics for DeformedMap {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn unstable_dim(&self) -> usize {
        self.base.unstable_dim()
    }

    fn apply(&self, x: &TorusPoint) -> TorusPoint {
        match self.shift(x) {
            None => self.base.apply(x),
            Some(d) => TorusPoint::from_lift(self.base.matrix() * (x.coords() + d)),
        }
    }

    fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint {
        let w = self.base.apply_inverse(x);
        match self.shift_back(&w) {
            None => w,
            Some(d) => w.translate(&d),
        }
    }

    fn jacobian(&self, x: &TorusPoint) -> DMatrix<f64> {
        match self.forward_local(x, true) {
            None => self.base.matrix().clone(),
            Some((_, j)) => self.base.matrix() * j.expect("requested"),
        }
    }

    fn inverse_jacobian(&self, x: &TorusPoint) -> DMatrix<f64> {
        let w = self.base.apply_inverse(x);
        match self.backward_local(&w, true) {
            None => self.base.inverse_matrix().clone(),
            Some((_, j)) => j.expect("requested") * self.base.inverse_matrix(),
        }
    }

    fn displace(&self, x: &TorusPoint, v: &DVector<f64>) -> DVector<f64> {
        let moved = x.translate(v);
        let d0 = self.shift(x);
        let d1 = self.shift(&moved);
        match (d0, d1) {
            (None, None) => self.base.matrix() * v,
            _ if v.norm() < LINEARIZE_BELOW => self.jacobian(x) * v,
            (d0, d1) => {
                let mut w = v.clone();
                if let Some(d) = d1 {
                    w += d;
                }
                if let Some(d) = d0 {
                    w -= d;
                }
                self.base.matrix() * w
            }
        }
    }

    fn displace_inverse(&self, x: &TorusPoint, v: &DVector<f64>) -> DVector<f64> {
        let av = self.base.inverse_matrix() * v;
        let w0 = self.base.apply_inverse(x);
        let w1 = w0.translate(&av);
        let e0 = self.shift_back(&w0);
        let e1 = self.shift_back(&w1);
        match (e0, e1) {
            (None, None) => av,
            _ if v.norm() < LINEARIZE_BELOW => self.inverse_jacobian(x) * v,
            (e0, e1) => {
                let mut w = av;
                if let Some(e) = e1 {
                    w += e;
                }
                if let Some(e) = e0 {
                    w -= e;
                }
                w
            }
        }
    }

    fn in_perturbation(&self, x: &TorusPoint) -> bool {
        self.sites.iter().any(|s| s.contains(x))
    }

    fn reference_splitting(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.base.stable_basis(), self.base.unstable_basis())
    }

    fn lift_apply(&self, lift: &DVector<f64>) -> DVector<f64> {
        let x = TorusPoint::from_lift(lift.clone());
        match self.shift(&x) {
            None => self.base.matrix() * lift,
            Some(d) => self.base.matrix() * (lift + d),
        }
    }

    fn lift_apply_inverse(&self, lift: &DVector<f64>) -> DVector<f64> {
        let w = self.base.inverse_matrix() * lift;
        match self.shift_back(&TorusPoint::from_lift(w.clone())) {
            None => w,
            Some(d) => w + d,
        }
    }

    fn advance(&self, x: &mut TorusPoint, jac: Option<&mut DMatrix<f64>>) -> bool {
        match self.forward_local(x, jac.is_some()) {
            None => {
                if let Some(j) = jac {
                    j.copy_from(self.base.matrix());
                }
                let a = self.base.matrix();
                let n = a.nrows();
                if n <= 8 {
                    let mut image = [0.0; 8];
                    for (column, &cj) in a.as_slice().chunks_exact(n).zip(x.as_slice()) {
                        for (v, &aij) in image.iter_mut().zip(column) {
                            *v += aij * cj;
                        }
                    }
                    x.coords_mut().as_mut_slice().copy_from_slice(&image[..n]);
                } else {
                    let image = a * x.coords();
                    x.coords_mut().copy_from(&image);
                }
                super::reduce_in_place(x.coords_mut().as_mut_slice());
                false
            }
            Some((d, dg)) => {
                if let (Some(j), Some(dg)) = (jac, dg) {
                    self.base.matrix().mul_to(&dg, j);
                }
                *x = TorusPoint::from_lift(self.base.matrix() * (x.coords() + d));
                true
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{build_example, ExampleParams, Inverse};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng, n: usize) -> TorusPoint {
        TorusPoint::new((0..n).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    /// Random point in a random site ball.
    fn random_site_point(rng: &mut impl Rng, map: &DeformedMap) -> TorusPoint {
        let s = &map.sites()[rng.gen_range(0..map.sites().len())];
        loop {
            let v = DVector::from_fn(map.dim(), |_, _| rng.gen_range(-1.0..1.0) * s.radius);
            if v.norm() < s.radius {
                return s.center.translate(&v);
            }
        }
    }

    fn default_map(t: f64) -> DeformedMap {
        build_example(&ExampleParams { strengths: Some(vec![t, t]), ..ExampleParams::default() }).unwrap()
    }

    #[test]
    fn inverse_round_trip() {
        let map = default_map(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..2000 {
            let x = if k % 2 == 0 { random_point(&mut rng, 4) } else { random_site_point(&mut rng, &map) };
            let back = map.apply_inverse(&map.apply(&x));
            assert!(torus_distance(&back, &x).unwrap() < 1e-9);
            let fwd = map.apply(&map.apply_inverse(&x));
            assert!(torus_distance(&fwd, &x).unwrap() < 1e-9);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let map = default_map(0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for k in 0..200 {
            let x = if k % 4 == 0 { random_point(&mut rng, 4) } else { random_site_point(&mut rng, &map) };
            let j = map.jacobian(&x);
            for c in 0..4 {
                let mut e = DVector::zeros(4);
                e[c] = h;
                let plus = map.lift_apply(&(x.coords() + &e));
                let minus = map.lift_apply(&(x.coords() - &e));
                let col = (plus - minus) / (2.0 * h);
                assert!((col - j.column(c)).amax() < 1e-5);
            }
            let ji = map.inverse_jacobian(&map.apply(&x));
            assert_abs_diff_eq!((ji * &j - DMatrix::identity(4, 4)).amax(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn base_values_outside_support() {
        let map = default_map(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let x = random_point(&mut rng, 4);
            if map.in_perturbation(&x) {
                continue;
            }
            assert_eq!(map.apply(&x), map.base().apply(&x));
            assert_eq!(&map.jacobian(&x), map.base().matrix());
        }
    }

    #[test]
    fn conservative_determinant() {
        let map = default_map(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let x = random_site_point(&mut rng, &map);
            assert!((map.jacobian(&x).determinant().abs() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn strength_zero_orbit_equals_base_orbit() {
        let map = default_map(0.0);
        let mut x = TorusPoint::new(vec![0.21, 0.41, 0.013, 0.77]).unwrap();
        let mut y = x.clone();
        for _ in 0..200 {
            x = map.apply(&x);
            y = map.base().apply(&y);
            assert_eq!(x, y);
        }
        let s = random_site_point(&mut ChaCha8Rng::seed_from_u64(5), &map);
        assert_eq!(&map.jacobian(&s), map.base().matrix());
    }

    #[test]
    fn displace_agrees_with_lift_difference() {
        let map = default_map(0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x = random_site_point(&mut rng, &map);
            let v = DVector::from_fn(4, |_, _| rng.gen_range(-1e-3..1e-3));
            let direct = map.lift_apply(&(x.coords() + &v)) - map.lift_apply(x.coords());
            assert!((map.displace(&x, &v) - &direct).amax() < 1e-12);
            let tiny = &v * 1e-9;
            let lin = map.jacobian(&x) * &tiny;
            assert!((map.displace(&x, &tiny) - lin).norm() < 1e-15);
            let inv = Inverse(&map);
            let direct = inv.lift_apply(&(x.coords() + &v)) - inv.lift_apply(x.coords());
            assert!((inv.displace(&x, &v) - direct).amax() < 1e-12);
        }
    }

    #[test]
    fn advance_matches_apply_and_jacobian() {
        let map = default_map(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut jac = DMatrix::zeros(4, 4);
        for k in 0..100 {
            let x = if k % 2 == 0 { random_point(&mut rng, 4) } else { random_site_point(&mut rng, &map) };
            let mut y = x.clone();
            let in_v = map.advance(&mut y, Some(&mut jac));
            assert_eq!(in_v, map.in_perturbation(&x));
            assert_eq!(y, map.apply(&x));
            assert_eq!(jac, map.jacobian(&x));
        }
    }

    #[test]
    fn rejects_bad_sites() {
        let map = default_map(0.5);
        let mut sites = map.sites().to_vec();
        sites[1].center = sites[0].center.clone();
        assert!(matches!(
            DeformedMap::new(map.base().clone(), sites, true, 0.0, 0.02),
            Err(Error::InvalidSites(_))
        ));
        let mut sites = map.sites().to_vec();
        sites[0].center = TorusPoint::origin(4);
        assert!(DeformedMap::new(map.base().clone(), sites, true, 0.0, 0.02).is_err());
        assert!(DeformedMap::new(map.base().clone(), map.sites().to_vec(), true, 0.0, 0.5).is_err());
    }

    #[test]
    fn ball_volume() {
        assert_abs_diff_eq!(gamma_half_integer(3.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gamma_half_integer(2.5), 0.75 * std::f64::consts::PI.sqrt(), epsilon = 1e-14);
        let map = default_map(0.5);
        let v4 = std::f64::consts::PI.powi(2) / 2.0 * 0.05f64.powi(4);
        assert_abs_diff_eq!(map.perturbation_volume(), 2.0 * v4, epsilon = 1e-18);
    }
}
