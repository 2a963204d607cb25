//! Phase space `T^n = R^n / Z^n`, the base linear automorphism and its localized
//! deformations.

mod chart;
mod conditions;
mod dynamics;
mod example;
mod linear;
mod map;
mod site;
mod spec;

pub use chart::LinearChart;
pub use conditions::{
    cone_plane_norms, max_safe_strength, verify_map_conditions, ConditionCheck, ConditionReport, RegionNorms,
    VerifyOptions,
};
pub use dynamics::{Dynamics, Inverse};
pub use example::{
    build_example, default_deformed_map, default_matrix, ExampleParams, DEFAULT_STRENGTH, MEASURED_MAX_STRENGTH,
};
pub use linear::{EigenComponent, EigenData, LinearToralMap};
pub use map::DeformedMap;
pub use site::{bump, DeformationSite, SiteMode};
pub use spec::{map_hash, MapSpec, SiteSpec};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the torus, stored by its representative in `[0, 1)^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: DVector<f64>,
}

impl TorusPoint {
    /// Validates that every coordinate already lies in `[0, 1)`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        for (index, &value) in coords.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            if !(0.0..1.0).contains(&value) {
                return Err(Error::Parameter {
                    name: "coords",
                    reason: format!("coordinate {index} = {value} outside [0, 1)"),
                });
            }
        }
        Ok(Self { coords: DVector::from_vec(coords) })
    }

    pub fn origin(n: usize) -> Self {
        Self { coords: DVector::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    /// `self + v` reduced mod 1. `v` must be finite.
    pub fn translate(&self, v: &DVector<f64>) -> TorusPoint {
        let mut coords = &self.coords + v;
        reduce_in_place(coords.as_mut_slice());
        TorusPoint { coords }
    }

    /// Builds a point from a finite lift without validation overhead.
    pub(crate) fn from_lift(mut lift: DVector<f64>) -> TorusPoint {
        reduce_in_place(lift.as_mut_slice());
        TorusPoint { coords: lift }
    }

    pub(crate) fn coords_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coords
    }
}

/// `x.floor()` for `|x| < 2^62`, without the libm call that `f64::floor`
/// becomes on targets lacking a rounding instruction.
#[inline]
pub(crate) fn floor(x: f64) -> f64 {
    if x.abs() >= 4.6e18 {
        return x.floor();
    }
    let t = x as i64 as f64;
    if t > x {
        t - 1.0
    } else {
        t
    }
}

pub(crate) fn reduce(x: f64) -> f64 {
    let r = x - floor(x);
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

pub(crate) fn reduce_in_place(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = reduce(*x);
    }
}

/// Reduces a real vector mod 1 into `[0, 1)^n`.
pub fn wrap(v: &[f64]) -> Result<TorusPoint> {
    for (index, &value) in v.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
    }
    Ok(TorusPoint::from_lift(DVector::from_column_slice(v)))
}

/// Shortest representative of `to - from` in `[-1/2, 1/2)^n`.
pub fn nearest_offset(from: &TorusPoint, to: &TorusPoint) -> DVector<f64> {
    let mut d = to.coords() - from.coords();
    for x in d.iter_mut() {
        *x -= floor(*x + 0.5);
    }
    d
}

/// Flat metric on the torus: Euclidean length of the shortest lift of `y - x`.
pub fn torus_distance(x: &TorusPoint, y: &TorusPoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    Ok(nearest_offset(x, y).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap(&[1.25, -0.5]).unwrap().as_slice(), &[0.25, 0.5]);
        assert_eq!(wrap(&[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert_eq!(wrap(&[3.0, 2.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(matches!(wrap(&[f64::NAN, 0.0]), Err(Error::NonFinite { index: 0, .. })));
        assert!(wrap(&[0.1, f64::INFINITY]).is_err());
    }

    #[test]
    fn wrap_tiny_negative_stays_in_range() {
        let p = wrap(&[-1e-18]).unwrap();
        assert!(p.as_slice()[0] < 1.0 && p.as_slice()[0] >= 0.0);
    }

    #[test]
    fn distance_examples() {
        let a = TorusPoint::new(vec![0.1, 0.0]).unwrap();
        let b = TorusPoint::new(vec![0.9, 0.0]).unwrap();
        assert_abs_diff_eq!(torus_distance(&a, &b).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(torus_distance(&a, &a).unwrap(), 0.0);
        let o = TorusPoint::origin(2);
        let h = TorusPoint::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(torus_distance(&o, &h).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        let c = TorusPoint::origin(3);
        assert!(matches!(torus_distance(&a, &c), Err(Error::DimensionMismatch { .. })));
    }

    /// Brute-force minimum over the 3^n neighbouring integer translates.
    fn translate_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut s = 0.0;
            for i in 0..n {
                let k = (c % 3) as f64 - 1.0;
                c /= 3;
                let d = y[i] + k - x[i];
                s += d * d;
            }
            best = best.min(s.sqrt());
        }
        best
    }

    proptest! {
        #[test]
        fn wrap_is_idempotent(v in proptest::collection::vec(-50.0f64..50.0, 1..6)) {
            let once = wrap(&v).unwrap();
            let twice = wrap(once.as_slice()).unwrap();
            prop_assert_eq!(once.as_slice(), twice.as_slice());
            for &c in once.as_slice() {
                prop_assert!((0.0..1.0).contains(&c));
            }
        }

        #[test]
        fn distance_matches_translate_oracle(
            x in proptest::collection::vec(0.0f64..1.0, 4),
            y in proptest::collection::vec(0.0f64..1.0, 4),
        ) {
            let px = TorusPoint::new(x.clone()).unwrap();
            let py = TorusPoint::new(y.clone()).unwrap();
            let d = torus_distance(&px, &py).unwrap();
            prop_assert!((d - translate_oracle(&x, &y)).abs() < 1e-12);
            prop_assert!((d - torus_distance(&py, &px).unwrap()).abs() < 1e-15);
            prop_assert!(d <= (4.0f64).sqrt() / 2.0 + 1e-12);
        }
    }
}
