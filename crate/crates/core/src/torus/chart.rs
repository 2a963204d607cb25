use nalgebra::{DMatrix, DVector};

use super::{Dynamics, TorusPoint};
use crate::error::{Error, Result};

/// A fixed real linear map `x -> L x`, read in the chart around the origin.
///
/// Only integer matrices descend to the torus; for any other `L` this is a
/// local model used to check the analysis routines against closed forms (the
/// identity, `diag(2, 1/2)`, purely expanding maps). The reference splitting is
/// the coordinate splitting: the first `n - u` axes are centre-stable.
#[derive(Debug, Clone)]
pub struct LinearChart {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    unstable_dim: usize,
}

impl LinearChart {
    pub fn new(matrix: DMatrix<f64>, unstable_dim: usize) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || unstable_dim > n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.ncols() });
        }
        let inverse = matrix.clone().try_inverse().ok_or_else(|| Error::Parameter {
            name: "matrix",
            reason: "singular".into(),
        })?;
        Ok(Self { matrix, inverse, unstable_dim })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl Dynamics for LinearChart {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn unstable_dim(&self) -> usize {
        self.unstable_dim
    }

    fn apply(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(&self.matrix * x.coords())
    }

    fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(&self.inverse * x.coords())
    }

    fn jacobian(&self, _x: &TorusPoint) -> DMatrix<f64> {
        self.matrix.clone()
    }

    fn inverse_jacobian(&self, _x: &TorusPoint) -> DMatrix<f64> {
        self.inverse.clone()
    }

    fn displace(&self, _x: &TorusPoint, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }

    fn displace_inverse(&self, _x: &TorusPoint, v: &DVector<f64>) -> DVector<f64> {
        &self.inverse * v
    }

    fn in_perturbation(&self, _x: &TorusPoint) -> bool {
        false
    }

    fn reference_splitting(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.dim();
        let s = n - self.unstable_dim;
        let id = DMatrix::<f64>::identity(n, n);
        (id.columns(0, s).into_owned(), id.columns(s, self.unstable_dim).into_owned())
    }

    fn lift_apply(&self, lift: &DVector<f64>) -> DVector<f64> {
        &self.matrix * lift
    }

    fn lift_apply_inverse(&self, lift: &DVector<f64>) -> DVector<f64> {
        &self.inverse * lift
    }
}
