use nalgebra::{DMatrix, DVector};

use super::TorusPoint;

/// A diffeomorphism of `T^n` together with everything the analysis needs:
/// derivatives, lifted displacements and a reference splitting.
///
/// Implementations must be deterministic and free of interior mutation so that
/// orbit computations can be shared across worker threads.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;

    /// Dimension of the centre-unstable bundle.
    fn unstable_dim(&self) -> usize;

    fn apply(&self, x: &TorusPoint) -> TorusPoint;

    fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint;

    /// `Df(x)`.
    fn jacobian(&self, x: &TorusPoint) -> DMatrix<f64>;

    /// `D(f^{-1})(x)`.
    fn inverse_jacobian(&self, x: &TorusPoint) -> DMatrix<f64>;

    /// Lift of `f(x + v) - f(x)` for a small offset `v`, computed without
    /// reduction mod 1 so that tiny offsets keep full relative precision.
    fn displace(&self, x: &TorusPoint, v: &DVector<f64>) -> DVector<f64>;

    /// Lift of `f^{-1}(x + v) - f^{-1}(x)`.
    fn displace_inverse(&self, x: &TorusPoint, v: &DVector<f64>) -> DVector<f64>;

    /// Whether `x` lies in the deformation region `V`.
    fn in_perturbation(&self, x: &TorusPoint) -> bool;

    /// Reference `(cs, cu)` bases used to seed splitting estimates.
    fn reference_splitting(&self) -> (DMatrix<f64>, DMatrix<f64>);

    /// Lift of `f` on `R^n`: `lift_apply(X)` reduces to `f(X mod 1)` and is a
    /// continuous function of `X`.
    fn lift_apply(&self, lift: &DVector<f64>) -> DVector<f64>;

    /// Lift of `f^{-1}`, inverse to [`Dynamics::lift_apply`] on `R^n`.
    fn lift_apply_inverse(&self, lift: &DVector<f64>) -> DVector<f64>;

    /// Advances `x` one step, optionally writing `Df(x)` into `jac`, and
    /// reports whether `x` was in `V`.
    fn advance(&self, x: &mut TorusPoint, jac: Option<&mut DMatrix<f64>>) -> bool {
        let in_v = self.in_perturbation(x);
        if let Some(j) = jac {
            *j = self.jacobian(x);
        }
        *x = self.apply(x);
        in_v
    }

    /// Inverse-direction counterpart of [`Dynamics::advance`].
    fn retreat(&self, x: &mut TorusPoint, jac: Option<&mut DMatrix<f64>>) -> bool {
        let in_v = self.in_perturbation(x);
        if let Some(j) = jac {
            *j = self.inverse_jacobian(x);
        }
        *x = self.apply_inverse(x);
        in_v
    }

    /// `f^k(x)`.
    fn iterate(&self, x: &TorusPoint, k: usize) -> TorusPoint {
        let mut y = x.clone();
        for _ in 0..k {
            self.advance(&mut y, None);
        }
        y
    }
}

/// `f^{-1}` viewed as a map in its own right; the roles of the bundles swap.
#[derive(Debug, Clone, Copy)]
pub struct Inverse<'a, M: ?Sized>(pub &'a M);

impl<M: Dynamics + ?Sized> Dynamics for Inverse<'_, M> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn unstable_dim(&self) -> usize {
        self.0.dim() - self.0.unstable_dim()
    }

    fn apply(&self, x: &TorusPoint) -> TorusPoint {
        self.0.apply_inverse(x)
    }

    fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint {
        self.0.apply(x)
    }

    fn jacobian(&self, x: &TorusPoint) -> DMatrix<f64> {
        self.0.inverse_jacobian(x)
    }

    fn inverse_jacobian(&self, x: &TorusPoint) -> DMatrix<f64> {
        self.0.jacobian(x)
    }

    fn displace(&self, x: &TorusPoint, v: &DVector<f64>) -> DVector<f64> {
        self.0.displace_inverse(x, v)
    }

    fn displace_inverse(&self, x: &TorusPoint, v: &DVector<f64>) -> DVector<f64> {
        self.0.displace(x, v)
    }

    fn in_perturbation(&self, x: &TorusPoint) -> bool {
        self.0.in_perturbation(x)
    }

    fn reference_splitting(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let (cs, cu) = self.0.reference_splitting();
        (cu, cs)
    }

    fn lift_apply(&self, lift: &DVector<f64>) -> DVector<f64> {
        self.0.lift_apply_inverse(lift)
    }

    fn lift_apply_inverse(&self, lift: &DVector<f64>) -> DVector<f64> {
        self.0.lift_apply(lift)
    }

    fn advance(&self, x: &mut TorusPoint, jac: Option<&mut DMatrix<f64>>) -> bool {
        self.0.retreat(x, jac)
    }

    fn retreat(&self, x: &mut TorusPoint, jac: Option<&mut DMatrix<f64>>) -> bool {
        self.0.advance(x, jac)
    }
}
