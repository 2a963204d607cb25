use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TorusPoint;
use crate::error::{Error, Result};
use crate::linalg;

/// One invariant subspace of the base matrix: a real eigenline or the real
/// plane of a complex-conjugate pair (or a repeated eigenvalue's eigenspace).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenComponent {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    /// Orthonormal basis (`n x 1` for a simple real eigenvalue, `n x 2` for a
    /// complex pair).
    pub basis: DMatrix<f64>,
}

/// Eigen-decomposition of an integer matrix, components sorted by increasing modulus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenData {
    pub components: Vec<EigenComponent>,
}

impl EigenData {
    fn compute(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let eig = a.complex_eigenvalues();
        let mut values: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
        values.sort_by(|p, q| {
            let mp = p.0.hypot(p.1);
            let mq = q.0.hypot(q.1);
            mp.partial_cmp(&mq).unwrap().then(p.1.partial_cmp(&q.1).unwrap())
        });
        let scale = a.norm().max(1.0);
        let mut components: Vec<EigenComponent> = Vec::new();
        let mut used = vec![false; values.len()];
        for i in 0..values.len() {
            if used[i] {
                continue;
            }
            let (re, im) = values[i];
            // conjugate partner handled by the member with positive imaginary part
            let im = if im.abs() < 1e-10 * scale { 0.0 } else { im.abs() };
            let mut multiplicity = 0;
            for j in i..values.len() {
                let (r2, i2) = values[j];
                if !used[j] && (r2 - re).abs() < 1e-8 * scale && (i2.abs() - im).abs() < 1e-8 * scale {
                    used[j] = true;
                    multiplicity += 1;
                }
            }
            let kernel_of = if im == 0.0 {
                a - DMatrix::identity(n, n) * re
            } else {
                // real invariant plane of the pair: ker(A^2 - 2 Re A + |z|^2)
                a * a - a * (2.0 * re) + DMatrix::identity(n, n) * (re * re + im * im)
            };
            let dim = multiplicity;
            let basis = null_space(&kernel_of, dim);
            components.push(EigenComponent { re, im, modulus: re.hypot(im), basis });
        }
        let data = EigenData { components };
        data.check(a)?;
        Ok(data)
    }

    fn check(&self, a: &DMatrix<f64>) -> Result<()> {
        for c in &self.components {
            // invariance residual of the subspace
            let image = a * &c.basis;
            let proj = &c.basis * (c.basis.transpose() * &image);
            let resid = (image - proj).norm();
            if resid > 1e-10 * a.norm().max(1.0) {
                return Err(Error::Parameter {
                    name: "matrix",
                    reason: format!("eigen-decomposition residual {resid:.2e}"),
                });
            }
        }
        Ok(())
    }

    fn span<'a>(comps: impl Iterator<Item = &'a EigenComponent>, n: usize) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> =
            comps.flat_map(|c| c.basis.column_iter().map(|col| col.into_owned())).collect();
        if cols.is_empty() {
            return DMatrix::zeros(n, 0);
        }
        linalg::orthonormalize(&DMatrix::from_columns(&cols))
    }

    /// Components with modulus `< 1`, most contracting first.
    pub fn stable(&self) -> impl Iterator<Item = &EigenComponent> {
        self.components.iter().filter(|c| c.modulus < 1.0 - 1e-9)
    }

    /// Components with modulus `> 1`, least expanding first.
    pub fn unstable(&self) -> impl Iterator<Item = &EigenComponent> {
        self.components.iter().filter(|c| c.modulus > 1.0 + 1e-9)
    }
}

/// Null space of `m` of the requested dimension (right singular vectors of the
/// smallest singular values).
fn null_space(m: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    let cols: Vec<DVector<f64>> =
        order.iter().take(dim).map(|&i| v_t.row(i).transpose().into_owned()).collect();
    linalg::orthonormalize(&DMatrix::from_columns(&cols))
}

/// Toral automorphism `x -> A x mod 1` with `A` an integer matrix, `|det A| = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearToralMap {
    rows: Vec<Vec<i64>>,
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    eigen: EigenData,
}

impl LinearToralMap {
    /// Unimodular integer matrix with no eigenvalue on the unit circle.
    pub fn new(rows: Vec<Vec<i64>>) -> Result<Self> {
        let map = Self::unimodular(rows)?;
        if let Some(c) = map.eigen.components.iter().find(|c| (c.modulus - 1.0).abs() < 1e-9) {
            return Err(Error::NotAnosov { modulus: c.modulus });
        }
        Ok(map)
    }

    /// Unimodular integer matrix, hyperbolicity not required (identity, rotations of
    /// coordinates, ...).
    pub fn unimodular(rows: Vec<Vec<i64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parameter { name: "matrix", reason: "matrix must be square and non-empty".into() });
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j] as f64);
        let det = matrix.determinant();
        if (det.abs() - 1.0).abs() > 1e-9 {
            return Err(Error::NotUnimodular { det });
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(Error::NotUnimodular { det })?
            .map(|x| x.round());
        let check = &matrix * &inverse;
        if check != DMatrix::identity(n, n) {
            return Err(Error::NotUnimodular { det });
        }
        let eigen = EigenData::compute(&matrix)?;
        Ok(Self { rows, matrix, inverse, eigen })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        Self::unimodular(rows).expect("identity is unimodular")
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn eigen(&self) -> &EigenData {
        &self.eigen
    }

    pub fn is_anosov(&self) -> bool {
        self.eigen.components.iter().all(|c| (c.modulus - 1.0).abs() > 1e-9)
    }

    /// Orthonormal basis of `E^s` (may have zero columns).
    pub fn stable_basis(&self) -> DMatrix<f64> {
        EigenData::span(self.eigen.stable(), self.dim())
    }

    /// Orthonormal basis of `E^u` (may have zero columns).
    pub fn unstable_basis(&self) -> DMatrix<f64> {
        EigenData::span(self.eigen.unstable(), self.dim())
    }

    pub fn unstable_dim(&self) -> usize {
        self.eigen.unstable().map(|c| c.basis.ncols()).sum()
    }

    /// `A x mod 1`.
    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(&self.matrix * x.coords())
    }

    pub fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(&self.inverse * x.coords())
    }

    /// Fixed points of `A` on the torus, sorted lexicographically.
    ///
    /// Solves `(A - I) x = k` over the integer vectors `k` that can occur for
    /// `x` in `[0, 1)^n`.
    pub fn fixed_points(&self) -> Result<Vec<TorusPoint>> {
        let n = self.dim();
        let shifted = &self.matrix - DMatrix::identity(n, n);
        let lu = shifted.clone().lu();
        if shifted.determinant().abs() < 0.5 {
            return Err(Error::Unsupported("A - I is singular; fixed points are not isolated".into()));
        }
        let bounds: Vec<i64> = (0..n)
            .map(|i| (0..n).map(|j| shifted[(i, j)].abs()).sum::<f64>().ceil() as i64)
            .collect();
        let total: u64 = bounds.iter().map(|&b| (2 * b + 1) as u64).product();
        if total > 20_000_000 {
            return Err(Error::Unsupported(format!("fixed-point enumeration over {total} lattice vectors")));
        }
        let mut found: Vec<Vec<f64>> = Vec::new();
        let mut k = vec![0i64; n];
        for code in 0..total {
            let mut c = code;
            for i in 0..n {
                let span = (2 * bounds[i] + 1) as u64;
                k[i] = (c % span) as i64 - bounds[i];
                c /= span;
            }
            let rhs = DVector::from_iterator(n, k.iter().map(|&v| v as f64));
            let x = lu.solve(&rhs).expect("non-singular");
            let mut wrapped: Vec<f64> = x.iter().map(|&v| {
                let r = super::reduce(v);
                // snap values within rounding of 1 back to 0
                if 1.0 - r < 1e-12 { 0.0 } else if r < 1e-12 { 0.0 } else { r }
            }).collect();
            for v in wrapped.iter_mut() {
                *v = (*v * 1e12).round() / 1e12;
            }
            if !found.iter().any(|f| f.iter().zip(&wrapped).all(|(a, b)| (a - b).abs() < 1e-9)) {
                found.push(wrapped);
            }
        }
        found.sort_by(|a, b| a.partial_cmp(b).unwrap());
        found.into_iter().map(TorusPoint::new).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cat() -> LinearToralMap {
        LinearToralMap::new(vec![vec![2, 1], vec![1, 1]]).unwrap()
    }

    #[test]
    fn cat_map_eigen_data() {
        let m = cat();
        let mu = (3.0 + 5f64.sqrt()) / 2.0;
        let comps = &m.eigen().components;
        assert_eq!(comps.len(), 2);
        assert_abs_diff_eq!(comps[0].modulus, 1.0 / mu, epsilon = 1e-12);
        assert_abs_diff_eq!(comps[1].modulus, mu, epsilon = 1e-12);
        assert_eq!(m.unstable_dim(), 1);
        assert_eq!(m.inverse_matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]));
    }

    #[test]
    fn cat_map_hand_multiplication() {
        let m = cat();
        let x = TorusPoint::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(m.apply(&x).as_slice(), &[0.5, 0.0]);
        assert_eq!(m.apply(&TorusPoint::origin(2)).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(LinearToralMap::new(vec![vec![2, 0], vec![0, 1]]), Err(Error::NotUnimodular { .. })));
        assert!(matches!(LinearToralMap::new(vec![vec![1, 1], vec![0, 1]]), Err(Error::NotAnosov { .. })));
        assert!(LinearToralMap::new(vec![vec![1, 0], vec![0, 1]]).is_err());
        assert!(LinearToralMap::unimodular(vec![vec![1, 0], vec![0, 1]]).is_ok());
    }

    #[test]
    fn fixed_points_count_matches_determinant() {
        // |det(A - I)| fixed points for a hyperbolic toral automorphism
        let m = LinearToralMap::new(vec![vec![5, 3], vec![3, 2]]).unwrap();
        let fps = m.fixed_points().unwrap();
        assert_eq!(fps.len(), 5);
        for p in &fps {
            let q = m.apply(p);
            assert!(super::super::torus_distance(p, &q).unwrap() < 1e-12);
        }
        assert_eq!(cat().fixed_points().unwrap().len(), 1);
    }
}
