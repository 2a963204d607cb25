//! Small dense linear-algebra helpers shared by the frame, cone and manifold code.
//!
//! Everything here works on `nalgebra` dynamic matrices whose column spaces are
//! the subspaces of interest. Bases are kept orthonormal; restricted norms and
//! determinants are read off the triangular factor of a thin QR.

use nalgebra::{DMatrix, DVector};

/// Thin QR by modified Gram-Schmidt with one re-orthogonalisation pass.
///
/// Overwrites `m` with the orthonormal factor and writes the `k x k` upper
/// triangular factor into `r`. Columns with vanishing norm are left as zero and
/// their diagonal entry is 0.
pub fn qr_in_place(m: &mut DMatrix<f64>, r: &mut DMatrix<f64>) {
    let (rows, k) = m.shape();
    if r.shape() != (k, k) {
        *r = DMatrix::zeros(k, k);
    } else {
        r.fill(0.0);
    }
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = 0.0;
                for row in 0..rows {
                    dot += m[(row, i)] * m[(row, j)];
                }
                r[(i, j)] += dot;
                for row in 0..rows {
                    let qi = m[(row, i)];
                    m[(row, j)] -= dot * qi;
                }
            }
        }
        let mut norm = 0.0;
        for row in 0..rows {
            norm += m[(row, j)] * m[(row, j)];
        }
        let norm = norm.sqrt();
        r[(j, j)] = norm;
        if norm > 0.0 {
            for row in 0..rows {
                m[(row, j)] /= norm;
            }
        }
    }
}

/// Orthonormal basis of the column space of `m` (same column count).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    let mut r = DMatrix::zeros(m.ncols(), m.ncols());
    qr_in_place(&mut q, &mut r);
    q
}

/// Largest and smallest singular values of a small square matrix.
pub fn extreme_singular_values(r: &DMatrix<f64>) -> (f64, f64) {
    match r.ncols() {
        0 => (0.0, 0.0),
        1 => {
            let s = r[(0, 0)].abs();
            (s, s)
        }
        2 => {
            // Closed form for 2x2: s1,2 = sqrt((F +- sqrt(F^2 - 4 D^2)) / 2).
            let (a, b, c, d) = (r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]);
            let frob = a * a + b * b + c * c + d * d;
            let det = (a * d - b * c).abs();
            let disc = ((frob - 2.0 * det) * (frob + 2.0 * det)).max(0.0).sqrt();
            let smax = ((frob + disc) / 2.0).sqrt();
            let smin = if smax > 0.0 { det / smax } else { 0.0 };
            (smax, smin)
        }
        _ => {
            let sv = r.clone().svd(false, false).singular_values;
            let smax = sv.iter().cloned().fold(0.0, f64::max);
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            (smax, smin)
        }
    }
}

/// Restriction data of a linear map to a subspace with orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Restriction {
    /// Operator norm of `L|E`.
    pub norm: f64,
    /// Co-norm `m(L|E) = ||(L|E)^{-1}||^{-1}`.
    pub conorm: f64,
    /// `|det(L|E)|` measured between orthonormal bases of `E` and `L E`.
    pub det: f64,
}

impl Restriction {
    pub fn inverse_norm(&self) -> f64 {
        1.0 / self.conorm
    }
}

/// Pushes `basis` through `map`, re-orthonormalises it in place and returns the
/// restriction data of `map` on the original subspace.
///
/// `work` is scratch space of shape `basis.shape()`; `r` is scratch of shape `k x k`.
pub fn push_subspace(
    map: &DMatrix<f64>,
    basis: &mut DMatrix<f64>,
    work: &mut DMatrix<f64>,
    r: &mut DMatrix<f64>,
) -> Restriction {
    map.mul_to(basis, work);
    qr_in_place(work, r);
    std::mem::swap(basis, work);
    let (norm, conorm) = extreme_singular_values(r);
    let det = (0..r.ncols()).map(|i| r[(i, i)].abs()).product();
    Restriction { norm, conorm, det }
}

/// Restriction data of `map` on the subspace spanned by the orthonormal `basis`.
pub fn restriction(map: &DMatrix<f64>, basis: &DMatrix<f64>) -> Restriction {
    let mut b = basis.clone();
    let mut work = DMatrix::zeros(b.nrows(), b.ncols());
    let mut r = DMatrix::zeros(b.ncols(), b.ncols());
    push_subspace(map, &mut b, &mut work, &mut r)
}

/// Orthonormal basis of the orthogonal complement of the column space of `basis`.
pub fn complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let k = basis.ncols();
    let q = orthonormalize(basis);
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(n - k);
    for e in 0..n {
        if out.len() == n - k {
            break;
        }
        let mut v = DVector::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            for j in 0..k {
                let c = q.column(j).dot(&v);
                v.axpy(-c, &q.column(j), 1.0);
            }
            for w in &out {
                let c = w.dot(&v);
                v.axpy(-c, w, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            out.push(v / norm);
        }
    }
    DMatrix::from_columns(&out)
}

/// Sine of the largest principal angle between two equal-dimensional subspaces.
///
/// Equals `||P_E - P_F||`; zero iff the subspaces coincide.
pub fn subspace_gap(e: &DMatrix<f64>, f: &DMatrix<f64>) -> f64 {
    let (small, large) = if e.ncols() <= f.ncols() { (e, f) } else { (f, e) };
    let qs = orthonormalize(small);
    let ql = orthonormalize(large);
    let residual = &qs - &ql * (ql.transpose() * &qs);
    if residual.ncols() == 0 {
        return 0.0;
    }
    residual.svd(false, false).singular_values.max().min(1.0)
}

/// Condition number of a square matrix from its singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Area (u-dimensional volume) spanned by the columns of `m`.
pub fn column_volume(m: &DMatrix<f64>) -> f64 {
    let mut q = m.clone();
    let mut r = DMatrix::zeros(m.ncols(), m.ncols());
    qr_in_place(&mut q, &mut r);
    (0..r.ncols()).map(|i| r[(i, i)].abs()).product()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting, overwriting
/// `b` with `x` and destroying `a`. Returns `false` for a singular `a`.
pub fn solve_in_place(a: &mut DMatrix<f64>, b: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    let k = b.ncols();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[(row, col)].abs() > a[(pivot, col)].abs() {
                pivot = row;
            }
        }
        if a[(pivot, col)] == 0.0 || !a[(pivot, col)].is_finite() {
            return false;
        }
        if pivot != col {
            a.swap_rows(pivot, col);
            b.swap_rows(pivot, col);
        }
        let d = a[(col, col)];
        for row in col + 1..n {
            let f = a[(row, col)] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                let v = a[(col, c)];
                a[(row, c)] -= f * v;
            }
            for c in 0..k {
                let v = b[(col, c)];
                b[(row, c)] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let d = a[(col, col)];
        for c in 0..k {
            let mut v = b[(col, c)];
            for j in col + 1..n {
                v -= a[(col, j)] * b[(j, c)];
            }
            b[(col, c)] = v / d;
        }
    }
    true
}
