//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

/// Rows of `a` as owned vectors.
pub(crate) fn row(a: &DMatrix<f64>, i: usize) -> DVector<f64> {
    a.row(i).transpose()
}

/// Stack the listed rows of several matrices into one matrix with `ncols` columns.
pub(crate) fn stack_rows(ncols: usize, rows: &[DVector<f64>]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from(&r.transpose());
    }
    out
}

/// Modified Gram-Schmidt with one reorthogonalization pass.
///
/// Returns the orthonormal basis of the span of `rows` and, for each input row,
/// whether it contributed a new direction.
pub(crate) fn orthonormalize(
    rows: &[DVector<f64>],
    rel_tol: f64,
) -> (Vec<DVector<f64>>, Vec<bool>) {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(rows.len());
    let mut kept = Vec::with_capacity(rows.len());
    for r in rows {
        let scale = r.amax();
        if scale == 0.0 {
            kept.push(false);
            continue;
        }
        let mut v = r.clone();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > rel_tol * r.norm() {
            basis.push(v / norm);
            kept.push(true);
        } else {
            kept.push(false);
        }
    }
    (basis, kept)
}

/// Orthonormal basis (as columns) of the null space of the matrix whose rows are `rows`.
pub(crate) fn null_space(n: usize, rows: &[DVector<f64>]) -> DMatrix<f64> {
    let (mut basis, _) = orthonormalize(rows, 1e-10);
    let rank = basis.len();
    let mut complement: Vec<DVector<f64>> = Vec::with_capacity(n.saturating_sub(rank));
    for j in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[j] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            let v = v / norm;
            basis.push(v.clone());
            complement.push(v);
        }
    }
    let mut z = DMatrix::zeros(n, complement.len());
    for (k, v) in complement.iter().enumerate() {
        z.column_mut(k).copy_from(v);
    }
    z
}

/// Null-space basis and multiplier solve for a set of constraint rows, from one Householder QR
/// of the transposed row matrix. Falls back to Gram-Schmidt and SVD when the rows are dependent.
pub(crate) struct Face {
    /// Orthonormal null-space basis as columns.
    pub z: DMatrix<f64>,
    /// Householder vectors (stored from their pivot row down) with their `2 / v'v`.
    reflectors: Vec<(Vec<f64>, f64)>,
    /// Square upper-triangular factor; `None` when the rows were dependent.
    r: Option<DMatrix<f64>>,
}

impl Face {
    pub(crate) fn new(n: usize, rows: &[DVector<f64>]) -> Self {
        let w = rows.len();
        let fallback = || Self {
            z: null_space(n, rows),
            reflectors: Vec::new(),
            r: None,
        };
        if w > n {
            return fallback();
        }
        let mut at = DMatrix::zeros(n, w);
        for (j, r) in rows.iter().enumerate() {
            at.column_mut(j).copy_from(r);
        }
        let mut reflectors = Vec::with_capacity(w);
        for k in 0..w {
            let col = &at.as_slice()[k * n + k..(k + 1) * n];
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = if col[0] > 0.0 { -norm } else { norm };
            let mut v = col.to_vec();
            v[0] -= alpha;
            let vv: f64 = v.iter().map(|x| x * x).sum();
            let beta = if vv > 0.0 { 2.0 / vv } else { 0.0 };
            let data = at.as_mut_slice();
            data[k * n + k] = alpha;
            for i in k + 1..n {
                data[k * n + i] = 0.0;
            }
            for j in k + 1..w {
                apply_reflector(&v, beta, &mut data[j * n + k..(j + 1) * n]);
            }
            reflectors.push((v, beta));
        }
        let r = at.rows(0, w).into_owned();
        let independent = rows
            .iter()
            .enumerate()
            .all(|(i, row)| r[(i, i)].abs() > 1e-10 * row.norm());
        if !independent {
            return fallback();
        }
        let mut z = DMatrix::zeros(n, n - w);
        for c in 0..n - w {
            let col = &mut z.as_mut_slice()[c * n..(c + 1) * n];
            col[w + c] = 1.0;
            for (k, (v, beta)) in reflectors.iter().enumerate().rev() {
                apply_reflector(v, *beta, &mut col[k..]);
            }
        }
        Self {
            z,
            reflectors,
            r: Some(r),
        }
    }

    /// Least-squares multipliers `lambda` with `sum_i lambda_i rows_i ~ g`.
    pub(crate) fn multipliers(&self, rows: &[DVector<f64>], g: &DVector<f64>) -> DVector<f64> {
        match &self.r {
            Some(r) => {
                let mut y = g.as_slice().to_vec();
                for (k, (v, beta)) in self.reflectors.iter().enumerate() {
                    apply_reflector(v, *beta, &mut y[k..]);
                }
                let w = r.nrows();
                let rhs = DVector::from_column_slice(&y[..w]);
                r.solve_upper_triangular(&rhs)
                    .unwrap_or_else(|| DVector::zeros(w))
            }
            None => lstsq(&stack_rows(g.len(), rows).transpose(), g, 1e-13),
        }
    }
}

/// `x <- (I - beta v v') x`.
fn apply_reflector(v: &[f64], beta: f64, x: &mut [f64]) {
    let s: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() * beta;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

/// Least-squares solution of `a x = b` via SVD, singular values below `rel_tol * s_max` dropped.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (rel_tol * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    a.clone().symmetric_eigenvalues().min()
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().singular_values().max()
}

pub(crate) fn is_finite_vec(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

pub(crate) fn is_finite_mat(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}
