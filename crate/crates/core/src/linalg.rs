//! Small symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Operator (spectral) norm of a symmetric matrix.
pub fn sym_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, &e| acc.min(e))
}

pub fn eigenvalue_sum(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().sum()
}

pub fn outer(p: &DVector<f64>) -> DMatrix<f64> {
    p * p.transpose()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Block-diagonal `diag(a, b)`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// The coupling matrix `[[I, -I], [-I, I]]` of size `2n`.
pub fn coupling(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Scale `m` down so that its operator norm does not exceed `radius`.
pub fn clip_sym(m: DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    let n = sym_norm(&m);
    if n > radius && n > 0.0 {
        m * (radius / n)
    } else {
        m
    }
}

pub fn clip_vec(v: DVector<f64>, radius: f64) -> DVector<f64> {
    let n = v.norm();
    if n > radius && n > 0.0 {
        v * (radius / n)
    } else {
        v
    }
}

/// Row-major flattening, used when recording matrices in reports.
pub fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
