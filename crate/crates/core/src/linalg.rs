//! Small dense helpers over `nalgebra` for symmetric matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// `(A + A^T) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Validates a covariance-like matrix and returns it with negative roundoff
/// eigenvalues clamped to zero.
pub fn check_psd(cov: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    if cov.nrows() != d || cov.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cov.nrows(),
        });
    }
    let asym = max_asymmetry(cov);
    if !(asym <= SYMMETRY_TOL) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(symmetrize(cov));
    let min = eig.eigenvalues.min();
    if !(min >= -PSD_TOL) {
        return Err(Error::NotPsd(min));
    }
    if min >= 0.0 {
        return Ok(symmetrize(cov));
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(recompose(&eig.eigenvectors, clamped.as_slice()))
}

/// `V diag(values) V^T`, symmetrized.
pub fn recompose(vectors: &DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    let n = vectors.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        let v = vectors.column(k);
        out += lambda * v * v.transpose();
    }
    symmetrize(&out)
}

/// A factor `L` with `L L^T = cov` for a PSD matrix (zero eigenvalues allowed).
pub fn psd_sqrt_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(cov));
    let mut factor = eig.eigenvectors.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        factor.column_mut(k).scale_mut(s);
    }
    factor
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(a)).eigenvalues.min()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, c, |i, j| rows[i][j])
}

pub fn to_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}
