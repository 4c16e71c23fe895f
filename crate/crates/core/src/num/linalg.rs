//! Dense symmetric helpers on top of nalgebra: positive-definite checks,
//! symmetric roots, and log-determinants.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Cholesky factorization, mapped to the crate error on failure.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite { support: None })
}

/// Log-determinant of a symmetric positive definite matrix.
pub fn log_det_pd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(m)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Symmetric eigendecomposition roots of a positive semi-definite matrix.
///
/// Returns `(m^(1/2), m^(-1/2))`, both symmetric. Eigenvalues below
/// `rel_tol * max_eig` are rejected for the inverse root.
pub fn sym_sqrt_and_inv_sqrt(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = m.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite { support: None });
    }
    let floor = 1e-13 * max_eig;
    let n = m.nrows();
    let mut sqrt_vals = DVector::zeros(n);
    let mut inv_sqrt_vals = DVector::zeros(n);
    for i in 0..n {
        let v = eig.eigenvalues[i];
        if v <= floor {
            return Err(Error::NotPositiveDefinite { support: None });
        }
        sqrt_vals[i] = v.sqrt();
        inv_sqrt_vals[i] = 1.0 / v.sqrt();
    }
    let q = &eig.eigenvectors;
    let sqrt = q * DMatrix::from_diagonal(&sqrt_vals) * q.transpose();
    let inv_sqrt = q * DMatrix::from_diagonal(&inv_sqrt_vals) * q.transpose();
    Ok((sqrt, inv_sqrt))
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Solve `m x = b` for symmetric positive definite `m`.
pub fn solve_pd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(cholesky(m)?.solve(b))
}
