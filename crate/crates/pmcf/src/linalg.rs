//! Small direct solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::real::Real;

/// Tridiagonal solve; `lower[0]` and `upper[last]` are ignored.
pub fn thomas<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(GeomError::Shape("tridiagonal bands differ in length".into()));
    }
    let mut cp = vec![T::zero(); n];
    let mut dp = vec![T::zero(); n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - lower[i] * cp[i - 1];
        }
        if denom == T::zero() || !denom.is_finite_real() {
            return Err(GeomError::Domain(format!("singular tridiagonal system at row {i}")));
        }
        cp[i] = if i + 1 < n { upper[i] / denom } else { T::zero() };
        dp[i] = if i == 0 {
            rhs[0] / denom
        } else {
            (rhs[i] - lower[i] * dp[i - 1]) / denom
        };
    }
    let mut x = dp;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= cp[i] * next;
    }
    Ok(x)
}

/// Dense LU solve.
pub fn dense_solve<T: Real>(a: DMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let rhs = DVector::from_column_slice(b);
    a.lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| GeomError::Domain("singular linear system".into()))
}
