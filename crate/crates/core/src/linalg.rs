//! Dense helpers shared by the exact computations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Spectral-radius gate for Neumann series: radius must stay below this.
pub const RADIUS_THRESHOLD: f64 = 1.0 - 1e-9;
/// Iteration budget of the power iteration.
pub const POWER_ITER_MAX: usize = 10_000;

/// Collatz-Wielandt bracket `(lower, upper)` of the spectral radius of a
/// non-negative matrix, from power iteration on `I + A`.
///
/// For any positive vector `v`, `min_i (Mv)_i / v_i <= rho(M) <= max_i (Mv)_i / v_i`,
/// and `rho(I + A) = 1 + rho(A)` for non-negative `A`.
pub fn spectral_radius_bracket(a: &DMatrix<f64>, max_iter: usize) -> (f64, f64) {
    let n = a.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut v = vec![1.0; n];
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..max_iter.max(1) {
        let w: Vec<f64> = (0..n)
            .map(|i| v[i] + (0..n).map(|j| a[(i, j)] * v[j]).sum::<f64>())
            .collect();
        let mut rmin = f64::INFINITY;
        let mut rmax: f64 = 0.0;
        for i in 0..n {
            let r = w[i] / v[i];
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
        lo = f64::max(lo, rmin - 1.0);
        hi = f64::min(hi, rmax - 1.0);
        let scale = w.iter().cloned().fold(0.0, f64::max);
        v = w.into_iter().map(|x| x / scale).collect();
        if hi < RADIUS_THRESHOLD || lo >= RADIUS_THRESHOLD || hi - lo < 1e-13 {
            break;
        }
    }
    (lo.max(0.0), hi.max(0.0))
}

/// Point estimate of the spectral radius (midpoint of the bracket).
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    let (lo, hi) = spectral_radius_bracket(a, POWER_ITER_MAX);
    0.5 * (lo + hi)
}

/// Fails with `DivergentGreen` unless the radius is below the gate.
pub fn ensure_subcritical(a: &DMatrix<f64>) -> Result<f64> {
    let (lo, hi) = spectral_radius_bracket(a, POWER_ITER_MAX);
    let est = 0.5 * (lo + hi);
    if hi < RADIUS_THRESHOLD || (lo < RADIUS_THRESHOLD && est < RADIUS_THRESHOLD) {
        Ok(est)
    } else {
        Err(Error::DivergentGreen {
            radius: est,
            threshold: RADIUS_THRESHOLD,
        })
    }
}

/// `(I - A)^{-1}` for a subcritical non-negative `A`, with entries clamped
/// to be non-negative (round-off only) and the residual checked against `tol`.
pub fn neumann_inverse(a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    ensure_subcritical(a)?;
    let m = DMatrix::identity(n, n) - a;
    let mut inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::SolveFailure("I - Q is singular".into()))?;
    for v in inv.iter_mut() {
        if *v < 0.0 {
            if *v < -tol {
                return Err(Error::SolveFailure(format!("negative Green entry {v}")));
            }
            *v = 0.0;
        }
    }
    let resid = (&m * &inv - DMatrix::identity(n, n)).amax();
    if resid > tol {
        return Err(Error::SolveFailure(format!(
            "residual {resid:e} exceeds {tol:e}"
        )));
    }
    Ok(inv)
}

/// Solves `x (I - A) = b` for the row vector `x`.
pub fn solve_left_i_minus(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mt = (DMatrix::identity(n, n) - a).transpose();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = mt
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolveFailure("I - Q is singular".into()))?;
    Ok(x.iter().copied().collect())
}

/// Solves `(I - A) x = b` for the column vector `x`.
pub fn solve_right_i_minus(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = DMatrix::identity(n, n) - a;
    let rhs = nalgebra::DVector::from_column_slice(b);
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolveFailure("I - Q is singular".into()))?;
    Ok(x.iter().copied().collect())
}

pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}
