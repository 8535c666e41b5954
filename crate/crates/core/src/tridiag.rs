//! Tridiagonal solves and the lowest eigenpair of a symmetric tridiagonal matrix.

use crate::error::{Error, Result};

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
///
/// `sub[0]` and `sup[n-1]` are ignored. `rhs` is overwritten with the solution.
pub fn solve_in_place(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
    let n = rhs.len();
    if n == 0 {
        return Ok(());
    }
    scratch.clear();
    scratch.resize(n, 0.0);
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Numerics("singular tridiagonal system".into()));
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Numerics("singular tridiagonal system".into()));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i + 1] * next;
    }
    Ok(())
}

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if q == 0.0 { f64::EPSILON * (off[i - 1].abs() + 1.0) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue and unit eigenvector of the symmetric tridiagonal matrix
/// with diagonal `diag` and off-diagonal `off` (`off.len() == diag.len() - 1`).
///
/// The eigenvalue is isolated by Sturm bisection; inverse iteration at that
/// shift then yields the vector, and the Rayleigh quotient polishes the value.
pub fn lowest_eigenpair(diag: &[f64], off: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::Numerics("malformed tridiagonal matrix".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = hi.abs().max(lo.abs()).max(1.0);
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    // Shift slightly below so the shifted matrix is positive definite.
    let shift = lambda - 1e-10 * scale;
    let sub: Vec<f64> = std::iter::once(0.0).chain(off.iter().copied()).collect();
    let mut sup: Vec<f64> = off.to_vec();
    sup.push(0.0);
    let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut v = vec![1.0; n];
    let mut scratch = Vec::with_capacity(n);
    for _ in 0..3 {
        solve_in_place(&sub, &shifted, &sup, &mut v, &mut scratch)?;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerics("inverse iteration broke down".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut rq = 0.0;
    for i in 0..n {
        let mut av = diag[i] * v[i];
        if i > 0 {
            av += off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            av += off[i] * v[i + 1];
        }
        rq += v[i] * av;
    }
    Ok((rq, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let sub = [0.0, -1.0, -1.0, -1.0];
        let diag = [4.0, 4.0, 4.0, 4.0];
        let sup = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, 2.0, -1.0, 0.5];
        let mut rhs: Vec<f64> = (0..4)
            .map(|i| {
                let mut r = diag[i] * x[i];
                if i > 0 {
                    r += sub[i] * x[i - 1];
                }
                if i < 3 {
                    r += sup[i] * x[i + 1];
                }
                r
            })
            .collect();
        let mut scratch = Vec::new();
        solve_in_place(&sub, &diag, &sup, &mut rhs, &mut scratch).unwrap();
        for i in 0..4 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_laplacian_lowest_mode() {
        // -u'' on (0, pi) with n interior nodes: lowest eigenvalue (2 - 2cos(h))/h^2.
        let n = 199;
        let h = std::f64::consts::PI / (n + 1) as f64;
        let diag = vec![2.0 / (h * h); n];
        let off = vec![-1.0 / (h * h); n - 1];
        let (lam, v) = lowest_eigenpair(&diag, &off).unwrap();
        let exact = (2.0 - 2.0 * h.cos()) / (h * h);
        assert!((lam - exact).abs() < 1e-9 * exact.max(1.0));
        assert!(v.iter().all(|&x| x > 0.0));
        assert_eq!(sturm_count(&diag, &off, exact - 1e-6), 0);
        assert_eq!(sturm_count(&diag, &off, exact + 1e-6), 1);
    }
}
