//! Small dense helpers. Per-sample work uses plain slices; `d x d` algebra
//! goes through nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{shape_err, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Median of a slice (average of the two central order statistics for even
/// length). Sorts a private copy.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile (the "type 7" definition) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Spectral norm of a symmetric matrix by power iteration on `A^2`, stopped
/// when the Rayleigh quotient changes by less than `tol` relative.
pub fn spectral_norm_symmetric(a: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return shape_err(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let scale = a.amax();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let a = a / scale;
    let a2 = &a * &a;
    // Deterministic start with weight on every coordinate.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() * 1e-3);
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let y = &a2 * &x;
        let next = x.dot(&y);
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        x = y / ny;
        if (next - lambda).abs() <= tol * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Ok(lambda.max(0.0).sqrt() * scale)
}

/// Solve the least-squares problem `min ||X theta - y||` from normal
/// equations; falls back to a ridge penalty when `X^T X` is not positive
/// definite. Returns `(theta, used_ridge)`.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> Result<(DVector<f64>, bool)> {
    if x.nrows() != y.len() {
        return shape_err(format!("design has {} rows, response has {}", x.nrows(), y.len()));
    }
    let d = x.ncols();
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let n = x.nrows() as f64;
    // Reject near-singular systems, not just exactly singular ones.
    let well_posed = x.nrows() > d && {
        let eig = xtx.clone().symmetric_eigenvalues();
        let max = eig.max();
        let min = eig.min();
        max > 0.0 && min > 1e-10 * max
    };
    if well_posed {
        if let Some(ch) = xtx.clone().cholesky() {
            return Ok((ch.solve(&xty), false));
        }
    }
    let mut reg = xtx;
    for i in 0..d {
        reg[(i, i)] += ridge * n.max(1.0);
    }
    match reg.cholesky() {
        Some(ch) => Ok((ch.solve(&xty), true)),
        None => Ok((DVector::zeros(d), true)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn median_and_quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.1), 1.4);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
    }

    #[test]
    fn spectral_norm_matches_eigendecomposition() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, -1.0, -4.0, 0.3, 0.5, 0.3, 1.0]);
        let eig = a.clone().symmetric_eigenvalues();
        let expected = eig.iter().fold(0.0f64, |m, v: &f64| m.max(v.abs()));
        assert_relative_eq!(spectral_norm_symmetric(&a, 1e-12).unwrap(), expected, max_relative = 1e-8);
        // Equal-magnitude eigenvalues of opposite sign.
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -3.0, 1.0]));
        assert_relative_eq!(spectral_norm_symmetric(&b, 1e-12).unwrap(), 3.0, max_relative = 1e-8);
        assert_eq!(spectral_norm_symmetric(&DMatrix::zeros(2, 2), 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn least_squares_exact_and_singular() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let theta = DVector::from_vec(vec![1.5, -2.0]);
        let y = &x * &theta;
        let (est, ridge) = least_squares(&x, &y, 1e-6).unwrap();
        assert!(!ridge);
        assert!((est - theta).norm() < 1e-10);

        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let (est, ridge) = least_squares(&x, &y, 1e-6).unwrap();
        assert!(ridge);
        assert!(est.iter().all(|v| v.is_finite()));
    }
}
