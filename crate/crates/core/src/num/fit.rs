//! Dense least squares via Householder QR, with column equilibration.

use crate::{Error, Result};

/// Result of a linear least-squares solve.
#[derive(Debug, Clone)]
pub struct Lsq {
    pub coeffs: Vec<f64>,
    /// Euclidean norm of the residual A x - b.
    pub residual: f64,
    /// Condition estimate of the column-equilibrated matrix (|R00/Rkk| ratio).
    pub condition: f64,
}

/// Solve min ||A x - b|| for a column-major matrix `cols` (each of length m).
pub fn lsq(cols: &[Vec<f64>], b: &[f64]) -> Result<Lsq> {
    let n = cols.len();
    let m = b.len();
    if n == 0 || m < n {
        return Err(Error::Invalid(format!(
            "least squares needs m >= n > 0, got m={m} n={n}"
        )));
    }
    // Column scaling to unit norm.
    let mut scale = Vec::with_capacity(n);
    let mut a = vec![0.0; m * n]; // column-major
    for (j, col) in cols.iter().enumerate() {
        if col.len() != m {
            return Err(Error::Invalid("ragged design matrix".into()));
        }
        let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::Numerical("zero or non-finite design column".into()));
        }
        scale.push(nrm);
        for i in 0..m {
            a[j * m + i] = col[i] / nrm;
        }
    }
    let mut rhs = b.to_vec();

    // Householder QR, applied in place.
    for k in 0..n {
        let (head, alpha) = {
            let col = &a[k * m + k..(k + 1) * m];
            let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nrm == 0.0 {
                return Err(Error::Numerical("rank-deficient design matrix".into()));
            }
            (col[0], if col[0] >= 0.0 { -nrm } else { nrm })
        };
        // v = x - alpha e1, applied implicitly; store v in the column below R.
        a[k * m + k] = head - alpha;
        let vnorm2: f64 = a[k * m + k..(k + 1) * m].iter().map(|v| v * v).sum();
        if vnorm2 == 0.0 {
            return Err(Error::Numerical("degenerate Householder reflector".into()));
        }
        for j in k + 1..n {
            let mut dot = 0.0;
            for i in k..m {
                dot += a[k * m + i] * a[j * m + i];
            }
            let c = 2.0 * dot / vnorm2;
            for i in k..m {
                a[j * m + i] -= c * a[k * m + i];
            }
        }
        let mut dot = 0.0;
        for i in k..m {
            dot += a[k * m + i] * rhs[i];
        }
        let c = 2.0 * dot / vnorm2;
        for i in k..m {
            rhs[i] -= c * a[k * m + i];
        }
        // Record the diagonal of R where the reflector head was.
        a[k * m + k] = alpha;
    }

    let mut diag_max = 0.0f64;
    let mut diag_min = f64::INFINITY;
    for k in 0..n {
        let d = a[k * m + k].abs();
        diag_max = diag_max.max(d);
        diag_min = diag_min.min(d);
    }
    let condition = if diag_min > 0.0 {
        diag_max / diag_min
    } else {
        f64::INFINITY
    };

    // Back substitution on R x = Q^T b (upper triangle lives above the diagonal).
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= a[j * m + k] * x[j];
        }
        x[k] = s / a[k * m + k];
    }
    let residual = rhs[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
    for (xk, sk) in x.iter_mut().zip(&scale) {
        *xk /= sk;
    }
    Ok(Lsq {
        coeffs: x,
        residual,
        condition,
    })
}

/// Fit `y ~ a + b * g(x)` and return (a, b).
pub fn fit_two_term(
    x: &[f64],
    y: &[f64],
    g: impl Fn(f64) -> f64,
) -> Result<(f64, f64)> {
    let ones = vec![1.0; x.len()];
    let gx: Vec<f64> = x.iter().map(|&v| g(v)).collect();
    let sol = lsq(&[ones, gx], y)?;
    Ok((sol.coeffs[0], sol.coeffs[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_planted_coefficients() {
        let xs: Vec<f64> = (1..=40).map(|i| i as f64 * 0.1).collect();
        let cols = vec![
            vec![1.0; xs.len()],
            xs.clone(),
            xs.iter().map(|x| x * x).collect(),
        ];
        let y: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x + 0.5 * x * x).collect();
        let sol = lsq(&cols, &y).unwrap();
        assert!((sol.coeffs[0] - 2.0).abs() < 1e-12);
        assert!((sol.coeffs[1] + 3.0).abs() < 1e-12);
        assert!((sol.coeffs[2] - 0.5).abs() < 1e-12);
        assert!(sol.residual < 1e-11);
    }

    #[test]
    fn two_term_inverse_fit() {
        let xs: Vec<f64> = (10..60).map(|i| i as f64).collect();
        let y: Vec<f64> = xs.iter().map(|x| 4.0 + 7.0 / x).collect();
        let (a, b) = fit_two_term(&xs, &y, |x| 1.0 / x).unwrap();
        assert!((a - 4.0).abs() < 1e-10);
        assert!((b - 7.0).abs() < 1e-8);
    }
}
