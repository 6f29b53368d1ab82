//! Adaptive Gauss-Kronrod quadrature and Gauss-Legendre rules.

use super::Scalar;
use crate::{Error, Result};

// 15-point Kronrod abscissae on [-1, 1] (positive half) and the matching
// weights; the embedded 7-point Gauss weights sit on the odd-index nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn qk15<T: Scalar>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> (T, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let fsum = f1 + f2;
        kronrod = kronrod + fsum * WGK[j];
        res_abs += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + fsum * WG[j / 2];
        }
    }
    let err = (kronrod - gauss).norm() * half.abs();
    (kronrod * half, err, res_abs * half.abs())
}

/// Adaptive quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Returns the integral and an error estimate. Bisects until each panel's
/// Gauss/Kronrod discrepancy is below its share of the tolerance.
pub fn adaptive<T: Scalar>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(T, f64)> {
    fn recurse<T: Scalar>(
        f: &mut impl FnMut(f64) -> T,
        a: f64,
        b: f64,
        tol: f64,
        depth: u32,
        acc_err: &mut f64,
    ) -> T {
        let (q, err, res_abs) = qk15(f, a, b);
        // Roundoff floor: a panel already converged to machine accuracy must
        // be accepted even if its tolerance share is below that.
        let floor = 50.0 * f64::EPSILON * res_abs;
        if err <= tol.max(floor)
            || depth >= 52
            || (b - a).abs() < f64::EPSILON * (a.abs() + b.abs() + 1.0)
        {
            *acc_err += err;
            return q;
        }
        let m = 0.5 * (a + b);
        let left = recurse(f, a, m, 0.5 * tol, depth + 1, acc_err);
        let right = recurse(f, m, b, 0.5 * tol, depth + 1, acc_err);
        left + right
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("quadrature endpoints must be finite".into()));
    }
    let mut acc_err = 0.0;
    let q = recurse(&mut f, a, b, tol, 0, &mut acc_err);
    if acc_err > 1e3 * tol.max(f64::MIN_POSITIVE) {
        return Err(Error::Convergence(format!(
            "adaptive quadrature error {acc_err:.3e} exceeds tolerance {tol:.3e}"
        )));
    }
    Ok((q, acc_err))
}

/// Adaptive quadrature over `[a, inf)` via the substitution `x = a + s/(1-s)`.
pub fn adaptive_to_inf<T: Scalar>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    tol: f64,
) -> Result<(T, f64)> {
    adaptive(
        move |s: f64| {
            let om = 1.0 - s;
            let x = a + s / om;
            f(x) * (1.0 / (om * om))
        },
        0.0,
        1.0 - 1e-14,
        tol,
    )
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = -p0 / pp;
            z += dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (
        x.iter().map(|&t| c + h * t).collect(),
        w.iter().map(|&wi| wi * h).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_polynomial_exact() {
        let (q, _) = adaptive(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12).unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((q - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let (q, _) = adaptive(|x: f64| (-x * x / 1e-4).exp(), -1.0, 1.0, 1e-12).unwrap();
        let exact = 1e-2 * std::f64::consts::PI.sqrt();
        assert!((q - exact).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_exponential() {
        let (q, _) = adaptive_to_inf(|x: f64| (-2.0 * x).exp(), 0.0, 1e-12).unwrap();
        assert!((q - 0.5).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_degree_exactness() {
        // n-point rule integrates degree 2n-1 exactly.
        let (x, w) = gauss_legendre_on(5, 0.0, 1.0);
        let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(9)).sum();
        assert!((q - 0.1).abs() < 1e-14);
        let (x, w) = gauss_legendre_on(40, -1.0, 2.0);
        let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.cos()).sum();
        assert!((q - (2.0f64.sin() - (-1.0f64).sin())).abs() < 1e-13);
    }
}
