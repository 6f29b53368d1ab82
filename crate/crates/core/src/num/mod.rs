//! Shared numerical kernels: quadrature, ODE integration, least squares,
//! and local interpolation.

pub mod fit;
pub mod interp;
pub mod ode;
pub mod quad;

use num_complex::Complex64;

/// Scalar output type usable by the generic quadrature driver.
pub trait Scalar:
    Copy
    + Default
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<f64, Output = Self>
{
    fn norm(&self) -> f64;
}

impl Scalar for f64 {
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn norm(&self) -> f64 {
        num_complex::Complex64::norm(*self)
    }
}

/// Median of a slice; returns `None` on empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
