//! Local cubic (4-point Lagrange) interpolation on sorted grids.

/// Index of the last grid point <= x (clamped to [0, n-2]).
pub fn locate(xs: &[f64], x: f64) -> usize {
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(xs.len() - 2),
        Err(i) => i.saturating_sub(1).min(xs.len() - 2),
    }
}

/// 4-point Lagrange interpolation of `ys` at `x`; stencil shifts at the edges.
pub fn cubic(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert!(xs.len() == ys.len() && xs.len() >= 2);
    if xs.len() < 4 {
        // linear fallback
        let i = locate(xs, x);
        let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        return ys[i] * (1.0 - t) + ys[i + 1] * t;
    }
    let i = locate(xs, x);
    let lo = i.saturating_sub(1).min(xs.len() - 4);
    let mut out = 0.0;
    for a in lo..lo + 4 {
        let mut l = 1.0;
        for b in lo..lo + 4 {
            if a != b {
                l *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        out += l * ys[a];
    }
    out
}

/// Cubic interpolation on a uniform grid given origin and spacing.
pub fn cubic_uniform(x0: f64, dx: f64, ys: &[f64], x: f64) -> f64 {
    let n = ys.len();
    debug_assert!(n >= 2);
    if n < 4 {
        let i = (((x - x0) / dx).floor() as isize).clamp(0, n as isize - 2) as usize;
        let t = (x - (x0 + i as f64 * dx)) / dx;
        return ys[i] * (1.0 - t) + ys[i + 1] * t;
    }
    let i = (((x - x0) / dx).floor() as isize).clamp(0, n as isize - 2) as usize;
    let lo = i.saturating_sub(1).min(n - 4);
    let t = (x - (x0 + lo as f64 * dx)) / dx; // in units of dx from stencil start
    // Lagrange basis on nodes 0,1,2,3
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    l0 * ys[lo] + l1 * ys[lo + 1] + l2 * ys[lo + 2] + l3 * ys[lo + 3]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_cubics_exactly() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let f = |x: f64| 1.0 - 2.0 * x + 0.3 * x * x + 0.05 * x * x * x;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        for &x in &[0.1, 1.23, 3.9, 4.49] {
            assert!((cubic(&xs, &ys, x) - f(x)).abs() < 1e-13);
            assert!((cubic_uniform(0.0, 0.5, &ys, x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn locate_brackets() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(locate(&xs, -0.5), 0);
        assert_eq!(locate(&xs, 0.5), 0);
        assert_eq!(locate(&xs, 2.5), 2);
        assert_eq!(locate(&xs, 3.5), 2);
    }
}
