//! Post-processing of time series: local power index, tail exponent and
//! coefficient fits with error bars, ray-profile comparison, and Richardson
//! convergence estimates.

use crate::num::{fit, interp, median};
use crate::{Error, Result};

/// A sampled scalar series against a strictly increasing parameter
/// (t*, u, or a fixed-ratio label).
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub label: String,
}

impl TimeSeries {
    pub fn new(x: Vec<f64>, v: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if x.len() != v.len() || x.len() < 2 {
            return Err(Error::Invalid("series needs >= 2 matched samples".into()));
        }
        if !x.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Invalid("series abscissae must be strictly increasing".into()));
        }
        if !v.iter().all(|y| y.is_finite()) || !x.iter().all(|y| y.is_finite()) {
            return Err(Error::Numerical("series contains non-finite samples".into()));
        }
        Ok(Self {
            x,
            v,
            label: label.into(),
        })
    }

    /// Restriction to x in [x0, x1].
    pub fn window(&self, x0: f64, x1: f64) -> Result<TimeSeries> {
        let xs: Vec<f64> = self
            .x
            .iter()
            .cloned()
            .filter(|&x| x >= x0 && x <= x1)
            .collect();
        let vs: Vec<f64> = self
            .x
            .iter()
            .zip(&self.v)
            .filter(|(&x, _)| x >= x0 && x <= x1)
            .map(|(_, &v)| v)
            .collect();
        TimeSeries::new(xs, vs, self.label.clone())
    }

    pub fn value_at(&self, x: f64) -> f64 {
        interp::cubic(&self.x, &self.v, x)
    }

    /// Abscissa of the last sign change, if any.
    pub fn last_sign_change(&self) -> Option<f64> {
        for i in (0..self.v.len() - 1).rev() {
            if self.v[i] == 0.0 || self.v[i].signum() != self.v[i + 1].signum() {
                return Some(self.x[i + 1]);
            }
        }
        None
    }
}

/// Local power index p(x) = -x (dv/dx) / v, computed by centered differences
/// on a log-spaced resampling of the series (one-sided at the ends).
pub fn local_power_index(series: &TimeSeries) -> Result<TimeSeries> {
    let x0 = series.x[0];
    let x1 = *series.x.last().unwrap();
    if x0 <= 0.0 {
        return Err(Error::Domain("local power index needs x > 0".into()));
    }
    for w in series.v.windows(2) {
        if w[0] == 0.0 || w[0].signum() != w[1].signum() {
            return Err(Error::Numerical(
                "sign change inside the power-index window".into(),
            ));
        }
    }
    let n = (series.x.len() / 2).clamp(8, 400);
    let lx0 = x0.ln();
    let lx1 = x1.ln();
    let dl = (lx1 - lx0) / (n - 1) as f64;
    // Resample log-value against log-abscissa; pure power laws stay exact.
    let lxs: Vec<f64> = series.x.iter().map(|&x| x.ln()).collect();
    let lvs: Vec<f64> = series.v.iter().map(|&v| v.abs().ln()).collect();
    let lv: Vec<f64> = (0..n)
        .map(|i| interp::cubic(&lxs, &lvs, lx0 + i as f64 * dl))
        .collect();
    let mut p = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i == 0 {
            (lv[1] - lv[0]) / dl
        } else if i == n - 1 {
            (lv[n - 1] - lv[n - 2]) / dl
        } else {
            (lv[i + 1] - lv[i - 1]) / (2.0 * dl)
        };
        p.push(-d);
    }
    let xs: Vec<f64> = (0..n).map(|i| (lx0 + i as f64 * dl).exp()).collect();
    TimeSeries::new(xs, p, format!("lpi({})", series.label))
}

/// Tail-fit output: exponent and coefficient estimates with window-halving
/// error bars, plus the comparison against a prediction when one is given.
#[derive(Debug, Clone)]
pub struct TailReport {
    pub lpi: TimeSeries,
    pub exponent: f64,
    pub exponent_err: f64,
    /// Leading coefficient at the target exponent; `None` when the measured
    /// exponent is inconsistent with the target.
    pub coefficient: Option<f64>,
    pub coefficient_err: f64,
    pub window: (f64, f64),
    pub target_exponent: f64,
    pub predicted_coefficient: Option<f64>,
    /// coefficient / predicted, when both exist.
    pub ratio: Option<f64>,
    pub exponent_mismatch: bool,
}

fn fit_exponent(lpi: &TimeSeries) -> Result<(f64, f64)> {
    let (p_inf, _) = fit::fit_two_term(&lpi.x, &lpi.v, |x| 1.0 / x)?;
    Ok((p_inf, 0.0))
}

/// Fit the late-time window of `series` as c x^-p with remainder one power
/// down: p(x) = p_inf + beta/x on the index curve, then
/// v x^target = c + d/x for the coefficient.
pub fn tail_fit(
    series: &TimeSeries,
    target_exponent: Option<f64>,
    predicted_coefficient: Option<f64>,
) -> Result<TailReport> {
    // Window selection: quasinormal ringing must be excluded; start at 3x the
    // last sign change when one exists.
    let x_end = *series.x.last().unwrap();
    let x_start = match series.last_sign_change() {
        Some(xz) => 3.0 * xz,
        None => series.x[0],
    };
    if x_start <= 0.0 || x_end / x_start.max(1e-300) < 10.0f64.sqrt() {
        return Err(Error::Invalid(format!(
            "tail window [{x_start:.3e}, {x_end:.3e}] shorter than half a decade"
        )));
    }
    let win = series.window(x_start, x_end)?;
    let lpi = local_power_index(&win)?;

    let (p_full, _) = fit_exponent(&lpi)?;
    let half = lpi.window(0.5 * (lpi.x[0] + x_end), x_end)?;
    let (p_half, _) = fit_exponent(&half)?;
    let exponent_err = (p_full - p_half).abs();

    let target = target_exponent.unwrap_or_else(|| p_full.round());
    let mismatch = (p_full - target).abs() > (5.0 * exponent_err).max(0.3);

    let (coefficient, coefficient_err) = if mismatch {
        (None, f64::NAN)
    } else {
        let scaled: Vec<f64> = win.x.iter().zip(&win.v).map(|(&x, &v)| v * x.powf(target)).collect();
        let (c_full, _) = fit::fit_two_term(&win.x, &scaled, |x| 1.0 / x)?;
        let n2 = win.x.len() / 2;
        let (c_half, _) = fit::fit_two_term(&win.x[n2..], &scaled[n2..], |x| 1.0 / x)?;
        (Some(c_full), (c_full - c_half).abs())
    };

    let ratio = match (coefficient, predicted_coefficient) {
        (Some(c), Some(p)) if p != 0.0 => Some(c / p),
        _ => None,
    };
    Ok(TailReport {
        window: (win.x[0], x_end),
        lpi,
        exponent: p_full,
        exponent_err,
        coefficient,
        coefficient_err,
        target_exponent: target,
        predicted_coefficient,
        ratio,
        exponent_mismatch: mismatch,
    })
}

/// The forward-cone profile u+(v) = v(v+1)/(v+2)^2 interpolating interior
/// decay (v -> inf) and the radiation field (u+ ~ v/4 as v -> 0).
pub fn u_plus(v: f64) -> f64 {
    v * (v + 1.0) / ((v + 2.0) * (v + 2.0))
}

#[derive(Debug, Clone, Copy)]
pub struct RayRatio {
    pub ratio: f64,
    /// Extrapolated limit of phi t*^3 / (c_M u+(t*/r)).
    pub value: f64,
    pub err: f64,
}

/// Compare ray-observer series phi(t*) at fixed t*/r against the global
/// leading-order profile; returns one extrapolated ratio per ray.
pub fn ray_profile_check(rays: &[(f64, TimeSeries)], c_m: f64) -> Result<Vec<RayRatio>> {
    if c_m == 0.0 {
        return Err(Error::Domain("degenerate data: c_M = 0".into()));
    }
    let mut out = Vec::with_capacity(rays.len());
    for (v_ratio, series) in rays {
        let shape = c_m * u_plus(*v_ratio);
        let r_curve: Vec<f64> = series
            .x
            .iter()
            .zip(&series.v)
            .map(|(&t, &phi)| phi * t * t * t / shape)
            .collect();
        let (r_inf, _) = fit::fit_two_term(&series.x, &r_curve, |x| 1.0 / x)?;
        let n2 = series.x.len() / 2;
        let (r_half, _) = fit::fit_two_term(&series.x[n2..], &r_curve[n2..], |x| 1.0 / x)?;
        out.push(RayRatio {
            ratio: *v_ratio,
            value: r_inf,
            err: (r_inf - r_half).abs(),
        });
    }
    Ok(out)
}

/// Observed convergence order log2(|c-m|/|m-f|) from three series at matched
/// abscissae on grids refined by factors of two; median over the window.
pub fn richardson_order(
    coarse: &TimeSeries,
    medium: &TimeSeries,
    fine: &TimeSeries,
) -> Result<f64> {
    let n = coarse.x.len().min(medium.x.len()).min(fine.x.len());
    if n < 4 {
        return Err(Error::Invalid("need >= 4 matched samples".into()));
    }
    for i in 0..n {
        if (coarse.x[i] - medium.x[i]).abs() > 1e-9 * coarse.x[i].abs().max(1.0)
            || (medium.x[i] - fine.x[i]).abs() > 1e-9 * medium.x[i].abs().max(1.0)
        {
            return Err(Error::Invalid("sample points not matched".into()));
        }
    }
    let scale = medium.v.iter().take(n).map(|v| v.abs()).fold(0.0, f64::max);
    let floor = 1e-13 * scale.max(1e-300);
    let mut orders = Vec::new();
    for i in 0..n {
        let dc = coarse.v[i] - medium.v[i];
        let df = medium.v[i] - fine.v[i];
        if dc.abs() > floor && df.abs() > floor {
            orders.push((dc.abs() / df.abs()).log2());
        }
    }
    if orders.len() < n / 3 {
        return Err(Error::Numerical(
            "grid differences below noise floor".into(),
        ));
    }
    median(&orders).ok_or_else(|| Error::Numerical("empty order sample".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, x0: f64, x1: f64, n: usize) -> TimeSeries {
        let xs: Vec<f64> = (0..n)
            .map(|i| x0 + (x1 - x0) * i as f64 / (n - 1) as f64)
            .collect();
        let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        TimeSeries::new(xs, vs, "test").unwrap()
    }

    #[test]
    fn lpi_exact_on_power_law() {
        let s = series(|x| 2.5 * x.powf(-3.0), 100.0, 1000.0, 4000);
        let p = local_power_index(&s).unwrap();
        for &v in &p.v[1..p.v.len() - 1] {
            assert!((v - 3.0).abs() < 1e-8, "p = {v}");
        }
    }

    #[test]
    fn lpi_analytic_correction_oracle() {
        // value = c x^-3 (1 + 1/x)  =>  p(x) = 3 + 1/(x+1) exactly.
        let s = series(|x| 4.0 * x.powf(-3.0) * (1.0 + 1.0 / x), 50.0, 2000.0, 8000);
        let p = local_power_index(&s).unwrap();
        for (i, (&x, &v)) in p.x.iter().zip(&p.v).enumerate() {
            if i == 0 || i == p.x.len() - 1 {
                continue;
            }
            assert!((v - (3.0 + 1.0 / (x + 1.0))).abs() < 1e-4, "x={x} p={v}");
        }
    }

    #[test]
    fn lpi_rejects_oscillation() {
        let s = series(|x| (x * 0.5).sin() * x.powf(-2.0), 10.0, 100.0, 500);
        assert!(local_power_index(&s).is_err());
    }

    #[test]
    fn lpi_scale_invariant() {
        let s1 = series(|x| 3.0 * x.powf(-2.5), 100.0, 1000.0, 1000);
        let s2 = series(|x| 3.0e7 * x.powf(-2.5), 100.0, 1000.0, 1000);
        let p1 = local_power_index(&s1).unwrap();
        let p2 = local_power_index(&s2).unwrap();
        for (a, b) in p1.v.iter().zip(&p2.v) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn tail_fit_planted_model() {
        let s = series(|x| 5.0 * x.powf(-3.0) + 20.0 * x.powf(-4.0), 200.0, 2000.0, 4000);
        let rep = tail_fit(&s, Some(3.0), None).unwrap();
        assert!((rep.exponent - 3.0).abs() < 0.02, "p = {}", rep.exponent);
        let c = rep.coefficient.unwrap();
        assert!((c / 5.0 - 1.0).abs() < 0.02, "c = {c}");
        assert!(!rep.exponent_mismatch);
    }

    #[test]
    fn tail_fit_perturbed_model() {
        let s = series(
            |x| 5.0 * x.powf(-3.0) * (1.0 + 0.3 * (x.ln()).sin() / x),
            200.0,
            2000.0,
            4000,
        );
        let rep = tail_fit(&s, Some(3.0), None).unwrap();
        let c = rep.coefficient.unwrap();
        assert!((c / 5.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn tail_fit_flags_exponent_mismatch() {
        let s = series(|x| 2.0 * x.powf(-4.0), 200.0, 2000.0, 2000);
        let rep = tail_fit(&s, Some(3.0), Some(2.0)).unwrap();
        assert!(rep.exponent_mismatch);
        assert!(rep.coefficient.is_none());
        assert!(rep.ratio.is_none());
    }

    #[test]
    fn tail_fit_scale_equivariant() {
        let s1 = series(|x| 5.0 * x.powf(-3.0) + 9.0 * x.powf(-4.0), 300.0, 3000.0, 2000);
        let s2 = series(
            |x| 7.0 * (5.0 * x.powf(-3.0) + 9.0 * x.powf(-4.0)),
            300.0,
            3000.0,
            2000,
        );
        let c1 = tail_fit(&s1, Some(3.0), None).unwrap().coefficient.unwrap();
        let c2 = tail_fit(&s2, Some(3.0), None).unwrap().coefficient.unwrap();
        assert!((c2 / c1 - 7.0).abs() < 1e-9);
    }

    #[test]
    fn u_plus_reference_points() {
        assert_eq!(u_plus(0.0), 0.0);
        assert!((u_plus(2.0) - 3.0 / 8.0).abs() < 1e-15);
        assert!((u_plus(1e8) - 1.0).abs() < 1e-7);
        // v^-1 u+(v) -> 1/4 as v -> 0: matches c_rad = c_M / 4.
        assert!((u_plus(1e-9) / 1e-9 - 0.25).abs() < 1e-8);
    }

    #[test]
    fn ray_check_exact_on_compact_form() {
        // phi = c_M (t+r) / (t^2 (t+2r)^2) with r = t/v has
        // phi t^3 / (c_M u+(v)) = 1 identically.
        let c_m = -3.2;
        let mut rays = Vec::new();
        for v in [0.5, 1.0, 2.0] {
            let s = series(
                move |t| {
                    let r = t / v;
                    c_m * (t + r) / (t * t * (t + 2.0 * r) * (t + 2.0 * r))
                },
                100.0,
                1000.0,
                500,
            );
            rays.push((v, s));
        }
        let out = ray_profile_check(&rays, c_m).unwrap();
        for r in out {
            assert!((r.value - 1.0).abs() < 1e-8, "R({}) = {}", r.ratio, r.value);
        }
        assert!(ray_profile_check(&rays, 0.0).is_err());
    }

    #[test]
    fn richardson_planted_orders() {
        let exact = |x: f64| (x * 0.1).sin();
        let make = |h: f64| {
            series(
                move |x| exact(x) + h * h * (0.3 * x).cos() + 0.2 * h * h * h,
                1.0,
                10.0,
                50,
            )
        };
        let (c, m, f) = (make(0.4), make(0.2), make(0.1));
        let order = richardson_order(&c, &m, &f).unwrap();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
        // identical series -> sub-noise error
        assert!(richardson_order(&m, &m, &m).is_err());
    }

    #[test]
    fn richardson_pure_h2_error_model() {
        let make = |h: f64| series(move |x| x.cos() + h * h * (x * 0.7).sin(), 1.0, 8.0, 60);
        let order = richardson_order(&make(0.2), &make(0.1), &make(0.05)).unwrap();
        assert!((order - 2.0).abs() < 1e-3);
    }
}
