//! End-to-end verification suite: one checker per headline claim, shared by
//! the `verify` subcommand and the acceptance test target.
//!
//! Every tolerance is pinned here. The default setups are desk scale:
//! mass 1, leapfrog grid r* in [-200, 4200] at dr* = 0.05 with t_end = 2000,
//! double-null h = 0.05 with u, v reaching a few thousand.

use crate::background::{
    kerr_tail_constant, kerr_tail_constant_with_orders,
    solve_extended_state, static_kernel_residual, BackgroundSpec, EffectivePotential,
    KernelDerivative, Mode, PotentialSpec,
};
use crate::evolve::{
    evolve_double_null, evolve_leapfrog, predicted_constant_cauchy, predicted_constant_forcing,
    reduce_to_mode, tail_amplitude_at, CauchyData, CauchyGrid, EvolutionResult, ForcingSpec,
    LeftBoundary, NullData, NullGrid, Observer, ObserverKind, Profile,
};
use crate::num::{median, quad};
use crate::spectral::{
    expansion_iterate, fit_sigma_series, inverse_ft_log, model_solution, model_value_quadrature,
    profile_integral, radial_moment, resolvent_apply, zero_energy_solve, ModelMethod,
    SigmaGrid, Window,
};
use crate::tails::{local_power_index, ray_profile_check, tail_fit, TimeSeries};
use crate::{Error, Result};
use std::sync::OnceLock;

/// Outcome of one verification criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: &'static str,
    pub passed: bool,
    pub details: String,
}

/// All criterion runners, in order.
pub fn all_criteria() -> Vec<(&'static str, fn() -> Result<CriterionResult>)> {
    vec![
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
        ("A10", a10),
        ("A11", a11),
        ("A12", a12),
        ("A13", a13),
    ]
}

/// Run the full suite, mapping runner errors into failed criteria.
pub fn run_all() -> Vec<CriterionResult> {
    all_criteria()
        .into_iter()
        .map(|(id, f)| match f() {
            Ok(r) => r,
            Err(e) => CriterionResult {
                id,
                passed: false,
                details: format!("error: {e}"),
            },
        })
        .collect()
}

fn schw() -> BackgroundSpec {
    BackgroundSpec::schwarzschild(1.0).unwrap()
}

/// Median of the local power index over a t* window.
fn lpi_median(series: &TimeSeries, w0: f64, w1: f64) -> Result<f64> {
    let lpi = local_power_index(&series.window(w0, w1)?)?;
    median(&lpi.v[1..lpi.v.len() - 1])
        .ok_or_else(|| Error::Numerical("empty power-index window".into()))
}

// Exact causality on both sides: the left edge sits beyond the causal past
// of every observer for the whole run, so no boundary condition can
// contaminate the measured tails (a first-order absorbing boundary reflects
// about 1e-3 of the pulse, and its double bounce lands inside the fit
// windows).
fn default_leapfrog_grid(dx: f64, t_end: f64) -> CauchyGrid {
    let rstar_min = -(t_end + 40.0);
    let n = ((4200.0 - rstar_min) / dx).round() as usize + 1;
    CauchyGrid {
        rstar_min,
        rstar_max: 4200.0,
        n,
        cfl: 0.5,
        t_end,
        left: LeftBoundary::Excision,
        record_energy: false,
    }
}

fn schw_data_run(
    l: u32,
    data: &CauchyData,
    dx: f64,
    t_end: f64,
    radii: &[f64],
) -> Result<EvolutionResult> {
    let spec = schw();
    let pot = EffectivePotential::new(&spec, Mode::new(l), -10.0, 60.0, 64)?;
    let grid = default_leapfrog_grid(dx, t_end);
    let observers: Vec<Observer> = radii
        .iter()
        .map(|&r| Observer::fixed_radius(r, (0.5 / (0.5 * dx)).round() as usize))
        .collect();
    evolve_leapfrog(&grid, data, &pot, None, &observers)
}

pub fn a1() -> Result<CriterionResult> {
    let spec = schw();
    let state = solve_extended_state(&spec)?;
    let phi1 = Profile::Gaussian {
        center: 30.0,
        width: 3.0,
        amplitude: 1.0,
    };
    let data = CauchyData {
        phi0: Profile::None,
        phi1: phi1.clone(),
    };
    let c_pred = predicted_constant_cauchy(&spec, &state, Mode::new(0), &phi1)?;

    let fine = schw_data_run(0, &data, 0.05, 2000.0, &[10.0, 20.0])?;

    let mut pass = true;
    let mut details = Vec::new();
    for obs in &fine.observers {
        let s = &obs.series;
        let p = lpi_median(s, 800.0, 1800.0)?;
        let rep = tail_fit(&s.window(300.0, 1900.0)?, Some(3.0), Some(c_pred))?;
        let ratio = rep.ratio.unwrap_or(f64::NAN);
        let ObserverKind::FixedRadius { r } = obs.kind else {
            unreachable!()
        };
        pass &= (p - 3.0).abs() <= 0.10 && (ratio - 1.0).abs() <= 0.10;
        details.push(format!("r={r:.1}: lpi={p:.3} c_ratio={ratio:.4}"));
    }
    // Improvement under refinement: the grid-to-grid change of the extracted
    // coefficient contracts (second order), or the changes already sit far
    // below the tolerance scale (the tail is quasi-static and can be
    // grid-converged even at the coarsest spacing). The refinement observer
    // sits on a node shared by all three grids so snapping cannot leak in.
    let r_node = crate::background::inverse_tortoise(14.0, &spec)?;
    let chat_at = |dx: f64| -> Result<f64> {
        let out = schw_data_run(0, &data, dx, 2000.0, &[r_node])?;
        let rep = tail_fit(&out.observers[0].series.window(300.0, 1900.0)?, Some(3.0), None)?;
        rep.coefficient
            .ok_or_else(|| Error::Numerical("coefficient fit failed".into()))
    };
    let c_20 = chat_at(0.20)?;
    let c_10 = chat_at(0.10)?;
    let c_05 = chat_at(0.05)?;
    let d_coarse = (c_10 - c_20).abs();
    let d_fine = (c_05 - c_10).abs();
    let floor = 1e-3 * c_05.abs();
    let improves = d_fine <= 0.5 * d_coarse || (d_fine < floor && d_coarse < floor);
    pass &= improves;
    details.push(format!(
        "refinement: |dc| {:.3e} (0.2->0.1) -> {:.3e} (0.1->0.05) vs floor {:.1e}",
        d_coarse, d_fine, floor
    ));
    Ok(CriterionResult {
        id: "A1",
        passed: pass,
        details: details.join("; "),
    })
}

pub fn a2() -> Result<CriterionResult> {
    let data = CauchyData {
        phi0: Profile::Gaussian {
            center: 30.0,
            width: 3.0,
            amplitude: 1.0,
        },
        phi1: Profile::None,
    };
    let out = schw_data_run(0, &data, 0.05, 2000.0, &[10.0])?;
    let p = lpi_median(&out.observers[0].series, 800.0, 1800.0)?;
    Ok(CriterionResult {
        id: "A2",
        passed: (p - 4.0).abs() <= 0.15,
        details: format!("initially static lpi={p:.3} (target 4.00 +- 0.15)"),
    })
}

pub fn a3() -> Result<CriterionResult> {
    let mut details = Vec::new();
    let mut pass = true;

    // l = 1, generic data
    let data = CauchyData {
        phi0: Profile::None,
        phi1: Profile::Gaussian {
            center: 30.0,
            width: 3.0,
            amplitude: 1.0,
        },
    };
    let out = schw_data_run(1, &data, 0.05, 1700.0, &[10.0])?;
    let p1 = lpi_median(&out.observers[0].series, 1200.0, 1600.0)?;
    pass &= (p1 - 5.0).abs() <= 0.2;
    details.push(format!("l=1 generic lpi={p1:.3} (5.0 +- 0.2)"));

    // l = 1, initially static
    let data_static = CauchyData {
        phi0: Profile::Gaussian {
            center: 30.0,
            width: 3.0,
            amplitude: 1.0,
        },
        phi1: Profile::None,
    };
    let out = schw_data_run(1, &data_static, 0.05, 1700.0, &[10.0])?;
    let p1s = lpi_median(&out.observers[0].series, 1000.0, 1600.0)?;
    pass &= (p1s - 6.0).abs() <= 0.3;
    details.push(format!("l=1 static lpi={p1s:.3} (6.0 +- 0.3)"));

    // l = 2, generic data, double-null for clean long reach; trend check only.
    let spec = schw();
    let pot = EffectivePotential::new(&spec, Mode::new(2), -10.0, 60.0, 64)?;
    let grid = NullGrid {
        u0: 0.0,
        v0: 40.0,
        h: 0.05,
        nu: 18_001,
        nv: 22_001,
    };
    let data = NullData {
        on_u0: Profile::Gaussian {
            center: 160.0,
            width: 8.0,
            amplitude: 1.0,
        },
        on_v0: Profile::None,
    };
    let out = evolve_double_null(
        &grid,
        &data,
        &pot,
        None,
        &[Observer::fixed_radius(50.0, 4)],
    )?;
    let series = &out.observers[0].series;
    // clean window: stop where the signal sinks toward round-off
    let peak = series.v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut t_clean = *series.x.last().unwrap();
    for (&t, &v) in series.x.iter().zip(&series.v) {
        if t > 300.0 && v.abs() < 1e-13 * peak {
            t_clean = t;
            break;
        }
    }
    let lpi = local_power_index(&series.window(250.0, t_clean.min(880.0))?)?;
    let n = lpi.v.len();
    // quartile medians must approach 7 monotonically (here from above, the
    // ringdown-to-tail crossover overshoots the asymptotic index)
    let quartile = |k: usize| {
        median(&lpi.v[(k * n / 4).max(1)..((k + 1) * n / 4).min(n - 1)]).unwrap_or(f64::NAN)
    };
    let q: Vec<f64> = (0..4).map(quartile).collect();
    let approaching = (0..3).all(|i| (q[i + 1] - 7.0).abs() <= (q[i] - 7.0).abs());
    let late = q[3];
    pass &= approaching && late >= 6.5;
    details.push(format!(
        "l=2 lpi quartiles {:.2} {:.2} {:.2} {:.2} over [250,{:.0}] (approaching 7, last >= 6.5)",
        q[0],
        q[1],
        q[2],
        q[3],
        t_clean.min(880.0)
    ));

    Ok(CriterionResult {
        id: "A3",
        passed: pass,
        details: details.join("; "),
    })
}

/// Shared double-null forced run for A4/A5: zero data on rays preceding the
/// source support, reaching v = 6000 for the radiation field and rays.
fn forced_null_run() -> &'static Result<(EvolutionResult, f64)> {
    static RUN: OnceLock<Result<(EvolutionResult, f64)>> = OnceLock::new();
    RUN.get_or_init(|| {
        let spec = schw();
        let state = solve_extended_state(&spec)?;
        let forcing = ForcingSpec::new(
            Profile::Bump {
                lo: 5.0,
                hi: 15.0,
                amplitude: 1.0,
            },
            Profile::Bump {
                lo: 8.0,
                hi: 14.0,
                amplitude: 1.0,
            },
        )?;
        let c_m = predicted_constant_forcing(&spec, &state, Mode::new(0), &forcing)?;
        let src = reduce_to_mode(&spec, Mode::new(0), &forcing)?;
        let pot = EffectivePotential::new(&spec, Mode::new(0), -10.0, 60.0, 64)?;
        let h = 0.05;
        let grid = NullGrid {
            u0: -20.0,
            v0: 5.0,
            h,
            nu: (760.0 / h) as usize + 1,
            nv: (6000.0 / h) as usize + 1,
        };
        let data = NullData {
            on_u0: Profile::None,
            on_v0: Profile::None,
        };
        let observers = vec![
            Observer::radiation_field(4),
            Observer::ray( 0.5, 4),
            Observer::ray(1.0, 4),
            Observer::ray(2.0, 4),
        ];
        let out = evolve_double_null(&grid, &data, &pot, Some(&src), &observers)?;
        Ok((out, c_m))
    })
}

pub fn a4() -> Result<CriterionResult> {
    let (out, c_m) = match forced_null_run() {
        Ok(v) => v,
        Err(e) => return Err(Error::Numerical(format!("shared forced run failed: {e}"))),
    };
    let series = out
        .series_for(ObserverKind::RadiationField)
        .ok_or_else(|| Error::Numerical("missing radiation series".into()))?;
    let p = lpi_median(series, 250.0, 700.0)?;
    let rep = tail_fit(&series.window(120.0, 720.0)?, Some(2.0), Some(c_m / 4.0))?;
    let ratio = rep.ratio.unwrap_or(f64::NAN);
    let pass = (p - 2.0).abs() <= 0.10 && (ratio - 1.0).abs() <= 0.10;
    Ok(CriterionResult {
        id: "A4",
        passed: pass,
        details: format!(
            "radiation lpi={p:.3} (2.00 +- 0.10); F u^2 / (c_M/4) = {ratio:.4} (1 +- 0.10)"
        ),
    })
}

pub fn a5() -> Result<CriterionResult> {
    let (out, c_m) = match forced_null_run() {
        Ok(v) => v,
        Err(e) => return Err(Error::Numerical(format!("shared forced run failed: {e}"))),
    };
    let mut rays = Vec::new();
    for ratio in [0.5, 1.0, 2.0] {
        let s = out
            .series_for(ObserverKind::Ray { ratio })
            .ok_or_else(|| Error::Numerical("missing ray series".into()))?;
        rays.push((ratio, s.window(150.0, 1e9)?));
    }
    let checks = ray_profile_check(&rays, *c_m)?;
    let mut pass = true;
    let mut details = Vec::new();
    for c in checks {
        pass &= (c.value - 1.0).abs() <= 0.10;
        details.push(format!("R({}) = {:.4}", c.ratio, c.value));
    }
    Ok(CriterionResult {
        id: "A5",
        passed: pass,
        details: format!("{} (each 1 +- 0.10)", details.join(", ")),
    })
}

pub fn a6() -> Result<CriterionResult> {
    let spec = BackgroundSpec::flat(PotentialSpec::inverse_cubic(0.2));
    let state = solve_extended_state(&spec)?;
    let phi1 = Profile::Gaussian {
        center: 30.0,
        width: 3.0,
        amplitude: 1.0,
    };
    let c = predicted_constant_cauchy(&spec, &state, Mode::new(0), &phi1)?;
    let pot = EffectivePotential::new(&spec, Mode::new(0), 0.5, 60.0, 64)?;
    let dx = 0.05;
    let grid = CauchyGrid {
        rstar_min: 0.0,
        rstar_max: 4200.0,
        n: ((4200.0 - 0.0) / dx) as usize + 1,
        cfl: 0.5,
        t_end: 2000.0,
        left: LeftBoundary::Center,
        record_energy: false,
    };
    let data = CauchyData {
        phi0: Profile::None,
        phi1: phi1.clone(),
    };
    let observers = [
        Observer::fixed_radius(10.0, 20),
        Observer::fixed_radius(20.0, 20),
    ];
    let out = evolve_leapfrog(&grid, &data, &pot, None, &observers)?;
    let mut pass = true;
    let mut details = Vec::new();
    for obs in &out.observers {
        let ObserverKind::FixedRadius { r } = obs.kind else {
            unreachable!()
        };
        let predicted = tail_amplitude_at(c, &state, r);
        let p = lpi_median(&obs.series, 800.0, 1800.0)?;
        let rep = tail_fit(&obs.series.window(300.0, 1900.0)?, Some(3.0), Some(predicted))?;
        let ratio = rep.ratio.unwrap_or(f64::NAN);
        pass &= (p - 3.0).abs() <= 0.10 && (ratio - 1.0).abs() <= 0.10;
        details.push(format!("r={r:.0}: lpi={p:.3} c_ratio={ratio:.4}"));
    }
    Ok(CriterionResult {
        id: "A6",
        passed: pass,
        details: details.join("; "),
    })
}

pub fn a7() -> Result<CriterionResult> {
    let spec = schw();
    let f = Profile::PowerBump {
        lo: 5.0,
        hi: 15.0,
        power: 5.0,
        amplitude: 1.0,
    };
    let grid = SigmaGrid::log_spaced(1e-3, 5e-2, 24, 30.0)?;
    let mut samples = Vec::new();
    for &sigma in &grid.values {
        let s = resolvent_apply(&spec, Mode::new(0), sigma, &|r| f.eval(r), (5.0, 15.0), 10.0)?;
        if s.residual > 1e-6 {
            return Err(Error::Numerical(format!(
                "resolvent residual {:.2e} at sigma={sigma}",
                s.residual
            )));
        }
        samples.push(s);
    }
    let fit = fit_sigma_series(&samples)?;
    let moment = radial_moment(&|r| f.eval(r), (5.0, 15.0))?;
    let b_pred = -4.0 * moment;
    let re_b = fit.b.re;
    let im_a2 = fit.a2.im;
    let b_ok = (re_b / b_pred - 1.0).abs() <= 0.05;
    let phase_ok = (im_a2 / (-std::f64::consts::FRAC_PI_2 * re_b) - 1.0).abs() <= 0.05;
    let stable = fit.b_subset_drift < 0.05;
    Ok(CriterionResult {
        id: "A7",
        passed: b_ok && phase_ok && stable,
        details: format!(
            "Re b = {re_b:.5e} vs -4m Int f r^2 = {b_pred:.5e} ({:.2}%); Im a2/(-pi/2 Re b) = {:.4}; subset drift {:.2e}",
            100.0 * (re_b / b_pred - 1.0).abs(),
            im_a2 / (-std::f64::consts::FRAC_PI_2 * re_b),
            fit.b_subset_drift
        ),
    })
}

pub fn a8() -> Result<CriterionResult> {
    // (a) quadrature vs ODE route, sup over [0.1, 10]
    let qa = model_solution(ModelMethod::Quadrature, 0.1, 10.0, 60)?;
    let od = model_solution(ModelMethod::Ode, 0.1, 10.0, 60)?;
    let mut sup = 0.0f64;
    for (x, y) in qa.values.iter().zip(&od.values) {
        sup = sup.max((x - y).norm());
    }
    let routes_ok = sup <= 1e-6;

    // (b) Im(u~ + ln rhat) = pi/2 +- 1e-4 at rhat = 1e-3, as stated.
    // The true remainder is O(rhat ln rhat) ~ 7e-3 here, so this clause
    // fails for the genuine model solution; reported honestly.
    let u = model_value_quadrature(1e-3)?;
    let im_dev = (u + 1e-3f64.ln()).im - std::f64::consts::FRAC_PI_2;
    let near_zero_ok = im_dev.abs() <= 1e-4;

    // (c) bracket cancellation: no 1/rhat pole.
    let (integral, _) = quad::adaptive(
        |t: f64| num_complex::Complex64::new(0.0, t).ln() * (-2.0 * t).exp(),
        1e-300,
        40.0,
        1e-14,
    )?;
    let bracket = num_complex::Complex64::new(
        (2.0 * 0.577_215_664_901_532_9 + 4.0f64.ln()) / 4.0,
        -std::f64::consts::PI / 4.0,
    );
    let pole_ok = (bracket + integral).norm() <= 1e-8;

    Ok(CriterionResult {
        id: "A8",
        passed: routes_ok && near_zero_ok && pole_ok,
        details: format!(
            "routes sup diff {sup:.2e} (<=1e-6: {routes_ok}); Im(u+ln r)-pi/2 at 1e-3 = {im_dev:.2e} (<=1e-4: {near_zero_ok}, remainder is O(r ln r)); bracket {:.2e} (<=1e-8: {pole_ok})",
            (bracket + integral).norm()
        ),
    })
}

/// Measured Im(u~(2) + ln rhat) - pi/2 at rhat = 1e-3 (the honest remainder
/// behind the near-zero clause of A8).
pub fn a8_near_zero_deviation() -> Result<f64> {
    let u = model_value_quadrature(1e-3)?;
    Ok((u + 1e-3f64.ln()).im - std::f64::consts::FRAC_PI_2)
}

pub fn a9() -> Result<CriterionResult> {
    let mut pass = true;
    let mut worst = 0.0f64;
    for v in [0.0, 0.25, 1.0, 2.0, 4.0, 100.0] {
        let num = profile_integral(v)?;
        let exact = 2.0 * std::f64::consts::PI * (v + 1.0) / ((v + 2.0) * (v + 2.0));
        let dev = (num - exact).abs();
        worst = worst.max(dev);
        pass &= dev <= 1e-4;
    }
    Ok(CriterionResult {
        id: "A9",
        passed: pass,
        details: format!("max |deviation| = {worst:.2e} over v in {{0, 0.25, 1, 2, 4, 100}}"),
    })
}

pub fn a10() -> Result<CriterionResult> {
    let spec = schw();
    let f = Profile::Bump {
        lo: 5.0,
        hi: 15.0,
        amplitude: 0.7,
    };
    let st = expansion_iterate(&spec, &|r| f.eval(r), (5.0, 15.0))?;
    let f2_ok = (st.f2_ratio_1e3 - 1.0).abs() <= 0.02;

    let ze = zero_energy_solve(&spec, Mode::new(0), &|r| f.eval(r), (5.0, 15.0))?;
    let c0_ok = (ze.c0_tail_fit / ze.c0_quadrature - 1.0).abs() <= 0.01;

    // c_M from the iteration must equal the forcing quadrature with unit
    // chi integral, to 1e-8.
    let state = solve_extended_state(&spec)?;
    let unit = Profile::Bump {
        lo: 0.0,
        hi: 2.0,
        amplitude: 1.0,
    };
    let amp = 1.0 / unit.integral()?;
    let forcing = ForcingSpec::new(
        Profile::Bump {
            lo: 0.0,
            hi: 2.0,
            amplitude: amp,
        },
        f.clone(),
    )?;
    let c_m_forcing = predicted_constant_forcing(&spec, &state, Mode::new(0), &forcing)?;
    let cm_dev = (st.c_m / c_m_forcing - 1.0).abs();
    let cm_ok = cm_dev <= 1e-8;
    Ok(CriterionResult {
        id: "A10",
        passed: f2_ok && c0_ok && cm_ok,
        details: format!(
            "f2 r^2/(4 m c0) at 1e3 = {:.4}; c0 quad/tail-fit agree to {:.2e}; c_M routes differ by {cm_dev:.2e}",
            st.f2_ratio_1e3,
            (ze.c0_tail_fit / ze.c0_quadrature - 1.0).abs()
        ),
    })
}

pub fn a11() -> Result<CriterionResult> {
    let w = Window::new(0.05, 0.5);
    let out = inverse_ft_log(2, &[200.0, -200.0], w)?;
    let scaled = out[0].re * 200.0f64.powi(3) / 2.0;
    let ratio = out[1].norm() / out[0].norm();
    let pass = (scaled - 1.0).abs() <= 0.05 && ratio < 1e-6;
    Ok(CriterionResult {
        id: "A11",
        passed: pass,
        details: format!(
            "t=200: output t^3/2 = {scaled:.6}; anticausal |out(-200)|/|out(200)| = {ratio:.2e}"
        ),
    })
}

pub fn a12() -> Result<CriterionResult> {
    let spec = schw();
    let mut pass = true;
    let mut details = Vec::new();
    for l in [0u32, 1] {
        let res = static_kernel_residual(&spec, Mode::new(l), KernelDerivative::Analytic)?;
        pass &= res < 1e-10;
        details.push(format!("schw l={l} analytic {res:.1e}"));
    }
    let flat_free = BackgroundSpec::flat_free();
    let res = static_kernel_residual(&flat_free, Mode::new(0), KernelDerivative::Analytic)?;
    pass &= res < 1e-10;
    details.push(format!("flat analytic {res:.1e}"));

    for l in [0u32, 1] {
        let r1 = static_kernel_residual(&spec, Mode::new(l), KernelDerivative::Stencil { h: 0.1 })?;
        let r2 =
            static_kernel_residual(&spec, Mode::new(l), KernelDerivative::Stencil { h: 0.05 })?;
        let order = (r1 / r2).log2();
        pass &= (order - 2.0).abs() <= 0.1;
        details.push(format!("schw l={l} stencil order {order:.3}"));
    }
    let flat = BackgroundSpec::flat(PotentialSpec::inverse_cubic(0.2));
    let r1 = static_kernel_residual(&flat, Mode::new(0), KernelDerivative::Stencil { h: 0.1 })?;
    let r2 = static_kernel_residual(&flat, Mode::new(0), KernelDerivative::Stencil { h: 0.05 })?;
    let order = (r1 / r2).log2();
    pass &= (order - 2.0).abs() <= 0.1;
    details.push(format!("flat stencil order {order:.3}"));
    Ok(CriterionResult {
        id: "A12",
        passed: pass,
        details: details.join("; "),
    })
}

pub fn a13() -> Result<CriterionResult> {
    let mut pass = true;
    let mut details = Vec::new();
    let zero = |_: f64, _: f64, _: f64| 0.0;
    // three spherically symmetric fixtures at a = 0 against the explicit
    // Schwarzschild quadrature
    let fixtures: [(f64, f64, f64, f64); 3] = [
        (8.0, 1.5, 3.0, 13.0),
        (12.0, 2.0, 5.0, 19.0),
        (6.0, 0.8, 3.5, 9.0),
    ];
    for (c0, w0, lo, hi) in fixtures {
        let phi1 = move |r: f64, _t: f64, _p: f64| (-(r - c0) * (r - c0) / (w0 * w0)).exp();
        let c = kerr_tail_constant(1.0, 0.0, &zero, &phi1, (lo, hi))?;
        let (q, _) = quad::adaptive(
            |r: f64| (-(r - c0) * (r - c0) / (w0 * w0)).exp() * r * r / (1.0 - 2.0 / r),
            lo,
            hi,
            1e-13,
        )?;
        let expected = -8.0 * q;
        let dev = (c / expected - 1.0).abs();
        pass &= dev <= 1e-8;
        details.push(format!("a=0 fixture@{c0}: rel dev {dev:.1e}"));
    }
    // spinning fixture, refinement stability to 1e-6
    let phi1 = |r: f64, th: f64, _p: f64| {
        (1.0 + 0.3 * th.cos() * th.cos()) * (-(r - 7.0) * (r - 7.0) / 1.5).exp()
    };
    let c1 = kerr_tail_constant_with_orders(1.0, 0.5, &zero, &phi1, (3.0, 11.0), 80, 32, 16)?;
    let c2 = kerr_tail_constant_with_orders(1.0, 0.5, &zero, &phi1, (3.0, 11.0), 160, 64, 32)?;
    let drift = (c1 - c2).abs() / c2.abs();
    pass &= drift <= 1e-6;
    details.push(format!("a=0.5 refinement drift {drift:.1e}"));
    Ok(CriterionResult {
        id: "A13",
        passed: pass,
        details: details.join("; "),
    })
}

