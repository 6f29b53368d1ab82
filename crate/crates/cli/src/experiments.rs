//! Experiment dispatch: build the core objects from a validated config, run,
//! and emit deterministic CSV artifacts.

use crate::config::{Config, ConfigError};
use crate::csvout::{read_series, CsvTable};
use pricelab_core::background::{
    kerr_tail_constant, solve_extended_state, BackgroundSpec, EffectivePotential, Mode,
    PotentialSpec,
};
use pricelab_core::evolve::{
    evolve_double_null, evolve_leapfrog, predicted_constant_cauchy, predicted_constant_forcing,
    reduce_to_mode, CauchyData, CauchyGrid, EvolutionResult, ForcingSpec, LeftBoundary, NullData,
    NullGrid, Observer, ObserverKind, Profile,
};
use pricelab_core::spectral::{
    expansion_iterate, fit_sigma_series, model_solution, resolvent_apply, ModelMethod, SigmaGrid,
};
use pricelab_core::tails::{ray_profile_check, tail_fit, TimeSeries};
use std::path::{Path, PathBuf};

/// Exit discipline: 0 ok, 2 config, 3 compute, 4 acceptance failure.
pub enum RunError {
    Config(String),
    Compute(String),
    AcceptanceFailed(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<pricelab_core::Error> for RunError {
    fn from(e: pricelab_core::Error) -> Self {
        RunError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Compute(format!("io: {e}"))
    }
}

pub type RunResult<T> = Result<T, RunError>;

/// One-line summary returned to the caller for printing/collation.
pub struct RunSummary {
    pub line: String,
    /// kind-specific named metrics for sweep collation
    pub metrics: Vec<(String, f64)>,
}

pub fn parse_profile(text: &str) -> RunResult<Profile> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("none") {
        return Ok(Profile::None);
    }
    let parts: Vec<&str> = t.split(':').collect();
    let nums: Vec<f64> = parts[1..]
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| RunError::Config(format!("bad profile '{text}'")))?;
    match (parts[0].to_ascii_lowercase().as_str(), nums.len()) {
        ("gaussian", 3) => Ok(Profile::Gaussian {
            center: nums[0],
            width: nums[1],
            amplitude: nums[2],
        }),
        ("bump", 3) => Ok(Profile::Bump {
            lo: nums[0],
            hi: nums[1],
            amplitude: nums[2],
        }),
        ("powerbump", 4) => Ok(Profile::PowerBump {
            lo: nums[0],
            hi: nums[1],
            power: nums[2],
            amplitude: nums[3],
        }),
        _ => Err(RunError::Config(format!(
            "bad profile '{text}' (expected gaussian:c:w:a, bump:lo:hi:a, powerbump:lo:hi:p:a, none)"
        ))),
    }
}

fn background_from(cfg: &Config) -> RunResult<BackgroundSpec> {
    let kind = cfg.get_or("background", "kind", "schwarzschild");
    let mass = cfg.f64_or("background", "mass", 1.0)?;
    let mut spec = match kind.as_str() {
        "schwarzschild" => BackgroundSpec::schwarzschild(mass)
            .map_err(|e| RunError::Config(e.to_string()))?,
        "flat" => {
            let pot = cfg.get_or("background", "potential", "none");
            if pot == "none" {
                BackgroundSpec::flat_free()
            } else {
                let parts: Vec<&str> = pot.split(':').collect();
                let amp: f64 = parts
                    .get(1)
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| RunError::Config(format!("bad potential '{pot}'")))?;
                match parts[0] {
                    "cubic" => BackgroundSpec::flat(PotentialSpec::inverse_cubic(amp)),
                    "quartic" => BackgroundSpec::flat(PotentialSpec::inverse_quartic(amp)),
                    _ => return Err(RunError::Config(format!("bad potential '{pot}'"))),
                }
            }
        }
        other => return Err(RunError::Config(format!("unknown background '{other}'"))),
    };
    spec.kerr_a = cfg.f64_or("background", "kerr_a", 0.0)?;
    Ok(spec)
}

fn observers_from(cfg: &Config) -> RunResult<Vec<Observer>> {
    let mut out = Vec::new();
    let stride = cfg.usize_or("observers", "stride", 20)?;
    if let Some(radii) = cfg.get("observers", "radii") {
        for p in radii.split(',') {
            let r: f64 = p
                .trim()
                .parse()
                .map_err(|_| RunError::Config(format!("bad radius '{p}'")))?;
            out.push(Observer::fixed_radius(r, stride));
        }
    }
    if cfg.bool_or("observers", "radiation", false)? {
        out.push(Observer::radiation_field(stride));
    }
    if let Some(rays) = cfg.get("observers", "rays") {
        for p in rays.split(',') {
            let v: f64 = p
                .trim()
                .parse()
                .map_err(|_| RunError::Config(format!("bad ray ratio '{p}'")))?;
            out.push(Observer::ray(v, stride));
        }
    }
    if out.is_empty() {
        return Err(RunError::Config("no observers configured".into()));
    }
    Ok(out)
}

fn run_evolution(cfg: &Config) -> RunResult<(BackgroundSpec, Mode, EvolutionResult)> {
    let spec = background_from(cfg)?;
    let l = cfg.usize_or("data", "l", 0)? as u32;
    let mode = Mode::new(l);
    let pot = EffectivePotential::new(&spec, mode, 0.1, 10.0, 16)?;
    let observers = observers_from(cfg)?;
    let forcing = match (cfg.get("forcing", "chi"), cfg.get("forcing", "fr")) {
        (Some(chi), Some(fr)) => Some(ForcingSpec::new(parse_profile(chi)?, parse_profile(fr)?)?),
        (None, None) => None,
        _ => {
            return Err(RunError::Config(
                "[forcing] needs both chi and fr".into(),
            ))
        }
    };
    let source = match &forcing {
        Some(f) => Some(reduce_to_mode(&spec, mode, f)?),
        None => None,
    };

    let scheme = cfg.get_or("grid", "scheme", "leapfrog");
    let out = match scheme.as_str() {
        "leapfrog" => {
            let rstar_min = cfg.f64_or("grid", "rstar_min", -200.0)?;
            let rstar_max = cfg.f64_or("grid", "rstar_max", 4200.0)?;
            let dx = cfg.f64_or("grid", "drstar", 0.05)?;
            let grid = CauchyGrid {
                rstar_min,
                rstar_max,
                n: ((rstar_max - rstar_min) / dx).round() as usize + 1,
                cfl: cfg.f64_or("grid", "cfl", 0.5)?,
                t_end: cfg.f64_or("grid", "t_end", 2000.0)?,
                left: match cfg.get_or("grid", "left", "sommerfeld").as_str() {
                    "sommerfeld" => LeftBoundary::Sommerfeld,
                    "excision" => LeftBoundary::Excision,
                    "center" => LeftBoundary::Center,
                    other => {
                        return Err(RunError::Config(format!("unknown left boundary '{other}'")))
                    }
                },
                record_energy: false,
            };
            let data = CauchyData {
                phi0: parse_profile(&cfg.get_or("data", "phi0", "none"))?,
                phi1: parse_profile(&cfg.get_or("data", "phi1", "none"))?,
            };
            evolve_leapfrog(&grid, &data, &pot, source.as_ref(), &observers)?
        }
        "double-null" => {
            let h = cfg.f64_or("grid", "h", 0.1)?;
            let u0 = cfg.f64_or("grid", "u0", 0.0)?;
            let v0 = cfg.f64_or("grid", "v0", 10.0)?;
            let u_max = cfg.f64_or("grid", "u_max", 3000.0)?;
            let v_max = cfg.f64_or("grid", "v_max", 3000.0)?;
            let grid = NullGrid {
                u0,
                v0,
                h,
                nu: ((u_max - u0) / h).round() as usize + 1,
                nv: ((v_max - v0) / h).round() as usize + 1,
            };
            let data = NullData {
                on_u0: parse_profile(&cfg.get_or("data", "on_u0", "none"))?,
                on_v0: parse_profile(&cfg.get_or("data", "on_v0", "none"))?,
            };
            evolve_double_null(&grid, &data, &pot, source.as_ref(), &observers)?
        }
        other => return Err(RunError::Config(format!("unknown scheme '{other}'"))),
    };
    Ok((spec, mode, out))
}

fn observer_file_name(kind: ObserverKind) -> String {
    match kind {
        ObserverKind::FixedRadius { r } => format!("series_r{r:.3}.csv"),
        ObserverKind::RadiationField => "series_radiation.csv".into(),
        ObserverKind::Ray { ratio } => format!("series_ray{ratio:.3}.csv"),
    }
}

fn write_series(
    path: &Path,
    series: &TimeSeries,
    cfg: &Config,
    scheme: &str,
    grid: &str,
) -> RunResult<()> {
    let mut t = CsvTable::new(&["x", "value"]);
    for (x, v) in series.x.iter().zip(&series.v) {
        t.push_f64(&[*x, *v]);
    }
    t.provenance(cfg.hash, scheme, grid);
    t.write(path)?;
    Ok(())
}

pub fn run_evolve(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    let (spec, mode, result) = run_evolution(cfg)?;
    let mut metrics = Vec::new();
    let mut lines = Vec::new();
    for obs in &result.observers {
        let path = out_dir.join(observer_file_name(obs.kind));
        write_series(&path, &obs.series, cfg, result.scheme, &result.grid_desc)?;
    }
    // optional tail fit against the predicted constant
    if let Some(target) = cfg.get("observers", "fit_target") {
        let target: Option<f64> = if target.eq_ignore_ascii_case("auto") {
            None
        } else {
            Some(
                target
                    .parse()
                    .map_err(|_| RunError::Config("bad fit_target".into()))?,
            )
        };
        let window = cfg.get_or("observers", "fit_window", "300,1900");
        let (w0, w1) = window
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
            .ok_or_else(|| RunError::Config("bad fit_window".into()))?;
        let state = solve_extended_state(&spec)?;
        let c_pred = match (cfg.get("forcing", "chi"), cfg.get("data", "phi1")) {
            (Some(_), _) => {
                let forcing = ForcingSpec::new(
                    parse_profile(cfg.require("forcing", "chi")?)?,
                    parse_profile(cfg.require("forcing", "fr")?)?,
                )?;
                Some(predicted_constant_forcing(&spec, &state, mode, &forcing)?)
            }
            (None, Some(p)) if mode.l == 0 => {
                let phi1 = parse_profile(p)?;
                Some(predicted_constant_cauchy(&spec, &state, mode, &phi1)?)
            }
            _ => None,
        };
        let mut report = CsvTable::new(&[
            "observer", "exponent", "exponent_err", "coefficient", "coefficient_err",
            "predicted", "ratio",
        ]);
        for obs in &result.observers {
            let Ok(win) = obs.series.window(w0, w1) else {
                continue;
            };
            // per-observer leading term: the spatial shape u0(r_obs) at
            // fixed radius (u0 = 1 on Schwarzschild), c/4 for the radiation
            // field (one power of decay less), c u+(ratio) along rays
            let (target_here, predicted_here) = match obs.kind {
                ObserverKind::FixedRadius { r } => (
                    target,
                    c_pred.map(|c| pricelab_core::evolve::tail_amplitude_at(c, &state, r)),
                ),
                ObserverKind::RadiationField => {
                    (target.map(|t| t - 1.0), c_pred.map(|c| c / 4.0))
                }
                ObserverKind::Ray { ratio } => (
                    target,
                    c_pred.map(|c| c * pricelab_core::tails::u_plus(ratio)),
                ),
            };
            let rep = tail_fit(&win, target_here, predicted_here)?;
            let name = observer_file_name(obs.kind);
            report.push_raw(&[
                name.clone(),
                crate::csvout::fmt_f64(rep.exponent),
                crate::csvout::fmt_f64(rep.exponent_err),
                crate::csvout::fmt_f64(rep.coefficient.unwrap_or(f64::NAN)),
                crate::csvout::fmt_f64(rep.coefficient_err),
                crate::csvout::fmt_f64(predicted_here.unwrap_or(f64::NAN)),
                crate::csvout::fmt_f64(rep.ratio.unwrap_or(f64::NAN)),
            ]);
            lines.push(format!(
                "{name}: p={:.3} ratio={:.4}",
                rep.exponent,
                rep.ratio.unwrap_or(f64::NAN)
            ));
            metrics.push(("exponent".into(), rep.exponent));
            if let Some(r) = rep.ratio {
                metrics.push(("coefficient_ratio".into(), r));
            }
        }
        report.provenance(cfg.hash, result.scheme, &result.grid_desc);
        report.write(&out_dir.join("tail_report.csv"))?;
    }
    metrics.push(("steps".into(), result.steps as f64));
    let line = if lines.is_empty() {
        format!(
            "evolve: {} steps, {} observers written",
            result.steps,
            result.observers.len()
        )
    } else {
        format!("evolve: {}", lines.join("; "))
    };
    Ok(RunSummary { line, metrics })
}

pub fn run_spectral(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    let spec = background_from(cfg)?;
    let l = cfg.usize_or("spectral", "l", 0)? as u32;
    let f = parse_profile(cfg.require("spectral", "f")?)?;
    let lo = cfg.f64_or("spectral", "support_lo", 5.0)?;
    let hi = cfg.f64_or("spectral", "support_hi", 15.0)?;
    let r_obs = cfg.f64_or("spectral", "r_obs", 10.0)?;
    let grid = SigmaGrid::log_spaced(
        cfg.f64_or("spectral", "sigma_min", 1e-3)?,
        cfg.f64_or("spectral", "sigma_max", 1e-1)?,
        cfg.usize_or("spectral", "samples", 24)?,
        30.0,
    )?;
    let mut table = CsvTable::new(&["sigma", "re_u", "im_u", "residual", "re_w", "im_w"]);
    let mut samples = Vec::new();
    for &sigma in &grid.values {
        let s = resolvent_apply(&spec, Mode::new(l), sigma, &|r| f.eval(r), (lo, hi), r_obs)?;
        table.push_f64(&[
            sigma,
            s.u_obs.re,
            s.u_obs.im,
            s.residual,
            s.wronskian.re,
            s.wronskian.im,
        ]);
        samples.push(s);
    }
    table.provenance(cfg.hash, "resolvent", &format!("r_obs={r_obs}"));
    table.write(&out_dir.join("resolvent_samples.csv"))?;

    let fit = fit_sigma_series(&samples)?;
    let mut ft = CsvTable::new(&[
        "re_a0", "im_a0", "re_a1", "im_a1", "re_a2", "im_a2", "re_b", "im_b", "re_a3",
        "im_a3", "re_b3", "im_b3", "residual", "condition", "b_subset_drift",
    ]);
    ft.push_f64(&[
        fit.a0.re, fit.a0.im, fit.a1.re, fit.a1.im, fit.a2.re, fit.a2.im, fit.b.re, fit.b.im,
        fit.a3.re, fit.a3.im, fit.b3.re, fit.b3.im, fit.residual, fit.condition,
        fit.b_subset_drift,
    ]);
    ft.provenance(cfg.hash, "sigma-fit", &format!("n={}", samples.len()));
    ft.write(&out_dir.join("sigma_fit.csv"))?;
    Ok(RunSummary {
        line: format!(
            "spectral: b = {:.6e} {:+.6e}i, Im a2 = {:.6e}, subset drift {:.2e}",
            fit.b.re, fit.b.im, fit.a2.im, fit.b_subset_drift
        ),
        metrics: vec![
            ("re_b".into(), fit.b.re),
            ("im_a2".into(), fit.a2.im),
            ("b_subset_drift".into(), fit.b_subset_drift),
        ],
    })
}

pub fn run_model(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    let method = match cfg.get_or("model", "method", "quadrature").as_str() {
        "quadrature" => ModelMethod::Quadrature,
        "ode" => ModelMethod::Ode,
        other => return Err(RunError::Config(format!("unknown model method '{other}'"))),
    };
    let lo = cfg.f64_or("model", "rhat_min", 1e-3)?;
    let hi = cfg.f64_or("model", "rhat_max", 1e2)?;
    let n = cfg.usize_or("model", "points", 200)?;
    let sol = model_solution(method, lo, hi, n)?;
    let mut t = CsvTable::new(&["rhat", "re_u2", "im_u2"]);
    for (x, v) in sol.rhat.iter().zip(&sol.values) {
        t.push_f64(&[*x, v.re, v.im]);
    }
    t.provenance(cfg.hash, "model", &format!("method={method:?} n={n}"));
    t.write(&out_dir.join("model_solution.csv"))?;
    Ok(RunSummary {
        line: format!("model: {n} points on [{lo}, {hi}] via {method:?}"),
        metrics: vec![("points".into(), n as f64)],
    })
}

pub fn run_expansion(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    let spec = background_from(cfg)?;
    let f = parse_profile(cfg.require("expansion", "f")?)?;
    let lo = cfg.f64_or("expansion", "support_lo", 5.0)?;
    let hi = cfg.f64_or("expansion", "support_hi", 15.0)?;
    let st = expansion_iterate(&spec, &|r| f.eval(r), (lo, hi))?;
    let mut t = CsvTable::new(&["r", "u0", "im_f1", "im_u1", "f2"]);
    for i in (0..st.r.len()).step_by(4) {
        t.push_f64(&[st.r[i], st.u0[i], st.f1[i].im, st.u1[i].im, st.f2[i]]);
    }
    t.provenance(cfg.hash, "expansion", "log-r grid");
    t.write(&out_dir.join("expansion_tables.csv"))?;
    let mut c = CsvTable::new(&["c0", "c_x", "c_m", "f2_ratio_1e3", "u1_log_ratio"]);
    c.push_f64(&[st.c0, st.c_x, st.c_m, st.f2_ratio_1e3, st.u1_log_ratio.re]);
    c.provenance(cfg.hash, "expansion", "constants");
    c.write(&out_dir.join("expansion_constants.csv"))?;
    Ok(RunSummary {
        line: format!(
            "expansion: c0={:.6e} c_M={:.6e} f2_ratio={:.4}",
            st.c0, st.c_m, st.f2_ratio_1e3
        ),
        metrics: vec![
            ("c0".into(), st.c0),
            ("c_m".into(), st.c_m),
            ("f2_ratio".into(), st.f2_ratio_1e3),
        ],
    })
}

pub fn run_fit_tail(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    let input = PathBuf::from(cfg.require("fit_tail", "input")?);
    let (xs, vs, _) = read_series(&input)?;
    let mut series = TimeSeries::new(xs, vs, "input")?;
    if let (Some(w0), Some(w1)) = (
        cfg.get("fit_tail", "window_lo"),
        cfg.get("fit_tail", "window_hi"),
    ) {
        let w0: f64 = w0.parse().map_err(|_| RunError::Config("bad window_lo".into()))?;
        let w1: f64 = w1.parse().map_err(|_| RunError::Config("bad window_hi".into()))?;
        series = series.window(w0, w1)?;
    }
    let target = match cfg.get("fit_tail", "target_exponent") {
        Some(v) => Some(
            v.parse::<f64>()
                .map_err(|_| RunError::Config("bad target_exponent".into()))?,
        ),
        None => None,
    };
    let predicted = match cfg.get("fit_tail", "predicted") {
        Some(v) => Some(
            v.parse::<f64>()
                .map_err(|_| RunError::Config("bad predicted".into()))?,
        ),
        None => None,
    };
    let rep = tail_fit(&series, target, predicted)?;
    let mut t = CsvTable::new(&[
        "exponent", "exponent_err", "coefficient", "coefficient_err", "ratio",
        "window_lo", "window_hi", "mismatch",
    ]);
    t.push_f64(&[
        rep.exponent,
        rep.exponent_err,
        rep.coefficient.unwrap_or(f64::NAN),
        rep.coefficient_err,
        rep.ratio.unwrap_or(f64::NAN),
        rep.window.0,
        rep.window.1,
        if rep.exponent_mismatch { 1.0 } else { 0.0 },
    ]);
    t.provenance(cfg.hash, "fit-tail", &format!("input={}", input.display()));
    t.write(&out_dir.join("tail_report.csv"))?;
    Ok(RunSummary {
        line: format!(
            "fit-tail: p = {:.4} +- {:.4}, c = {:.6e}{}",
            rep.exponent,
            rep.exponent_err,
            rep.coefficient.unwrap_or(f64::NAN),
            rep.ratio
                .map(|r| format!(", ratio = {r:.4}"))
                .unwrap_or_default()
        ),
        metrics: vec![("exponent".into(), rep.exponent)],
    })
}

pub fn run_ray_profile(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    let spec = background_from(cfg)?;
    let mode = Mode::new(0);
    let state = solve_extended_state(&spec)?;
    let forcing = ForcingSpec::new(
        parse_profile(cfg.require("forcing", "chi")?)?,
        parse_profile(cfg.require("forcing", "fr")?)?,
    )?;
    let c_m = predicted_constant_forcing(&spec, &state, mode, &forcing)?;
    let src = reduce_to_mode(&spec, mode, &forcing)?;
    let pot = EffectivePotential::new(&spec, mode, 0.1, 10.0, 16)?;
    let h = cfg.f64_or("grid", "h", 0.1)?;
    let u0 = cfg.f64_or("grid", "u0", -20.0)?;
    let v0 = cfg.f64_or("grid", "v0", 5.0)?;
    let u_max = cfg.f64_or("grid", "u_max", 800.0)?;
    let v_max = cfg.f64_or("grid", "v_max", 6000.0)?;
    let grid = NullGrid {
        u0,
        v0,
        h,
        nu: ((u_max - u0) / h).round() as usize + 1,
        nv: ((v_max - v0) / h).round() as usize + 1,
    };
    let data = NullData {
        on_u0: Profile::None,
        on_v0: Profile::None,
    };
    let stride = cfg.usize_or("observers", "stride", 4)?;
    let ratios: Vec<f64> = cfg
        .get_or("observers", "rays", "0.5, 1, 2")
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| RunError::Config("bad rays".into()))?;
    let observers: Vec<Observer> = ratios.iter().map(|&v| Observer::ray(v, stride)).collect();
    let out = evolve_double_null(&grid, &data, &pot, Some(&src), &observers)?;
    let w0 = cfg.f64_or("observers", "window_lo", 150.0)?;
    let mut rays = Vec::new();
    for &ratio in &ratios {
        let s = out
            .series_for(ObserverKind::Ray { ratio })
            .ok_or_else(|| RunError::Compute("missing ray series".into()))?;
        rays.push((ratio, s.window(w0, f64::INFINITY).map_err(RunError::from)?));
    }
    let checks = ray_profile_check(&rays, c_m)?;
    let mut t = CsvTable::new(&["ratio", "r_limit", "err"]);
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    for c in &checks {
        t.push_f64(&[c.ratio, c.value, c.err]);
        parts.push(format!("R({}) = {:.4}", c.ratio, c.value));
        metrics.push((format!("ray_{}", c.ratio), c.value));
    }
    t.footer_entry("c_m", crate::csvout::fmt_f64(c_m));
    t.provenance(cfg.hash, out.scheme, &out.grid_desc);
    t.write(&out_dir.join("ray_profile.csv"))?;
    Ok(RunSummary {
        line: format!("ray-profile: {}", parts.join(", ")),
        metrics,
    })
}

pub fn run_kerr_constant(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    let mass = cfg.f64_or("kerr", "mass", 1.0)?;
    let a = cfg.f64_or("kerr", "a", 0.0)?;
    let phi1 = parse_profile(cfg.require("kerr", "phi1")?)?;
    let lo = cfg.f64_or("kerr", "support_lo", 4.0)?;
    let hi = cfg.f64_or("kerr", "support_hi", 12.0)?;
    let zero = |_: f64, _: f64, _: f64| 0.0;
    let radial = move |r: f64, _t: f64, _p: f64| phi1.eval(r);
    let c = kerr_tail_constant(mass, a, &zero, &radial, (lo, hi))?;
    let mut t = CsvTable::new(&["mass", "a", "constant"]);
    t.push_f64(&[mass, a, c]);
    t.provenance(cfg.hash, "kerr-quadrature", &format!("support=[{lo},{hi}]"));
    t.write(&out_dir.join("kerr_constant.csv"))?;
    Ok(RunSummary {
        line: format!("kerr-constant: c = {c:.8e} (mass={mass}, a={a})"),
        metrics: vec![("constant".into(), c)],
    })
}

pub fn run_verify(cfg: &Config, out_dir: &Path) -> RunResult<RunSummary> {
    use pricelab_core::accept;
    // Optional artifact comparison: refuse mismatched config hashes.
    if let Some(dir) = cfg.get("verify", "compare") {
        let base = PathBuf::from(dir);
        let ours = out_dir.join("verify.csv");
        if ours.exists() && base.join("verify.csv").exists() {
            let ha = crate::csvout::artifact_hash(&ours)?;
            let hb = crate::csvout::artifact_hash(&base.join("verify.csv"))?;
            if ha != hb {
                return Err(RunError::Config(format!(
                    "refusing to compare artifacts with mismatched config hashes ({ha:?} vs {hb:?})"
                )));
            }
        }
    }
    let wanted: Option<Vec<String>> = cfg.get("verify", "criteria").map(|s| {
        s.split(',')
            .map(|p| p.trim().to_ascii_uppercase())
            .collect()
    });
    let mut results = Vec::new();
    for (id, runner) in accept::all_criteria() {
        if let Some(w) = &wanted {
            if !w.iter().any(|x| x == id) {
                continue;
            }
        }
        let r = match runner() {
            Ok(r) => r,
            Err(e) => accept::CriterionResult {
                id,
                passed: false,
                details: format!("error: {e}"),
            },
        };
        println!(
            "{:4} {}  {}",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.details
        );
        results.push(r);
    }
    if results.is_empty() {
        return Err(RunError::Config("no matching criteria".into()));
    }
    let mut t = CsvTable::new(&["criterion", "passed", "details"]);
    for r in &results {
        t.push_raw(&[
            r.id.to_string(),
            if r.passed { "1" } else { "0" }.to_string(),
            format!("\"{}\"", r.details.replace('"', "'")),
        ]);
    }
    t.provenance(cfg.hash, "verify", "acceptance suite");
    t.write(&out_dir.join("verify.csv"))?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let line = format!(
        "verify: {}/{} passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" (failed: {})", failed.join(", "))
        }
    );
    if failed.is_empty() {
        Ok(RunSummary {
            line,
            metrics: vec![("failed".into(), 0.0)],
        })
    } else {
        Err(RunError::AcceptanceFailed(line))
    }
}

pub fn dispatch(cfg: &Config, kind: &str, out_dir: &Path) -> RunResult<RunSummary> {
    match kind {
        "evolve" => run_evolve(cfg, out_dir),
        "spectral" => run_spectral(cfg, out_dir),
        "model" => run_model(cfg, out_dir),
        "expansion" => run_expansion(cfg, out_dir),
        "fit-tail" => run_fit_tail(cfg, out_dir),
        "ray-profile" => run_ray_profile(cfg, out_dir),
        "kerr-constant" => run_kerr_constant(cfg, out_dir),
        "verify" => run_verify(cfg, out_dir),
        other => Err(RunError::Config(format!("unknown experiment kind '{other}'"))),
    }
}
