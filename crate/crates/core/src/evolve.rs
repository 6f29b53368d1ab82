//! 1+1D time-domain evolution of the per-mode field psi = r phi: a Cauchy
//! leapfrog scheme in (t, r*) and a characteristic double-null diamond
//! scheme in (u, v) = (t - r*, t + r*), with sourcing and observers.

use crate::background::{
    tortoise, BackgroundKind, BackgroundSpec, EffectivePotential, ExtendedState, Mode,
};
use crate::num::{interp, quad};
use crate::tails::TimeSeries;
use crate::{Error, Result};
use std::sync::OnceLock;
use std::time::Instant;

/// Smooth radial/temporal profile families.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// amplitude * exp(-((x-center)/width)^2)
    Gaussian {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// amplitude * exp(1 - 1/(1-s^2)), s = 2(x-lo)/(hi-lo) - 1; zero outside.
    Bump { lo: f64, hi: f64, amplitude: f64 },
    /// amplitude * x^-power inside a bump window (compact, smooth).
    PowerBump {
        lo: f64,
        hi: f64,
        power: f64,
        amplitude: f64,
    },
    None,
}

fn bump_shape(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Integral of exp(1 - 1/(1-s^2)) over [-1, 1], evaluated once.
fn bump_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        quad::adaptive(bump_shape, -1.0, 1.0, 1e-14).expect("bump norm").0
    })
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let s = (x - center) / width;
                amplitude * (-s * s).exp()
            }
            Profile::Bump { lo, hi, amplitude } => {
                let s = 2.0 * (x - lo) / (hi - lo) - 1.0;
                amplitude * bump_shape(s)
            }
            Profile::PowerBump {
                lo,
                hi,
                power,
                amplitude,
            } => {
                let s = 2.0 * (x - lo) / (hi - lo) - 1.0;
                if s.abs() < 1.0 {
                    amplitude * x.powf(-power) * bump_shape(s)
                } else {
                    0.0
                }
            }
            Profile::None => 0.0,
        }
    }

    /// Nominal support; Gaussians are truncated where they underflow any
    /// double-precision observable.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Profile::Gaussian { center, width, .. } => {
                Some((center - 8.5 * width.abs(), center + 8.5 * width.abs()))
            }
            Profile::Bump { lo, hi, .. } | Profile::PowerBump { lo, hi, .. } => Some((lo, hi)),
            Profile::None => None,
        }
    }

    /// Exact integral over the whole line (closed form for the Gaussian,
    /// scaled reference constant for the bump family).
    pub fn integral(&self) -> Result<f64> {
        match *self {
            Profile::Gaussian {
                width, amplitude, ..
            } => Ok(amplitude * width * std::f64::consts::PI.sqrt()),
            Profile::Bump { lo, hi, amplitude } => Ok(amplitude * 0.5 * (hi - lo) * bump_norm()),
            Profile::PowerBump { .. } => {
                let (lo, hi) = self.support().unwrap();
                Ok(quad::adaptive(|x| self.eval(x), lo, hi, 1e-13)?.0)
            }
            Profile::None => Ok(0.0),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Profile::None)
    }
}

/// Cauchy data: phi and d_t phi at t = 0, as radial profiles in the
/// tortoise coordinate.
#[derive(Debug, Clone)]
pub struct CauchyData {
    pub phi0: Profile,
    pub phi1: Profile,
}

impl CauchyData {
    pub fn support(&self) -> Option<(f64, f64)> {
        match (self.phi0.support(), self.phi1.support()) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        }
    }
}

/// Separable source S = chi(t) f(r): a compactly supported temporal bump
/// and a radial profile with decay tag >= 4 + alpha.
#[derive(Debug, Clone)]
pub struct ForcingSpec {
    pub chi: Profile,
    pub fr: Profile,
}

impl ForcingSpec {
    pub fn new(chi: Profile, fr: Profile) -> Result<Self> {
        if !matches!(chi, Profile::Bump { .. }) {
            return Err(Error::Invalid(
                "temporal profile must be a compactly supported bump".into(),
            ));
        }
        Ok(Self { chi, fr })
    }

    pub fn chi_integral(&self) -> Result<f64> {
        self.chi.integral()
    }
}

/// Reduced 1D source for the psi equation
/// psi_tt - psi_xx + V_l psi = S, with S(t, r) = (1 - 2m/r) r chi(t) f(r).
///
/// The overall sign is pinned by the static two-point oracle and by the sign
/// of the measured late-time tail against the forcing quadrature constant.
#[derive(Debug, Clone)]
pub struct ModeSource {
    spec: BackgroundSpec,
    pub forcing: ForcingSpec,
}

impl ModeSource {
    pub fn eval(&self, t: f64, r: f64) -> f64 {
        self.spec.lapse(r) * r * self.forcing.chi.eval(t) * self.forcing.fr.eval(r)
    }

    pub fn chi_at(&self, t: f64) -> f64 {
        self.forcing.chi.eval(t)
    }

    pub fn radial_at(&self, r: f64) -> f64 {
        self.spec.lapse(r) * r * self.forcing.fr.eval(r)
    }

    pub fn support_t(&self) -> Option<(f64, f64)> {
        self.forcing.chi.support()
    }
}

/// Project a separable forcing onto a single angular mode.
pub fn reduce_to_mode(spec: &BackgroundSpec, mode: Mode, f: &ForcingSpec) -> Result<ModeSource> {
    if mode.l != 0 {
        return Err(Error::Invalid(
            "sourced runs are wired for the spherically symmetric mode".into(),
        ));
    }
    Ok(ModeSource {
        spec: spec.clone(),
        forcing: f.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeftBoundary {
    /// Hold psi = 0 and rely on the causal guard.
    Excision,
    /// First-order outgoing condition psi_t = psi_x (left-movers exit).
    Sommerfeld,
    /// Regular center r = 0 on the flat track: psi(0) = 0 exactly.
    Center,
}

/// Cauchy grid in (t, r*).
#[derive(Debug, Clone)]
pub struct CauchyGrid {
    pub rstar_min: f64,
    pub rstar_max: f64,
    /// Number of spatial points (>= 8).
    pub n: usize,
    /// dt = cfl * dr*.
    pub cfl: f64,
    pub t_end: f64,
    pub left: LeftBoundary,
    pub record_energy: bool,
}

impl CauchyGrid {
    pub fn dx(&self) -> f64 {
        (self.rstar_max - self.rstar_min) / (self.n - 1) as f64
    }
}

/// Null grid: rows u_i = u0 + i h, columns v_j = v0 + j h.
#[derive(Debug, Clone)]
pub struct NullGrid {
    pub u0: f64,
    pub v0: f64,
    pub h: f64,
    pub nu: usize,
    pub nv: usize,
}

/// Characteristic data on the initial rays u = u0 and v = v0.
#[derive(Debug, Clone)]
pub struct NullData {
    /// psi(u0, v) as a function of v.
    pub on_u0: Profile,
    /// psi(u, v0) as a function of u.
    pub on_v0: Profile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObserverKind {
    /// phi(t, r_obs) recorded against t* = t - r*(r_obs).
    FixedRadius { r: f64 },
    /// psi(u, v_max) ~ the radiation field, against u.
    RadiationField,
    /// phi along t*/r = ratio, against t*.
    Ray { ratio: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Observer {
    pub kind: ObserverKind,
    pub stride: usize,
}

impl Observer {
    pub fn fixed_radius(r: f64, stride: usize) -> Self {
        Self {
            kind: ObserverKind::FixedRadius { r },
            stride: stride.max(1),
        }
    }

    pub fn radiation_field(stride: usize) -> Self {
        Self {
            kind: ObserverKind::RadiationField,
            stride: stride.max(1),
        }
    }

    pub fn ray(ratio: f64, stride: usize) -> Self {
        Self {
            kind: ObserverKind::Ray { ratio },
            stride: stride.max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObserverSeries {
    pub kind: ObserverKind,
    pub series: TimeSeries,
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub observers: Vec<ObserverSeries>,
    pub scheme: &'static str,
    pub grid_desc: String,
    pub steps: u64,
    pub point_updates: u64,
    pub wall_ms: u128,
    pub energy: Option<TimeSeries>,
    /// Field at the final time (leapfrog: psi on the grid; double-null:
    /// psi on the last u row) with its abscissae.
    pub final_xs: Vec<f64>,
    pub final_psi: Vec<f64>,
}

impl EvolutionResult {
    pub fn series_for(&self, kind: ObserverKind) -> Option<&TimeSeries> {
        self.observers
            .iter()
            .find(|o| match (o.kind, kind) {
                (ObserverKind::FixedRadius { r: a }, ObserverKind::FixedRadius { r: b }) => {
                    (a - b).abs() < 1e-9
                }
                (ObserverKind::RadiationField, ObserverKind::RadiationField) => true,
                (ObserverKind::Ray { ratio: a }, ObserverKind::Ray { ratio: b }) => {
                    (a - b).abs() < 1e-12
                }
                _ => false,
            })
            .map(|o| &o.series)
    }
}

struct FixedObs {
    r: f64,
    x: f64,
    idx: usize,
    stride: usize,
    ts: Vec<f64>,
    vals: Vec<f64>,
}

/// Second-order leapfrog on psi_tt = psi_xx - V_l psi + S with a
/// second-order Taylor first step.
pub fn evolve_leapfrog(
    grid: &CauchyGrid,
    data: &CauchyData,
    pot: &EffectivePotential,
    source: Option<&ModeSource>,
    observers: &[Observer],
) -> Result<EvolutionResult> {
    let start = Instant::now();
    let spec = &pot.spec;
    if grid.n < 8 {
        return Err(Error::Invalid("leapfrog grid needs >= 8 points".into()));
    }
    if !(grid.cfl > 0.0 && grid.cfl <= 1.0) {
        return Err(Error::Invalid(format!("cfl = {} outside (0, 1]", grid.cfl)));
    }
    let dx = grid.dx();
    let dt = grid.cfl * dx;
    let n = grid.n;
    let flat = spec.kind == BackgroundKind::FlatPotential;
    if flat && grid.rstar_min < 0.0 {
        return Err(Error::Invalid("flat grid requires r* >= 0".into()));
    }
    if flat && grid.rstar_min == 0.0 && grid.left != LeftBoundary::Center {
        return Err(Error::Invalid(
            "a flat grid touching r = 0 must use the Center boundary".into(),
        ));
    }

    // Radii and potential, cached once per node.
    let mut r = vec![0.0; n];
    let mut v = vec![0.0; n];
    for i in 0..n {
        let x = grid.rstar_min + i as f64 * dx;
        if flat && x <= 0.0 {
            r[i] = 0.0;
            v[i] = 0.0; // pinned node, never updated
            continue;
        }
        r[i] = crate::background::inverse_tortoise(x, spec)?;
        v[i] = pot.at_tortoise(x)?;
    }
    let vmax = v.iter().cloned().fold(0.0, f64::max);
    if grid.cfl * grid.cfl * (4.0 + dx * dx * vmax) > 4.0 * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!(
            "CFL violation: cfl^2 (4 + dx^2 Vmax) = {:.6} > 4",
            grid.cfl * grid.cfl * (4.0 + dx * dx * vmax)
        )));
    }

    // Data support strictly inside the grid.
    if let Some((lo, hi)) = data.support() {
        if lo <= grid.rstar_min || hi >= grid.rstar_max {
            return Err(Error::Invalid(format!(
                "data support [{lo}, {hi}] not strictly inside the grid"
            )));
        }
    }

    // Observers: snap to nodes, enforce the causal guard.
    let mut fixed: Vec<FixedObs> = Vec::new();
    for obs in observers {
        match obs.kind {
            ObserverKind::FixedRadius { r: robs } => {
                let x = tortoise(robs, spec)?;
                let idx = ((x - grid.rstar_min) / dx).round() as usize;
                if idx == 0 || idx >= n - 1 {
                    return Err(Error::Invalid(format!("observer at r = {robs} off grid")));
                }
                let xs = grid.rstar_min + idx as f64 * dx;
                if grid.t_end >= grid.rstar_max - xs {
                    return Err(Error::Invalid(format!(
                        "causal guard: t_end = {} reaches the right boundary from r* = {xs}",
                        grid.t_end
                    )));
                }
                if grid.left == LeftBoundary::Excision && grid.t_end >= xs - grid.rstar_min {
                    return Err(Error::Invalid(format!(
                        "causal guard: t_end = {} reaches the excised left boundary from r* = {xs}",
                        grid.t_end
                    )));
                }
                fixed.push(FixedObs {
                    r: r[idx],
                    x: xs,
                    idx,
                    stride: obs.stride,
                    ts: Vec::new(),
                    vals: Vec::new(),
                });
            }
            _ => {
                return Err(Error::Invalid(
                    "leapfrog supports fixed-radius observers only".into(),
                ))
            }
        }
    }

    let nsteps = (grid.t_end / dt).ceil() as u64;
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    for i in 0..n {
        if r[i] > 0.0 {
            let x = grid.rstar_min + i as f64 * dx;
            prev[i] = r[i] * data.phi0.eval(x);
        }
    }
    // First step: psi(dt) = psi0 + dt r phi1 + dt^2/2 (psi0'' - V psi0 + S0).
    let dt2 = dt * dt;
    let lam2 = dt2 / (dx * dx);
    let s_at = |t: f64, i: usize| -> f64 {
        match source {
            Some(src) if r[i] > 0.0 => src.eval(t, r[i]),
            _ => 0.0,
        }
    };
    for i in 1..n - 1 {
        if flat && r[i] <= 0.0 {
            continue;
        }
        let x = grid.rstar_min + i as f64 * dx;
        let dd = prev[i + 1] - 2.0 * prev[i] + prev[i - 1];
        cur[i] = prev[i]
            + dt * r[i] * data.phi1.eval(x)
            + 0.5 * (lam2 * dd - dt2 * v[i] * prev[i] + dt2 * s_at(0.0, i));
    }
    match grid.left {
        LeftBoundary::Sommerfeld => {
            cur[0] = (1.0 - grid.cfl) * prev[0] + grid.cfl * prev[1];
        }
        LeftBoundary::Excision | LeftBoundary::Center => cur[0] = 0.0,
    }
    cur[n - 1] = 0.0;

    let mut energy_t = Vec::new();
    let mut energy_v = Vec::new();
    let mut energy = |t: f64, prev: &[f64], cur: &[f64]| {
        let mut e = 0.0;
        for i in 1..n - 1 {
            let pt = (cur[i] - prev[i]) / dt;
            let px = 0.5 * ((cur[i + 1] - cur[i - 1]) + (prev[i + 1] - prev[i - 1])) / (2.0 * dx);
            let pm = 0.5 * (cur[i] + prev[i]);
            e += (pt * pt + px * px + v[i] * pm * pm) * dx;
        }
        energy_t.push(t);
        energy_v.push(e);
    };

    let record = |obs: &mut [FixedObs], step: u64, t: f64, cur: &[f64]| {
        for o in obs.iter_mut() {
            if step % o.stride as u64 == 0 {
                o.ts.push(t - o.x);
                o.vals.push(cur[o.idx] / o.r);
            }
        }
    };
    record(&mut fixed, 0, 0.0, &prev);
    record(&mut fixed, 1, dt, &cur);
    if grid.record_energy {
        energy(0.5 * dt, &prev, &cur);
    }

    let chi_support = source.and_then(|s| s.support_t());
    let mut point_updates = 0u64;
    for step in 2..=nsteps {
        let t_prev = (step - 1) as f64 * dt;
        let chi_active = match (source, chi_support) {
            (Some(_), Some((lo, hi))) => t_prev >= lo && t_prev <= hi,
            (Some(_), None) => true,
            _ => false,
        };
        {
            let (vs, rs) = (&v[..], &r[..]);
            let (p, c, nx) = (&prev[..], &cur[..], &mut next[..]);
            for i in 1..n - 1 {
                nx[i] = 2.0 * c[i] - p[i] + lam2 * (c[i + 1] - 2.0 * c[i] + c[i - 1])
                    - dt2 * vs[i] * c[i];
            }
            if chi_active {
                let src = source.unwrap();
                let chi = src.chi_at(t_prev);
                if chi != 0.0 {
                    for i in 1..n - 1 {
                        if rs[i] > 0.0 {
                            nx[i] += dt2 * chi * src.radial_at(rs[i]);
                        }
                    }
                }
            }
        }
        match grid.left {
            LeftBoundary::Sommerfeld => {
                next[0] = (1.0 - grid.cfl) * cur[0] + grid.cfl * cur[1];
            }
            LeftBoundary::Excision | LeftBoundary::Center => next[0] = 0.0,
        }
        next[n - 1] = 0.0;
        point_updates += (n - 2) as u64;

        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        let t = step as f64 * dt;
        record(&mut fixed, step, t, &cur);
        if grid.record_energy && step % 16 == 0 {
            energy(t - 0.5 * dt, &prev, &cur);
        }
        if step % 2048 == 0 && !cur[n / 2].is_finite() {
            return Err(Error::Numerical(format!(
                "leapfrog produced non-finite field at t = {t}"
            )));
        }
    }
    if !cur.iter().all(|y| y.is_finite()) {
        return Err(Error::Numerical("leapfrog final state not finite".into()));
    }

    let mut out = Vec::new();
    for o in fixed {
        out.push(ObserverSeries {
            kind: ObserverKind::FixedRadius { r: o.r },
            series: TimeSeries::new(o.ts, o.vals, format!("phi@r={:.6}", o.r))?,
        });
    }
    let energy = if grid.record_energy {
        Some(TimeSeries::new(energy_t, energy_v, "energy")?)
    } else {
        None
    };
    Ok(EvolutionResult {
        observers: out,
        scheme: "leapfrog",
        grid_desc: format!(
            "rstar=[{},{}] dx={:.6} cfl={} t_end={}",
            grid.rstar_min, grid.rstar_max, dx, grid.cfl, grid.t_end
        ),
        steps: nsteps,
        point_updates,
        wall_ms: start.elapsed().as_millis(),
        energy,
        final_xs: (0..n).map(|i| grid.rstar_min + i as f64 * dx).collect(),
        final_psi: cur,
    })
}

/// Characteristic diamond integrator for psi_uv = -(V_l/4) psi + S/4.
pub fn evolve_double_null(
    grid: &NullGrid,
    data: &NullData,
    pot: &EffectivePotential,
    source: Option<&ModeSource>,
    observers: &[Observer],
) -> Result<EvolutionResult> {
    let start = Instant::now();
    let spec = &pot.spec;
    if grid.nu < 2 || grid.nv < 2 || !(grid.h > 0.0) {
        return Err(Error::Invalid("degenerate null grid".into()));
    }
    let flat = spec.kind == BackgroundKind::FlatPotential;
    let corner = 0.5 * (grid.v0 - grid.u0);
    if flat && corner <= 0.0 {
        return Err(Error::Invalid("flat null grid must satisfy v0 > u0".into()));
    }
    let h = grid.h;
    let (nu, nv) = (grid.nu, grid.nv);
    if flat {
        let min_diag = 0.5 * (grid.v0 + h - (grid.u0 + (nu - 1) as f64 * h));
        if min_diag <= 0.0 {
            return Err(Error::Invalid(
                "null grid crosses the flat-chart floor r = 0".into(),
            ));
        }
    }
    // Corner compatibility of the two data rays.
    let c_u = data.on_u0.eval(grid.v0);
    let c_v = data.on_v0.eval(grid.u0);
    if (c_u - c_v).abs() > 1e-12 * (c_u.abs() + c_v.abs() + 1.0) {
        return Err(Error::Invalid("null data disagree at the corner".into()));
    }

    // Potential cached per diagonal: diamonds centered at
    // r*_c = (v0 - u0)/2 + (j - i) h / 2 for i, j >= 1.
    let ndiag = nu + nv;
    let mut vdiag = vec![0.0; ndiag];
    for (k, vd) in vdiag.iter_mut().enumerate() {
        let d = k as f64 - (nu - 1) as f64; // j - i for the centered diamond
        let xc = corner + 0.5 * h * d;
        *vd = if flat && xc <= 0.0 {
            0.0
        } else {
            pot.at_tortoise(xc)?
        };
    }

    struct DnObs {
        kind: ObserverKind,
        stride: usize,
        ts: Vec<f64>,
        vals: Vec<f64>,
    }
    let mut dn_obs: Vec<DnObs> = observers
        .iter()
        .map(|o| DnObs {
            kind: o.kind,
            stride: o.stride,
            ts: Vec::new(),
            vals: Vec::new(),
        })
        .collect();

    let v_of = |j: usize| grid.v0 + j as f64 * h;
    let u_of = |i: usize| grid.u0 + i as f64 * h;
    let v_max = v_of(nv - 1);

    let mut row: Vec<f64> = (0..nv).map(|j| data.on_u0.eval(v_of(j))).collect();
    let mut new_row = vec![0.0; nv];
    let mut point_updates = 0u64;

    let record_row = |obs: &mut [DnObs], i: usize, row: &[f64]| -> Result<()> {
        let u = u_of(i);
        for o in obs.iter_mut() {
            if i % o.stride != 0 {
                continue;
            }
            match o.kind {
                ObserverKind::RadiationField => {
                    o.ts.push(u);
                    o.vals.push(row[nv - 1]);
                }
                ObserverKind::FixedRadius { r } => {
                    let x = tortoise(r, spec)?;
                    let v = u + 2.0 * x;
                    if v >= v_of(1) && v <= v_of(nv - 2) {
                        let jf = (v - grid.v0) / h;
                        let psi = interp::cubic_uniform(grid.v0, h, row, grid.v0 + jf * h);
                        o.ts.push(u);
                        o.vals.push(psi / r);
                    }
                }
                ObserverKind::Ray { ratio } => {
                    if u <= 0.0 {
                        continue;
                    }
                    let r_ray = u / ratio;
                    if flat && r_ray <= 0.0 {
                        continue;
                    }
                    if let Ok(x) = tortoise(r_ray, spec) {
                        let v = u + 2.0 * x;
                        if v >= v_of(1) && v <= v_of(nv - 2) {
                            let psi = interp::cubic_uniform(grid.v0, h, row, v);
                            o.ts.push(u);
                            o.vals.push(psi / r_ray);
                        }
                    }
                }
            }
        }
        Ok(())
    };
    record_row(&mut dn_obs, 0, &row)?;

    for i in 1..nu {
        new_row[0] = data.on_v0.eval(u_of(i));
        let u_c = u_of(i) - 0.5 * h;
        for j in 1..nv {
            let k = nu - 1 + j - i; // diagonal index for this diamond
            let vd = vdiag[k];
            let psi_e = row[j];
            let psi_w = new_row[j - 1];
            let psi_s = row[j - 1];
            let mut val = psi_e + psi_w - psi_s - 0.125 * h * h * vd * (psi_e + psi_w);
            if let Some(src) = source {
                let v_c = v_of(j) - 0.5 * h;
                let t_c = 0.5 * (u_c + v_c);
                let chi = src.chi_at(t_c);
                if chi != 0.0 {
                    let xc = 0.5 * (v_c - u_c);
                    let r_c = if flat {
                        xc
                    } else {
                        crate::background::inverse_tortoise(xc, spec)?
                    };
                    if r_c > 0.0 {
                        val += 0.25 * h * h * chi * src.radial_at(r_c);
                    }
                }
            }
            new_row[j] = val;
        }
        point_updates += (nv - 1) as u64;
        std::mem::swap(&mut row, &mut new_row);
        record_row(&mut dn_obs, i, &row)?;
        if i % 1024 == 0 && !row[nv - 1].is_finite() {
            return Err(Error::Numerical(format!(
                "double-null produced non-finite field at u = {}",
                u_of(i)
            )));
        }
    }
    if !row.iter().all(|y| y.is_finite()) {
        return Err(Error::Numerical("double-null final row not finite".into()));
    }

    let mut out = Vec::new();
    for o in dn_obs {
        let label = match o.kind {
            ObserverKind::RadiationField => format!("psi@v={v_max:.3}"),
            ObserverKind::FixedRadius { r } => format!("phi@r={r:.6}"),
            ObserverKind::Ray { ratio } => format!("phi@tstar/r={ratio:.3}"),
        };
        out.push(ObserverSeries {
            kind: o.kind,
            series: TimeSeries::new(o.ts, o.vals, label)?,
        });
    }
    Ok(EvolutionResult {
        observers: out,
        scheme: "double-null",
        grid_desc: format!(
            "u0={} v0={} h={} nu={} nv={}",
            grid.u0, grid.v0, grid.h, grid.nu, grid.nv
        ),
        steps: (nu - 1) as u64,
        point_updates,
        wall_ms: start.elapsed().as_millis(),
        energy: None,
        final_xs: (0..nv).map(v_of).collect(),
        final_psi: row,
    })
}

/// Predicted t^-3 tail constant for Cauchy data (phi1 profile in r*):
/// Schwarzschild: c = -8m Int phi1(x) r(x)^2 dx;
/// flat potential: c = -(vbar0/pi) <phi1, u0*>, paired with weight r^2.
pub fn predicted_constant_cauchy(
    spec: &BackgroundSpec,
    state: &ExtendedState,
    mode: Mode,
    phi1: &Profile,
) -> Result<f64> {
    if mode.l != 0 {
        return Err(Error::Invalid(
            "the tail-constant quadrature requires l = 0".into(),
        ));
    }
    let Some((lo, hi)) = phi1.support() else {
        return Ok(0.0);
    };
    match spec.kind {
        BackgroundKind::Schwarzschild => {
            let m = spec.mass;
            let (q, _) = quad::adaptive(
                |x: f64| {
                    let r = crate::background::inverse_tortoise(x, spec).unwrap_or(2.0 * m);
                    phi1.eval(x) * r * r
                },
                lo,
                hi,
                1e-13,
            )?;
            Ok(-8.0 * m * q)
        }
        BackgroundKind::FlatPotential => {
            let vbar0 = spec.potential.as_ref().map_or(0.0, |p| p.vbar0());
            if vbar0 == 0.0 {
                return Ok(0.0);
            }
            let pairing = state.pair_radial(&|r| phi1.eval(r), lo.max(0.0), hi)?;
            Ok(-vbar0 / std::f64::consts::PI * pairing)
        }
    }
}

/// Predicted t^-3 tail constant for a separable forcing chi(t) f(r):
/// Schwarzschild: c = -8m (Int chi dt) Int f r^2 dr;
/// flat potential: c = -(vbar0/pi) (Int chi dt) <f, u0*>.
pub fn predicted_constant_forcing(
    spec: &BackgroundSpec,
    state: &ExtendedState,
    mode: Mode,
    forcing: &ForcingSpec,
) -> Result<f64> {
    if mode.l != 0 {
        return Err(Error::Invalid(
            "the tail-constant quadrature requires l = 0".into(),
        ));
    }
    let chi_int = forcing.chi_integral()?;
    let Some((lo, hi)) = forcing.fr.support() else {
        return Ok(0.0);
    };
    match spec.kind {
        BackgroundKind::Schwarzschild => {
            let m = spec.mass;
            let (q, _) = quad::adaptive(
                |r: f64| forcing.fr.eval(r) * r * r,
                lo.max(2.0 * m),
                hi,
                1e-13,
            )?;
            Ok(-8.0 * m * chi_int * q)
        }
        BackgroundKind::FlatPotential => {
            let vbar0 = spec.potential.as_ref().map_or(0.0, |p| p.vbar0());
            if vbar0 == 0.0 {
                return Ok(0.0);
            }
            let pairing = state.pair_radial(&|r| forcing.fr.eval(r), lo.max(0.0), hi)?;
            Ok(-vbar0 / std::f64::consts::PI * chi_int * pairing)
        }
    }
}

/// Tail amplitude at a given radius: c * u0(r_obs) (the spatial shape of the
/// leading term on potential backgrounds).
pub fn tail_amplitude_at(c: f64, state: &ExtendedState, r_obs: f64) -> f64 {
    c * state.u0_at(r_obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{solve_extended_state, PotentialSpec};
    use crate::num::quad;
    use crate::tails;

    fn schw() -> BackgroundSpec {
        BackgroundSpec::schwarzschild(1.0).unwrap()
    }

    fn pot(spec: &BackgroundSpec, l: u32) -> EffectivePotential {
        EffectivePotential::new(spec, Mode::new(l), 0.1, 10.0, 16).unwrap()
    }

    #[test]
    fn source_sign_locked_by_static_oracle() {
        // Flat, l = 0, static source: the psi problem -psi'' = S with
        // S = r f must reproduce the Newtonian potential of f.
        let spec = BackgroundSpec::flat_free();
        let forcing = ForcingSpec::new(
            Profile::Bump {
                lo: 0.0,
                hi: 2.0,
                amplitude: 1.0,
            },
            Profile::Bump {
                lo: 4.0,
                hi: 9.0,
                amplitude: 1.3,
            },
        )
        .unwrap();
        let zero_src = reduce_to_mode(
            &spec,
            Mode::new(0),
            &ForcingSpec::new(
                Profile::Bump {
                    lo: 0.0,
                    hi: 2.0,
                    amplitude: 1.0,
                },
                Profile::None,
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(zero_src.eval(1.0, 5.0), 0.0);

        let src = reduce_to_mode(&spec, Mode::new(0), &forcing).unwrap();
        let chi_peak = src.chi_at(1.0);
        assert!(chi_peak > 0.0);
        // two-point solve of -psi'' = S/chi with psi(0) = 0, psi' -> 0:
        // psi(r) = Int min(r, s) S(s) ds
        for r_test in [3.0f64, 6.0, 12.0] {
            let (psi, _) = quad::adaptive(
                |s: f64| r_test.min(s) * src.eval(1.0, s) / chi_peak,
                4.0,
                9.0,
                1e-12,
            )
            .unwrap();
            let (newton, _) = quad::adaptive(
                |s: f64| forcing.fr.eval(s) * s * s / r_test.max(s),
                4.0,
                9.0,
                1e-12,
            )
            .unwrap();
            assert!(
                (psi / r_test - newton).abs() < 1e-10 * newton.abs(),
                "r={r_test}: {} vs {newton}",
                psi / r_test
            );
        }
    }

    #[test]
    fn leapfrog_flat_split_pulse_matches_dalembert() {
        // V = 0, l = 0: psi0 = G, psi_t = 0 splits into G(x-t)/2 + G(x+t)/2.
        let spec = BackgroundSpec::flat_free();
        let pot = EffectivePotential::new(&spec, Mode::new(0), 1e-3, 200.0, 64).unwrap();
        let phi0 = Profile::Gaussian {
            center: 80.0,
            width: 4.0,
            amplitude: 1.0,
        };
        let dx = 0.1;
        let grid = CauchyGrid {
            rstar_min: 0.0,
            rstar_max: 200.0,
            n: 2001,
            cfl: 0.5,
            t_end: 40.0,
            left: LeftBoundary::Center,
            record_energy: false,
        };
        let data = CauchyData {
            phi0: phi0.clone(),
            phi1: Profile::None,
        };
        let out = evolve_leapfrog(&grid, &data, &pot, None, &[]).unwrap();
        let g = |x: f64| x * phi0.eval(x);
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (i, &x) in out.final_xs.iter().enumerate() {
            if x < 20.0 || x > 180.0 {
                continue;
            }
            let exact = 0.5 * (g(x - 40.0) + g(x + 40.0));
            worst = worst.max((out.final_psi[i] - exact).abs());
            scale = scale.max(exact.abs());
        }
        assert!(worst < 40.0 * dx * dx * scale, "err {worst} scale {scale}");
    }

    #[test]
    fn strong_huygens_on_flat_space() {
        // After both split pulses pass the observer, the field is zero to
        // truncation accuracy.
        let spec = BackgroundSpec::flat_free();
        let pot = EffectivePotential::new(&spec, Mode::new(0), 1e-3, 300.0, 64).unwrap();
        let grid = CauchyGrid {
            rstar_min: 0.0,
            rstar_max: 300.0,
            n: 3001,
            cfl: 0.5,
            t_end: 140.0,
            left: LeftBoundary::Center,
            record_energy: false,
        };
        let h = grid.dx();
        let data = CauchyData {
            phi0: Profile::Gaussian {
                center: 20.0,
                width: 2.0,
                amplitude: 1.0,
            },
            phi1: Profile::None,
        };
        let obs = Observer::fixed_radius(50.0, 1);
        let out = evolve_leapfrog(&grid, &data, &pot, None, &[obs]).unwrap();
        let series = &out.observers[0].series;
        let peak = series.v.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        // pulse fully past by t = 20 + 50 + margin; t* = t - 50
        let late: Vec<f64> = series
            .x
            .iter()
            .zip(&series.v)
            .filter(|(&t, _)| t > 40.0)
            .map(|(_, &v)| v.abs())
            .collect();
        let worst = late.iter().cloned().fold(0.0, f64::max);
        assert!(worst < 10.0 * h * h * peak, "residual {worst} vs peak {peak}");
    }

    #[test]
    fn double_null_free_wave_is_exact_transport() {
        let spec = BackgroundSpec::flat_free();
        let pot = EffectivePotential::new(&spec, Mode::new(0), 1.0, 100.0, 16).unwrap();
        let grid = NullGrid {
            u0: 0.0,
            v0: 30.0,
            h: 0.25,
            nu: 41,
            nv: 201,
        };
        let data = NullData {
            on_u0: Profile::Gaussian {
                center: 55.0,
                width: 3.0,
                amplitude: 0.7,
            },
            on_v0: Profile::None,
        };
        let out = evolve_double_null(&grid, &data, &pot, None, &[Observer::radiation_field(1)])
            .unwrap();
        // psi(u, v) = g(v): the radiation series is constant in u
        let series = &out.observers[0].series;
        let expect = data.on_u0.eval(30.0 + 200.0 * 0.25);
        for &v in &series.v {
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
        // and the final row equals the initial data row
        for (&x, &p) in out.final_xs.iter().zip(&out.final_psi) {
            assert!((p - data.on_u0.eval(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn schemes_are_second_order() {
        // Richardson order on observer series from grids refined by 2.
        let spec = schw();
        let potl = pot(&spec, 0);
        let run_lf = |dx: f64, stride: usize| {
            let n = ((160.0 - (-80.0)) / dx) as usize + 1;
            let grid = CauchyGrid {
                rstar_min: -80.0,
                rstar_max: 160.0,
                n,
                cfl: 0.5,
                t_end: 50.0,
                left: LeftBoundary::Sommerfeld,
                record_energy: false,
            };
            let data = CauchyData {
                phi0: Profile::None,
                phi1: Profile::Gaussian {
                    center: 30.0,
                    width: 3.0,
                    amplitude: 1.0,
                },
            };
            // observer at a node common to all grids: r* = 40 - (-80) = 120 = k dx
            let r_obs = crate::background::inverse_tortoise(40.0, &spec).unwrap();
            let obs = Observer::fixed_radius(r_obs, stride);
            evolve_leapfrog(&grid, &data, &potl, None, &[obs]).unwrap()
        };
        let c = run_lf(0.4, 2);
        let m = run_lf(0.2, 4);
        let f = run_lf(0.1, 8);
        let order = tails::richardson_order(
            &c.observers[0].series,
            &m.observers[0].series,
            &f.observers[0].series,
        )
        .unwrap();
        assert!((order - 2.0).abs() < 0.1, "leapfrog order {order}");

        let run_dn = |h: f64, stride: usize| {
            let grid = NullGrid {
                u0: 0.0,
                v0: 10.0,
                h,
                nu: (40.0 / h) as usize + 1,
                nv: (120.0 / h) as usize + 1,
            };
            let data = NullData {
                on_u0: Profile::Gaussian {
                    center: 40.0,
                    width: 3.0,
                    amplitude: 1.0,
                },
                on_v0: Profile::None,
            };
            let r_obs = crate::background::inverse_tortoise(20.0, &spec).unwrap();
            let obs = Observer::fixed_radius(r_obs, stride);
            evolve_double_null(&grid, &data, &potl, None, &[obs]).unwrap()
        };
        let c = run_dn(0.2, 1);
        let m = run_dn(0.1, 2);
        let f = run_dn(0.05, 4);
        let order = tails::richardson_order(
            &c.observers[0].series,
            &m.observers[0].series,
            &f.observers[0].series,
        )
        .unwrap();
        assert!((order - 2.0).abs() < 0.1, "double-null order {order}");
    }

    #[test]
    fn causal_excision_is_exact() {
        let spec = schw();
        let potl = pot(&spec, 0);
        let run = |rmax: f64| {
            let dx = 0.25;
            let n = ((rmax - (-60.0)) / dx) as usize + 1;
            let grid = CauchyGrid {
                rstar_min: -60.0,
                rstar_max: rmax,
                n,
                cfl: 0.5,
                t_end: 60.0,
                left: LeftBoundary::Sommerfeld,
                record_energy: false,
            };
            let data = CauchyData {
                phi0: Profile::None,
                phi1: Profile::Gaussian {
                    center: 20.0,
                    width: 2.0,
                    amplitude: 1.0,
                },
            };
            let r_obs = crate::background::inverse_tortoise(15.0, &spec).unwrap();
            evolve_leapfrog(&grid, &data, &potl, None, &[Observer::fixed_radius(r_obs, 4)])
                .unwrap()
        };
        let a = run(140.0);
        let b = run(190.0);
        let sa = &a.observers[0].series;
        let sb = &b.observers[0].series;
        for i in 0..sa.v.len() {
            assert_eq!(sa.v[i], sb.v[i], "excision influenced observer at i={i}");
        }
    }

    #[test]
    fn cross_scheme_agreement_on_forced_problem() {
        // Same forward problem via both schemes: zero data on rays that
        // precede the source support, identical forcing.
        let spec = schw();
        let potl = pot(&spec, 0);
        let forcing = ForcingSpec::new(
            Profile::Bump {
                lo: 5.0,
                hi: 15.0,
                amplitude: 1.0,
            },
            Profile::Bump {
                lo: 8.0,
                hi: 14.0,
                amplitude: 0.5,
            },
        )
        .unwrap();
        let src = reduce_to_mode(&spec, Mode::new(0), &forcing).unwrap();
        let r_obs = 25.0;
        let x_obs = tortoise(r_obs, &spec).unwrap();

        let run_lf = |dx: f64| {
            let n = ((300.0 - (-60.0)) / dx) as usize + 1;
            let grid = CauchyGrid {
                rstar_min: -60.0,
                rstar_max: 300.0,
                n,
                cfl: 0.5,
                t_end: 210.0,
                left: LeftBoundary::Sommerfeld,
                record_energy: false,
            };
            let data = CauchyData {
                phi0: Profile::None,
                phi1: Profile::None,
            };
            evolve_leapfrog(
                &grid,
                &data,
                &potl,
                Some(&src),
                &[Observer::fixed_radius(r_obs, 1)],
            )
            .unwrap()
        };
        let run_dn = |h: f64| {
            let grid = NullGrid {
                u0: -20.0,
                v0: 5.0,
                h,
                nu: (200.0 / h) as usize + 1,
                nv: (260.0 / h) as usize + 1,
            };
            let data = NullData {
                on_u0: Profile::None,
                on_v0: Profile::None,
            };
            evolve_double_null(
                &grid,
                &data,
                &potl,
                Some(&src),
                &[Observer::fixed_radius(r_obs, 1)],
            )
            .unwrap()
        };
        let lf = run_lf(0.1);
        let lf2 = run_lf(0.05);
        let dn = run_dn(0.1);
        let dn2 = run_dn(0.05);

        // compare phi(t, r_obs) over 50 <= t <= 200 (t* = t - x_obs)
        let sample = |res: &EvolutionResult, t: f64| res.observers[0].series.value_at(t - x_obs);
        let mut worst = 0.0f64;
        let mut est = 0.0f64;
        let mut t = 50.0;
        while t <= 200.0 {
            let a = sample(&lf2, t);
            let b = sample(&dn2, t);
            worst = worst.max((a - b).abs());
            est = est.max((sample(&lf, t) - a).abs() + (sample(&dn, t) - b).abs());
            t += 2.5;
        }
        assert!(
            worst <= 3.0 * est + 1e-12,
            "schemes differ by {worst}, combined truncation {est}"
        );
    }

    #[test]
    fn energy_monotone_after_pulse_exits() {
        let spec = schw();
        let potl = pot(&spec, 0);
        let grid = CauchyGrid {
            rstar_min: -80.0,
            rstar_max: 240.0,
            n: 3201,
            cfl: 0.5,
            t_end: 100.0,
            left: LeftBoundary::Sommerfeld,
            record_energy: true,
        };
        let data = CauchyData {
            phi0: Profile::None,
            phi1: Profile::Gaussian {
                center: 40.0,
                width: 3.0,
                amplitude: 1.0,
            },
        };
        let out = evolve_leapfrog(&grid, &data, &potl, None, &[]).unwrap();
        let e = out.energy.unwrap();
        let e0 = e.v[1];
        for w in e.v.windows(2) {
            assert!(w[1] <= w[0] + 1e-4 * e0, "energy grew: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn cfl_and_guard_violations_are_rejected() {
        let spec = schw();
        let potl = pot(&spec, 0);
        let data = CauchyData {
            phi0: Profile::None,
            phi1: Profile::Gaussian {
                center: 10.0,
                width: 1.0,
                amplitude: 1.0,
            },
        };
        let mut grid = CauchyGrid {
            rstar_min: -40.0,
            rstar_max: 60.0,
            n: 1001,
            cfl: 1.2,
            t_end: 10.0,
            left: LeftBoundary::Sommerfeld,
            record_energy: false,
        };
        assert!(evolve_leapfrog(&grid, &data, &potl, None, &[]).is_err());
        grid.cfl = 0.5;
        // observer too close to the right boundary for this t_end
        grid.t_end = 55.0;
        let r_obs = crate::background::inverse_tortoise(20.0, &spec).unwrap();
        let res = evolve_leapfrog(
            &grid,
            &data,
            &potl,
            None,
            &[Observer::fixed_radius(r_obs, 1)],
        );
        assert!(res.is_err());
    }

    #[test]
    fn predicted_constant_trivial_and_fixture() {
        let spec = schw();
        let state = solve_extended_state(&spec).unwrap();
        let zero = predicted_constant_cauchy(&spec, &state, Mode::new(0), &Profile::None).unwrap();
        assert_eq!(zero, 0.0);

        // Gaussian phi1 in r*: adaptive vs fixed-order Gauss to 1e-8.
        let phi1 = Profile::Gaussian {
            center: 15.0,
            width: 2.0,
            amplitude: 1.0,
        };
        let c = predicted_constant_cauchy(&spec, &state, Mode::new(0), &phi1).unwrap();
        let (lo, hi) = phi1.support().unwrap();
        let (gx, gw) = quad::gauss_legendre_on(220, lo, hi);
        let mut oracle = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            let r = crate::background::inverse_tortoise(*x, &spec).unwrap();
            oracle += phi1.eval(*x) * r * r * w;
        }
        let oracle = -8.0 * oracle;
        assert!(
            (c / oracle - 1.0).abs() < 1e-8,
            "adaptive {c} vs Gauss {oracle}"
        );

        // flat with a short-range potential: no t^-3 channel.
        let flat = BackgroundSpec::flat(PotentialSpec::inverse_quartic(0.7));
        let st = solve_extended_state(&flat).unwrap();
        let c0 = predicted_constant_cauchy(&flat, &st, Mode::new(0), &phi1).unwrap();
        assert_eq!(c0, 0.0);
    }

    #[test]
    fn forcing_constant_matches_closed_form() {
        // chi integral analytic; separable constant: -8 m (Int chi)(Int f r^2).
        let spec = schw();
        let state = solve_extended_state(&spec).unwrap();
        let forcing = ForcingSpec::new(
            Profile::Bump {
                lo: 2.0,
                hi: 6.0,
                amplitude: 2.0,
            },
            Profile::Gaussian {
                center: 12.0,
                width: 1.5,
                amplitude: 0.3,
            },
        )
        .unwrap();
        let c = predicted_constant_forcing(&spec, &state, Mode::new(0), &forcing).unwrap();
        let chi_int = forcing.chi_integral().unwrap();
        let (q, _) = quad::adaptive(
            |r: f64| forcing.fr.eval(r) * r * r,
            2.0,
            26.0,
            1e-13,
        )
        .unwrap();
        assert!((c - (-8.0 * chi_int * q)).abs() < 1e-10 * c.abs());
    }
}
