//! Adaptive Dormand-Prince 5(4) integration for small fixed-size systems.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            max_steps: 2_000_000,
        }
    }
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

/// One adaptive DP5(4) solve from `x0` to `x1` (either direction).
pub fn integrate<const N: usize>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    x1: f64,
    y0: [f64; N],
    opt: &OdeOptions,
) -> Result<[f64; N]> {
    if x0 == x1 {
        return Ok(y0);
    }
    let dir = (x1 - x0).signum();
    let mut x = x0;
    let mut y = y0;
    let mut h = dir * (0.05 * (x1 - x0).abs()).clamp(1e-8, 1.0);
    let mut k1 = rhs(x, &y);
    for _ in 0..opt.max_steps {
        if dir * (x + h - x1) > 0.0 {
            h = x1 - x;
        }
        let k2 = rhs(x + 0.2 * h, &axpy(&y, &[(0.2 * h, &k1)]));
        let k3 = rhs(
            x + 0.3 * h,
            &axpy(&y, &[(3.0 / 40.0 * h, &k1), (9.0 / 40.0 * h, &k2)]),
        );
        let k4 = rhs(
            x + 0.8 * h,
            &axpy(
                &y,
                &[
                    (44.0 / 45.0 * h, &k1),
                    (-56.0 / 15.0 * h, &k2),
                    (32.0 / 9.0 * h, &k3),
                ],
            ),
        );
        let k5 = rhs(
            x + 8.0 / 9.0 * h,
            &axpy(
                &y,
                &[
                    (19372.0 / 6561.0 * h, &k1),
                    (-25360.0 / 2187.0 * h, &k2),
                    (64448.0 / 6561.0 * h, &k3),
                    (-212.0 / 729.0 * h, &k4),
                ],
            ),
        );
        let k6 = rhs(
            x + h,
            &axpy(
                &y,
                &[
                    (9017.0 / 3168.0 * h, &k1),
                    (-355.0 / 33.0 * h, &k2),
                    (46732.0 / 5247.0 * h, &k3),
                    (49.0 / 176.0 * h, &k4),
                    (-5103.0 / 18656.0 * h, &k5),
                ],
            ),
        );
        let y5 = axpy(
            &y,
            &[
                (35.0 / 384.0 * h, &k1),
                (500.0 / 1113.0 * h, &k3),
                (125.0 / 192.0 * h, &k4),
                (-2187.0 / 6784.0 * h, &k5),
                (11.0 / 84.0 * h, &k6),
            ],
        );
        let k7 = rhs(x + h, &y5);
        let y4 = axpy(
            &y,
            &[
                (5179.0 / 57600.0 * h, &k1),
                (7571.0 / 16695.0 * h, &k3),
                (393.0 / 640.0 * h, &k4),
                (-92097.0 / 339200.0 * h, &k5),
                (187.0 / 2100.0 * h, &k6),
                (1.0 / 40.0 * h, &k7),
            ],
        );
        let mut err: f64 = 0.0;
        for i in 0..N {
            let scale = opt.atol + opt.rtol * y5[i].abs().max(y[i].abs());
            err = err.max(((y5[i] - y4[i]) / scale).abs());
        }
        if err <= 1.0 {
            x += h;
            y = y5;
            k1 = k7; // FSAL
            if (x - x1).abs() <= f64::EPSILON * x1.abs().max(1.0) || dir * (x - x1) >= 0.0 {
                return Ok(y);
            }
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h.abs() < 1e-15 * x.abs().max(1.0) {
            return Err(Error::Convergence(
                "ODE step size underflow".into(),
            ));
        }
    }
    Err(Error::Convergence("ODE integration exceeded max steps".into()))
}

/// Integrate from `x0` through a monotone sequence of stops, returning the
/// state at every stop. Stops must proceed in a single direction from `x0`.
pub fn integrate_with_stops<const N: usize>(
    rhs: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    stops: &[f64],
    y0: [f64; N],
    opt: &OdeOptions,
) -> Result<Vec<[f64; N]>> {
    let mut out = Vec::with_capacity(stops.len());
    let mut x = x0;
    let mut y = y0;
    for &s in stops {
        y = integrate(rhs, x, s, y, opt)?;
        x = s;
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = integrate(
            &mut |_, y: &[f64; 1]| [-y[0]],
            0.0,
            3.0,
            [1.0],
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_both_directions() {
        let opt = OdeOptions::default();
        let y = integrate(&mut |_, y: &[f64; 2]| [y[1], -y[0]], 0.0, 10.0, [1.0, 0.0], &opt)
            .unwrap();
        assert!((y[0] - 10.0f64.cos()).abs() < 1e-9);
        let y = integrate(&mut |_, y: &[f64; 2]| [y[1], -y[0]], 10.0, 0.0, y, &opt).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!(y[1].abs() < 1e-9);
    }

    #[test]
    fn stops_record_intermediate_states() {
        let states = integrate_with_stops(
            &mut |_, y: &[f64; 1]| [y[0]],
            0.0,
            &[0.5, 1.0, 2.0],
            [1.0],
            &OdeOptions::default(),
        )
        .unwrap();
        for (s, t) in states.iter().zip([0.5f64, 1.0, 2.0]) {
            assert!((s[0] - t.exp()).abs() < 1e-10 * t.exp());
        }
    }
}
