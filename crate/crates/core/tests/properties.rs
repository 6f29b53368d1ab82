//! Property tests for the coordinate maps, series post-processing, and the
//! conormal sigma fit.

use pricelab_core::background::{inverse_tortoise, tortoise, BackgroundSpec};
use pricelab_core::spectral::{fit_sigma_series, ResolventSample, SigmaGrid};
use pricelab_core::tails::{local_power_index, tail_fit, TimeSeries};
use proptest::prelude::*;

fn series(f: impl Fn(f64) -> f64, x0: f64, x1: f64, n: usize) -> TimeSeries {
    let xs: Vec<f64> = (0..n)
        .map(|i| x0 + (x1 - x0) * i as f64 / (n - 1) as f64)
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    TimeSeries::new(xs, vs, "prop").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn tortoise_roundtrip(y in 1e-5f64..1e5) {
        let spec = BackgroundSpec::schwarzschild(1.0).unwrap();
        let r = 2.0 + y;
        let x = tortoise(r, &spec).unwrap();
        let rb = inverse_tortoise(x, &spec).unwrap();
        let back = tortoise(rb, &spec).unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        prop_assert!(rb > 2.0);
    }

    #[test]
    fn tortoise_monotone(y1 in 1e-5f64..1e5, y2 in 1e-5f64..1e5) {
        prop_assume!((y1 - y2).abs() > 1e-9 * y1.max(y2));
        let spec = BackgroundSpec::schwarzschild(1.0).unwrap();
        let (x1, x2) = (
            tortoise(2.0 + y1, &spec).unwrap(),
            tortoise(2.0 + y2, &spec).unwrap(),
        );
        prop_assert_eq!(x1 < x2, y1 < y2);
    }

    #[test]
    fn lpi_exact_and_scale_invariant(p in 0.5f64..8.0, lam in 1e-6f64..1e6) {
        let s1 = series(|x| x.powf(-p), 100.0, 1500.0, 600);
        let s2 = series(|x| lam * x.powf(-p), 100.0, 1500.0, 600);
        let p1 = local_power_index(&s1).unwrap();
        let p2 = local_power_index(&s2).unwrap();
        for i in 1..p1.v.len() - 1 {
            prop_assert!((p1.v[i] - p).abs() < 1e-8);
            prop_assert!((p1.v[i] - p2.v[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn tail_coefficient_scale_equivariant(lam in 0.01f64..100.0, c in 0.5f64..5.0) {
        let s1 = series(|x| c * x.powf(-3.0) + 2.0 * x.powf(-4.0), 300.0, 4000.0, 1200);
        let s2 = series(|x| lam * (c * x.powf(-3.0) + 2.0 * x.powf(-4.0)), 300.0, 4000.0, 1200);
        let c1 = tail_fit(&s1, Some(3.0), None).unwrap().coefficient.unwrap();
        let c2 = tail_fit(&s2, Some(3.0), None).unwrap().coefficient.unwrap();
        prop_assert!((c2 / c1 - lam).abs() < 1e-8 * lam);
    }

    #[test]
    fn sigma_fit_exact_on_own_span(
        a0 in 0.2f64..3.0, a1 in 0.2f64..3.0, a2 in 0.2f64..3.0,
        b in 0.2f64..3.0, a3 in 0.2f64..3.0, b3 in 0.2f64..3.0,
        s0 in 0..6u32,
    ) {
        // random signs via the selector bits
        let sgn = |k: u32| if (s0 >> k) & 1 == 1 { -1.0 } else { 1.0 };
        let (a0, a1, a2, b, a3, b3) = (
            sgn(0) * a0, sgn(1) * a1, sgn(2) * a2, sgn(3) * b, sgn(4) * a3, sgn(5) * b3,
        );
        let grid = SigmaGrid::log_spaced(1e-3, 1e-1, 16, 30.0).unwrap();
        let samples: Vec<ResolventSample> = grid.values.iter().map(|&s| {
            let u = a0 + a1 * s + a2 * s * s + b * s * s * s.ln()
                + a3 * s * s * s + b3 * s * s * s * s.ln();
            ResolventSample {
                sigma: s,
                u_obs: num_complex::Complex64::new(u, 0.0),
                wronskian: num_complex::Complex64::new(1.0, 0.0),
                bc_order: 6,
                residual: 0.0,
            }
        }).collect();
        let fit = fit_sigma_series(&samples).unwrap();
        prop_assert!(fit.residual < 1e-10, "residual {}", fit.residual);
        prop_assert!((fit.b.re / b - 1.0).abs() < 1e-8);
        prop_assert!((fit.a0.re / a0 - 1.0).abs() < 1e-8);
        prop_assert!((fit.a2.re / a2 - 1.0).abs() < 1e-6);
    }
}
