//! Property tests for the force laws, the analysis helpers and the scenario
//! file format.

use proptest::prelude::*;

use casimir_gradiometer::analysis::{
    best_case_resolution, estimate_frequency, fit_inverse_power, nelder_mead, sensitivity, Column,
    SweepResult,
};
use casimir_gradiometer::defaults;
use casimir_gradiometer::dynamics::TimeSeries;
use casimir_gradiometer::physics::{
    casimir_force, casimir_potential, critical_separation, parametric_stiffness,
    softened_frequency, static_equilibrium, total_potential_curve, SphereParams,
};
use casimir_gradiometer::scenario::{emit_plot, parse_config, print, Plot, Series};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn sphere_with(radius: f64, k: f64) -> SphereParams {
    SphereParams::from_frequency(
        2e3 * std::f64::consts::PI,
        radius,
        k,
        1000.0,
        20e-9,
        1.02e-3,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn force_is_attractive_and_cubic(g in 1e-9f64..1e-3, r in 1e-6f64..1e-3) {
        let f = casimir_force(g, r).unwrap();
        prop_assert!(f < 0.0);
        prop_assert!(casimir_force(g * 1.01, r).unwrap().abs() < f.abs());
        prop_assert!(rel(casimir_force(2.0 * g, r).unwrap(), f / 8.0) < 1e-12);
    }

    #[test]
    fn stiffness_is_three_force_over_gap(g in 1e-9f64..1e-3, r in 1e-6f64..1e-3) {
        let kp = parametric_stiffness(g, r).unwrap();
        prop_assert!(rel(kp * g, 3.0 * casimir_force(g, r).unwrap().abs()) < 1e-12);
        prop_assert!(rel(parametric_stiffness(2.0 * g, r).unwrap(), kp / 16.0) < 1e-12);
    }

    /// Central difference over a stencil 1e-3·g wide.
    #[test]
    fn potential_differentiates_to_force(g in 1e-9f64..1e-3, r in 1e-6f64..1e-3) {
        let h = 0.5e-3 * g;
        let du = (casimir_potential(g + h, r).unwrap() - casimir_potential(g - h, r).unwrap()) / (2.0 * h);
        prop_assert!(rel(du, -casimir_force(g, r).unwrap()) < 1e-6);
    }

    #[test]
    fn potential_curve_without_sphere_is_the_spring(
        xs in prop::collection::vec(-50e-9f64..50e-9, 1..50),
        k in 1e-3f64..1.0,
    ) {
        let p = sphere_with(0.0, k);
        let u = total_potential_curve(&xs, 100e-9, &p).unwrap();
        for (x, u) in xs.iter().zip(&u) {
            prop_assert_eq!(*u, 0.5 * k * x * x);
        }
    }

    #[test]
    fn equilibrium_balances_forces(frac in 1.001f64..12.0, r in 10e-6f64..200e-6, k in 5e-3f64..0.1) {
        let p = sphere_with(r, k);
        let crit = critical_separation(&p);
        let s0 = crit.separation * frac;
        let g = static_equilibrium(s0, &p).unwrap();
        let residual = (k * (s0 - g) - casimir_force(g, r).unwrap().abs()).abs();
        prop_assert!(residual < 1e-18, "residual {residual:e} N");
        prop_assert!(g > crit.gap && g <= s0);
        prop_assert!(rel(parametric_stiffness(crit.gap, r).unwrap(), k) < 1e-9);
    }

    #[test]
    fn softening_relaxes_with_gap(f1 in 1.001f64..20.0, df in 1e-4f64..1.0) {
        let p = defaults::sphere();
        let g_crit = critical_separation(&p).gap;
        let (g1, g2) = (g_crit * f1, g_crit * (f1 + df));
        prop_assert!(softened_frequency(g2, &p).unwrap() > softened_frequency(g1, &p).unwrap());
    }

    #[test]
    fn resolution_is_linear_and_inverse(
        s in 0.1f64..100.0,
        ppm in 0.1f64..100.0,
        f_ref in 0.1f64..1e4,
        scale in 0.1f64..10.0,
    ) {
        let r = best_case_resolution(s, ppm, f_ref).unwrap();
        prop_assert!(rel(best_case_resolution(s, scale * ppm, f_ref).unwrap(), scale * r) < 1e-12);
        prop_assert!(rel(best_case_resolution(s, ppm, scale * f_ref).unwrap(), scale * r) < 1e-12);
        prop_assert!(rel(best_case_resolution(scale * s, ppm, f_ref).unwrap(), r / scale) < 1e-12);
    }

    #[test]
    fn sensitivity_is_dimensionally_consistent(
        lambda in 0.1f64..10.0,
        freqs in prop::collection::vec(800.0f64..900.0, 4),
    ) {
        let sweep = |scale: f64| SweepResult {
            swept_name: "rest_separation".into(),
            swept_unit: "m".into(),
            swept_values: (0..4).map(|i| scale * (99e-9 + 0.5e-9 * i as f64)).collect(),
            summary_name: "f0c".into(),
            summary_unit: "Hz".into(),
            summaries: freqs.iter().map(|&f| Some(f)).collect(),
            per_point_events: vec![Vec::new(); 4],
            extra: vec![Column::new(
                "mean_gap",
                "m",
                (0..4).map(|i| Some(scale * (90e-9 + 0.5e-9 * i as f64))).collect(),
            )],
        };
        let base = sensitivity(&sweep(1.0), 25e-3, 0.0625, 0.3).unwrap();
        let scaled = sensitivity(&sweep(lambda), 25e-3 / lambda, 0.0625, 0.3).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert!((a.s_freq - b.s_freq).abs() <= 1e-9 * a.s_freq.abs().max(1e-12));
            prop_assert!(rel(b.equivalent_gradient_step, a.equivalent_gradient_step) < 1e-9);
        }
    }

    #[test]
    fn moment_doubling_doubles_sensitivity(k in 1e-3f64..0.1, m in 1e-3f64..1.0) {
        let sweep = SweepResult {
            swept_name: "rest_separation".into(),
            swept_unit: "m".into(),
            swept_values: vec![99e-9, 100e-9, 101e-9],
            summary_name: "f0c".into(),
            summary_unit: "Hz".into(),
            summaries: vec![Some(840.0), Some(850.0), Some(856.0)],
            per_point_events: vec![Vec::new(); 3],
            extra: Vec::new(),
        };
        let a = sensitivity(&sweep, k, m, 0.0).unwrap();
        let b = sensitivity(&sweep, k, 2.0 * m, 0.0).unwrap();
        for (a, b) in a.iter().zip(&b) {
            prop_assert!(rel(b.s_freq, 2.0 * a.s_freq) < 1e-12);
            prop_assert!(rel(b.equivalent_gradient_step, 0.5 * a.equivalent_gradient_step) < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_crossing_estimate_is_exact_on_sinusoids(f in 100.0f64..3000.0, phase in 0.0f64..std::f64::consts::TAU) {
        let dt = 0.5e-6;
        let n = (0.12 / dt) as usize;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let x = t.iter().map(|&t| (2.0 * std::f64::consts::PI * f * t + phase).sin()).collect();
        let track = estimate_frequency(&TimeSeries::from_samples(t, x), 0.05).unwrap();
        prop_assert!(!track.f0c.is_empty());
        for v in &track.f0c {
            prop_assert!(rel(*v, f) < 1e-5, "{} vs {}", v, f);
        }
    }

    #[test]
    fn simplex_history_never_increases(x0 in -3.0f64..3.0, y0 in -3.0f64..3.0, a in 0.5f64..5.0) {
        let f = |p: &[f64]| (p[0] - 1.0).powi(2) + a * (p[1] + 0.5).powi(2) + 0.1 * (p[0] * p[1]).powi(2);
        let m = nelder_mead(f, &[x0, y0], &[0.3, 0.3], 1e-12, 20_000);
        prop_assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(m.converged);
    }

    #[test]
    fn fit_recovers_exponent(
        c in 1.5f64..5.0,
        b in 0.0f64..0.8,
        a in 0.5f64..2.0,
        d in -1.0f64..1.0,
    ) {
        let x: Vec<f64> = (0..13).map(|i| 1.0 + i as f64 / 12.0).collect();
        let y: Vec<f64> = x.iter().map(|v| a / (v - b).powf(c) + d).collect();
        let fit = fit_inverse_power(&x, &y).unwrap();
        prop_assert!(fit.converged);
        prop_assert!(rel(fit.c, c) < 1e-3, "c = {} vs {}", fit.c, c);
    }

    #[test]
    fn plots_are_deterministic(
        ys in prop::collection::vec(prop::option::of(-1e3f64..1e3), 2..60),
        log_y in any::<bool>(),
    ) {
        let x: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.1).collect();
        let plot = Plot {
            title: "p".into(),
            x_label: "x (s)".into(),
            y_label: "y (m)".into(),
            log_y,
            series: vec![Series::new("s", x, ys)],
        };
        prop_assert_eq!(emit_plot(&plot).unwrap(), emit_plot(&plot).unwrap());
    }

    #[test]
    fn config_print_round_trips(
        tau2 in 0.0f64..1300.0,
        s0 in 95.0f64..150.0,
        a_m in 0.0f64..20.0,
        q in 100.0f64..1e5,
        dur in 0.4f64..3.0,
        grad in 0.0f64..10.0,
        kind in 0usize..4,
    ) {
        let experiment = ["timedomain", "delay_sweep", "gradient_response", "fit"][kind];
        let text = format!(
            "name = prop\nexperiment = {experiment}\ntau2f = {tau2} us\ns0 = {s0} nm\n\
             amplitude_m = {a_m} nm\nquality_s = {q}\nduration = {dur} s\n\
             gradient = sine\ngradient_amplitude = {grad} pT/cm\ngradient_frequency = 1 Hz\n"
        );
        let spec = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&print(&spec)).unwrap(), spec);
    }
}
