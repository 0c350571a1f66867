use holeburn::fit::{
    fit_exponential, fit_hole_lorentzian, fit_linear_ci, fit_trap_model, lorentzian_hole,
    TrapFitConfig,
};
use holeburn::integrate::{IntegrationDomain, ScaledSignalParams};
use holeburn::model::TrapModel;
use holeburn::simplex::{minimize, SimplexOptions};
use holeburn::synth::{gen_decay_curve, DecayRequest, NoiseSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn noisy_hole(seed: u64, shift_f: f64, shift_y: f64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let f: Vec<f64> = (0..1001)
        .map(|i| -100e6 + i as f64 * 0.2e6 + shift_f)
        .collect();
    let y = f
        .iter()
        .map(|&x| {
            lorentzian_hole(x - shift_f, 1.0, 0.3, 10e6, 6e6) + noise.sample(&mut rng) + shift_y
        })
        .collect();
    (f, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hole_fit_ignores_baseline_shift(seed in 0u64..1000, shift in -5.0f64..5.0) {
        let (f, y) = noisy_hole(seed, 0.0, 0.0);
        let (_, ys) = noisy_hole(seed, 0.0, shift);
        let a = fit_hole_lorentzian(&f, &y, None).unwrap();
        let b = fit_hole_lorentzian(&f, &ys, None).unwrap();
        prop_assert!((a.fwhm.value / b.fwhm.value - 1.0).abs() < 1e-5);
        prop_assert!((a.center.value - b.center.value).abs() < 1e-5 * a.fwhm.value);
        prop_assert!((b.baseline.value - a.baseline.value - shift).abs() < 1e-6);
    }

    #[test]
    fn hole_fit_follows_translation(seed in 0u64..1000, shift in -50e6f64..50e6) {
        let (f, y) = noisy_hole(seed, 0.0, 0.0);
        let (fs, ys) = noisy_hole(seed, shift, 0.0);
        let a = fit_hole_lorentzian(&f, &y, None).unwrap();
        let b = fit_hole_lorentzian(&fs, &ys, None).unwrap();
        prop_assert!((a.fwhm.value / b.fwhm.value - 1.0).abs() < 1e-5);
        prop_assert!((b.center.value - a.center.value - shift).abs() < 1e-5 * a.fwhm.value);
    }

    #[test]
    fn exponential_fit_scales(lambda in 0.01f64..100.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.02).collect();
        let y: Vec<f64> = t.iter().map(|&x| (-x / 0.072).exp() + 0.2 + noise.sample(&mut rng)).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
        let a = fit_exponential(&t, &y, true).unwrap();
        let b = fit_exponential(&t, &ys, true).unwrap();
        prop_assert!((a.tau.value / b.tau.value - 1.0).abs() < 1e-5);
        prop_assert!((b.amplitude.value / (lambda * a.amplitude.value) - 1.0).abs() < 1e-5);
        let (oa, ob) = (a.offset.unwrap().value, b.offset.unwrap().value);
        prop_assert!((ob - lambda * oa).abs() < 1e-5 * lambda);
    }

    #[test]
    fn minimize_never_worsens(x0 in proptest::collection::vec(-10.0f64..10.0, 1..5), a in 0.1f64..10.0) {
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (a + i as f64) * (v - 1.0).powi(2) + (v * 3.0).sin()).sum::<f64>();
        let start = f(&x0);
        let res = minimize(f, &x0, &SimplexOptions::default());
        prop_assert!(res.value <= start);
    }

    #[test]
    fn linear_fit_recovers_exact_lines(slope in -1e3f64..1e3, intercept in -1e3f64..1e3) {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + intercept).collect();
        let fit = fit_linear_ci(&x, &y, 0.8).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9 * slope.abs().max(1.0));
        prop_assert!((fit.intercept - intercept).abs() < 1e-9 * intercept.abs().max(1.0));
    }
}

#[test]
fn trap_fit_residual_ignores_curve_order() {
    let model = TrapModel::tabulated();
    let domain = IntegrationDomain {
        n_r: 16,
        n_z: 16,
        n_delta: 16,
        ..Default::default()
    };
    let times: Vec<f64> = (0..61).map(|i| i as f64 * 5.0).collect();
    let curves: Vec<_> = [4e-6, 13e-6, 29e-6]
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let req = DecayRequest {
                model: &model,
                domain: &domain,
                gamma_trap: 7e4,
                scale: ScaledSignalParams {
                    scale_a: 0.19,
                    background_b: 9.4e7,
                    power: p,
                },
                times: &times,
                bin_width_s: 5.0,
            };
            gen_decay_curve(&req, &NoiseSpec::poisson(3), i as u64)
                .unwrap()
                .curve
        })
        .collect();
    let cfg = TrapFitConfig {
        domain,
        ..Default::default()
    };
    let fwd = fit_trap_model(&curves, &cfg).unwrap();
    let rev: Vec<_> = curves.iter().rev().cloned().collect();
    let bwd = fit_trap_model(&rev, &cfg).unwrap();
    assert!((fwd.residual / bwd.residual - 1.0).abs() < 1e-6);
    assert!((fwd.gamma_trap.value / bwd.gamma_trap.value - 1.0).abs() < 1e-5);
    for (a, b) in fwd.scale_a.iter().zip(bwd.scale_a.iter().rev()) {
        assert!((a.value / b.value - 1.0).abs() < 1e-5);
    }
}

#[test]
fn fits_reject_degenerate_input() {
    assert!(fit_exponential(&[0.0, 1.0], &[1.0, 0.5], true).is_err());
    assert!(fit_linear_ci(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 0.8).is_err());
    assert!(fit_hole_lorentzian(&[0.0; 10], &[1.0; 10], None).is_err());
    assert!(fit_trap_model(&[], &TrapFitConfig::default()).is_err());
}
