use holeburn::integrate::{
    detected_signal, max_relative_change, refine_until_converged, GaussianFocus, IntegrationDomain,
    RateSpectrum,
};
use holeburn::model::TrapModel;
use holeburn::Error;
use proptest::prelude::*;

fn coarse() -> IntegrationDomain {
    IntegrationDomain {
        n_r: 12,
        n_z: 12,
        n_delta: 16,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn signal_is_linear_in_density(f in 0.1f64..10.0, power in 2e-6f64..50e-6) {
        let m = TrapModel::tabulated();
        let mut scaled = m;
        scaled.material.ion_density *= f;
        let prof = GaussianFocus::new(&m, power).unwrap();
        let times = [0.0, 1.0, 30.0];
        let a = detected_signal(&times, &m, &prof, 7e4, &coarse()).unwrap().model_signal;
        let b = detected_signal(&times, &scaled, &prof, 7e4, &coarse()).unwrap().model_signal;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y / x / f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn signal_strictly_decreases(power in 2e-6f64..50e-6, gamma in 1e3f64..1e6) {
        let m = TrapModel::tabulated();
        let prof = GaussianFocus::new(&m, power).unwrap();
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 10.0).collect();
        let s = detected_signal(&times, &m, &prof, gamma, &coarse()).unwrap().model_signal;
        prop_assert!(s[0] > 0.0);
        for w in s.windows(2) {
            prop_assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn spectrum_matches_direct_sum(power in 2e-6f64..50e-6) {
        let m = TrapModel::tabulated();
        let prof = GaussianFocus::new(&m, power).unwrap();
        let times = [0.0, 2.0, 50.0, 300.0];
        let direct = detected_signal(&times, &m, &prof, 7e4, &coarse()).unwrap().model_signal;
        let spec = RateSpectrum::build(&m, &prof, &coarse()).unwrap();
        prop_assert!(max_relative_change(&direct, &spec.signal(7e4, &times)) < 1e-12);
        let small = spec.compressed(4096);
        prop_assert!(small.len() <= 4097);
        prop_assert!(max_relative_change(&direct, &small.signal(7e4, &times)) < 1e-5);
    }
}

#[test]
fn zero_trap_rate_is_constant() {
    let m = TrapModel::tabulated();
    let prof = GaussianFocus::new(&m, 20e-6).unwrap();
    let s = detected_signal(&[0.0, 10.0, 1000.0], &m, &prof, 0.0, &coarse())
        .unwrap()
        .model_signal;
    assert_eq!(s[0], s[1]);
    assert_eq!(s[0], s[2]);
}

#[test]
fn empty_time_grid_gives_empty_table() {
    let m = TrapModel::tabulated();
    let prof = GaussianFocus::new(&m, 20e-6).unwrap();
    let s = detected_signal(&[], &m, &prof, 7e4, &coarse()).unwrap();
    assert!(s.model_signal.is_empty());
}

#[test]
fn refinement_reports_failure_honestly() {
    let m = TrapModel::tabulated();
    let prof = GaussianFocus::new(&m, 20e-6).unwrap();
    let times = [0.0, 100.0];
    match refine_until_converged(&times, &m, &prof, 7e4, &coarse(), 1e-12, 1) {
        Err(Error::NotConverged {
            achieved,
            refinements,
            ..
        }) => {
            assert!(achieved > 1e-12);
            assert_eq!(refinements, 1);
        }
        other => panic!("expected NotConverged, got {other:?}"),
    }
    let ok = refine_until_converged(&times, &m, &prof, 7e4, &coarse(), 0.05, 3).unwrap();
    assert_eq!(ok.meta.converged, Some(true));
    assert!(ok.meta.achieved_tolerance.unwrap() < 0.05);
}

#[test]
fn rejects_bad_inputs() {
    let m = TrapModel::tabulated();
    let prof = GaussianFocus::new(&m, 20e-6).unwrap();
    assert!(detected_signal(&[1.0, 0.5], &m, &prof, 7e4, &coarse()).is_err());
    assert!(detected_signal(&[-1.0], &m, &prof, 7e4, &coarse()).is_err());
    assert!(detected_signal(&[0.0], &m, &prof, -1.0, &coarse()).is_err());
    let tiny = IntegrationDomain { n_r: 2, ..coarse() };
    assert!(detected_signal(&[0.0], &m, &prof, 7e4, &tiny).is_err());
}
