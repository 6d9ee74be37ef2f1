use approx::assert_relative_eq;
use proptest::prelude::*;

use peer_review_core::calibration::DensityMode;
use peer_review_core::reform::{restoration_scan_at_effort, solve_reform};
use peer_review_core::reviewer::{gamma1, post_transition_effort, TRANSITION_OFFSET};
use peer_review_core::sweep::{run_sweep, SweepOutput, SweepParameter, SweepSpec};
use peer_review_core::{
    editor_welfare, equilibrium_polish, premise_report, Calibration, ModelError, Policy,
};

#[test]
fn equal_noise_is_refused_before_any_solver_runs() {
    let mut cal = Calibration::baseline();
    cal.sigma_shirk = cal.sigma_effort;
    let err = cal.validate().unwrap_err();
    assert!(err.is_assumption_violation());
    assert!(err.to_string().contains("Assumption 3"));
}

#[test]
fn config_file_round_trip_drives_the_same_solution() {
    let cal = Calibration::baseline();
    let back = Calibration::from_json(&cal.to_json_pretty()).unwrap().validate().unwrap();
    let a = solve_reform(&cal, 0.4).unwrap();
    let b = solve_reform(&back, 0.4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn minimal_config_fills_functional_form_defaults() {
    let text = r#"{"V": 1.0, "beta": 0.5, "kappa": 0.3, "psi_alpha": 0.25, "R": -0.08,
        "ell": 0.05, "sigma_e": 0.3, "sigma_s": 0.4, "epsilon": 0.02, "N": 2, "K0": 0.3}"#;
    let cal = Calibration::from_json(text).unwrap().validate().unwrap();
    assert_eq!(cal, Calibration::baseline());
}

#[test]
fn rejects_misspelled_keys() {
    let text = Calibration::baseline().to_json_pretty().replace("\"kappa\"", "\"kapa\"");
    assert!(matches!(Calibration::from_json(&text), Err(ModelError::Config(_))));
}

#[test]
fn exact_mode_preserves_the_sign_reversal() {
    let cal = Calibration::baseline().with_density_mode(DensityMode::ExactConvolution);
    let pre = solve_reform(&cal, 0.2).unwrap();
    let post = solve_reform(&cal, 0.4).unwrap();
    assert!(pre.accept_rate < cal.base_accept_rate && pre.p_det == 0.0);
    assert!(post.accept_rate > cal.base_accept_rate && post.p_det > 0.0);
}

#[test]
fn rat_race_premise_depends_on_the_density_path() {
    // The uniform convolution is flatter at the 70% quantile than its
    // Gaussian stand-in, so full-effort polish is less sensitive to K.
    let gauss = premise_report(&Calibration::baseline()).unwrap();
    assert!(gauss.all_hold());
    let cal = Calibration::baseline().with_density_mode(DensityMode::ExactConvolution);
    let exact = premise_report(&cal).unwrap();
    assert!(!exact.p1.holds && exact.psi_1 > 0.0, "{exact:?}");
    assert!(exact.p2.holds && exact.p3.holds && exact.p4.holds);
}

#[test]
fn detection_raises_polish_after_the_transition() {
    let cal = Calibration::baseline();
    let m1 = post_transition_effort(&cal);
    let a0 = equilibrium_polish(&cal, m1, &Policy::new(2, 0.3, 0.0).unwrap()).unwrap();
    let a1 = equilibrium_polish(&cal, m1, &Policy::new(2, 0.3, 0.5).unwrap()).unwrap();
    assert!(a1.polish > a0.polish);
    assert!(a1.welfare < a0.welfare);
}

#[test]
fn editor_outcome_reports_decentralized_panel() {
    let cal = Calibration::baseline();
    let out = editor_welfare(&cal, 1.0, &Policy::new(2, 0.3, 0.0).unwrap()).unwrap();
    assert_eq!(out.n_star, 2);
    assert_relative_eq!(out.welfare, out.quality - 0.04, epsilon = 1e-15);
}

#[test]
fn reform_gain_falls_with_shirking_noise() {
    let cal = Calibration::baseline();
    let spec = SweepSpec {
        parameter: SweepParameter::SigmaS,
        values: vec![0.33, 0.45, 0.60, 0.75],
        gamma_grid: vec![0.4],
        outputs: vec![SweepOutput::EditorGain],
    };
    let t = run_sweep(&cal, &spec).unwrap();
    let gains: Vec<f64> = t.rows.iter().map(|r| r.u_e_gain.unwrap()).collect();
    assert!(gains.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{gains:?}");
}

#[test]
fn restoration_gap_is_negative_without_an_effort_drop() {
    let cal = Calibration::baseline();
    let r = restoration_scan_at_effort(&cal, 1.0, 20).unwrap();
    assert!(r.gap < 0.0);
    assert!(r.accept_rate < cal.base_accept_rate);
}

#[test]
fn early_transitions_detect_at_least_as_hard() {
    let base = Calibration::baseline();
    let p: Vec<f64> = [-0.04, -0.08, -0.15, -0.22]
        .iter()
        .map(|&r| {
            let mut cal = base.clone();
            cal.review_baseline = r;
            solve_reform(&cal, 0.9).unwrap().p_det
        })
        .collect();
    assert!(p.windows(2).all(|w| w[0] >= w[1]), "{p:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reform_is_feasible_and_no_worse_than_status_quo(gamma in 0.0f64..0.98) {
        let cal = Calibration::baseline();
        let s = solve_reform(&cal, gamma).unwrap();
        prop_assert!(s.author_welfare >= s.reservation - 1e-9);
        prop_assert!(s.editor_welfare >= s.decentralized_welfare - 1e-12);
        prop_assert!(s.lambda >= 0.0);
        if s.binding {
            prop_assert!((s.author_welfare - s.reservation).abs() <= 1e-8);
        }
    }

    #[test]
    fn just_after_transition_detection_is_interior(r in -0.2f64..-0.02) {
        let mut cal = Calibration::baseline();
        cal.review_baseline = r;
        let g = gamma1(&cal, 0.0) + TRANSITION_OFFSET;
        let s = solve_reform(&cal, g).unwrap();
        prop_assert!(s.p_det > 0.0 && s.p_det < cal.solver.p_max);
    }
}
