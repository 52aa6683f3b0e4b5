//! Greedy-method performance problems solved end to end against the
//! closed-form certificate values.

use ssep::certificates::{nonsmooth_certificate, smooth_certificate, theta_sequence};
use ssep::classes::ClassSpec;
use ssep::pep::build_gfom_pep;
use ssep::sdp::{extract_certificate, solve, verify_certificate, SolveStatus, SolverOptions};

fn default_opts() -> SolverOptions<f64> {
    SolverOptions::default()
}

#[test]
fn smooth_n1_value() {
    let problem = build_gfom_pep(&ClassSpec::smooth(0.0, 1.0), 1, 1.0).unwrap();
    let sol = solve(&problem, &default_opts());
    assert_eq!(sol.status, SolveStatus::Optimal, "{sol:?}");
    assert!(
        (sol.primal_objective - 0.125).abs() < 1e-6,
        "value {}",
        sol.primal_objective
    );
}

#[test]
fn nonsmooth_n3_value() {
    let problem = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 3, 1.0).unwrap();
    let sol = solve(&problem, &default_opts());
    assert_eq!(sol.status, SolveStatus::Optimal, "{sol:?}");
    assert!(
        (sol.primal_objective - 0.5).abs() < 1e-6,
        "value {}",
        sol.primal_objective
    );
}

#[test]
fn zero_radius_forces_zero_gap() {
    let problem = build_gfom_pep(&ClassSpec::smooth(0.0, 1.0), 0, 0.0).unwrap();
    let sol = solve(&problem, &default_opts());
    assert!(
        sol.primal_objective.abs() < 1e-6,
        "value {} status {:?}",
        sol.primal_objective,
        sol.status
    );
}

#[test]
fn analytic_certificates_verify() {
    for n in [1usize, 3, 5] {
        let problem = build_gfom_pep(&ClassSpec::nonsmooth(1.0), n, 1.0).unwrap();
        let cert = nonsmooth_certificate(1.0, 1.0, n).unwrap();
        let report = verify_certificate(&problem, &cert, 1e-10).unwrap();
        assert!(report.feasible(1e-10), "n = {n}: {report:?}");
        assert!((report.omega - 1.0 / ((n + 1) as f64).sqrt()).abs() < 1e-14);

        let problem = build_gfom_pep(&ClassSpec::smooth(0.0, 1.0), n, 1.0).unwrap();
        let cert = smooth_certificate(1.0, 1.0, n).unwrap();
        let report = verify_certificate(&problem, &cert, 1e-10).unwrap();
        assert!(report.feasible(1e-10), "n = {n}: {report:?}");
        let theta = theta_sequence::<f64>(n).unwrap();
        assert!((report.omega - 1.0 / (2.0 * theta.last().powi(2))).abs() < 1e-14);
    }
}

#[test]
fn extracted_certificate_matches_analytic_smooth_n1() {
    let problem = build_gfom_pep(&ClassSpec::smooth(0.0, 1.0), 1, 1.0).unwrap();
    let sol = solve(&problem, &default_opts());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let cert = extract_certificate(&problem, &sol).unwrap();
    let reference = smooth_certificate(1.0, 1.0, 1).unwrap();
    assert!((cert.omega - 0.125).abs() < 1e-5, "omega {}", cert.omega);
    assert!((cert.tau_x - reference.tau_x).abs() < 1e-5);
    for (key, value) in &reference.alpha {
        assert!(
            (cert.alpha(*key) - value).abs() < 1e-5,
            "{key}: {} vs {}",
            cert.alpha(*key),
            value
        );
    }
    for (key, value) in &reference.beta {
        assert!((cert.beta_at(key.0, key.1) - value).abs() < 1e-5);
    }
    for (key, value) in &reference.gamma {
        assert!((cert.gamma_at(key.0, key.1) - value).abs() < 1e-5);
    }
}

#[test]
fn extracted_tau_nonsmooth_n1() {
    let problem = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 1, 1.0).unwrap();
    let sol = solve(&problem, &default_opts());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let cert = extract_certificate(&problem, &sol).unwrap();
    let expected = 1.0 / (2.0 * 2.0_f64.sqrt());
    assert!((cert.tau_x - expected).abs() < 1e-5, "tau {}", cert.tau_x);
}

#[test]
fn extract_rejects_non_optimal_solutions() {
    let problem = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 1, 1.0).unwrap();
    let mut sol = solve(&problem, &default_opts());
    sol.status = SolveStatus::MaxIterations;
    assert!(matches!(
        extract_certificate(&problem, &sol),
        Err(ssep::sdp::SdpError::NotOptimal(_))
    ));
}

#[test]
fn verify_rejects_mismatched_sizes() {
    let problem = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 2, 1.0).unwrap();
    let cert = nonsmooth_certificate(1.0, 1.0, 3).unwrap();
    assert!(matches!(
        verify_certificate(&problem, &cert, 1e-9),
        Err(ssep::sdp::SdpError::Mismatch(_))
    ));
}

#[test]
fn extract_rejects_fixed_step_problems() {
    use ssep::pep::build_fixed_step_pep;
    use ssep::synthesis::CanonicalForm;
    let h = CanonicalForm::new(vec![vec![1.0]]).unwrap();
    let problem = build_fixed_step_pep(&ClassSpec::smooth(0.0, 1.0), 1, 1.0, &h).unwrap();
    let sol = solve(&problem, &default_opts());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(matches!(
        extract_certificate(&problem, &sol),
        Err(ssep::sdp::SdpError::WrongKind { .. })
    ));
}

// The numerical core is scalar-generic; single precision works end to end
// with correspondingly relaxed tolerances.
#[test]
fn single_precision_instantiation() {
    let theta = ssep::certificates::theta_sequence::<f32>(5).unwrap();
    assert!((theta.theta(1) - 1.618_034_f32).abs() < 1e-5);

    let problem = build_gfom_pep(&ClassSpec::<f32>::smooth(0.0, 1.0), 1, 1.0).unwrap();
    let opts = SolverOptions {
        gap_tol: 1e-4_f32,
        feas_tol: 1e-4,
        ..SolverOptions::default()
    };
    let sol = solve(&problem, &opts);
    assert_eq!(sol.status, SolveStatus::Optimal, "{sol:?}");
    assert!((sol.primal_objective - 0.125).abs() < 1e-3);

    let cert = ssep::certificates::smooth_certificate(1.0_f32, 1.0, 3).unwrap();
    let problem = build_gfom_pep(&ClassSpec::smooth(0.0_f32, 1.0), 3, 1.0).unwrap();
    let report = verify_certificate(&problem, &cert, 1e-5_f32).unwrap();
    assert!(report.feasible(1e-5));
}
