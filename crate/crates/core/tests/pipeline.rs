//! Cross-module pipelines: fixed-step problems against brute-force
//! worst-case search, aggregated problems against their certificates,
//! worst-case reconstruction, and solver-level invariants.

use nalgebra::DVector;
use ssep::certificates::{nonsmooth_certificate, smooth_certificate};
use ssep::classes::{check_interpolable, ClassSpec, ConstraintTag, PointIndex};
use ssep::pep::{
    build_fixed_step_pep, build_gfom_pep, build_ssep_pep, reconstruct_worst_case, SdpProblem,
};
use ssep::sdp::{solve, verify_certificate, SdpSolution, SolveStatus, SolverOptions};
use ssep::synthesis::{synthesize_steps, to_canonical, CanonicalForm, StepCoefficients};

fn opts() -> SolverOptions<f64> {
    SolverOptions::default()
}

/// Worst value of `f(x_1) - f_*` over the Huber family for the single-step
/// method `x_1 = x_0 - h f'(x_0)`, starting at distance 1 from the minimum.
///
/// Every Huber function with kink at `delta` is 1-smooth convex, so this
/// scans a one-parameter slice of admissible worst cases; the true
/// performance value is its supremum (attained inside the family for these
/// steps).
fn huber_single_step_worst(h: f64) -> f64 {
    let huber = |delta: f64, x: f64| -> f64 {
        let a = x.abs();
        if a <= delta {
            0.5 * x * x
        } else {
            delta * (a - 0.5 * delta)
        }
    };
    let huber_grad = |delta: f64, x: f64| -> f64 {
        if x.abs() <= delta {
            x
        } else {
            delta * x.signum()
        }
    };
    let mut worst: f64 = 0.0;
    let steps = 2_000_000;
    for k in 1..=steps {
        let delta = k as f64 / steps as f64;
        let x0 = 1.0;
        let x1 = x0 - h * huber_grad(delta, x0);
        worst = worst.max(huber(delta, x1));
    }
    worst
}

#[test]
fn fixed_step_pep_matches_huber_search() {
    // Plain gradient step, the optimized first step, and the frozen step:
    // hand-searchable worst cases 1/6, 1/8, 1/2.
    let cases = [(1.0, 1.0 / 6.0), (1.5, 0.125), (0.0, 0.5)];
    for (h, expected) in cases {
        let oracle = huber_single_step_worst(h);
        assert!(
            (oracle - expected).abs() < 1e-6,
            "oracle {oracle} vs frozen {expected} for h = {h}"
        );
        let steps = CanonicalForm::new(vec![vec![h]]).unwrap();
        let problem = build_fixed_step_pep(&ClassSpec::smooth(0.0, 1.0), 1, 1.0, &steps).unwrap();
        let sol = solve(&problem, &opts());
        assert_eq!(sol.status, SolveStatus::Optimal, "h = {h}");
        assert!(
            (sol.primal_objective - expected).abs() < 1e-6,
            "h = {h}: value {} vs {expected}",
            sol.primal_objective
        );
    }
}

#[test]
fn aggregated_pep_bounded_by_certificate() {
    // Constraint aggregation with a feasible certificate's weights cannot
    // push the worst case above the certified bound, for either class.
    let n = 3;
    let cases: [(ClassSpec<f64>, ssep::DualCertificate64); 2] = [
        (
            ClassSpec::nonsmooth(1.0),
            nonsmooth_certificate(1.0, 1.0, n).unwrap(),
        ),
        (
            ClassSpec::smooth(0.0, 1.0),
            smooth_certificate(1.0, 1.0, n).unwrap(),
        ),
    ];
    for (class, cert) in cases {
        let steps = synthesize_steps(&cert).unwrap();
        let problem = build_ssep_pep(&class, n, 1.0, &steps).unwrap();
        let sol = solve(&problem, &opts());
        assert_eq!(sol.status, SolveStatus::Optimal, "{class:?}");
        assert!(
            sol.primal_objective <= cert.omega + 1e-6,
            "{class:?}: aggregated value {} exceeds certified bound {}",
            sol.primal_objective,
            cert.omega
        );
    }
}

#[test]
fn diagonal_only_aggregation_relaxes_gfom() {
    // beta = 0, gamma_{i,i} = 1 keeps only <g_i, x_i - x_0> = 0: a strict
    // subset of the greedy method's constraints, so the value can only grow.
    let n = 3;
    let class = ClassSpec::nonsmooth(1.0);
    let gamma = (1..=n).map(|i| ((i, i), 1.0)).collect();
    let steps = StepCoefficients::new(n, Default::default(), gamma).unwrap();
    let relaxed = solve(&build_ssep_pep(&class, n, 1.0, &steps).unwrap(), &opts());
    let greedy = solve(&build_gfom_pep(&class, n, 1.0).unwrap(), &opts());
    assert_eq!(relaxed.status, SolveStatus::Optimal);
    assert_eq!(greedy.status, SolveStatus::Optimal);
    assert!(relaxed.primal_objective >= greedy.primal_objective - 1e-7);
}

#[test]
fn reconstruction_smooth_n0() {
    let class = ClassSpec::smooth(0.0, 1.0);
    let problem = build_gfom_pep(&class, 0, 1.0).unwrap();
    let sol = solve(&problem, &opts());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.primal_objective - 0.5).abs() < 1e-6);
    let set = reconstruct_worst_case(&problem, &sol).unwrap();
    let report = check_interpolable(&class, &set, 1e-7);
    assert!(report.interpolable, "{:?}", report.violations);
    let gap = set.iterate(0).f - set.star().unwrap().f;
    assert!((gap - sol.primal_objective).abs() < 1e-6);
    let dist = (&set.iterate(0).x - &set.star().unwrap().x).norm();
    assert!((dist - 1.0).abs() < 1e-5, "distance {dist}");
}

#[test]
fn reconstruction_zero_gram_collapses() {
    let class = ClassSpec::smooth(0.0, 1.0);
    let problem = build_gfom_pep(&class, 0, 1.0).unwrap();
    let sol = SdpSolution {
        gram: nalgebra::DMatrix::zeros(2, 2),
        values: DVector::zeros(2),
        dual: Default::default(),
        primal_objective: 0.0,
        dual_objective: 0.0,
        status: SolveStatus::Optimal,
        iterations: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        relative_gap: 0.0,
        feas_tol: 1e-9,
    };
    let set = reconstruct_worst_case(&problem, &sol).unwrap();
    assert_eq!(set.iterate(0).x, set.star().unwrap().x);
    assert_eq!(set.iterate(0).f, set.star().unwrap().f);
}

#[test]
fn reconstruction_nonsmooth_orthogonality() {
    let class = ClassSpec::nonsmooth(1.0);
    let problem = build_gfom_pep(&class, 3, 1.0).unwrap();
    let sol = solve(&problem, &opts());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let set = reconstruct_worst_case(&problem, &sol).unwrap();
    for i in 1..=3usize {
        for j in 0..i {
            let ip = set.iterate(i).g.dot(&set.iterate(j).g).abs();
            assert!(ip < 1e-7, "<g_{i}, g_{j}> = {ip}");
        }
    }
    let report = check_interpolable(&class, &set, 1e-7);
    assert!(report.interpolable, "{:?}", report.violations);
    let gap = set.iterate(3).f - set.star().unwrap().f;
    assert!((gap - sol.primal_objective).abs() < 1e-6);
}

#[test]
fn gfom_value_monotone_in_iterations() {
    // Values only need ~1e-7 here; the slightly relaxed gap target stays
    // clear of the dense-Schur accuracy floor on the larger instances.
    let opts = SolverOptions {
        gap_tol: 5e-9,
        feas_tol: 1e-8,
        ..SolverOptions::default()
    };
    for class in [ClassSpec::nonsmooth(1.0), ClassSpec::smooth(0.0, 1.0)] {
        let mut prev = f64::INFINITY;
        for n in 0..=8usize {
            let sol = solve(&build_gfom_pep(&class, n, 1.0).unwrap(), &opts);
            assert_eq!(sol.status, SolveStatus::Optimal, "{class:?} n={n}");
            assert!(
                sol.primal_objective <= prev + 1e-7,
                "{class:?}: value rose from {prev} to {} at n = {n}",
                sol.primal_objective
            );
            prev = sol.primal_objective;
        }
    }
}

#[test]
fn weak_duality_between_solver_and_certificates() {
    // Any solver-feasible primal stays below any verifier-feasible
    // certificate's bound.
    for n in [2usize, 4] {
        let class = ClassSpec::nonsmooth(1.0);
        let problem = build_gfom_pep(&class, n, 1.0).unwrap();
        let sol = solve(&problem, &opts());
        let cert = nonsmooth_certificate(1.0, 1.0, n).unwrap();
        let report = verify_certificate(&problem, &cert, 1e-10).unwrap();
        assert!(report.feasible(1e-10));
        assert!(sol.primal_objective <= report.omega + 1e-7);

        let class = ClassSpec::smooth(0.0, 1.0);
        let problem = build_gfom_pep(&class, n, 1.0).unwrap();
        let sol = solve(&problem, &opts());
        let cert = smooth_certificate(1.0, 1.0, n).unwrap();
        let report = verify_certificate(&problem, &cert, 1e-10).unwrap();
        assert!(report.feasible(1e-10));
        assert!(sol.primal_objective <= report.omega + 1e-7);
    }
}

#[test]
fn constraint_order_does_not_move_the_value() {
    let original = build_gfom_pep(&ClassSpec::smooth(0.0, 1.0), 3, 1.0).unwrap();
    let mut reversed = SdpProblem::new(
        original.n(),
        original.psd_side(),
        original.value_len(),
        original.objective().clone(),
        original.kind().clone(),
    );
    for c in original.constraints().iter().rev() {
        reversed.push(c.clone()).unwrap();
    }
    let a = solve(&original, &opts());
    let b = solve(&reversed, &opts());
    assert_eq!(a.status, SolveStatus::Optimal);
    assert_eq!(b.status, SolveStatus::Optimal);
    assert!(
        (a.primal_objective - b.primal_objective).abs() <= 1e-8,
        "{} vs {}",
        a.primal_objective,
        b.primal_objective
    );
}

#[test]
fn certificate_with_negated_tau_flagged() {
    let problem = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 2, 1.0).unwrap();
    let mut cert = nonsmooth_certificate(1.0, 1.0, 2).unwrap();
    cert.tau_x -= 1.0;
    let report = verify_certificate(&problem, &cert, 1e-10).unwrap();
    assert!(!report.sign_violations.is_empty());
    assert!(report.sign_violations.contains(&"tau_x".to_string()));
}

#[test]
fn gradient_bound_duals_feed_the_certified_bound() {
    // For the bounded-subgradient problem the certified bound combines the
    // distance multiplier and the norm-bound multipliers; cross-check the
    // invariant omega = tau R^2 - sum alpha_k b_k on the extracted values.
    let problem = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 2, 1.0).unwrap();
    let sol = solve(&problem, &opts());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let cert = ssep::sdp::extract_certificate(&problem, &sol).unwrap();
    let mut omega = cert.tau_x;
    for (tag, value) in &cert.alpha {
        if let ConstraintTag::GradBound(PointIndex::Iter(_) | PointIndex::Star) = tag {
            omega += value;
        }
    }
    assert!((omega - cert.omega).abs() < 1e-12);
    assert!((cert.omega - sol.primal_objective).abs() < 1e-6);
}

/// Step-size table of the fixed-step subgradient scheme
/// `y_i = (i x_{i-1} + x_0)/(i+1)`, `x_i = y_i - step · (Σ_{j<i} g_j)/(i+1)`,
/// unrolled in coefficient space.
fn subgradient_canonical_steps(step: f64, n: usize) -> CanonicalForm<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 1..=n {
        let w = i as f64 / (i as f64 + 1.0);
        let mut row = vec![0.0; i];
        if i >= 2 {
            for (j, h) in rows[i - 2].iter().enumerate() {
                row[j] = w * h;
            }
        }
        for item in row.iter_mut().take(i) {
            *item += step / (i as f64 + 1.0);
        }
        rows.push(row);
    }
    CanonicalForm::new(rows).unwrap()
}

#[test]
fn nonsmooth_certificate_steps_equal_subgradient_scheme() {
    let n = 6;
    let cert = nonsmooth_certificate(1.0, 1.0, n).unwrap();
    let synthesized = to_canonical(&synthesize_steps(&cert).unwrap());
    let step = 1.0 / ((n + 1) as f64).sqrt();
    let unrolled = subgradient_canonical_steps(step, n);
    let dev = synthesized.max_deviation(&unrolled);
    assert!(dev <= 1e-12, "max deviation {dev}");
}
