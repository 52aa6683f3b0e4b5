//! The method recursions.

use std::time::Instant;

use nalgebra::DVector;

use crate::certificates::theta_sequence;
use crate::synthesis::CanonicalForm;
use crate::{fl, Float};

use super::oracle::Oracle;
use super::search::{exact_line_search, select_orthogonal_subgradient, subspace_minimize};
use super::{MethodSpec, RunError, Trajectory};

const LS_TOL: f64 = 1e-10;

/// Runs `spec` for `n` iterations from `x0`, recording iterates, the
/// subgradients the method consumed, values, and orthogonality residuals.
pub fn run_method<T: Float>(
    spec: &MethodSpec<T>,
    oracle: &dyn Oracle<T>,
    x0: &DVector<T>,
    n: usize,
) -> Result<Trajectory<T>, RunError> {
    let start = Instant::now();
    let ls_tol = fl::<T>(LS_TOL);
    let mut iterates: Vec<DVector<T>> = vec![x0.clone()];
    let mut grads: Vec<DVector<T>> = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut residuals: Vec<T> = vec![T::zero()];

    let (f0, g0) = oracle.evaluate(x0);
    values.push(f0);
    grads.push(g0);

    match spec {
        MethodSpec::Gfom => {
            if oracle.quadratic_data().is_none() && oracle.linear_pieces().is_none() && n > 6 {
                return Err(RunError::CapabilityMissing(format!(
                    "greedy subspace search over {n} directions needs quadratic or polyhedral structure (general oracles are capped at 6)"
                )));
            }
            for i in 1..=n {
                let dirs: Vec<DVector<T>> = grads.clone();
                let x = subspace_minimize(oracle, x0, &dirs, ls_tol)?;
                let (g, res) = select_orthogonal_subgradient(oracle, &x, &dirs, fl(1e-7))?;
                let fx = oracle.evaluate(&x).0;
                finite_check(&x, fx, i)?;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(res);
            }
        }
        MethodSpec::SsepSubgradient {
            bound,
            radius,
            horizon,
        } => {
            if *bound <= T::zero() || *radius <= T::zero() {
                return Err(RunError::InvalidParameters(
                    "subgradient scheme needs positive M and R".into(),
                ));
            }
            let step = *radius / (*bound * fl::<T>((horizon + 1) as f64).sqrt());
            for i in 1..=n {
                let (y, d) = averaged_direction(x0, &iterates, &grads, i);
                let x = &y - &d * step;
                let (fx, g) = oracle.evaluate(&x);
                finite_check(&x, fx, i)?;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(T::zero());
            }
        }
        MethodSpec::SsepSubgradientLs => {
            for i in 1..=n {
                let (y, d) = averaged_direction(x0, &iterates, &grads, i);
                let (x, g, res) = line_search_step(oracle, &y, &d, ls_tol)?;
                let fx = oracle.evaluate(&x).0;
                finite_check(&x, fx, i)?;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(res);
            }
        }
        MethodSpec::Ogm { smoothness, horizon } => {
            let theta = theta_horizon::<T>(*horizon, n)?;
            for i in 1..=n {
                let (y, d) = ogm_direction(x0, &iterates, &grads, &theta, i);
                let x = &y - &d / *smoothness;
                let (fx, g) = oracle.evaluate(&x);
                finite_check(&x, fx, i)?;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(T::zero());
            }
        }
        MethodSpec::OgmLs { horizon } => {
            let theta = theta_horizon::<T>(*horizon, n)?;
            for i in 1..=n {
                let (y, d) = ogm_direction(x0, &iterates, &grads, &theta, i);
                let (x, g, res) = line_search_step(oracle, &y, &d, ls_tol)?;
                let fx = oracle.evaluate(&x).0;
                finite_check(&x, fx, i)?;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(res);
            }
        }
        MethodSpec::Um { horizon } => {
            let theta = theta_horizon::<T>(*horizon, n)?;
            for i in 1..=n {
                let (y1, d1) = averaged_direction(x0, &iterates, &grads, i);
                let (y2, d2) = ogm_direction(x0, &iterates, &grads, &theta, i);
                let mut dirs = vec![&y1 - &y2, d1, d2];
                dirs.retain(|d| d.norm() > T::zero());
                let x = subspace_minimize(oracle, &y2, &dirs, ls_tol)?;
                let (g, res) = select_orthogonal_subgradient(oracle, &x, &dirs, fl(1e-7))?;
                let fx = oracle.evaluate(&x).0;
                finite_check(&x, fx, i)?;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(res);
            }
        }
        MethodSpec::Fgm { mu, smoothness } => {
            let q = (*mu / *smoothness).sqrt();
            let inertia = (T::one() - q) / (T::one() + q);
            let mut y = x0.clone();
            let mut x_prev = x0.clone();
            for i in 1..=n {
                let g = if i == 1 {
                    grads[0].clone()
                } else {
                    let (_, g) = oracle.evaluate(&y);
                    g
                };
                let x = &y - &g / *smoothness;
                y = &x + (&x - &x_prev) * inertia;
                let fx = oracle.evaluate(&x).0;
                finite_check(&x, fx, i)?;
                x_prev = x.clone();
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(T::zero());
            }
        }
        MethodSpec::Canonical { steps } => {
            if steps.n() < n {
                return Err(RunError::InvalidParameters(format!(
                    "step-size table has depth {}, need {n}",
                    steps.n()
                )));
            }
            for i in 1..=n {
                let mut x = x0.clone();
                for (j, g) in grads.iter().enumerate().take(i) {
                    x.axpy(-steps.h(i, j), g, T::one());
                }
                let (fx, g) = oracle.evaluate(&x);
                finite_check(&x, fx, i)?;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(T::zero());
            }
        }
        MethodSpec::Factored { form, smoothness } => {
            if form.n() < n {
                return Err(RunError::InvalidParameters(format!(
                    "factored form has depth {}, need {n}",
                    form.n()
                )));
            }
            let mut y_prev = x0.clone();
            for i in 1..=n {
                let x_prev = iterates.last().unwrap().clone();
                let g_prev = grads.last().unwrap();
                let y = &x_prev - g_prev / *smoothness;
                let x = &y + (&y - &y_prev) * form.zeta(i) + (&y - &x_prev) * form.eta(i);
                let (fx, g) = oracle.evaluate(&x);
                finite_check(&x, fx, i)?;
                y_prev = y;
                iterates.push(x);
                values.push(fx);
                grads.push(g);
                residuals.push(T::zero());
            }
        }
    }

    Ok(Trajectory {
        iterates,
        subgradients: grads,
        values,
        residuals,
        wall_time: start.elapsed(),
    })
}

fn finite_check<T: Float>(x: &DVector<T>, fx: T, iter: usize) -> Result<(), RunError> {
    if fx.is_finite() && x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RunError::NonFinite(iter))
    }
}

/// `y_i = (i x_{i−1} + x_0)/(i+1)`, `d_i = (Σ_{j<i} g_j)/(i+1)`.
fn averaged_direction<T: Float>(
    x0: &DVector<T>,
    iterates: &[DVector<T>],
    grads: &[DVector<T>],
    i: usize,
) -> (DVector<T>, DVector<T>) {
    let w = T::one() / fl::<T>((i + 1) as f64);
    let y = &iterates[i - 1] * (fl::<T>(i as f64) * w) + x0 * w;
    let mut d = DVector::zeros(x0.len());
    for g in grads.iter().take(i) {
        d += g;
    }
    (y, d * w)
}

/// `y_i = (1 − 1/θ_i)x_{i−1} + x_0/θ_i`,
/// `d_i = (1 − 1/θ_i)g_{i−1} + (2/θ_i)Σ_{j<i}θ_j g_j`.
fn ogm_direction<T: Float>(
    x0: &DVector<T>,
    iterates: &[DVector<T>],
    grads: &[DVector<T>],
    theta: &[T],
    i: usize,
) -> (DVector<T>, DVector<T>) {
    let inv = T::one() / theta[i];
    let lead = T::one() - inv;
    let y = &iterates[i - 1] * lead + x0 * inv;
    let mut d = &grads[i - 1] * lead;
    let two_inv = fl::<T>(2.0) * inv;
    for (j, g) in grads.iter().enumerate().take(i) {
        d.axpy(two_inv * theta[j], g, T::one());
    }
    (y, d)
}

fn theta_horizon<T: Float>(horizon: usize, n: usize) -> Result<Vec<T>, RunError> {
    if n > horizon {
        return Err(RunError::InvalidParameters(format!(
            "cannot run {n} iterations of a method tuned for horizon {horizon}"
        )));
    }
    Ok(theta_sequence::<T>(horizon)?.values().to_vec())
}

fn line_search_step<T: Float>(
    oracle: &dyn Oracle<T>,
    y: &DVector<T>,
    d: &DVector<T>,
    ls_tol: T,
) -> Result<(DVector<T>, DVector<T>, T), RunError> {
    if d.norm() == T::zero() {
        let (_, g) = oracle.evaluate(y);
        return Ok((y.clone(), g, T::zero()));
    }
    let alpha = exact_line_search(oracle, y, d, ls_tol)?;
    let x = y - d * alpha;
    let (g, res) = select_orthogonal_subgradient(oracle, &x, std::slice::from_ref(d), fl(1e-7))?;
    Ok((x, g, res))
}

/// Canonical step-size table of the optimized gradient method for the given
/// horizon, obtained by unrolling its recursion in coefficient space.
pub fn ogm_canonical_steps<T: Float>(smoothness: T, horizon: usize) -> CanonicalForm<T> {
    let theta = theta_sequence::<T>(horizon).expect("horizon >= 1");
    let inv_l = T::one() / smoothness;
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(horizon);
    for i in 1..=horizon {
        let inv = T::one() / theta.theta(i);
        let lead = T::one() - inv;
        let mut row = vec![T::zero(); i];
        // y-part: (1 - 1/theta_i) x_{i-1}
        if i >= 2 {
            let prev = rows[i - 2].clone();
            for (j, h) in prev.iter().enumerate() {
                row[j] += lead * *h;
            }
        }
        // d-part: (1 - 1/theta_i) g_{i-1} + (2/theta_i) sum theta_j g_j
        row[i - 1] += inv_l * lead;
        for (j, item) in row.iter_mut().enumerate().take(i) {
            *item += inv_l * fl::<T>(2.0) * inv * theta.theta(j);
        }
        rows.push(row);
    }
    CanonicalForm::new(rows).expect("row lengths by construction")
}

/// Canonical step-size table of the constant-inertia fast gradient method:
/// query points are the extrapolated sequence, the final row is the last
/// plain gradient point.
pub fn fgm_canonical_steps<T: Float>(mu: T, smoothness: T, horizon: usize) -> CanonicalForm<T> {
    assert!(horizon >= 1);
    let q = (mu / smoothness).sqrt();
    let inertia = (T::one() - q) / (T::one() + q);
    let inv_l = T::one() / smoothness;
    // Coefficients of x_i and y_i over (g_0, ..., g_{horizon-1}) relative to
    // x_0: point = x_0 - sum c_j g_j.
    let mut cx_prev = vec![T::zero(); horizon]; // x_0
    let mut cy = vec![T::zero(); horizon]; // y_0 = x_0
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(horizon);
    for i in 1..=horizon {
        // x_i = y_{i-1} - g(y_{i-1})/L
        let mut cx = cy.clone();
        cx[i - 1] += inv_l;
        // y_i = x_i + inertia (x_i - x_{i-1})
        let mut cy_next = vec![T::zero(); horizon];
        for j in 0..horizon {
            cy_next[j] = cx[j] + inertia * (cx[j] - cx_prev[j]);
        }
        let row_src = if i == horizon { &cx } else { &cy_next };
        rows.push(row_src[..i].to_vec());
        cx_prev = cx;
        cy = cy_next;
    }
    CanonicalForm::new(rows).expect("row lengths by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runners::oracle::{AbsValue, Quadratic};
    use crate::synthesis::{expand, factorize, FactoredForm};
    use nalgebra::DMatrix;

    fn vec_of(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn subgradient_method_hand_trace() {
        // On f = |x| from x_0 = 1 with M = R = 1, N = 1: y_1 = 1,
        // d_1 = 1/2, step R/(M sqrt(2)), so x_1 = 1 - 1/(2 sqrt(2)).
        let f = AbsValue::new(1.0);
        let spec = MethodSpec::SsepSubgradient {
            bound: 1.0,
            radius: 1.0,
            horizon: 1,
        };
        let traj = run_method(&spec, &f, &vec_of(&[1.0]), 1).unwrap();
        let expected = 1.0 - 1.0 / (2.0 * 2.0_f64.sqrt());
        assert!((traj.final_iterate()[0] - expected).abs() < 1e-14);
        assert!((traj.final_value() - expected).abs() < 1e-14);
        // Certified bound MR/sqrt(N+1).
        assert!(traj.final_value() <= 1.0 / 2.0_f64.sqrt());
    }

    #[test]
    fn ogm_hand_trace_matches_bound_exactly() {
        // f = x^2/2 from x_0 = 1 at N = 1: theta_{1,1} = 2, y_1 = 1,
        // d_1 = (3/2) g_0, x_1 = -1/2, gap = 1/8 = bound.
        let f = Quadratic::centered(DMatrix::identity(1, 1), &vec_of(&[0.0]), 0.0);
        let spec = MethodSpec::Ogm {
            smoothness: 1.0,
            horizon: 1,
        };
        let traj = run_method(&spec, &f, &vec_of(&[1.0]), 1).unwrap();
        assert!((traj.final_iterate()[0] + 0.5).abs() < 1e-14);
        assert!((traj.final_value() - 0.125).abs() < 1e-14);
    }

    #[test]
    fn starting_at_optimum_stays_there() {
        let f = Quadratic::centered(DMatrix::identity(2, 2), &vec_of(&[0.0, 0.0]), 0.0);
        for spec in [
            MethodSpec::Gfom,
            MethodSpec::SsepSubgradient {
                bound: 1.0,
                radius: 1.0,
                horizon: 3,
            },
            MethodSpec::Ogm {
                smoothness: 1.0,
                horizon: 3,
            },
            MethodSpec::Fgm {
                mu: 0.0,
                smoothness: 1.0,
            },
        ] {
            let traj = run_method(&spec, &f, &vec_of(&[0.0, 0.0]), 3).unwrap();
            for x in &traj.iterates {
                assert!(x.norm() < 1e-12);
            }
            for v in &traj.values {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ogm_run_matches_canonical_table() {
        // Running OGM and running its canonical step-size table produce the
        // same iterates on a generic quadratic.
        let q = DMatrix::from_diagonal(&vec_of(&[1.0, 0.3, 0.05]));
        let f = Quadratic::centered(q, &vec_of(&[0.2, -1.0, 0.7]), 0.0);
        let x0 = vec_of(&[1.0, 1.0, -1.0]);
        let n = 4;
        let direct = run_method(
            &MethodSpec::Ogm {
                smoothness: 1.0,
                horizon: n,
            },
            &f,
            &x0,
            n,
        )
        .unwrap();
        let table = ogm_canonical_steps(1.0, n);
        let canon = run_method(&MethodSpec::Canonical { steps: table }, &f, &x0, n).unwrap();
        for (a, b) in direct.iterates.iter().zip(canon.iterates.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn factored_form_runs_ogm() {
        // Factorizing OGM's table and running the two-momentum recursion
        // reproduces the canonical iterates.
        let n = 5;
        let table = ogm_canonical_steps(1.0, n);
        let form: FactoredForm<f64> = factorize(&table, 1.0).unwrap();
        assert!(form.residual() < 1e-12);
        let regenerated = expand(&form, 1.0);
        assert!(table.max_deviation(&regenerated) < 1e-12);

        let q = DMatrix::from_diagonal(&vec_of(&[1.0, 0.5]));
        let f = Quadratic::centered(q, &vec_of(&[0.3, -0.4]), 0.0);
        let x0 = vec_of(&[1.0, -1.0]);
        let canon = run_method(&MethodSpec::Canonical { steps: table }, &f, &x0, n).unwrap();
        let fact = run_method(
            &MethodSpec::Factored {
                form,
                smoothness: 1.0,
            },
            &f,
            &x0,
            n,
        )
        .unwrap();
        for (a, b) in canon.iterates.iter().zip(fact.iterates.iter()) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn fgm_first_rows() {
        // beta = (1 - sqrt(q))/(1 + sqrt(q)); h_{1,0} = (1 + beta)/L.
        let (mu, l) = (0.01, 1.0);
        let beta = (1.0 - 0.1) / (1.0 + 0.1);
        let h = fgm_canonical_steps::<f64>(mu, l, 3);
        assert!((h.h(1, 0) - (1.0 + beta)).abs() < 1e-14);
        // Final row is the plain gradient point y_{N-1} - g/L, no inertia on
        // the newest gradient.
        assert!((h.h(3, 2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gfom_requires_structure_beyond_cap() {
        struct Opaque;
        impl Oracle<f64> for Opaque {
            fn dim(&self) -> usize {
                2
            }
            fn evaluate(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
                (x.norm_squared(), x * 2.0)
            }
        }
        let err = run_method(&MethodSpec::Gfom, &Opaque, &vec_of(&[1.0, 1.0]), 8);
        assert!(matches!(err, Err(RunError::CapabilityMissing(_))));
    }
}
