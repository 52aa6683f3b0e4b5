//! Closed-form dual certificates.
//!
//! Two families admit explicit optimal multipliers for the greedy method's
//! performance SDP:
//!
//! * bounded subgradients (`C_M`): certified bound `M R / √(N+1)`;
//! * smooth convex (`F_{0,L}`): certified bound `L R² / (2 θ²_{N,N})`,
//!   where `θ` is the recursion underlying the optimized gradient method's
//!   step weights.
//!
//! In both cases the dual slack matrix collapses to an explicit rank-one
//! outer product, which makes the certificates verifiable to rounding
//! accuracy independently of any solver.

use std::collections::BTreeMap;

use crate::classes::{ClassSpec, ConstraintTag, PointIndex};
use crate::sdp::DualCertificate;
use crate::{fl, Float};

#[derive(Debug, thiserror::Error)]
pub enum CertificateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("the theta recursion needs N >= 1, got {0}")]
    TooFewIterations(usize),
}

/// The weight sequence `θ_{0,N}, …, θ_{N,N}`.
///
/// `θ_{0,N} = 1`, `θ_{i+1,N} = (1 + √(4θ²_{i,N} + 1))/2` for `i+1 < N`, and
/// the final entry uses the 8-coefficient rule
/// `θ_{N,N} = (1 + √(8θ²_{N−1,N} + 1))/2`. Computed in the working scalar
/// type; the relative rounding error is at most a small multiple of `N`
/// machine epsilons, which is ample for the depths used here.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSequence<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Float> ThetaSequence<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `θ_{i,N}` for `0 ≤ i ≤ N`.
    pub fn theta(&self, i: usize) -> T {
        self.values[i]
    }

    /// `θ_{N,N}`.
    pub fn last(&self) -> T {
        self.values[self.n]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

pub fn theta_sequence<T: Float>(n: usize) -> Result<ThetaSequence<T>, CertificateError> {
    if n < 1 {
        return Err(CertificateError::TooFewIterations(n));
    }
    let one = T::one();
    let mut values = Vec::with_capacity(n + 1);
    values.push(one);
    for i in 1..n {
        let prev = values[i - 1];
        values.push((one + (fl::<T>(4.0) * prev * prev + one).sqrt()) * fl::<T>(0.5));
    }
    let prev = values[n - 1];
    values.push((one + (fl::<T>(8.0) * prev * prev + one).sqrt()) * fl::<T>(0.5));
    Ok(ThetaSequence { n, values })
}

fn positive<T: Float>(name: &str, v: T) -> Result<(), CertificateError> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(CertificateError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Optimal multipliers for the bounded-subgradient class, certifying
/// `f(x_N) − f_* ≤ M R / √(N+1)`.
pub fn nonsmooth_certificate<T: Float>(
    bound: T,
    radius: T,
    n: usize,
) -> Result<DualCertificate<T>, CertificateError> {
    positive("M", bound)?;
    positive("R", radius)?;
    let m = bound;
    let r = radius;
    let np1 = fl::<T>((n + 1) as f64);
    let sqrt_np1 = np1.sqrt();
    let pow32 = np1 * sqrt_np1;

    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    let mut gamma = BTreeMap::new();

    // Subgradient-norm multipliers.
    let alpha_gb = r / (fl::<T>(2.0) * m * pow32);
    for i in 0..=n {
        alpha.insert(ConstraintTag::GradBound(PointIndex::Iter(i)), alpha_gb);
    }
    // Chained convexity pairs (i-1, i) and anchor pairs (*, i).
    for i in 1..=n {
        alpha.insert(
            ConstraintTag::Interp(PointIndex::Iter(i - 1), PointIndex::Iter(i)),
            fl::<T>(i as f64) / np1,
        );
    }
    for i in 0..=n {
        alpha.insert(
            ConstraintTag::Interp(PointIndex::Star, PointIndex::Iter(i)),
            T::one() / np1,
        );
    }
    for i in 1..=n {
        gamma.insert((i, i), fl::<T>((i + 1) as f64) / np1);
    }
    for i in 2..=n {
        gamma.insert((i, i - 1), -fl::<T>(i as f64) / np1);
    }
    let beta_val = r / (m * pow32);
    for i in 1..=n {
        for j in 0..i {
            beta.insert((i, j), beta_val);
        }
    }
    let tau_x = m / (fl::<T>(2.0) * r * sqrt_np1);
    let omega = m * r / sqrt_np1;
    Ok(DualCertificate {
        n,
        class: ClassSpec::nonsmooth(m),
        radius: r,
        alpha,
        beta,
        gamma,
        tau_x,
        omega,
    })
}

/// Optimal multipliers for the smooth convex class (`μ = 0`), certifying
/// `f(x_N) − f_* ≤ L R² / (2 θ²_{N,N})`.
pub fn smooth_certificate<T: Float>(
    smoothness: T,
    radius: T,
    n: usize,
) -> Result<DualCertificate<T>, CertificateError> {
    positive("L", smoothness)?;
    positive("R", radius)?;
    if n < 1 {
        return Err(CertificateError::TooFewIterations(n));
    }
    let l = smoothness;
    let r = radius;
    let theta = theta_sequence::<T>(n)?;
    let tn = theta.last();
    let tn2 = tn * tn;
    let two = fl::<T>(2.0);

    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    let mut gamma = BTreeMap::new();

    for i in 1..=n {
        let ti1 = theta.theta(i - 1);
        alpha.insert(
            ConstraintTag::Interp(PointIndex::Iter(i - 1), PointIndex::Iter(i)),
            two * ti1 * ti1 / tn2,
        );
    }
    for i in 0..n {
        alpha.insert(
            ConstraintTag::Interp(PointIndex::Star, PointIndex::Iter(i)),
            two * theta.theta(i) / tn2,
        );
    }
    alpha.insert(
        ConstraintTag::Interp(PointIndex::Star, PointIndex::Iter(n)),
        T::one() / tn,
    );

    for i in 2..=n {
        let ti1 = theta.theta(i - 1);
        gamma.insert((i, i - 1), -two * ti1 * ti1 / tn2);
    }
    for i in 1..n {
        let ti = theta.theta(i);
        gamma.insert((i, i), two * ti * ti / tn2);
    }
    gamma.insert((n, n), T::one());

    for i in 2..n {
        for j in 0..=(i - 2) {
            beta.insert(
                (i, j),
                fl::<T>(4.0) * theta.theta(i) * theta.theta(j) / (l * tn2),
            );
        }
    }
    for i in 1..n {
        let ti1 = theta.theta(i - 1);
        beta.insert(
            (i, i - 1),
            (two * ti1 * ti1 + fl::<T>(4.0) * ti1 * theta.theta(i)) / (l * tn2),
        );
    }
    for j in 0..=n.saturating_sub(2) {
        beta.insert((n, j), two * theta.theta(j) / (l * tn));
    }
    beta.insert(
        (n, n - 1),
        (two * theta.theta(n - 1) / tn + two * theta.theta(n - 1) * theta.theta(n - 1) / tn2) / l,
    );

    let tau_x = l / (two * tn2);
    let omega = l * r * r / (two * tn2);
    Ok(DualCertificate {
        n,
        class: ClassSpec::smooth(T::zero(), l),
        radius: r,
        alpha,
        beta,
        gamma,
        tau_x,
        omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_small_cases() {
        let t = theta_sequence::<f64>(1).unwrap();
        assert_eq!(t.values(), &[1.0, 2.0]);

        // theta_{1,N} solves the 4-coefficient rule from theta_0 = 1 for any
        // N >= 2, giving the golden ratio.
        let t = theta_sequence::<f64>(10).unwrap();
        let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
        assert!((t.theta(1) - golden).abs() < 1e-15);
        assert!((1.0 / t.theta(1) - 0.6180).abs() < 1e-4);

        // Bound denominator at N = 10.
        assert!((2.0 * t.last().powi(2) - 159.07).abs() < 5e-3);
    }

    #[test]
    fn theta_recursion_identity() {
        // theta^2_{i+1} - theta_{i+1} - theta^2_i = 0 holds for every
        // interior index by construction of the recursion.
        let t = theta_sequence::<f64>(20).unwrap();
        for i in 0..19 {
            let a = t.theta(i + 1);
            let b = t.theta(i);
            assert!((a * a - a - b * b).abs() < 1e-12, "index {i}");
        }
        // The final entry satisfies the 8-coefficient variant instead.
        let a = t.theta(20);
        let b = t.theta(19);
        assert!((a * a - a - 2.0 * b * b).abs() < 1e-11);
    }

    #[test]
    fn theta_rejects_zero_iterations() {
        assert!(theta_sequence::<f64>(0).is_err());
    }

    #[test]
    fn nonsmooth_certificate_n1_by_hand() {
        let cert = nonsmooth_certificate::<f64>(1.0, 1.0, 1).unwrap();
        let pow32 = 2.0_f64.powf(1.5);
        assert!((cert.alpha(ConstraintTag::GradBound(PointIndex::Iter(0))) - 1.0 / (2.0 * pow32))
            .abs()
            < 1e-15);
        assert!((cert.alpha(ConstraintTag::GradBound(PointIndex::Iter(1))) - 1.0 / (2.0 * pow32))
            .abs()
            < 1e-15);
        assert!(
            (cert.alpha_pair(PointIndex::Iter(0), PointIndex::Iter(1)) - 0.5).abs() < 1e-15
        );
        assert!((cert.alpha_pair(PointIndex::Star, PointIndex::Iter(0)) - 0.5).abs() < 1e-15);
        assert!((cert.alpha_pair(PointIndex::Star, PointIndex::Iter(1)) - 0.5).abs() < 1e-15);
        assert!((cert.gamma_at(1, 1) - 1.0).abs() < 1e-15);
        assert!((cert.beta_at(1, 0) - 1.0 / pow32).abs() < 1e-15);
        assert!((cert.tau_x - 1.0 / (2.0 * 2.0_f64.sqrt())).abs() < 1e-15);
        assert!((cert.omega - 1.0 / 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nonsmooth_bound_value() {
        let cert = nonsmooth_certificate::<f64>(1.0, 1.0, 3).unwrap();
        assert!((cert.omega - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smooth_certificate_n1_by_hand() {
        let cert = smooth_certificate::<f64>(1.0, 1.0, 1).unwrap();
        assert!((cert.tau_x - 0.125).abs() < 1e-15);
        assert!((cert.gamma_at(1, 1) - 1.0).abs() < 1e-15);
        assert!((cert.alpha_pair(PointIndex::Star, PointIndex::Iter(1)) - 0.5).abs() < 1e-15);
        assert!((cert.alpha_pair(PointIndex::Iter(0), PointIndex::Iter(1)) - 0.5).abs() < 1e-15);
        assert!((cert.alpha_pair(PointIndex::Star, PointIndex::Iter(0)) - 0.5).abs() < 1e-15);
        assert!((cert.beta_at(1, 0) - 1.5).abs() < 1e-15);
        assert!((cert.omega - 0.125).abs() < 1e-15);
    }

    #[test]
    fn smooth_bound_value_n10() {
        let cert = smooth_certificate::<f64>(1.0, 1.0, 10).unwrap();
        assert!((1.0 / cert.omega - 159.07).abs() < 5e-3 * 159.07);
    }

    #[test]
    fn homogeneity_of_bounds() {
        // omega(M, R) = M R omega(1, 1) and omega(L, R) = L R^2 omega(1, 1).
        let base_ns = nonsmooth_certificate::<f64>(1.0, 1.0, 4).unwrap().omega;
        let scaled_ns = nonsmooth_certificate(3.0, 0.5, 4).unwrap().omega;
        assert!((scaled_ns - 3.0 * 0.5 * base_ns).abs() < 1e-14);

        let base_s = smooth_certificate::<f64>(1.0, 1.0, 4).unwrap().omega;
        let scaled_s = smooth_certificate(2.0, 3.0, 4).unwrap().omega;
        assert!((scaled_s - 2.0 * 9.0 * base_s).abs() < 1e-13);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(nonsmooth_certificate::<f64>(0.0, 1.0, 1).is_err());
        assert!(nonsmooth_certificate::<f64>(1.0, -1.0, 1).is_err());
        assert!(smooth_certificate::<f64>(1.0, 1.0, 0).is_err());
        assert!(smooth_certificate::<f64>(-1.0, 1.0, 1).is_err());
    }

    #[test]
    fn certificate_json_round_trip() {
        let cert = nonsmooth_certificate::<f64>(1.0, 1.0, 2).unwrap();
        let json = serde_json::to_string(&cert).unwrap();
        assert!(json.contains("\"tau_x\""));
        let back: DualCertificate<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cert);
    }
}
