//! From dual certificates to runnable fixed-step methods.
//!
//! A feasible dual certificate for the greedy method's performance SDP
//! induces a family of methods through the orthogonality conditions
//! `⟨f'(x_i), Σ_j β̃_{i,j} f'(x_j) + Σ_j γ̃_{i,j}(x_j − x_0)⟩ = 0`. When every
//! `γ̃_{i,i}` is nonzero these can be realized by an explicit fixed-step
//! scheme; eliminating the iterate recurrences yields the canonical
//! step-size form `x_i = x_0 − Σ_{j<i} h_{i,j} g_j`, and in the smooth
//! (strongly) convex setting that form factors into a two-momentum recursion
//! with coefficients `(ζ_i, η_i)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sdp::DualCertificate;
use crate::{fl, Float};

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("step coefficients degenerate: |gamma_{{{row},{row}}}| = {value} below threshold {threshold}")]
    DegenerateGamma {
        row: usize,
        value: String,
        threshold: String,
    },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error(
        "factorization degenerate at row {row}: |h_{{{prev},{col}}} - 1/L| = {value} too small to identify momentum"
    )]
    DegenerateFactorization {
        row: usize,
        prev: usize,
        col: usize,
        value: String,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Aggregation weights `(β̃, γ̃)` defining a subspace-search elimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "repr::StepCoefficientsRepr<T>",
    into = "repr::StepCoefficientsRepr<T>",
    bound(serialize = "T: Float + Serialize", deserialize = "T: Float + Deserialize<'de>")
)]
pub struct StepCoefficients<T: Float> {
    n: usize,
    beta: BTreeMap<(usize, usize), T>,
    gamma: BTreeMap<(usize, usize), T>,
}

impl<T: Float> StepCoefficients<T> {
    /// Builds coefficients for rows `1..=n`; `beta` keys must satisfy
    /// `0 ≤ j < i ≤ n` and `gamma` keys `1 ≤ j ≤ i ≤ n`.
    pub fn new(
        n: usize,
        beta: BTreeMap<(usize, usize), T>,
        gamma: BTreeMap<(usize, usize), T>,
    ) -> Result<Self, SynthesisError> {
        for &(i, j) in beta.keys() {
            if !(j < i && i <= n) {
                return Err(SynthesisError::IndexOutOfRange(format!(
                    "beta index ({i},{j}) outside 0 <= j < i <= {n}"
                )));
            }
        }
        for &(i, j) in gamma.keys() {
            if !(1 <= j && j <= i && i <= n) {
                return Err(SynthesisError::IndexOutOfRange(format!(
                    "gamma index ({i},{j}) outside 1 <= j <= i <= {n}"
                )));
            }
        }
        Ok(StepCoefficients { n, beta, gamma })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self, i: usize, j: usize) -> T {
        self.beta.get(&(i, j)).copied().unwrap_or_else(T::zero)
    }

    pub fn gamma(&self, i: usize, j: usize) -> T {
        self.gamma.get(&(i, j)).copied().unwrap_or_else(T::zero)
    }
}

mod repr {
    use super::*;

    fn key_to_string(k: &(usize, usize)) -> String {
        format!("{}:{}", k.0, k.1)
    }

    fn key_from_string(s: &str) -> Result<(usize, usize), SynthesisError> {
        let mut it = s.split(':');
        let bad = || SynthesisError::IndexOutOfRange(format!("invalid index key `{s}`"));
        let i = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let j = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        Ok((i, j))
    }

    #[derive(Serialize, Deserialize)]
    pub struct StepCoefficientsRepr<T> {
        #[serde(rename = "N")]
        pub n: usize,
        pub beta: BTreeMap<String, T>,
        pub gamma: BTreeMap<String, T>,
    }

    impl<T: Float> From<StepCoefficients<T>> for StepCoefficientsRepr<T> {
        fn from(s: StepCoefficients<T>) -> Self {
            StepCoefficientsRepr {
                n: s.n,
                beta: s.beta.iter().map(|(k, v)| (key_to_string(k), *v)).collect(),
                gamma: s.gamma.iter().map(|(k, v)| (key_to_string(k), *v)).collect(),
            }
        }
    }

    impl<T: Float> TryFrom<StepCoefficientsRepr<T>> for StepCoefficients<T> {
        type Error = SynthesisError;

        fn try_from(r: StepCoefficientsRepr<T>) -> Result<Self, Self::Error> {
            let beta = r
                .beta
                .iter()
                .map(|(k, v)| Ok((key_from_string(k)?, *v)))
                .collect::<Result<_, SynthesisError>>()?;
            let gamma = r
                .gamma
                .iter()
                .map(|(k, v)| Ok((key_from_string(k)?, *v)))
                .collect::<Result<_, SynthesisError>>()?;
            StepCoefficients::new(r.n, beta, gamma)
        }
    }
}

/// Canonical fixed-step form `x_i = x_0 − Σ_{j<i} h_{i,j} g_j`.
///
/// Row `i` (1-based) holds `h_{i,0} … h_{i,i−1}`. This representation is
/// unique per method, unlike the `(β̃, γ̃)` parametrization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalForm<T> {
    #[serde(rename = "N")]
    n: usize,
    h: Vec<Vec<T>>,
}

impl<T: Float> CanonicalForm<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self, SynthesisError> {
        for (idx, row) in rows.iter().enumerate() {
            if row.len() != idx + 1 {
                return Err(SynthesisError::DimensionMismatch(format!(
                    "row {} must have {} entries, got {}",
                    idx + 1,
                    idx + 1,
                    row.len()
                )));
            }
        }
        Ok(CanonicalForm { n: rows.len(), h: rows })
    }

    pub fn zeros(n: usize) -> Self {
        CanonicalForm {
            n,
            h: (1..=n).map(|i| vec![T::zero(); i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `h_{i,j}` for `1 ≤ i ≤ N`, `0 ≤ j < i`.
    pub fn h(&self, i: usize, j: usize) -> T {
        self.h[i - 1][j]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.h
    }

    /// Largest absolute entrywise deviation from `other`.
    pub fn max_deviation(&self, other: &CanonicalForm<T>) -> T {
        assert_eq!(self.n, other.n, "step-size tables of different depth");
        let mut dev = T::zero();
        for i in 1..=self.n {
            for j in 0..i {
                dev = dev.max((self.h(i, j) - other.h(i, j)).abs());
            }
        }
        dev
    }
}

/// Two-momentum form: `y_i = x_{i−1} − (1/L) g_{i−1}`,
/// `x_i = y_i + ζ_i (y_i − y_{i−1}) + η_i (y_i − x_{i−1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactoredForm<T> {
    #[serde(rename = "N")]
    n: usize,
    zeta: Vec<T>,
    eta: Vec<T>,
    /// `max_{i,j} |h_{i,j} − h'_{i,j}|` observed when the factorization was
    /// produced; the factorization is heuristic and this is its only
    /// soundness witness.
    residual: T,
}

impl<T: Float> FactoredForm<T> {
    /// Coefficients for rows `1..=n`; the first step has no `y`-lookback so
    /// `ζ_1 = 0` is required.
    pub fn new(zeta: Vec<T>, eta: Vec<T>, residual: T) -> Result<Self, SynthesisError> {
        if zeta.len() != eta.len() {
            return Err(SynthesisError::DimensionMismatch(format!(
                "zeta has {} entries, eta has {}",
                zeta.len(),
                eta.len()
            )));
        }
        if let Some(z1) = zeta.first() {
            if *z1 != T::zero() {
                return Err(SynthesisError::DimensionMismatch(
                    "zeta_1 must be zero".to_string(),
                ));
            }
        }
        Ok(FactoredForm {
            n: zeta.len(),
            zeta,
            eta,
            residual,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ζ_i` for `1 ≤ i ≤ N`.
    pub fn zeta(&self, i: usize) -> T {
        self.zeta[i - 1]
    }

    /// `η_i` for `1 ≤ i ≤ N`.
    pub fn eta(&self, i: usize) -> T {
        self.eta[i - 1]
    }

    pub fn residual(&self) -> T {
        self.residual
    }

    /// CSV rows `(i, zeta_i, eta_i)` with header.
    pub fn coefficients_csv(&self) -> String {
        let mut out = String::from("i,zeta,eta\n");
        for i in 1..=self.n {
            out.push_str(&format!("{},{:.5e},{:.5e}\n", i, self.zeta(i), self.eta(i)));
        }
        out
    }
}

/// Reads the aggregation weights out of a certificate, rejecting rows whose
/// diagonal `γ̃_{i,i}` is too small for the fixed-step realization.
pub fn synthesize_steps<T: Float>(
    cert: &DualCertificate<T>,
) -> Result<StepCoefficients<T>, SynthesisError> {
    let n = cert.n;
    let steps = StepCoefficients::new(n, cert.beta.clone(), cert.gamma.clone())?;
    let threshold = fl::<T>(1e-10);
    for i in 1..=n {
        let mut row_scale = T::one();
        for j in 0..i {
            row_scale = row_scale.max(steps.beta(i, j).abs());
        }
        for j in 1..=i {
            row_scale = row_scale.max(steps.gamma(i, j).abs());
        }
        let diag = steps.gamma(i, i).abs();
        if diag <= threshold * row_scale {
            return Err(SynthesisError::DegenerateGamma {
                row: i,
                value: format!("{diag}"),
                threshold: format!("{}", threshold * row_scale),
            });
        }
    }
    Ok(steps)
}

/// Eliminates the iterate recurrences
/// `x_i = x_0 − Σ_{j<i} (γ̃_{i,j}/γ̃_{i,i})(x_j − x_0) − Σ_{j<i} (β̃_{i,j}/γ̃_{i,i}) g_j`
/// by back-substitution into the canonical step-size table.
pub fn to_canonical<T: Float>(steps: &StepCoefficients<T>) -> CanonicalForm<T> {
    let n = steps.n();
    let mut h: Vec<Vec<T>> = Vec::with_capacity(n);
    for i in 1..=n {
        let diag = steps.gamma(i, i);
        let mut row = vec![T::zero(); i];
        for (k, entry) in row.iter_mut().enumerate() {
            let mut acc = steps.beta(i, k) / diag;
            for j in (k + 1)..i {
                acc -= steps.gamma(i, j) / diag * h[j - 1][k];
            }
            *entry = acc;
        }
        h.push(row);
    }
    CanonicalForm { n, h }
}

/// Identifies candidate two-momentum coefficients from a canonical table and
/// reports how well they regenerate it.
///
/// `ζ_i = (h_{i,i−2} − h_{i−1,i−2}) / (h_{i−1,i−2} − 1/L)` and
/// `η_i = L h_{i,i−1} − 1 − ζ_i`, with `ζ_1 = 0`. The identification is
/// heuristic: the call succeeds whenever the divisions are well posed, and
/// the caller judges the returned residual.
pub fn factorize<T: Float>(h: &CanonicalForm<T>, smoothness: T) -> Result<FactoredForm<T>, SynthesisError> {
    let n = h.n();
    if n == 0 {
        return Err(SynthesisError::DimensionMismatch(
            "factorization needs at least one row".to_string(),
        ));
    }
    let l = smoothness;
    let inv_l = T::one() / l;
    let guard = fl::<T>(1e-8);
    let mut zeta = vec![T::zero(); n];
    let mut eta = vec![T::zero(); n];
    eta[0] = l * h.h(1, 0) - T::one();
    for i in 2..=n {
        let pivot = h.h(i - 1, i - 2) - inv_l;
        if pivot.abs() <= guard * T::one().max(h.h(i - 1, i - 2).abs()) {
            return Err(SynthesisError::DegenerateFactorization {
                row: i,
                prev: i - 1,
                col: i - 2,
                value: format!("{}", pivot.abs()),
            });
        }
        zeta[i - 1] = (h.h(i, i - 2) - h.h(i - 1, i - 2)) / pivot;
        eta[i - 1] = l * h.h(i, i - 1) - T::one() - zeta[i - 1];
    }
    let regenerated = expand_coefficients(n, &zeta, &eta, l);
    let residual = h.max_deviation(&regenerated);
    Ok(FactoredForm { n, zeta, eta, residual })
}

/// Forward-evaluates the two-momentum recursion into canonical step sizes.
pub fn expand<T: Float>(form: &FactoredForm<T>, smoothness: T) -> CanonicalForm<T> {
    expand_coefficients(form.n, &form.zeta, &form.eta, smoothness)
}

fn expand_coefficients<T: Float>(n: usize, zeta: &[T], eta: &[T], l: T) -> CanonicalForm<T> {
    let inv_l = T::one() / l;
    // h'_{-1,j} = h'_{0,j} = 0; rows built in place.
    let mut prev2: Vec<T> = Vec::new(); // h'_{i-2, .}
    let mut prev1: Vec<T> = Vec::new(); // h'_{i-1, .}
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(n);
    for i in 1..=n {
        let z = zeta[i - 1];
        let e = eta[i - 1];
        let mut row = vec![T::zero(); i];
        for (j, entry) in row.iter_mut().enumerate() {
            let h1 = prev1.get(j).copied().unwrap_or_else(T::zero);
            let h2 = prev2.get(j).copied().unwrap_or_else(T::zero);
            *entry = if j == i - 1 {
                inv_l * (T::one() + z + e)
            } else if j + 2 == i {
                h1 * (T::one() + z) - inv_l * z
            } else {
                h1 + z * (h1 - h2)
            };
        }
        prev2 = std::mem::take(&mut prev1);
        prev1 = row.clone();
        rows.push(row);
    }
    CanonicalForm { n, h: rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{nonsmooth_certificate, smooth_certificate, theta_sequence};

    #[test]
    fn nonsmooth_steps_match_closed_form() {
        // At N = 3 the certificate gives gamma_{i,i} = (i+1)/4 and a flat
        // beta = 1/(N+1)^{3/2} = 1/8.
        let cert = nonsmooth_certificate::<f64>(1.0, 1.0, 3).unwrap();
        let steps = synthesize_steps(&cert).unwrap();
        for i in 1..=3usize {
            assert!((steps.gamma(i, i) - (i as f64 + 1.0) / 4.0).abs() < 1e-15);
            for j in 0..i {
                assert!((steps.beta(i, j) - 0.125).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn smooth_steps_match_closed_form() {
        let cert = smooth_certificate::<f64>(1.0, 1.0, 2).unwrap();
        let steps = synthesize_steps(&cert).unwrap();
        let theta = theta_sequence::<f64>(2).unwrap();
        assert!((steps.gamma(2, 2) - 1.0).abs() < 1e-15);
        let expected = -2.0 * theta.theta(1).powi(2) / theta.theta(2).powi(2);
        assert!((steps.gamma(2, 1) - expected).abs() < 1e-15);
    }

    #[test]
    fn degenerate_gamma_rejected() {
        let mut cert = nonsmooth_certificate::<f64>(1.0, 1.0, 2).unwrap();
        cert.gamma.insert((1, 1), 0.0);
        match synthesize_steps(&cert) {
            Err(SynthesisError::DegenerateGamma { row: 1, .. }) => {}
            other => panic!("expected degenerate gamma on row 1, got {other:?}"),
        }
    }

    #[test]
    fn canonical_first_rows_by_hand() {
        // Nonsmooth, N = 3: h_{1,0} = beta_{1,0} / gamma_{1,1} = (1/8)/(2/4).
        let cert = nonsmooth_certificate::<f64>(1.0, 1.0, 3).unwrap();
        let h = to_canonical(&synthesize_steps(&cert).unwrap());
        assert!((h.h(1, 0) - 0.25).abs() < 1e-15);

        // Smooth, N = 1: the first step of the optimized gradient method.
        let cert = smooth_certificate::<f64>(1.0, 1.0, 1).unwrap();
        let h = to_canonical(&synthesize_steps(&cert).unwrap());
        assert!((h.h(1, 0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_beta_rows_give_zero_steps() {
        let mut gamma = BTreeMap::new();
        for i in 1..=3usize {
            gamma.insert((i, i), 1.0);
        }
        let steps = StepCoefficients::<f64>::new(3, BTreeMap::new(), gamma).unwrap();
        let h = to_canonical(&steps);
        for i in 1..=3usize {
            for j in 0..i {
                assert_eq!(h.h(i, j), 0.0);
            }
        }
    }

    #[test]
    fn factorize_first_step() {
        let h = CanonicalForm::<f64>::new(vec![vec![1.5]]).unwrap();
        let f = factorize(&h, 1.0).unwrap();
        assert_eq!(f.zeta(1), 0.0);
        assert!((f.eta(1) - 0.5).abs() < 1e-15);
        assert!(f.residual() == 0.0);
    }

    #[test]
    fn expand_single_step() {
        let f = FactoredForm::<f64>::new(vec![0.0], vec![0.5], 0.0).unwrap();
        let h = expand(&f, 1.0);
        assert!((h.h(1, 0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_momentum_expands_to_plain_gradient_steps() {
        let f = FactoredForm::<f64>::new(vec![0.0; 4], vec![0.0; 4], 0.0).unwrap();
        let l = 2.0;
        let h = expand(&f, l);
        for i in 1..=4usize {
            assert!((h.h(i, i - 1) - 1.0 / l).abs() < 1e-15);
            for j in 0..i.saturating_sub(1) {
                // zeta = 0 collapses the momentum terms, so earlier columns
                // persist unchanged.
                assert!((h.h(i, j) - h.h(i - 1, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_pivot_reported() {
        // h_{1,0} = 1/L makes the momentum parametrization unidentifiable.
        let h = CanonicalForm::<f64>::new(vec![vec![1.0], vec![0.3, 1.1]]).unwrap();
        match factorize(&h, 1.0) {
            Err(SynthesisError::DegenerateFactorization { row: 2, .. }) => {}
            other => panic!("expected degenerate factorization, got {other:?}"),
        }
    }

    #[test]
    fn smooth_certificate_factorizes_exactly() {
        // The mu = 0 certificate is the optimized gradient method, which the
        // two-momentum recursion represents exactly up to rounding.
        let cert = smooth_certificate::<f64>(1.0, 1.0, 8).unwrap();
        let h = to_canonical(&synthesize_steps(&cert).unwrap());
        let f = factorize(&h, 1.0).unwrap();
        assert!(f.residual() < 1e-12, "residual {}", f.residual());
        let theta = theta_sequence::<f64>(8).unwrap();
        assert!((f.eta(1) - 1.0 / theta.theta(1)).abs() < 1e-12);
    }
}
