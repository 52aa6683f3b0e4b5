//! Dual certificates: extraction from solved problems and independent
//! verification.
//!
//! A certificate collects the multipliers `(α, β, γ, τ_x)` of the dual of
//! the greedy method's performance SDP. Feasibility means three things: the
//! dual slack matrix (the multiplier-weighted sum of all constraint
//! matrices, including `τ_x (x_0−x_*)⊙(x_0−x_*)`) is positive semidefinite;
//! the value-space equality `f_N − f_* − Σ_k α_k a_k = 0` holds; and the
//! sign constraints `α ≥ 0`, `τ_x ≥ 0` are met. Its objective
//! `ω = τ_x R² − Σ_k α_k b_k` then certifies the worst-case bound. The
//! verifier below uses nothing but matrix assembly and a symmetric
//! eigensolve, so it is independent of the interior-point machinery.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classes::{ClassSpec, ConstraintTag, PointIndex, Sense};
use crate::pep::{ProblemKind, SdpProblem};
use crate::{Float};

use super::{SdpError, SdpSolution, SolveStatus};

/// Multipliers certifying a worst-case bound `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "repr::CertificateRepr<T>",
    into = "repr::CertificateRepr<T>",
    bound(serialize = "T: Float + Serialize", deserialize = "T: Float + Deserialize<'de>")
)]
pub struct DualCertificate<T: Float> {
    pub n: usize,
    pub class: ClassSpec<T>,
    /// Initial-distance bound the certificate was built for.
    pub radius: T,
    /// Multipliers on the interpolation constraints, keyed by their tag
    /// (`Interp(i, j)` pairs and `GradBound(i)` norm bounds). Entries are
    /// nonnegative; missing entries are zero.
    pub alpha: BTreeMap<ConstraintTag, T>,
    /// Multipliers on `⟨g_i, g_j⟩ = 0`, keyed `(i, j)` with `0 ≤ j < i`.
    pub beta: BTreeMap<(usize, usize), T>,
    /// Multipliers on `⟨g_i, x_j − x_0⟩ = 0`, keyed `(i, j)` with `1 ≤ j ≤ i`.
    pub gamma: BTreeMap<(usize, usize), T>,
    /// Multiplier on the initial-distance constraint.
    pub tau_x: T,
    /// Certified bound `τ_x R² − Σ_k α_k b_k`.
    pub omega: T,
}

impl<T: Float> DualCertificate<T> {
    pub fn alpha(&self, tag: ConstraintTag) -> T {
        self.alpha.get(&tag).copied().unwrap_or_else(T::zero)
    }

    pub fn alpha_pair(&self, i: PointIndex, j: PointIndex) -> T {
        self.alpha(ConstraintTag::Interp(i, j))
    }

    pub fn beta_at(&self, i: usize, j: usize) -> T {
        self.beta.get(&(i, j)).copied().unwrap_or_else(T::zero)
    }

    pub fn gamma_at(&self, i: usize, j: usize) -> T {
        self.gamma.get(&(i, j)).copied().unwrap_or_else(T::zero)
    }
}

mod repr {
    use super::*;

    fn pair_key(k: &(usize, usize)) -> String {
        format!("{}:{}", k.0, k.1)
    }

    fn alpha_key(tag: &ConstraintTag) -> Result<String, String> {
        match tag {
            ConstraintTag::Interp(i, j) => Ok(format!("{i}:{j}")),
            ConstraintTag::GradBound(i) => Ok(format!("{i}")),
            other => Err(format!("tag {other} cannot appear among alpha multipliers")),
        }
    }

    fn parse_alpha_key(s: &str) -> Result<ConstraintTag, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [i] => Ok(ConstraintTag::GradBound(i.parse()?)),
            [i, j] => Ok(ConstraintTag::Interp(i.parse()?, j.parse()?)),
            _ => Err(format!("invalid alpha key `{s}`")),
        }
    }

    fn parse_pair(s: &str) -> Result<(usize, usize), String> {
        let bad = || format!("invalid index key `{s}`");
        let mut it = s.split(':');
        let i = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let j = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        Ok((i, j))
    }

    #[derive(Serialize, Deserialize)]
    pub struct CertificateRepr<T> {
        pub class: ClassSpec<T>,
        #[serde(rename = "N")]
        pub n: usize,
        #[serde(rename = "R")]
        pub radius: T,
        pub alpha: BTreeMap<String, T>,
        pub beta: BTreeMap<String, T>,
        pub gamma: BTreeMap<String, T>,
        pub tau_x: T,
        pub omega: T,
    }

    impl<T: Float> From<DualCertificate<T>> for CertificateRepr<T> {
        fn from(c: DualCertificate<T>) -> Self {
            CertificateRepr {
                class: c.class,
                n: c.n,
                radius: c.radius,
                alpha: c
                    .alpha
                    .iter()
                    .map(|(k, v)| (alpha_key(k).expect("alpha tag"), *v))
                    .collect(),
                beta: c.beta.iter().map(|(k, v)| (pair_key(k), *v)).collect(),
                gamma: c.gamma.iter().map(|(k, v)| (pair_key(k), *v)).collect(),
                tau_x: c.tau_x,
                omega: c.omega,
            }
        }
    }

    impl<T: Float> TryFrom<CertificateRepr<T>> for DualCertificate<T> {
        type Error = String;

        fn try_from(r: CertificateRepr<T>) -> Result<Self, Self::Error> {
            let alpha = r
                .alpha
                .iter()
                .map(|(k, v)| Ok((parse_alpha_key(k)?, *v)))
                .collect::<Result<_, String>>()?;
            let beta = r
                .beta
                .iter()
                .map(|(k, v)| Ok((parse_pair(k)?, *v)))
                .collect::<Result<_, String>>()?;
            let gamma = r
                .gamma
                .iter()
                .map(|(k, v)| Ok((parse_pair(k)?, *v)))
                .collect::<Result<_, String>>()?;
            Ok(DualCertificate {
                n: r.n,
                class: r.class,
                radius: r.radius,
                alpha,
                beta,
                gamma,
                tau_x: r.tau_x,
                omega: r.omega,
            })
        }
    }
}

/// Reads the named dual variables out of a solved greedy-method problem.
///
/// Multipliers on inequality constraints that are negative within the
/// solver's feasibility tolerance are clamped to zero; anything more
/// negative is rejected so certificates stay honestly sign-feasible. The
/// certified bound is recomputed from the multipliers rather than copied
/// from the solver's objective.
pub fn extract_certificate<T: Float>(
    problem: &SdpProblem<T>,
    solution: &SdpSolution<T>,
) -> Result<DualCertificate<T>, SdpError> {
    if solution.status != SolveStatus::Optimal {
        return Err(SdpError::NotOptimal(solution.status));
    }
    let (class, radius) = match problem.kind() {
        ProblemKind::Gfom { class, radius } => (*class, *radius),
        other => {
            return Err(SdpError::WrongKind {
                expected: "greedy-method performance problem".into(),
                got: format!("{other:?}"),
            })
        }
    };
    let tol = solution.feas_tol;
    let mut alpha = BTreeMap::new();
    let mut beta = BTreeMap::new();
    let mut gamma = BTreeMap::new();
    let mut tau_x = T::zero();
    let mut omega = T::zero();
    for c in problem.constraints() {
        let value = *solution
            .dual
            .get(&c.tag)
            .ok_or_else(|| SdpError::MissingDual(c.tag.to_string()))?;
        let clamped = if c.sense == Sense::Le {
            if value < -tol {
                return Err(SdpError::NegativeDual {
                    tag: c.tag.to_string(),
                    value: format!("{value}"),
                });
            }
            value.max(T::zero())
        } else {
            value
        };
        match c.tag {
            ConstraintTag::Interp(_, _) | ConstraintTag::GradBound(_) => {
                alpha.insert(c.tag, clamped);
                omega -= clamped * c.offset;
            }
            ConstraintTag::Orth(i, j) => {
                beta.insert((i, j), clamped);
            }
            ConstraintTag::Span(i, j) => {
                gamma.insert((i, j), clamped);
            }
            ConstraintTag::InitDistance => tau_x = clamped,
            ConstraintTag::Aggregate(_) => {
                return Err(SdpError::Mismatch(
                    "aggregated problems carry no extractable certificate".into(),
                ))
            }
        }
    }
    omega += tau_x * radius * radius;
    Ok(DualCertificate {
        n: problem.n(),
        class,
        radius,
        alpha,
        beta,
        gamma,
        tau_x,
        omega,
    })
}

/// Diagnostics from an independent certificate check.
#[derive(Debug, Clone)]
pub struct VerifyReport<T> {
    /// Minimum eigenvalue of the assembled dual slack matrix; feasibility
    /// requires it to be nonnegative up to tolerance.
    pub psd_min_eig: T,
    /// Max-norm of the value-space equality residual.
    pub equality_residual: T,
    /// Inequality multipliers found below `-tol`.
    pub sign_violations: Vec<String>,
    /// Bound recomputed from the multipliers.
    pub omega: T,
}

impl<T: Float> VerifyReport<T> {
    pub fn feasible(&self, tol: T) -> bool {
        self.psd_min_eig >= -tol && self.equality_residual <= tol && self.sign_violations.is_empty()
    }
}

fn certificate_multiplier<T: Float>(
    cert: &DualCertificate<T>,
    tag: ConstraintTag,
) -> Result<T, SdpError> {
    Ok(match tag {
        ConstraintTag::Interp(_, _) | ConstraintTag::GradBound(_) => cert.alpha(tag),
        ConstraintTag::Orth(i, j) => cert.beta_at(i, j),
        ConstraintTag::Span(i, j) => cert.gamma_at(i, j),
        ConstraintTag::InitDistance => cert.tau_x,
        ConstraintTag::Aggregate(_) => {
            return Err(SdpError::Mismatch(
                "aggregated problems carry no named dual variables".into(),
            ))
        }
    })
}

fn check_shapes<T: Float>(
    problem: &SdpProblem<T>,
    cert: &DualCertificate<T>,
) -> Result<(), SdpError> {
    if problem.n() != cert.n {
        return Err(SdpError::Mismatch(format!(
            "problem has N = {}, certificate N = {}",
            problem.n(),
            cert.n
        )));
    }
    if !matches!(problem.kind(), ProblemKind::Gfom { .. }) {
        return Err(SdpError::WrongKind {
            expected: "greedy-method performance problem".into(),
            got: format!("{:?}", problem.kind()),
        });
    }
    Ok(())
}

/// The dual slack matrix `Σ_k α_k A_k + Σ β,γ terms + τ_x (x_0−x_*)⊙(x_0−x_*)`
/// assembled from the problem's own constraint data.
pub fn dual_slack_matrix<T: Float>(
    problem: &SdpProblem<T>,
    cert: &DualCertificate<T>,
) -> Result<DMatrix<T>, SdpError> {
    check_shapes(problem, cert)?;
    let side = problem.psd_side();
    let mut slack = DMatrix::<T>::zeros(side, side);
    for c in problem.constraints() {
        let mult = certificate_multiplier(cert, c.tag)?;
        if mult != T::zero() {
            c.gram_coeff.add_to_dense(&mut slack, mult);
        }
    }
    Ok(slack)
}

/// Assembles the dual slack matrix and equality residual of a certificate
/// against the constraint data of `problem` and reports feasibility
/// diagnostics. Uses only matrix assembly and a symmetric eigensolve.
pub fn verify_certificate<T: Float>(
    problem: &SdpProblem<T>,
    cert: &DualCertificate<T>,
    tol: T,
) -> Result<VerifyReport<T>, SdpError> {
    check_shapes(problem, cert)?;
    let mut equality: DVector<T> = problem.objective().clone();
    let mut omega = T::zero();
    let mut sign_violations = Vec::new();
    for c in problem.constraints() {
        let mult = certificate_multiplier(cert, c.tag)?;
        match c.tag {
            ConstraintTag::Interp(_, _) | ConstraintTag::GradBound(_) => {
                if mult < -tol {
                    sign_violations.push(c.tag.to_string());
                }
                omega -= mult * c.offset;
            }
            ConstraintTag::InitDistance if mult < -tol => {
                sign_violations.push("tau_x".into());
            }
            _ => {}
        }
        if mult != T::zero() {
            equality.axpy(-mult, &c.value_coeff, T::one());
        }
    }
    omega += cert.tau_x * cert.radius * cert.radius;

    let slack = dual_slack_matrix(problem, cert)?;
    let psd_min_eig = crate::linalg::min_eigenvalue(&slack);
    let equality_residual = equality.amax();
    Ok(VerifyReport {
        psd_min_eig,
        equality_residual,
        sign_violations,
        omega,
    })
}
