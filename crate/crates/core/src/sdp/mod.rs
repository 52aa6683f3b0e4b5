//! Dense semidefinite solver and dual-certificate handling.
//!
//! Problems here are small (Gram side a few tens, a few hundred
//! constraints), so the solver is a dense primal-dual interior-point method
//! with Nesterov-Todd scaling and direct factorization of the Schur
//! complement. Equality constraints are handled as genuine equalities with
//! sign-free multipliers. Everything is deterministic: identical inputs give
//! bit-identical outputs on one platform.

mod certificate;
mod solver;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classes::ConstraintTag;
use crate::pep::SdpProblem;
use crate::{fl, Float};

pub use certificate::{
    dual_slack_matrix, extract_certificate, verify_certificate, DualCertificate, VerifyReport,
};

/// Solver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    /// Relative duality-gap target.
    pub gap_tol: T,
    /// Primal/dual feasibility target.
    pub feas_tol: T,
    pub max_iterations: usize,
    /// Row-wise constraint normalization before solving.
    pub scaling: bool,
}

impl<T: Float> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            gap_tol: fl(1e-9),
            feas_tol: fl(1e-9),
            max_iterations: 200,
            scaling: true,
        }
    }
}

impl<T: Float> SolverOptions<T> {
    pub fn validate(&self) -> bool {
        self.gap_tol > T::zero() && self.feas_tol > T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

/// Primal/dual solution of an [`SdpProblem`].
#[derive(Debug, Clone)]
pub struct SdpSolution<T> {
    /// Gram-matrix block of the maximizer.
    pub gram: DMatrix<T>,
    /// Value-vector block of the maximizer.
    pub values: DVector<T>,
    /// Multiplier per constraint tag. Multipliers on `≤ 0` constraints are
    /// nonnegative up to the feasibility tolerance; equality multipliers are
    /// sign-free.
    pub dual: BTreeMap<ConstraintTag, T>,
    pub primal_objective: T,
    pub dual_objective: T,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Scaled max-norm residual of primal feasibility.
    pub primal_residual: T,
    /// Scaled max-norm residual of dual feasibility.
    pub dual_residual: T,
    /// Relative duality gap at the returned iterate.
    pub relative_gap: T,
    /// Feasibility tolerance the solve ran with; dual clamping during
    /// certificate extraction is judged against it.
    pub feas_tol: T,
}

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("solution status {0:?} does not permit this operation")]
    NotOptimal(SolveStatus),
    #[error("operation requires a problem of kind {expected}, got {got}")]
    WrongKind { expected: String, got: String },
    #[error("no dual multiplier recorded for constraint {0}")]
    MissingDual(String),
    #[error("dual multiplier for {tag} is {value}, below -feas_tol: not sign-feasible")]
    NegativeDual { tag: String, value: String },
    #[error("certificate does not match problem: {0}")]
    Mismatch(String),
}

/// Solves the SDP. Failure modes are surfaced through
/// [`SdpSolution::status`] together with the residual diagnostics; the
/// returned blocks always hold the last (best) iterate.
pub fn solve<T: Float>(problem: &SdpProblem<T>, opts: &SolverOptions<T>) -> SdpSolution<T> {
    let opts = if opts.validate() {
        *opts
    } else {
        SolverOptions::default()
    };
    solver::solve(problem, opts)
}
