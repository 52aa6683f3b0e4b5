//! Execution of first-order methods against oracles.

mod oracle;
mod search;

use std::time::Duration;

use nalgebra::DVector;

use crate::certificates::CertificateError;
use crate::synthesis::{CanonicalForm, FactoredForm};
use crate::Float;

pub use oracle::{
    AbsValue, NesterovMax, Oracle, OracleSpec, PolyhedralMax, Quadratic, QuadraticData,
};
pub use search::{exact_line_search, select_orthogonal_subgradient, subspace_minimize, SearchError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("oracle capability missing: {0}")]
    CapabilityMissing(String),
    #[error("non-finite value encountered at iteration {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error("method parameters invalid: {0}")]
    InvalidParameters(String),
}

/// A method to run, with its parameters.
#[derive(Debug, Clone)]
pub enum MethodSpec<T: Float> {
    /// Greedy first-order method: exact minimization over the affine span of
    /// all observed subgradients, with orthogonal subgradient selection.
    Gfom,
    /// Fixed-step subgradient scheme with the optimal averaging weights.
    SsepSubgradient { bound: T, radius: T, horizon: usize },
    /// Same scheme with the fixed step replaced by an exact line search.
    SsepSubgradientLs,
    /// Optimized gradient method.
    Ogm { smoothness: T, horizon: usize },
    /// Optimized gradient method with exact line search.
    OgmLs { horizon: usize },
    /// Universal method combining both search directions through a
    /// three-dimensional subspace minimization.
    Um { horizon: usize },
    /// Fast gradient method with constant inertia
    /// `(1 − √(μ/L)) / (1 + √(μ/L))`.
    Fgm { mu: T, smoothness: T },
    /// Arbitrary fixed-step method in canonical step-size form.
    Canonical { steps: CanonicalForm<T> },
    /// Arbitrary method in two-momentum factored form.
    Factored { form: FactoredForm<T>, smoothness: T },
}

/// Record of one method run.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub iterates: Vec<DVector<T>>,
    pub subgradients: Vec<DVector<T>>,
    pub values: Vec<T>,
    /// Per-iteration orthogonality residuals for search-based methods
    /// (relative to the direction and subgradient norms); zero for
    /// fixed-step methods.
    pub residuals: Vec<T>,
    pub wall_time: Duration,
}

impl<T: Float> Trajectory<T> {
    pub fn final_value(&self) -> T {
        *self.values.last().unwrap()
    }

    pub fn final_iterate(&self) -> &DVector<T> {
        self.iterates.last().unwrap()
    }

    /// CSV rows `iteration,value,gap,residual`; the gap column needs the
    /// oracle's optimal value and is omitted when unknown.
    pub fn to_csv(&self, optimal_value: Option<T>) -> String {
        let mut out = String::new();
        match optimal_value {
            Some(_) => out.push_str("iteration,value,gap,residual\n"),
            None => out.push_str("iteration,value,residual\n"),
        }
        for (i, v) in self.values.iter().enumerate() {
            let res = self.residuals.get(i).copied().unwrap_or_else(T::zero);
            match optimal_value {
                Some(star) => {
                    out.push_str(&format!("{i},{:.5e},{:.5e},{:.5e}\n", *v, *v - star, res))
                }
                None => out.push_str(&format!("{i},{:.5e},{:.5e}\n", *v, res)),
            }
        }
        out
    }
}

mod methods;
pub use methods::{fgm_canonical_steps, ogm_canonical_steps, run_method};
