//! Worst-case analysis and synthesis of first-order convex minimization
//! methods through performance-estimation semidefinite programs.
//!
//! The toolkit covers the full pipeline:
//!
//! 1. [`classes`] — function classes (smooth strongly convex, bounded
//!    subgradient), their interpolation conditions as affine constraints on a
//!    Gram matrix, interpolability checks, and the contraction projection used
//!    for worst-case reconstruction.
//! 2. [`pep`] — construction of the performance-estimation SDPs for the greedy
//!    first-order method (GFOM), for fixed-step methods, and for aggregated
//!    subspace-search eliminations, plus worst-case recovery from solutions.
//! 3. [`sdp`] — a dense primal-dual interior-point solver sized for these
//!    problems, with dual-certificate extraction and an independent verifier.
//! 4. [`certificates`] — closed-form dual certificates for the bounded
//!    subgradient and smooth convex settings, built on the θ-sequence.
//! 5. [`synthesis`] — turning certificates into runnable fixed-step methods:
//!    step coefficients, canonical step-size form, and the two-momentum
//!    factored form.
//! 6. [`runners`] — executing GFOM, SSEP subgradient schemes, OGM, the
//!    universal method, FGM, and arbitrary canonical/factored methods against
//!    first-order oracles.
//!
//! Core math is generic over the scalar type; `f64` aliases for the main
//! types are exported at the crate root.

pub mod basis;
pub mod certificates;
pub mod classes;
pub mod linalg;
pub mod pep;
pub mod runners;
pub mod sdp;
pub mod synthesis;

use nalgebra::RealField;

/// Scalar type the numerical core is generic over: `f32` or `f64`.
pub trait Float: RealField + Copy + std::fmt::LowerExp {}

impl Float for f32 {}
impl Float for f64 {}

/// Shorthand for pulling `f64` literals into the generic scalar type.
#[inline]
pub(crate) fn fl<T: Float>(x: f64) -> T {
    nalgebra::convert(x)
}

pub use classes::{AffineConstraint, ClassSpec, ConstraintTag, PointIndex, Triplet, TripletSet};
pub use pep::{ProblemKind, SdpProblem};
pub use sdp::{DualCertificate, SdpSolution, SolveStatus, SolverOptions};
pub use synthesis::{CanonicalForm, FactoredForm, StepCoefficients};

/// `f64` aliases for the common concrete instantiation.
pub type TripletSet64 = TripletSet<f64>;
pub type SdpProblem64 = SdpProblem<f64>;
pub type SdpSolution64 = SdpSolution<f64>;
pub type DualCertificate64 = DualCertificate<f64>;
pub type StepCoefficients64 = StepCoefficients<f64>;
pub type CanonicalForm64 = CanonicalForm<f64>;
pub type FactoredForm64 = FactoredForm<f64>;
pub type Trajectory64 = runners::Trajectory<f64>;
