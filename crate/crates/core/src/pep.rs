//! Construction of the performance-estimation SDPs.
//!
//! The worst case of a first-order method over a function class, after
//! discretization and Gram lifting, is the value of a linear SDP over the
//! pair `(G, F)`: maximize `f_N − f_*` subject to the class's interpolation
//! constraints, the constraints pinning how the method generates iterates,
//! and the initial-distance bound. Three flavors are built here:
//!
//! * [`build_gfom_pep`] — greedy subspace-search method: orthogonality of
//!   successive subgradients and of subgradients against visited directions.
//! * [`build_fixed_step_pep`] — an explicit method `x_i = x_0 − Σ h_{i,j} g_j`:
//!   the iterate coordinates are eliminated by substitution, shrinking the
//!   Gram side from `2N+2` to `N+2`.
//! * [`build_ssep_pep`] — the aggregated relaxation whose equalities are the
//!   weighted sums of the greedy method's constraints under a dual
//!   certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::classes::{
    interpolation_constraints, AffineConstraint, ClassError, ClassSpec, ConstraintTag, PointIndex,
    Sense, SymCoeff, Triplet, TripletSet,
};
use crate::sdp::{SdpSolution, SolveStatus};
use crate::synthesis::{CanonicalForm, StepCoefficients};
use crate::{fl, Float};

#[derive(Debug, thiserror::Error)]
pub enum PepError {
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("duplicate constraint tag {0}")]
    DuplicateTag(String),
    #[error("solution status {0:?} does not permit this operation")]
    NotOptimal(SolveStatus),
    #[error("Gram matrix violates positive semidefiniteness: min eigenvalue {0}")]
    PsdViolation(String),
    #[error("negative initial distance bound")]
    NegativeRadius,
}

/// Which method family a problem was built for; drives dual-certificate
/// extraction and worst-case reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind<T: Float> {
    Gfom {
        class: ClassSpec<T>,
        radius: T,
    },
    FixedStep {
        class: ClassSpec<T>,
        radius: T,
        steps: CanonicalForm<T>,
    },
    Ssep {
        class: ClassSpec<T>,
        radius: T,
    },
    Custom,
}

/// A linear SDP over a PSD Gram matrix `G` and a free value vector `F`:
/// maximize `objectiveᵀF` subject to tagged affine constraints.
///
/// Serializes to a JSON document with constraint matrices laid out densely
/// as row-major lower triangles and tags as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "repr::SdpProblemRepr<T>",
    into = "repr::SdpProblemRepr<T>",
    bound(
        serialize = "T: Float + Serialize",
        deserialize = "T: Float + serde::de::DeserializeOwned"
    )
)]
pub struct SdpProblem<T: Float> {
    n: usize,
    psd_side: usize,
    value_len: usize,
    objective: DVector<T>,
    constraints: Vec<AffineConstraint<T>>,
    tags: std::collections::BTreeSet<ConstraintTag>,
    kind: ProblemKind<T>,
}

mod repr {
    use super::*;
    use crate::classes::SymCoeff;
    use nalgebra::DMatrix;

    #[derive(Serialize, Deserialize)]
    pub struct ConstraintRepr<T> {
        pub tag: ConstraintTag,
        pub sense: Sense,
        /// Row-major lower triangle of the symmetric coefficient matrix.
        pub gram_lower: Vec<T>,
        pub value_coeff: Vec<T>,
        pub offset: T,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(bound(
        serialize = "T: Float + Serialize",
        deserialize = "T: Float + serde::de::DeserializeOwned"
    ))]
    pub struct SdpProblemRepr<T: Float> {
        #[serde(rename = "N")]
        pub n: usize,
        pub psd_side: usize,
        pub value_len: usize,
        pub objective: Vec<T>,
        pub kind: ProblemKind<T>,
        pub constraints: Vec<ConstraintRepr<T>>,
    }

    impl<T: Float> From<SdpProblem<T>> for SdpProblemRepr<T> {
        fn from(p: SdpProblem<T>) -> Self {
            let side = p.psd_side;
            let constraints = p
                .constraints
                .iter()
                .map(|c| {
                    let dense = c.gram_coeff.to_dense();
                    let mut gram_lower = Vec::with_capacity(side * (side + 1) / 2);
                    for i in 0..side {
                        for j in 0..=i {
                            gram_lower.push(dense[(i, j)]);
                        }
                    }
                    ConstraintRepr {
                        tag: c.tag,
                        sense: c.sense,
                        gram_lower,
                        value_coeff: c.value_coeff.iter().copied().collect(),
                        offset: c.offset,
                    }
                })
                .collect();
            SdpProblemRepr {
                n: p.n,
                psd_side: p.psd_side,
                value_len: p.value_len,
                objective: p.objective.iter().copied().collect(),
                kind: p.kind,
                constraints,
            }
        }
    }

    impl<T: Float> TryFrom<SdpProblemRepr<T>> for SdpProblem<T> {
        type Error = PepError;

        fn try_from(r: SdpProblemRepr<T>) -> Result<Self, Self::Error> {
            if r.objective.len() != r.value_len {
                return Err(PepError::DimensionMismatch(
                    "objective length does not match value_len".into(),
                ));
            }
            let side = r.psd_side;
            let tri = side * (side + 1) / 2;
            let mut problem = SdpProblem::new(
                r.n,
                side,
                r.value_len,
                DVector::from_vec(r.objective),
                r.kind,
            );
            for c in r.constraints {
                if c.gram_lower.len() != tri {
                    return Err(PepError::DimensionMismatch(format!(
                        "constraint {} has {} lower-triangle entries, expected {tri}",
                        c.tag,
                        c.gram_lower.len()
                    )));
                }
                let mut dense = DMatrix::<T>::zeros(side, side);
                let mut idx = 0;
                for i in 0..side {
                    for j in 0..=i {
                        dense[(i, j)] = c.gram_lower[idx];
                        dense[(j, i)] = c.gram_lower[idx];
                        idx += 1;
                    }
                }
                problem.push(AffineConstraint {
                    gram_coeff: SymCoeff::from_dense(&dense),
                    value_coeff: DVector::from_vec(c.value_coeff),
                    offset: c.offset,
                    sense: c.sense,
                    tag: c.tag,
                })?;
            }
            Ok(problem)
        }
    }
}

impl<T: Float> SdpProblem<T> {
    pub fn new(
        n: usize,
        psd_side: usize,
        value_len: usize,
        objective: DVector<T>,
        kind: ProblemKind<T>,
    ) -> Self {
        assert_eq!(objective.len(), value_len, "objective length mismatch");
        SdpProblem {
            n,
            psd_side,
            value_len,
            objective,
            constraints: Vec::new(),
            tags: std::collections::BTreeSet::new(),
            kind,
        }
    }

    pub fn push(&mut self, constraint: AffineConstraint<T>) -> Result<(), PepError> {
        if constraint.gram_coeff.side() != self.psd_side
            || constraint.value_coeff.len() != self.value_len
        {
            return Err(PepError::DimensionMismatch(format!(
                "constraint {} does not match problem sizes ({}, {})",
                constraint.tag, self.psd_side, self.value_len
            )));
        }
        if !self.tags.insert(constraint.tag) {
            return Err(PepError::DuplicateTag(constraint.tag.to_string()));
        }
        self.constraints.push(constraint);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn psd_side(&self) -> usize {
        self.psd_side
    }

    pub fn value_len(&self) -> usize {
        self.value_len
    }

    pub fn objective(&self) -> &DVector<T> {
        &self.objective
    }

    pub fn constraints(&self) -> &[AffineConstraint<T>] {
        &self.constraints
    }

    pub fn constraint(&self, tag: ConstraintTag) -> Option<&AffineConstraint<T>> {
        self.constraints.iter().find(|c| c.tag == tag)
    }

    pub fn kind(&self) -> &ProblemKind<T> {
        &self.kind
    }
}

fn distance_constraint<T: Float>(basis: &Basis, radius: T) -> AffineConstraint<T> {
    let dx = basis.x::<T>(PointIndex::Iter(0)) - basis.x::<T>(PointIndex::Star);
    let mut a = SymCoeff::zero(basis.gram_side());
    a.add_outer(T::one(), &dx, &dx);
    AffineConstraint {
        gram_coeff: a,
        value_coeff: DVector::zeros(basis.value_len()),
        offset: -radius * radius,
        sense: Sense::Le,
        tag: ConstraintTag::InitDistance,
    }
}

/// Performance-estimation SDP for the greedy first-order method after `n`
/// iterations with initial distance bound `radius`.
pub fn build_gfom_pep<T: Float>(
    class: &ClassSpec<T>,
    n: usize,
    radius: T,
) -> Result<SdpProblem<T>, PepError> {
    if radius < T::zero() {
        return Err(PepError::NegativeRadius);
    }
    let basis = Basis::new(n);
    let objective = basis.f::<T>(PointIndex::Iter(n)) - basis.f::<T>(PointIndex::Star);
    let mut problem = SdpProblem::new(
        n,
        basis.gram_side(),
        basis.value_len(),
        objective,
        ProblemKind::Gfom {
            class: *class,
            radius,
        },
    );
    for c in interpolation_constraints(class, n)? {
        problem.push(c)?;
    }
    for i in 1..=n {
        for j in 0..i {
            let mut a = SymCoeff::zero(basis.gram_side());
            a.add_outer(
                T::one(),
                &basis.g::<T>(PointIndex::Iter(i)),
                &basis.g(PointIndex::Iter(j)),
            );
            problem.push(AffineConstraint {
                gram_coeff: a,
                value_coeff: DVector::zeros(basis.value_len()),
                offset: T::zero(),
                sense: Sense::Eq,
                tag: ConstraintTag::Orth(i, j),
            })?;
        }
        for j in 1..=i {
            let dx = basis.x::<T>(PointIndex::Iter(j)) - basis.x::<T>(PointIndex::Iter(0));
            let mut a = SymCoeff::zero(basis.gram_side());
            a.add_outer(T::one(), &basis.g(PointIndex::Iter(i)), &dx);
            problem.push(AffineConstraint {
                gram_coeff: a,
                value_coeff: DVector::zeros(basis.value_len()),
                offset: T::zero(),
                sense: Sense::Eq,
                tag: ConstraintTag::Span(i, j),
            })?;
        }
    }
    problem.push(distance_constraint(&basis, radius))?;
    Ok(problem)
}

/// Performance-estimation SDP for the fixed-step method
/// `x_i = x_0 − Σ_{j<i} h_{i,j} g_j`.
///
/// Every occurrence of an iterate coordinate is substituted by its gradient
/// expansion, so the Gram basis reduces to `(g_0, …, g_N, x_* − x_0)` of side
/// `N+2`.
pub fn build_fixed_step_pep<T: Float>(
    class: &ClassSpec<T>,
    n: usize,
    radius: T,
    steps: &CanonicalForm<T>,
) -> Result<SdpProblem<T>, PepError> {
    if steps.n() != n {
        return Err(PepError::DimensionMismatch(format!(
            "step-size table has {} rows, expected {n}",
            steps.n()
        )));
    }
    if radius < T::zero() {
        return Err(PepError::NegativeRadius);
    }
    let basis = Basis::new(n);
    let full = basis.gram_side();
    let reduced = n + 2;
    // Substitution matrix mapping full-basis coordinates to the reduced basis:
    // g_i keeps its slot, x_i - x_0 expands to -sum_{j<i} h_{i,j} g_j, and
    // x_* - x_0 moves to the last slot.
    let mut subst = DMatrix::<T>::zeros(full, reduced);
    for i in 0..=n {
        subst[(i, i)] = T::one();
    }
    for i in 1..=n {
        for j in 0..i {
            subst[(n + i, j)] = -steps.h(i, j);
        }
    }
    subst[(2 * n + 1, n + 1)] = T::one();

    let objective = basis.f::<T>(PointIndex::Iter(n)) - basis.f::<T>(PointIndex::Star);
    let mut problem = SdpProblem::new(
        n,
        reduced,
        basis.value_len(),
        objective,
        ProblemKind::FixedStep {
            class: *class,
            radius,
            steps: steps.clone(),
        },
    );
    let mut full_constraints = interpolation_constraints(class, n)?;
    full_constraints.push(distance_constraint(&basis, radius));
    for c in full_constraints {
        problem.push(AffineConstraint {
            gram_coeff: c.gram_coeff.congruence(&subst),
            value_coeff: c.value_coeff,
            offset: c.offset,
            sense: c.sense,
            tag: c.tag,
        })?;
    }
    Ok(problem)
}

/// Performance-estimation SDP for the aggregated method family: the greedy
/// method's per-iteration equalities are collapsed into one weighted
/// equality per iteration, keeping the full `2N+2` basis.
pub fn build_ssep_pep<T: Float>(
    class: &ClassSpec<T>,
    n: usize,
    radius: T,
    steps: &StepCoefficients<T>,
) -> Result<SdpProblem<T>, PepError> {
    if steps.n() != n {
        return Err(PepError::DimensionMismatch(format!(
            "aggregation weights cover {} rows, expected {n}",
            steps.n()
        )));
    }
    if radius < T::zero() {
        return Err(PepError::NegativeRadius);
    }
    let basis = Basis::new(n);
    let objective = basis.f::<T>(PointIndex::Iter(n)) - basis.f::<T>(PointIndex::Star);
    let mut problem = SdpProblem::new(
        n,
        basis.gram_side(),
        basis.value_len(),
        objective,
        ProblemKind::Ssep {
            class: *class,
            radius,
        },
    );
    for c in interpolation_constraints(class, n)? {
        problem.push(c)?;
    }
    for i in 1..=n {
        let mut dir = DVector::<T>::zeros(basis.gram_side());
        for j in 0..i {
            dir += basis.g::<T>(PointIndex::Iter(j)) * steps.beta(i, j);
        }
        for j in 1..=i {
            let dx = basis.x::<T>(PointIndex::Iter(j)) - basis.x::<T>(PointIndex::Iter(0));
            dir += dx * steps.gamma(i, j);
        }
        let mut a = SymCoeff::zero(basis.gram_side());
        a.add_outer(T::one(), &basis.g(PointIndex::Iter(i)), &dir);
        problem.push(AffineConstraint {
            gram_coeff: a,
            value_coeff: DVector::zeros(basis.value_len()),
            offset: T::zero(),
            sense: Sense::Eq,
            tag: ConstraintTag::Aggregate(i),
        })?;
    }
    problem.push(distance_constraint(&basis, radius))?;
    Ok(problem)
}

/// Assembles `(G, F)` from a triplet set through the lifting
/// `P = [g_0 … g_N | x_1−x_0 … x_N−x_0 | x_*−x_0]`, `G = PᵀP`.
///
/// Requires the `*` entry. Scalar identities such as `⟨g_i, g_j⟩` and
/// `‖x_0 − x_*‖²` are reproduced exactly by the corresponding entries of `G`.
pub fn gram_from_set<T: Float>(set: &TripletSet<T>) -> Result<(DMatrix<T>, DVector<T>), PepError> {
    let star = set.star().ok_or(ClassError::MissingStar)?;
    let n = set.n();
    let d = set.dim();
    let basis = Basis::new(n);
    let mut p = DMatrix::<T>::zeros(d, basis.gram_side());
    let x0 = &set.iterate(0).x;
    for i in 0..=n {
        p.column_mut(i).copy_from(&set.iterate(i).g);
    }
    for i in 1..=n {
        p.column_mut(n + i).copy_from(&(&set.iterate(i).x - x0));
    }
    p.column_mut(2 * n + 1).copy_from(&(&star.x - x0));
    let gram = p.transpose() * &p;
    let mut values = DVector::zeros(basis.value_len());
    for i in 0..=n {
        values[i] = set.iterate(i).f;
    }
    values[n + 1] = star.f;
    Ok((gram, values))
}

/// Factorizes the solved Gram matrix back into an explicit worst-case
/// triplet set.
///
/// Eigenvalues below `1e−8·λ_max` are truncated; the surviving factor rows
/// give the point/gradient coordinates in the layout the problem was built
/// with, and the value vector supplies the function values. `x_0` is placed
/// at the origin (the witness is determined up to isometry).
pub fn reconstruct_worst_case<T: Float>(
    problem: &SdpProblem<T>,
    solution: &SdpSolution<T>,
) -> Result<TripletSet<T>, PepError> {
    if solution.status != SolveStatus::Optimal {
        return Err(PepError::NotOptimal(solution.status));
    }
    let side = problem.psd_side();
    assert_eq!(solution.gram.nrows(), side, "solution does not match problem");
    let (eigenvalues, eigenvectors) = crate::linalg::symmetric_eigen(&solution.gram);
    let lambda_max = eigenvalues.iter().fold(T::zero(), |a, &b| a.max(b));
    let psd_tol = fl::<T>(1e-6) * T::one().max(lambda_max);
    let truncation = fl::<T>(1e-8) * lambda_max;
    let mut kept: Vec<usize> = Vec::new();
    for (idx, &lam) in eigenvalues.iter().enumerate() {
        if lam < -psd_tol {
            return Err(PepError::PsdViolation(format!("{lam}")));
        }
        if lam > truncation {
            kept.push(idx);
        }
    }
    let d = kept.len().max(1);
    let mut p = DMatrix::<T>::zeros(d, side);
    for (row, &idx) in kept.iter().enumerate() {
        let scale = eigenvalues[idx].sqrt();
        for col in 0..side {
            p[(row, col)] = scale * eigenvectors[(col, idx)];
        }
    }

    let n = problem.n();
    let values = &solution.values;
    let column = |c: usize| -> DVector<T> { p.column(c).into_owned() };
    let zero = DVector::<T>::zeros(d);

    let (iterates, star) = match problem.kind() {
        ProblemKind::Gfom { .. } | ProblemKind::Ssep { .. } | ProblemKind::Custom => {
            let mut iterates = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let x = if i == 0 { zero.clone() } else { column(n + i) };
                iterates.push(Triplet::new(x, column(i), values[i]));
            }
            let star = Triplet::new(column(2 * n + 1), zero.clone(), values[n + 1]);
            (iterates, star)
        }
        ProblemKind::FixedStep { steps, .. } => {
            let grads: Vec<DVector<T>> = (0..=n).map(&column).collect();
            let mut iterates = Vec::with_capacity(n + 1);
            for i in 0..=n {
                let mut x = zero.clone();
                for (j, grad) in grads.iter().enumerate().take(i) {
                    x.axpy(-steps.h(i, j), grad, T::one());
                }
                iterates.push(Triplet::new(x, grads[i].clone(), values[i]));
            }
            let star = Triplet::new(column(n + 1), zero.clone(), values[n + 1]);
            (iterates, star)
        }
    };
    TripletSet::new(n, iterates, Some(star)).map_err(PepError::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::check_interpolable;
    use nalgebra::DVector;

    #[test]
    fn gfom_pep_shape_smooth_n1() {
        let p = build_gfom_pep(&ClassSpec::smooth(0.0, 1.0), 1, 1.0).unwrap();
        assert_eq!(p.psd_side(), 4);
        assert_eq!(p.value_len(), 3);
        let interp = p
            .constraints()
            .iter()
            .filter(|c| matches!(c.tag, ConstraintTag::Interp(_, _)))
            .count();
        let eq = p
            .constraints()
            .iter()
            .filter(|c| c.sense == Sense::Eq)
            .count();
        assert_eq!(interp, 6);
        assert_eq!(eq, 2); // orth(1,0) and span(1,1)
        assert!(p.constraint(ConstraintTag::InitDistance).is_some());
        assert_eq!(p.constraints().len(), 9);
    }

    #[test]
    fn gfom_pep_shape_nonsmooth_n0() {
        let p = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 0, 1.0).unwrap();
        assert_eq!(p.psd_side(), 2);
        let gb = p
            .constraints()
            .iter()
            .filter(|c| matches!(c.tag, ConstraintTag::GradBound(_)))
            .count();
        let ic = p
            .constraints()
            .iter()
            .filter(|c| matches!(c.tag, ConstraintTag::Interp(_, _)))
            .count();
        let eq = p
            .constraints()
            .iter()
            .filter(|c| c.sense == Sense::Eq)
            .count();
        assert_eq!((gb, ic, eq), (2, 2, 0));
        assert_eq!(p.constraints().len(), 5);
    }

    #[test]
    fn fixed_step_substitution_reduces_basis() {
        let h = CanonicalForm::new(vec![vec![1.0]]).unwrap();
        let p = build_fixed_step_pep(&ClassSpec::smooth(0.0, 1.0), 1, 1.0, &h).unwrap();
        assert_eq!(p.psd_side(), 3);
        assert_eq!(p.value_len(), 3);
        // No orthogonality/span equalities survive.
        assert!(p.constraints().iter().all(|c| c.sense == Sense::Le));
    }

    #[test]
    fn fixed_step_rejects_mismatched_depth() {
        let h = CanonicalForm::new(vec![vec![1.0]]).unwrap();
        assert!(matches!(
            build_fixed_step_pep(&ClassSpec::smooth(0.0, 1.0), 2, 1.0, &h),
            Err(PepError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ssep_rejects_mismatched_depth() {
        let steps = StepCoefficients::new(
            1,
            Default::default(),
            [((1usize, 1usize), 1.0)].into_iter().collect(),
        )
        .unwrap();
        assert!(matches!(
            build_ssep_pep(&ClassSpec::nonsmooth(1.0), 3, 1.0, &steps),
            Err(PepError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn problem_json_round_trip() {
        let p = build_gfom_pep(&ClassSpec::nonsmooth(1.0), 1, 1.0).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"gram_lower\""));
        assert!(json.contains("\"ic:*:0\""));
        let back: SdpProblem<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);

        let h = CanonicalForm::new(vec![vec![1.0]]).unwrap();
        let p = build_fixed_step_pep(&ClassSpec::smooth(0.0, 1.0), 1, 1.0, &h).unwrap();
        let back: SdpProblem<f64> = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn gram_reproduces_scalar_identities() {
        let x0 = DVector::<f64>::from_vec(vec![0.5, -1.0]);
        let g0 = DVector::from_vec(vec![1.0, 2.0]);
        let x1 = DVector::from_vec(vec![-0.25, 0.75]);
        let g1 = DVector::from_vec(vec![-2.0, 1.0]);
        let xs = DVector::from_vec(vec![0.0, 0.125]);
        let set = TripletSet::new(
            1,
            vec![
                Triplet::new(x0.clone(), g0.clone(), 3.0),
                Triplet::new(x1.clone(), g1.clone(), 2.0),
            ],
            Some(Triplet::new(xs.clone(), DVector::zeros(2), 0.0)),
        )
        .unwrap();
        let (gram, values) = gram_from_set(&set).unwrap();
        assert!((gram[(0, 1)] - g0.dot(&g1)).abs() < 1e-14);
        assert!((gram[(0, 2)] - g0.dot(&(&x1 - &x0))).abs() < 1e-14);
        assert!((gram[(3, 3)] - (&xs - &x0).norm_squared()).abs() < 1e-14);
        assert_eq!(values, DVector::from_vec(vec![3.0, 2.0, 0.0]));
    }

    // Residuals produced by the direct vector-space check and by evaluating
    // the lifted affine constraints agree, for both classes.
    #[test]
    fn constraint_evaluation_matches_direct_check() {
        let x0 = DVector::<f64>::from_vec(vec![1.0, 0.0, 2.0]);
        let g0 = DVector::from_vec(vec![0.5, 1.0, -0.25]);
        let x1 = DVector::from_vec(vec![0.0, -1.0, 1.0]);
        let g1 = DVector::from_vec(vec![1.0, 0.5, 0.75]);
        let xs = DVector::from_vec(vec![-0.5, 0.25, 0.0]);
        let set = TripletSet::new(
            1,
            vec![
                Triplet::new(x0, g0, 1.5),
                Triplet::new(x1, g1, 0.75),
            ],
            Some(Triplet::new(xs, DVector::zeros(3), -0.25)),
        )
        .unwrap();
        let (gram, values) = gram_from_set(&set).unwrap();
        for class in [ClassSpec::smooth(0.25, 2.0), ClassSpec::nonsmooth(3.0)] {
            // Huge tolerance so every inequality lands in the report path;
            // here we only compare residual routes.
            let report = check_interpolable(&class, &set, -1e9);
            for c in interpolation_constraints(&class, 1).unwrap() {
                let lifted = c.evaluate(&gram, &values);
                let direct = report
                    .violations
                    .iter()
                    .find(|v| v.tag == c.tag)
                    .map(|v| v.residual)
                    .unwrap();
                let scale: f64 = 1.0_f64.max(lifted.abs());
                assert!(
                    (lifted - direct).abs() <= 1e-12 * scale,
                    "{}: {} vs {}",
                    c.tag,
                    lifted,
                    direct
                );
            }
        }
    }
}
