//! Function classes and their interpolation machinery.
//!
//! Two classes are supported: `L`-smooth `μ`-strongly convex functions
//! (`0 ≤ μ < L < ∞`) and convex functions with subgradients bounded in norm
//! by `M`. For both, finite sets of first-order triplets `(x_i, g_i, f_i)`
//! extend to a member of the class exactly when a finite system of
//! inequalities holds; those inequalities are exposed in two equivalent
//! forms: directly on the vectors ([`check_interpolable`]) and as affine
//! constraints on the Gram lifting ([`interpolation_constraints`]).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::{fl, Float};

/// Index into the point family `{*, 0, …, N}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointIndex {
    /// The optimal point `x_*`.
    Star,
    /// The iterate `x_i`.
    Iter(usize),
}

impl fmt::Display for PointIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointIndex::Star => write!(f, "*"),
            PointIndex::Iter(i) => write!(f, "{i}"),
        }
    }
}

impl FromStr for PointIndex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "*" {
            Ok(PointIndex::Star)
        } else {
            s.parse::<usize>()
                .map(PointIndex::Iter)
                .map_err(|_| format!("invalid point index `{s}`"))
        }
    }
}

/// Enumerates `{*, 0, …, N}` in that order.
pub fn index_set(n: usize) -> impl Iterator<Item = PointIndex> {
    std::iter::once(PointIndex::Star).chain((0..=n).map(PointIndex::Iter))
}

/// A function class with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSpec<T> {
    /// `L`-smooth, `μ`-strongly convex functions, `0 ≤ μ < L < ∞`.
    SmoothStronglyConvex {
        mu: T,
        #[serde(rename = "L")]
        smoothness: T,
    },
    /// Convex functions with every subgradient bounded in norm by `M > 0`.
    BoundedSubgradient {
        #[serde(rename = "M")]
        bound: T,
    },
}

impl<T: Float> ClassSpec<T> {
    pub fn smooth(mu: T, smoothness: T) -> Self {
        ClassSpec::SmoothStronglyConvex { mu, smoothness }
    }

    pub fn nonsmooth(bound: T) -> Self {
        ClassSpec::BoundedSubgradient { bound }
    }

    pub fn validate(&self) -> Result<(), ClassError> {
        match *self {
            ClassSpec::SmoothStronglyConvex { mu, smoothness } => {
                if !(mu >= T::zero() && mu < smoothness && smoothness.is_finite()) {
                    return Err(ClassError::InvalidSmoothClass {
                        mu: format!("{mu}"),
                        smoothness: format!("{smoothness}"),
                    });
                }
            }
            ClassSpec::BoundedSubgradient { bound } => {
                if !(bound > T::zero() && bound.is_finite()) {
                    return Err(ClassError::InvalidNonsmoothClass {
                        bound: format!("{bound}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// One first-order observation: a point, a subgradient there, and the value.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplet<T> {
    pub x: DVector<T>,
    pub g: DVector<T>,
    pub f: T,
}

impl<T: Float> Triplet<T> {
    pub fn new(x: DVector<T>, g: DVector<T>, f: T) -> Self {
        assert_eq!(x.len(), g.len(), "point and subgradient dimensions differ");
        Triplet { x, g, f }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Indexed family of triplets over `{*, 0, …, N}`.
///
/// All iterate entries `0..=N` must be present; the `*` entry is optional so
/// that plain interpolability questions can be posed on iterate-only data.
/// When the set acts as a worst-case witness, `g_* = 0` is expected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "repr::TripletSetRepr<T>",
    into = "repr::TripletSetRepr<T>",
    bound(serialize = "T: Float + Serialize", deserialize = "T: Float + Deserialize<'de>")
)]
pub struct TripletSet<T: Float> {
    n: usize,
    entries: BTreeMap<PointIndex, Triplet<T>>,
}

impl<T: Float> TripletSet<T> {
    pub fn new(
        n: usize,
        iterates: Vec<Triplet<T>>,
        star: Option<Triplet<T>>,
    ) -> Result<Self, ClassError> {
        if iterates.len() != n + 1 {
            return Err(ClassError::IncompleteIndexSet(format!(
                "expected {} iterate entries for N = {n}, got {}",
                n + 1,
                iterates.len()
            )));
        }
        let mut entries = BTreeMap::new();
        if let Some(star) = star {
            entries.insert(PointIndex::Star, star);
        }
        for (i, t) in iterates.into_iter().enumerate() {
            entries.insert(PointIndex::Iter(i), t);
        }
        let d = entries.values().next().map(|t| t.dim()).unwrap_or(0);
        for (idx, t) in &entries {
            if t.dim() != d {
                return Err(ClassError::DimensionMismatch(format!(
                    "entry {idx} has dimension {}, expected {d}",
                    t.dim()
                )));
            }
        }
        Ok(TripletSet { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.entries.values().next().map(|t| t.dim()).unwrap_or(0)
    }

    pub fn get(&self, idx: PointIndex) -> Option<&Triplet<T>> {
        self.entries.get(&idx)
    }

    pub fn iterate(&self, i: usize) -> &Triplet<T> {
        &self.entries[&PointIndex::Iter(i)]
    }

    pub fn star(&self) -> Option<&Triplet<T>> {
        self.entries.get(&PointIndex::Star)
    }

    /// Indices present in the set, `*` first.
    pub fn indices(&self) -> impl Iterator<Item = PointIndex> + '_ {
        self.entries.keys().copied()
    }
}

mod repr {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub struct TripletRepr<T> {
        pub x: Vec<T>,
        pub g: Vec<T>,
        pub f: T,
    }

    #[derive(Serialize, Deserialize)]
    pub struct TripletSetRepr<T> {
        #[serde(rename = "N")]
        pub n: usize,
        pub d: usize,
        pub entries: BTreeMap<String, TripletRepr<T>>,
    }

    impl<T: Float> From<TripletSet<T>> for TripletSetRepr<T> {
        fn from(set: TripletSet<T>) -> Self {
            let d = set.dim();
            let entries = set
                .entries
                .into_iter()
                .map(|(idx, t)| {
                    (
                        idx.to_string(),
                        TripletRepr {
                            x: t.x.iter().copied().collect(),
                            g: t.g.iter().copied().collect(),
                            f: t.f,
                        },
                    )
                })
                .collect();
            TripletSetRepr { n: set.n, d, entries }
        }
    }

    impl<T: Float> TryFrom<TripletSetRepr<T>> for TripletSet<T> {
        type Error = ClassError;

        fn try_from(repr: TripletSetRepr<T>) -> Result<Self, Self::Error> {
            let mut star = None;
            let mut iterates: Vec<Option<Triplet<T>>> = vec![None; repr.n + 1];
            for (key, t) in repr.entries {
                if t.x.len() != repr.d || t.g.len() != repr.d {
                    return Err(ClassError::DimensionMismatch(format!(
                        "entry {key} does not match declared dimension {}",
                        repr.d
                    )));
                }
                let triplet =
                    Triplet::new(DVector::from_vec(t.x), DVector::from_vec(t.g), t.f);
                match key.parse::<PointIndex>().map_err(ClassError::IncompleteIndexSet)? {
                    PointIndex::Star => star = Some(triplet),
                    PointIndex::Iter(i) if i <= repr.n => iterates[i] = Some(triplet),
                    PointIndex::Iter(i) => {
                        return Err(ClassError::IncompleteIndexSet(format!(
                            "entry index {i} exceeds N = {}",
                            repr.n
                        )))
                    }
                }
            }
            let iterates = iterates
                .into_iter()
                .enumerate()
                .map(|(i, t)| {
                    t.ok_or_else(|| {
                        ClassError::IncompleteIndexSet(format!("missing entry {i}"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            TripletSet::new(repr.n, iterates, star)
        }
    }
}

/// Constraint direction in `Tr(A G) + aᵀF + b {≤,=} 0` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// `Tr(A G) + aᵀF + b ≤ 0`
    Le,
    /// `Tr(A G) + aᵀF + b = 0`
    Eq,
}

/// Origin label of a constraint; unique within a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintTag {
    /// Interpolation inequality for the ordered pair `(i, j)`.
    Interp(PointIndex, PointIndex),
    /// Subgradient-norm bound at index `i`.
    GradBound(PointIndex),
    /// `⟨g_i, g_j⟩ = 0`, `j < i`.
    Orth(usize, usize),
    /// `⟨g_i, x_j − x_0⟩ = 0`, `1 ≤ j ≤ i`.
    Span(usize, usize),
    /// `‖x_0 − x_*‖² ≤ R²`.
    InitDistance,
    /// Aggregated subspace-search constraint for iteration `i`.
    Aggregate(usize),
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintTag::Interp(i, j) => write!(f, "ic:{i}:{j}"),
            ConstraintTag::GradBound(i) => write!(f, "gb:{i}"),
            ConstraintTag::Orth(i, j) => write!(f, "orth:{i}:{j}"),
            ConstraintTag::Span(i, j) => write!(f, "span:{i}:{j}"),
            ConstraintTag::InitDistance => write!(f, "init"),
            ConstraintTag::Aggregate(i) => write!(f, "agg:{i}"),
        }
    }
}

impl FromStr for ConstraintTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("invalid constraint tag `{s}`");
        match parts.as_slice() {
            ["init"] => Ok(ConstraintTag::InitDistance),
            ["ic", i, j] => Ok(ConstraintTag::Interp(i.parse()?, j.parse()?)),
            ["gb", i] => Ok(ConstraintTag::GradBound(i.parse()?)),
            ["orth", i, j] => Ok(ConstraintTag::Orth(
                i.parse().map_err(|_| bad())?,
                j.parse().map_err(|_| bad())?,
            )),
            ["span", i, j] => Ok(ConstraintTag::Span(
                i.parse().map_err(|_| bad())?,
                j.parse().map_err(|_| bad())?,
            )),
            ["agg", i] => Ok(ConstraintTag::Aggregate(i.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ConstraintTag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ConstraintTag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sparse symmetric coefficient matrix, stored as its upper triangle.
///
/// Constraint matrices of the lifting touch a handful of entries each, so
/// the sparse form keeps problem assembly linear in the number of
/// constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct SymCoeff<T> {
    side: usize,
    /// Entries `(i, j, A[(i,j)])` with `i ≤ j`; the `(j, i)` mirror is
    /// implied.
    entries: Vec<(usize, usize, T)>,
}

impl<T: Float> SymCoeff<T> {
    pub fn zero(side: usize) -> Self {
        SymCoeff {
            side,
            entries: Vec::new(),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Upper-triangle entries `(i ≤ j, value)`.
    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `coeff · (x ⊙ y)` for the symmetric outer product.
    pub fn add_outer(&mut self, coeff: T, x: &DVector<T>, y: &DVector<T>) {
        let half = fl::<T>(0.5) * coeff;
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                if yj == T::zero() {
                    continue;
                }
                let v = if i == j { coeff * xi * yj } else { half * xi * yj };
                self.push_entry(i.min(j), i.max(j), v);
            }
        }
    }

    fn push_entry(&mut self, i: usize, j: usize, v: T) {
        if v == T::zero() {
            return;
        }
        if let Some(slot) = self
            .entries
            .iter_mut()
            .find(|(ei, ej, _)| *ei == i && *ej == j)
        {
            slot.2 += v;
            if slot.2 == T::zero() {
                self.entries.retain(|(ei, ej, _)| !(*ei == i && *ej == j));
            }
        } else {
            self.entries.push((i, j, v));
        }
    }

    pub fn from_dense(m: &DMatrix<T>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                if m[(i, j)] != T::zero() {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        SymCoeff {
            side: m.nrows(),
            entries,
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.side, self.side);
        self.add_to_dense(&mut m, T::one());
        m
    }

    /// `m += mult · A`.
    pub fn add_to_dense(&self, m: &mut DMatrix<T>, mult: T) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += mult * v;
            if i != j {
                m[(j, i)] += mult * v;
            }
        }
    }

    /// `Tr(A X)` for symmetric `X`.
    pub fn inner(&self, x: &DMatrix<T>) -> T {
        let two = fl::<T>(2.0);
        let mut acc = T::zero();
        for &(i, j, v) in &self.entries {
            acc += if i == j { v * x[(i, i)] } else { two * v * x[(i, j)] };
        }
        acc
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        let two = fl::<T>(2.0);
        let mut acc = T::zero();
        for &(i, j, v) in &self.entries {
            acc += if i == j { v * v } else { two * v * v };
        }
        acc.sqrt()
    }

    /// Congruence `SᵀAS` into a new (typically smaller) basis.
    pub fn congruence(&self, s: &DMatrix<T>) -> SymCoeff<T> {
        let reduced = s.ncols();
        let mut dense = DMatrix::<T>::zeros(reduced, reduced);
        let half = fl::<T>(0.5);
        for &(i, j, v) in &self.entries {
            let ri = s.row(i);
            let rj = s.row(j);
            // Off-diagonal entries stand for the pair A_ij = A_ji; the
            // symmetrized update double-counts the diagonal ones.
            let w = if i == j { v * half } else { v };
            for a in 0..reduced {
                for b in 0..reduced {
                    dense[(a, b)] += w * (ri[a] * rj[b] + rj[a] * ri[b]);
                }
            }
        }
        SymCoeff::from_dense(&dense)
    }

    pub fn scale(&mut self, factor: T) {
        for entry in &mut self.entries {
            entry.2 *= factor;
        }
    }
}

/// Affine constraint `Tr(A G) + aᵀF + b {≤,=} 0` on the Gram lifting.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint<T> {
    /// Symmetric coefficient `A` on the Gram matrix.
    pub gram_coeff: SymCoeff<T>,
    /// Coefficient `a` on the value vector.
    pub value_coeff: DVector<T>,
    /// Scalar offset `b`.
    pub offset: T,
    pub sense: Sense,
    pub tag: ConstraintTag,
}

impl<T: Float> AffineConstraint<T> {
    /// Left-hand side `Tr(A G) + aᵀF + b` at a candidate `(G, F)`.
    pub fn evaluate(&self, gram: &DMatrix<T>, values: &DVector<T>) -> T {
        self.gram_coeff.inner(gram) + self.value_coeff.dot(values) + self.offset
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClassError {
    #[error("smooth strongly convex class requires 0 <= mu < L < inf, got mu = {mu}, L = {smoothness}")]
    InvalidSmoothClass { mu: String, smoothness: String },
    #[error("bounded subgradient class requires 0 < M < inf, got M = {bound}")]
    InvalidNonsmoothClass { bound: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("index set invalid: {0}")]
    IncompleteIndexSet(String),
    #[error("projection precondition violated at {tag}: residual {residual} exceeds tolerance {tol}")]
    PreconditionViolated {
        tag: String,
        residual: String,
        tol: String,
    },
    #[error("projection requires the optimal-point entry `*`")]
    MissingStar,
}

/// Interpolation conditions of `class` over `{*, 0, …, N}` as affine
/// constraints on `(G, F)`.
///
/// For the smooth strongly convex class this is one inequality per ordered
/// pair `i ≠ j`; diagonal pairs are identically `0 ≤ 0` and are not emitted.
/// For the bounded subgradient class, one norm bound `‖g_i‖² − M² ≤ 0` per
/// index plus one convexity inequality per ordered pair.
pub fn interpolation_constraints<T: Float>(
    class: &ClassSpec<T>,
    n: usize,
) -> Result<Vec<AffineConstraint<T>>, ClassError> {
    class.validate()?;
    let basis = Basis::new(n);
    let mut out = Vec::new();
    let side = basis.gram_side();
    match *class {
        ClassSpec::SmoothStronglyConvex { mu, smoothness } => {
            let l = smoothness;
            let coef = T::one() / (fl::<T>(2.0) * (T::one() - mu / l));
            for i in index_set(n) {
                for j in index_set(n) {
                    if i == j {
                        continue;
                    }
                    let dx = basis.x::<T>(i) - basis.x::<T>(j);
                    let dg = basis.g::<T>(i) - basis.g::<T>(j);
                    let mut a = SymCoeff::zero(side);
                    a.add_outer(T::one(), &basis.g(j), &dx);
                    a.add_outer(coef / l, &dg, &dg);
                    a.add_outer(coef * mu, &dx, &dx);
                    a.add_outer(-coef * fl::<T>(2.0) * mu / l, &dx, &dg);
                    out.push(AffineConstraint {
                        gram_coeff: a,
                        value_coeff: basis.f::<T>(j) - basis.f::<T>(i),
                        offset: T::zero(),
                        sense: Sense::Le,
                        tag: ConstraintTag::Interp(i, j),
                    });
                }
            }
        }
        ClassSpec::BoundedSubgradient { bound } => {
            for i in index_set(n) {
                let g = basis.g::<T>(i);
                let mut a = SymCoeff::zero(side);
                a.add_outer(T::one(), &g, &g);
                out.push(AffineConstraint {
                    gram_coeff: a,
                    value_coeff: DVector::zeros(basis.value_len()),
                    offset: -bound * bound,
                    sense: Sense::Le,
                    tag: ConstraintTag::GradBound(i),
                });
            }
            for i in index_set(n) {
                for j in index_set(n) {
                    if i == j {
                        continue;
                    }
                    let dx = basis.x::<T>(i) - basis.x::<T>(j);
                    let mut a = SymCoeff::zero(side);
                    a.add_outer(T::one(), &basis.g(j), &dx);
                    out.push(AffineConstraint {
                        gram_coeff: a,
                        value_coeff: basis.f::<T>(j) - basis.f::<T>(i),
                        offset: T::zero(),
                        sense: Sense::Le,
                        tag: ConstraintTag::Interp(i, j),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// One violated interpolation inequality.
#[derive(Debug, Clone)]
pub struct Violation<T> {
    pub tag: ConstraintTag,
    /// Left-hand-side value of the `≤ 0` inequality.
    pub residual: T,
    /// Magnitude scale the tolerance was applied against.
    pub scale: T,
}

/// Result of an interpolability check.
#[derive(Debug, Clone)]
pub struct InterpReport<T> {
    pub interpolable: bool,
    pub violations: Vec<Violation<T>>,
    /// Largest scaled residual observed across all inequalities.
    pub max_scaled_residual: T,
}

/// Checks whether `set` extends to a member of `class`, allowing an additive
/// slack of `tol` on each inequality.
///
/// The slack is scaled per pair by `max(1, |f|, ‖g‖², ‖x‖²)` over the
/// entries involved, and residuals are reported in the squared/inner-product
/// form in which the conditions are stated.
pub fn check_interpolable<T: Float>(
    class: &ClassSpec<T>,
    set: &TripletSet<T>,
    tol: T,
) -> InterpReport<T> {
    let mut violations = Vec::new();
    let mut max_scaled = T::zero();
    let entry_scale = |t: &Triplet<T>| -> T {
        let mut s = T::one();
        s = s.max(t.f.abs());
        s = s.max(t.g.norm_squared());
        s = s.max(t.x.norm_squared());
        s
    };
    let mut record = |tag: ConstraintTag, residual: T, scale: T| {
        let scaled = residual / scale;
        if scaled > max_scaled {
            max_scaled = scaled;
        }
        if residual > tol * scale {
            violations.push(Violation { tag, residual, scale });
        }
    };

    match *class {
        ClassSpec::SmoothStronglyConvex { mu, smoothness } => {
            let l = smoothness;
            let coef = T::one() / (fl::<T>(2.0) * (T::one() - mu / l));
            for i in set.indices() {
                for j in set.indices() {
                    if i == j {
                        continue;
                    }
                    let ti = set.get(i).unwrap();
                    let tj = set.get(j).unwrap();
                    let dx = &ti.x - &tj.x;
                    let dg = &ti.g - &tj.g;
                    let residual = tj.f - ti.f
                        + tj.g.dot(&dx)
                        + coef
                            * (dg.norm_squared() / l + mu * dx.norm_squared()
                                - fl::<T>(2.0) * mu / l * dx.dot(&dg));
                    let scale = entry_scale(ti).max(entry_scale(tj));
                    record(ConstraintTag::Interp(i, j), residual, scale);
                }
            }
        }
        ClassSpec::BoundedSubgradient { bound } => {
            for i in set.indices() {
                let ti = set.get(i).unwrap();
                let residual = ti.g.norm_squared() - bound * bound;
                let scale = T::one().max(ti.g.norm_squared()).max(bound * bound);
                record(ConstraintTag::GradBound(i), residual, scale);
            }
            for i in set.indices() {
                for j in set.indices() {
                    if i == j {
                        continue;
                    }
                    let ti = set.get(i).unwrap();
                    let tj = set.get(j).unwrap();
                    let residual = tj.f - ti.f + tj.g.dot(&(&ti.x - &tj.x));
                    let scale = entry_scale(ti).max(entry_scale(tj));
                    record(ConstraintTag::Interp(i, j), residual, scale);
                }
            }
        }
    }

    InterpReport {
        interpolable: violations.is_empty(),
        violations,
        max_scaled_residual: max_scaled,
    }
}

/// Orthogonal projection of `w` onto the span of `cols`, by modified
/// Gram-Schmidt with one re-orthogonalization pass.
fn project_onto_span<T: Float>(cols: &[&DVector<T>], w: &DVector<T>) -> DVector<T> {
    let d = w.len();
    let drop_tol = fl::<T>(1e4) * T::default_epsilon();
    let mut q: Vec<DVector<T>> = Vec::with_capacity(cols.len());
    for c in cols {
        let norm_c = c.norm();
        if norm_c == T::zero() {
            continue;
        }
        let mut r = (*c).clone();
        for _ in 0..2 {
            for qk in &q {
                let p = qk.dot(&r);
                r.axpy(-p, qk, T::one());
            }
        }
        if r.norm() > drop_tol * norm_c {
            r /= r.norm();
            q.push(r);
        }
    }
    let mut proj = DVector::zeros(d);
    for qk in &q {
        proj.axpy(qk.dot(w), qk, T::one());
    }
    proj
}

/// Projects a triplet set onto the gradient spans, preserving subgradients,
/// values, and every inner product `⟨g_j, x_i − x_j⟩` while weakly shrinking
/// all pairwise distances.
///
/// Requires the orthogonality structure `⟨g_i, g_j⟩ = 0` (`j < i`) and
/// `⟨g_i, x_j − x_0⟩ = 0` (`1 ≤ j ≤ i`), plus `g_* = 0`, each up to `tol`
/// relative slack. The output satisfies
/// `x̂_i ∈ x_0 + span{g_0, …, g_{i−1}}`, and `x̂_*` keeps only the component
/// of `x_* − x_0` orthogonal to the discarded residuals, so an interpolable
/// input stays interpolable for any contraction-preserving class.
pub fn contract_project<T: Float>(
    set: &TripletSet<T>,
    tol: T,
) -> Result<TripletSet<T>, ClassError> {
    let star = set.star().ok_or(ClassError::MissingStar)?;
    let n = set.n();
    let violation = |tag: String, residual: T, tol: T| ClassError::PreconditionViolated {
        tag,
        residual: format!("{residual}"),
        tol: format!("{tol}"),
    };

    let star_norm = star.g.norm();
    if star_norm > tol * T::one().max(star.x.norm()) {
        return Err(violation("g_*".to_string(), star_norm, tol));
    }
    let x0 = &set.iterate(0).x;
    for i in 1..=n {
        let gi = &set.iterate(i).g;
        for j in 0..i {
            let gj = &set.iterate(j).g;
            let ip = gi.dot(gj).abs();
            let scale = T::one().max(gi.norm() * gj.norm());
            if ip > tol * scale {
                return Err(violation(format!("orth:{i}:{j}"), ip, tol));
            }
        }
        for j in 1..=i {
            let dx = &set.iterate(j).x - x0;
            let ip = gi.dot(&dx).abs();
            let scale = T::one().max(gi.norm() * dx.norm());
            if ip > tol * scale {
                return Err(violation(format!("span:{i}:{j}"), ip, tol));
            }
        }
    }

    // x_i = x_0 - sum_{j<i} h_{i,j} g_j + v_i with v_i orthogonal to the span.
    let mut iterates = Vec::with_capacity(n + 1);
    let mut residuals: Vec<DVector<T>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = set.iterate(i);
        let grads: Vec<&DVector<T>> = (0..i).map(|j| &set.iterate(j).g).collect();
        let w = &t.x - x0;
        let proj = project_onto_span(&grads, &w);
        residuals.push(&w - &proj);
        iterates.push(Triplet::new(x0 + proj, t.g.clone(), t.f));
    }

    // x_* keeps only the component orthogonal to all residual directions.
    let w_star = &star.x - x0;
    let res_refs: Vec<&DVector<T>> = residuals.iter().collect();
    let r_star = &w_star - project_onto_span(&res_refs, &w_star);
    let new_star = Triplet::new(x0 + r_star, star.g.clone(), star.f);

    TripletSet::new(n, iterates, Some(new_star))
}
