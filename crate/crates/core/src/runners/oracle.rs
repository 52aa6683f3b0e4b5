//! First-order oracles and built-in test problems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{fl, Float};

use super::RunError;

/// Closed-form data for `f(x) = xᵀQx/2 + bᵀx + c`.
#[derive(Debug, Clone)]
pub struct QuadraticData<T> {
    pub q: DMatrix<T>,
    pub b: DVector<T>,
    pub c: T,
}

/// Black-box access to a convex function: values and one subgradient per
/// query, plus optional structure that enables exact subproblem solves.
pub trait Oracle<T: Float> {
    fn dim(&self) -> usize;

    /// Value and one subgradient at `x`.
    fn evaluate(&self, x: &DVector<T>) -> (T, DVector<T>);

    /// Quadratic structure, when available; enables closed-form subspace
    /// minimization.
    fn quadratic_data(&self) -> Option<QuadraticData<T>> {
        None
    }

    /// Gradients of all pieces active at `x` within `tol`, for max-type
    /// functions; enables subgradient selection at kinks.
    fn active_gradients(&self, _x: &DVector<T>, _tol: T) -> Option<Vec<DVector<T>>> {
        None
    }

    /// Global affine pieces `(w_k, c_k)` with `f = max_k ⟨w_k, x⟩ + c_k`,
    /// when the function is polyhedral; enables exact low-dimensional
    /// subspace minimization.
    fn linear_pieces(&self) -> Option<(Vec<DVector<T>>, Vec<T>)> {
        None
    }

    /// Whether the function is differentiable everywhere, so the returned
    /// subgradient is the unique one.
    fn differentiable(&self) -> bool {
        false
    }

    /// Minimum value, when known.
    fn optimal_value(&self) -> Option<T> {
        None
    }
}

/// `f(x) = xᵀQx/2 + bᵀx + c` with `Q ⪰ 0`.
#[derive(Debug, Clone)]
pub struct Quadratic<T> {
    q: DMatrix<T>,
    b: DVector<T>,
    c: T,
    fstar: T,
}

impl<T: Float> Quadratic<T> {
    pub fn new(q: DMatrix<T>, b: DVector<T>, c: T) -> Self {
        assert_eq!(q.nrows(), q.ncols());
        assert_eq!(q.nrows(), b.len());
        // f* via a least-squares stationary point; for Q >= 0 with b in the
        // range of Q the minimum is attained there.
        let svd = q.clone().svd(true, true);
        let eps = fl::<T>(1e-12) * T::one().max(q.amax());
        let xstar = svd.solve(&(-&b), eps).unwrap_or_else(|_| DVector::zeros(b.len()));
        let fstar = b.dot(&xstar) * fl::<T>(0.5) + c;
        Quadratic { q, b, c, fstar }
    }

    /// Quadratic `f(x) = (x − center)ᵀ Q (x − center) / 2 + c`.
    pub fn centered(q: DMatrix<T>, center: &DVector<T>, c: T) -> Self {
        let b = -(&q * center);
        let shift = (center.transpose() * &q * center)[(0, 0)] * fl::<T>(0.5);
        Quadratic::new(q, b, c + shift)
    }

    pub fn minimizer(&self) -> DVector<T> {
        let svd = self.q.clone().svd(true, true);
        let eps = fl::<T>(1e-12) * T::one().max(self.q.amax());
        svd.solve(&(-&self.b), eps)
            .unwrap_or_else(|_| DVector::zeros(self.b.len()))
    }
}

impl<T: Float> Oracle<T> for Quadratic<T> {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn evaluate(&self, x: &DVector<T>) -> (T, DVector<T>) {
        let qx = &self.q * x;
        let value = qx.dot(x) * fl::<T>(0.5) + self.b.dot(x) + self.c;
        (value, qx + &self.b)
    }

    fn quadratic_data(&self) -> Option<QuadraticData<T>> {
        Some(QuadraticData {
            q: self.q.clone(),
            b: self.b.clone(),
            c: self.c,
        })
    }

    fn differentiable(&self) -> bool {
        true
    }

    fn optimal_value(&self) -> Option<T> {
        Some(self.fstar)
    }
}

/// One-dimensional `f(x) = M·|x|`.
#[derive(Debug, Clone)]
pub struct AbsValue<T> {
    scale: T,
}

impl<T: Float> AbsValue<T> {
    pub fn new(scale: T) -> Self {
        AbsValue { scale }
    }
}

impl<T: Float> Oracle<T> for AbsValue<T> {
    fn dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &DVector<T>) -> (T, DVector<T>) {
        let v = x[0];
        let g = if v > T::zero() {
            self.scale
        } else if v < T::zero() {
            -self.scale
        } else {
            T::zero()
        };
        (self.scale * v.abs(), DVector::from_vec(vec![g]))
    }

    fn active_gradients(&self, x: &DVector<T>, tol: T) -> Option<Vec<DVector<T>>> {
        let v = x[0];
        let mut out = Vec::new();
        if self.scale * v >= self.scale * v.abs() - tol {
            out.push(DVector::from_vec(vec![self.scale]));
        }
        if -self.scale * v >= self.scale * v.abs() - tol {
            out.push(DVector::from_vec(vec![-self.scale]));
        }
        Some(out)
    }

    fn linear_pieces(&self) -> Option<(Vec<DVector<T>>, Vec<T>)> {
        Some((
            vec![
                DVector::from_vec(vec![self.scale]),
                DVector::from_vec(vec![-self.scale]),
            ],
            vec![T::zero(), T::zero()],
        ))
    }

    fn optimal_value(&self) -> Option<T> {
        Some(T::zero())
    }
}

/// `f(x) = M · max(x_1, …, x_d, ‖x‖ − 1)`: the classical function that no
/// first-order method can minimize faster than `1/√N` in high dimension.
#[derive(Debug, Clone)]
pub struct NesterovMax<T> {
    bound: T,
    dim: usize,
}

impl<T: Float> NesterovMax<T> {
    pub fn new(bound: T, dim: usize) -> Self {
        assert!(dim >= 1);
        NesterovMax { bound, dim }
    }

    fn pieces(&self, x: &DVector<T>) -> (T, usize) {
        // Returns (max piece value before scaling by M, index); index == dim
        // designates the norm piece.
        let mut best = x[0];
        let mut idx = 0;
        for i in 1..self.dim {
            if x[i] > best {
                best = x[i];
                idx = i;
            }
        }
        let norm_piece = x.norm() - T::one();
        if norm_piece > best {
            (norm_piece, self.dim)
        } else {
            (best, idx)
        }
    }

    pub fn minimizer(&self) -> DVector<T> {
        let d = fl::<T>(self.dim as f64).sqrt();
        DVector::from_element(self.dim, -T::one() / (d + T::one()))
    }
}

impl<T: Float> Oracle<T> for NesterovMax<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &DVector<T>) -> (T, DVector<T>) {
        let (value, idx) = self.pieces(x);
        let mut g = DVector::zeros(self.dim);
        if idx == self.dim {
            let norm = x.norm();
            if norm > T::zero() {
                g = x * (self.bound / norm);
            }
        } else {
            g[idx] = self.bound;
        }
        (self.bound * value, g)
    }

    fn active_gradients(&self, x: &DVector<T>, tol: T) -> Option<Vec<DVector<T>>> {
        let (value, _) = self.pieces(x);
        let mut out = Vec::new();
        for i in 0..self.dim {
            if x[i] >= value - tol {
                let mut g = DVector::zeros(self.dim);
                g[i] = self.bound;
                out.push(g);
            }
        }
        let norm = x.norm();
        if norm - T::one() >= value - tol && norm > fl::<T>(1e-14) {
            out.push(x * (self.bound / norm));
        }
        Some(out)
    }

    fn optimal_value(&self) -> Option<T> {
        let d = fl::<T>(self.dim as f64).sqrt();
        Some(-self.bound / (d + T::one()))
    }
}

/// `f(x) = max_k ⟨a_k, x⟩ + c_k`.
#[derive(Debug, Clone)]
pub struct PolyhedralMax<T: Float> {
    rows: Vec<DVector<T>>,
    offsets: Vec<T>,
    fstar: Option<T>,
}

impl<T: Float> PolyhedralMax<T> {
    pub fn new(rows: Vec<DVector<T>>, offsets: Vec<T>) -> Self {
        assert_eq!(rows.len(), offsets.len());
        assert!(!rows.is_empty());
        PolyhedralMax {
            rows,
            offsets,
            fstar: None,
        }
    }

    /// Attaches a known optimal value, for gap reporting in experiments.
    pub fn with_optimal_value(mut self, fstar: T) -> Self {
        self.fstar = Some(fstar);
        self
    }

    /// Symmetric instance `f(x) = max_k |⟨a_k, x − center⟩|`: zero is in the
    /// convex hull of the active gradients at `center`, so the minimum value
    /// is 0 there.
    pub fn symmetric(directions: Vec<DVector<T>>, center: &DVector<T>) -> Self {
        let mut rows = Vec::new();
        let mut offsets = Vec::new();
        for a in directions {
            offsets.push(-a.dot(center));
            rows.push(a.clone());
            offsets.push(a.dot(center));
            rows.push(-a);
        }
        PolyhedralMax::new(rows, offsets).with_optimal_value(T::zero())
    }

    /// Largest gradient norm across pieces, a valid subgradient bound.
    pub fn gradient_bound(&self) -> T {
        self.rows
            .iter()
            .fold(T::zero(), |acc, r| acc.max(r.norm()))
    }
}

impl<T: Float> Oracle<T> for PolyhedralMax<T> {
    fn dim(&self) -> usize {
        self.rows[0].len()
    }

    fn evaluate(&self, x: &DVector<T>) -> (T, DVector<T>) {
        let mut best = self.rows[0].dot(x) + self.offsets[0];
        let mut idx = 0;
        for k in 1..self.rows.len() {
            let v = self.rows[k].dot(x) + self.offsets[k];
            if v > best {
                best = v;
                idx = k;
            }
        }
        (best, self.rows[idx].clone())
    }

    fn active_gradients(&self, x: &DVector<T>, tol: T) -> Option<Vec<DVector<T>>> {
        let value = self.evaluate(x).0;
        let mut out = Vec::new();
        for k in 0..self.rows.len() {
            if self.rows[k].dot(x) + self.offsets[k] >= value - tol {
                out.push(self.rows[k].clone());
            }
        }
        Some(out)
    }

    fn linear_pieces(&self) -> Option<(Vec<DVector<T>>, Vec<T>)> {
        Some((self.rows.clone(), self.offsets.clone()))
    }

    fn optimal_value(&self) -> Option<T> {
        self.fstar
    }
}

/// JSON description of a built-in problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSpec<T> {
    Quadratic {
        q: Vec<Vec<T>>,
        b: Vec<T>,
        c: Option<T>,
    },
    Abs {
        scale: T,
    },
    NesterovMax {
        bound: T,
        dim: usize,
    },
    PolyhedralMax {
        rows: Vec<Vec<T>>,
        offsets: Vec<T>,
        optimal_value: Option<T>,
    },
}

impl<T: Float> OracleSpec<T> {
    pub fn build(&self) -> Result<Box<dyn Oracle<T>>, RunError> {
        match self {
            OracleSpec::Quadratic { q, b, c } => {
                let d = b.len();
                if q.len() != d || q.iter().any(|row| row.len() != d) {
                    return Err(RunError::InvalidParameters(
                        "quadratic matrix shape does not match b".into(),
                    ));
                }
                let mut m = DMatrix::<T>::zeros(d, d);
                for (i, row) in q.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        m[(i, j)] = *v;
                    }
                }
                let sym = (&m + m.transpose()) * fl::<T>(0.5);
                Ok(Box::new(Quadratic::new(
                    sym,
                    DVector::from_vec(b.clone()),
                    c.unwrap_or_else(T::zero),
                )))
            }
            OracleSpec::Abs { scale } => Ok(Box::new(AbsValue::new(*scale))),
            OracleSpec::NesterovMax { bound, dim } => {
                Ok(Box::new(NesterovMax::new(*bound, *dim)))
            }
            OracleSpec::PolyhedralMax {
                rows,
                offsets,
                optimal_value,
            } => {
                if rows.len() != offsets.len() || rows.is_empty() {
                    return Err(RunError::InvalidParameters(
                        "polyhedral pieces and offsets must align".into(),
                    ));
                }
                let mut p = PolyhedralMax::new(
                    rows.iter().map(|r| DVector::from_vec(r.clone())).collect(),
                    offsets.clone(),
                );
                if let Some(f) = optimal_value {
                    p = p.with_optimal_value(*f);
                }
                Ok(Box::new(p))
            }
        }
    }
}
