//! Canonical basis vectors of the Gram-matrix lifting.
//!
//! A set of triplets `{(x_i, g_i, f_i)}` over the index set `{*, 0, …, N}` is
//! lifted through the matrix `P = [g_0 … g_N | x_1−x_0 … x_N−x_0 | x_*−x_0]`
//! and the value vector `F = [f_0 … f_N f_*]`. Every scalar quantity of the
//! analysis then becomes linear in `G = PᵀP` and `F`, expressed through the
//! unit/zero coordinate vectors below.

use nalgebra::{DMatrix, DVector};

use crate::classes::PointIndex;
use crate::Float;

/// Coordinate-vector factory for a problem with `N` iterations.
///
/// Gram-space vectors have length `2N+2`, value-space vectors length `N+2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Basis {
    n: usize,
}

impl Basis {
    pub fn new(n: usize) -> Self {
        Basis { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side of the Gram matrix: `2N+2`.
    pub fn gram_side(&self) -> usize {
        2 * self.n + 2
    }

    /// Length of the value vector: `N+2`.
    pub fn value_len(&self) -> usize {
        self.n + 2
    }

    /// Coordinates of `x_i − x_0` in Gram space.
    ///
    /// `x_0` is the origin of the lifting, so its coordinate vector is zero;
    /// `x_i` (1 ≤ i ≤ N) occupies slot `N+i` and `x_*` the last slot.
    pub fn x<T: Float>(&self, idx: PointIndex) -> DVector<T> {
        let mut v = DVector::zeros(self.gram_side());
        match idx {
            PointIndex::Star => v[2 * self.n + 1] = T::one(),
            PointIndex::Iter(0) => {}
            PointIndex::Iter(i) => {
                assert!(i <= self.n, "iterate index {i} out of range 0..={}", self.n);
                v[self.n + i] = T::one();
            }
        }
        v
    }

    /// Coordinates of `g_i` in Gram space; `g_*` is the zero vector.
    pub fn g<T: Float>(&self, idx: PointIndex) -> DVector<T> {
        let mut v = DVector::zeros(self.gram_side());
        if let PointIndex::Iter(i) = idx {
            assert!(i <= self.n, "iterate index {i} out of range 0..={}", self.n);
            v[i] = T::one();
        }
        v
    }

    /// Coordinates of `f_i` in value space.
    pub fn f<T: Float>(&self, idx: PointIndex) -> DVector<T> {
        let mut v = DVector::zeros(self.value_len());
        match idx {
            PointIndex::Star => v[self.n + 1] = T::one(),
            PointIndex::Iter(i) => {
                assert!(i <= self.n, "iterate index {i} out of range 0..={}", self.n);
                v[i] = T::one();
            }
        }
        v
    }
}

/// Symmetric outer product `x ⊙ y = (xyᵀ + yxᵀ)/2`, so that
/// `⟨x, y⟩_A = Tr(A (x ⊙ y))` for symmetric `A`.
pub fn sym_outer<T: Float>(x: &DVector<T>, y: &DVector<T>) -> DMatrix<T> {
    let mut m = DMatrix::zeros(x.len(), y.len());
    add_sym_outer(&mut m, T::one(), x, y);
    m
}

/// In-place `m += coeff · (x ⊙ y)`, touching only the nonzero pattern.
///
/// The coordinate vectors of the lifting have at most two nonzero entries,
/// so constraint assembly stays linear in the number of constraints instead
/// of quadratic in the Gram side.
pub fn add_sym_outer<T: Float>(m: &mut DMatrix<T>, coeff: T, x: &DVector<T>, y: &DVector<T>) {
    let half = crate::fl::<T>(0.5) * coeff;
    for (i, &xi) in x.iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj == T::zero() {
                continue;
            }
            let add = half * xi * yj;
            m[(i, j)] += add;
            m[(j, i)] += add;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::PointIndex::{Iter, Star};

    #[test]
    fn layout_matches_gram_lifting() {
        let b = Basis::new(2);
        assert_eq!(b.gram_side(), 6);
        assert_eq!(b.value_len(), 4);

        assert_eq!(b.x::<f64>(Iter(0)), DVector::zeros(6));
        assert_eq!(b.x::<f64>(Iter(1))[3], 1.0);
        assert_eq!(b.x::<f64>(Iter(2))[4], 1.0);
        assert_eq!(b.x::<f64>(Star)[5], 1.0);
        assert_eq!(b.g::<f64>(Star), DVector::zeros(6));
        assert_eq!(b.g::<f64>(Iter(2))[2], 1.0);
        assert_eq!(b.f::<f64>(Iter(2))[2], 1.0);
        assert_eq!(b.f::<f64>(Star)[3], 1.0);
    }

    #[test]
    fn sym_outer_is_exactly_symmetric() {
        let x = DVector::<f64>::from_vec(vec![1.0, -2.0, 0.5]);
        let y = DVector::from_vec(vec![0.0, 3.0, 1.0]);
        let m = sym_outer(&x, &y);
        assert_eq!(m, m.transpose());
        // Tr(A (x⊙y)) reproduces ⟨x, y⟩_A for a symmetric A.
        let a = DMatrix::from_vec(3, 3, vec![2.0, 1.0, 0.0, 1.0, 4.0, -1.0, 0.0, -1.0, 3.0]);
        let lhs = (&a * &m).trace();
        let rhs = (x.transpose() * &a * y)[(0, 0)];
        assert!((lhs - rhs).abs() < 1e-14);
    }
}
