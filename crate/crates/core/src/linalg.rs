//! Small dense symmetric eigensolver.
//!
//! Cyclic Jacobi with rotation accumulation. The matrices this crate
//! eigendecomposes are often low-rank-plus-rounding (dual slack matrices,
//! solved Gram matrices), whose clustered spectra defeat shifted-QR
//! implementations; Jacobi converges unconditionally on symmetric input and
//! resolves tiny eigenvalues to absolute accuracy near machine precision.

use nalgebra::{DMatrix, DVector};

use crate::{fl, Float};

/// Eigenvalues (unsorted) and the corresponding orthonormal eigenvector
/// columns of a symmetric matrix.
pub fn symmetric_eigen<T: Float>(m: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let s = m.nrows();
    assert_eq!(s, m.ncols(), "matrix must be square");
    let mut a = m.clone();
    let mut v = DMatrix::<T>::identity(s, s);
    if s <= 1 {
        return (a.diagonal(), v);
    }
    let scale = a.amax().max(T::one());
    let stop = T::default_epsilon() * scale;
    for _sweep in 0..60 {
        let mut off = T::zero();
        for i in 0..s {
            for j in (i + 1)..s {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..s {
            for q in (p + 1)..s {
                let apq = a[(p, q)];
                if apq.abs() <= stop * fl(1e-2) {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (fl::<T>(2.0) * apq);
                let t = if theta >= T::zero() {
                    T::one() / (theta + (theta * theta + T::one()).sqrt())
                } else {
                    -T::one() / (-theta + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                // Rotate rows and columns p, q of `a`.
                for k in 0..s {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..s {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..s {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Float>(m: &DMatrix<T>) -> T {
    let (values, _) = symmetric_eigen(m);
    values
        .iter()
        .fold(T::max_value().unwrap(), |acc, &x| acc.min(x))
}
