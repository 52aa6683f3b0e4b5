//! Line-search and subspace-minimization primitives.

use nalgebra::{DMatrix, DVector};

use crate::{fl, Float};

use super::oracle::Oracle;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("line search requires a nonzero direction")]
    ZeroDirection,
    #[error("objective appears unbounded below along the search direction")]
    UnboundedBelow,
    #[error("cannot select an orthogonal subgradient: {0}")]
    NonDifferentiable(String),
    #[error("subspace search supports at most {cap} directions for general oracles, got {got}")]
    TooManyDirections { cap: usize, got: usize },
}

const MAX_LINE_EVALS: usize = 200;

/// Exact line search: returns `α` minimizing `f(x − α·dir)` over signed `α`.
///
/// Golden-section shrink on a doubling bracket. Stops once the bracket
/// certifies the one-dimensional minimizer to within `tol` relative accuracy
/// or the evaluation budget is reached. Expansion past `1e12` times the
/// initial scale reports an unbounded direction.
pub fn exact_line_search<T: Float>(
    oracle: &dyn Oracle<T>,
    x: &DVector<T>,
    dir: &DVector<T>,
    tol: T,
) -> Result<T, SearchError> {
    let dir_norm = dir.norm();
    if dir_norm == T::zero() {
        return Err(SearchError::ZeroDirection);
    }
    let unit = dir / dir_norm;
    let evals = std::cell::Cell::new(0usize);
    let eval = |t: T| {
        evals.set(evals.get() + 1);
        oracle.evaluate(&(x - &unit * t)).0
    };

    // Bracket the minimum, expanding geometrically from the start point.
    let scale0 = T::one().max(x.norm());
    let h = scale0 * fl::<T>(0.5);
    let f0 = eval(T::zero());
    let fr = eval(h);
    let fle = eval(-h);
    let (lo, hi);
    if f0 <= fr && f0 <= fle {
        lo = -h;
        hi = h;
    } else {
        // Walk downhill, doubling the step until the value turns back up.
        let sign = if fr < fle { T::one() } else { -T::one() };
        let mut prev_t = T::zero();
        let mut t = sign * h;
        let mut ft = if fr < fle { fr } else { fle };
        loop {
            let next = t * fl::<T>(2.0);
            if next.abs() > fl::<T>(1e12) * scale0 {
                return Err(SearchError::UnboundedBelow);
            }
            let fn_ = eval(next);
            if fn_ >= ft || evals.get() >= MAX_LINE_EVALS {
                if fn_ < ft {
                    return Err(SearchError::UnboundedBelow);
                }
                // Minimum lies in [prev_t, next] (ordered by sign).
                if sign > T::zero() {
                    lo = prev_t;
                    hi = next;
                } else {
                    lo = next;
                    hi = prev_t;
                }
                break;
            }
            prev_t = t;
            t = next;
            ft = fn_;
        }
    }

    // Golden-section shrink.
    let inv_phi = fl::<T>(0.618_033_988_749_894_9);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    let width_tol = |a: T, b: T| {
        let mid = (a.abs() + b.abs()) * fl::<T>(0.5);
        (b - a).abs() <= tol.max(fl(1e-14)) * T::one().max(mid)
    };
    while evals.get() < MAX_LINE_EVALS && !width_tol(a, b) {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(x2);
        }
    }
    let t_star = if f1 < f2 { x1 } else { x2 };
    Ok(t_star / dir_norm)
}

/// Exact minimization of `f` over `base + span(dirs)`.
///
/// Quadratic oracles are solved in closed form through the projected normal
/// equations; polyhedral oracles through exact vertex enumeration of the
/// epigraph linear program; anything else falls back to coordinate-wise
/// golden-section sweeps (stationarity up to `tol`, at most 50 sweeps).
pub fn subspace_minimize<T: Float>(
    oracle: &dyn Oracle<T>,
    base: &DVector<T>,
    dirs: &[DVector<T>],
    tol: T,
) -> Result<DVector<T>, SearchError> {
    if dirs.is_empty() {
        return Ok(base.clone());
    }
    let d = base.len();
    let m = dirs.len();
    let v = DMatrix::<T>::from_fn(d, m, |i, j| dirs[j][i]);

    if let Some(data) = oracle.quadratic_data() {
        // Orthonormalize the directions first: raw search direction sets
        // grow nearly dependent (momentum directions align), and the normal
        // equations on the raw set square that ill-conditioning.
        let mut basis_cols: Vec<DVector<T>> = Vec::new();
        for k in 0..m {
            let mut r = v.column(k).into_owned();
            let norm0 = r.norm();
            if norm0 == T::zero() {
                continue;
            }
            for _ in 0..2 {
                for b in &basis_cols {
                    let p = b.dot(&r);
                    r.axpy(-p, b, T::one());
                }
            }
            if r.norm() > fl::<T>(1e-12) * norm0 {
                r /= r.norm();
                basis_cols.push(r);
            }
        }
        if basis_cols.is_empty() {
            return Ok(base.clone());
        }
        let w = DMatrix::<T>::from_fn(d, basis_cols.len(), |i, j| basis_cols[j][i]);
        let wt_q_w = w.transpose() * &data.q * &w;
        let svd = wt_q_w.svd(true, true);
        let eps = fl::<T>(1e-13) * T::one().max(svd.singular_values.max());
        let mut x = base.clone();
        // One refinement pass clears the rounding of the first solve.
        for _ in 0..2 {
            let grad = &data.q * &x + &data.b;
            let rhs = -(w.transpose() * grad);
            let coeffs = svd
                .solve(&rhs, eps)
                .map_err(|e| SearchError::NonDifferentiable(e.to_string()))?;
            x += &w * coeffs;
        }
        return Ok(x);
    }

    if let Some((pieces, offsets)) = oracle.linear_pieces() {
        if let Some(point) = polyhedral_subspace_min(&pieces, &offsets, base, &v) {
            return Ok(point);
        }
    }

    coordinate_sweeps(oracle, base, dirs, tol)
}

/// Exact epigraph-LP solve of `min_z max_k (⟨w_k, base + Vz⟩ + c_k)` by
/// enumerating vertices: every optimal basic point is defined by `m+1`
/// active pieces.
fn polyhedral_subspace_min<T: Float>(
    pieces: &[DVector<T>],
    offsets: &[T],
    base: &DVector<T>,
    v: &DMatrix<T>,
) -> Option<DVector<T>> {
    let m = v.ncols();
    let k = pieces.len();
    if k < m + 1 || m > 6 {
        return None;
    }
    // Reduced pieces: value_k(z) = <red_k, z> + off_k.
    let reduced: Vec<DVector<T>> = pieces.iter().map(|w| v.transpose() * w).collect();
    let off: Vec<T> = (0..k)
        .map(|i| pieces[i].dot(base) + offsets[i])
        .collect();

    let eval_max = |z: &DVector<T>| -> T {
        let mut best = reduced[0].dot(z) + off[0];
        for i in 1..k {
            best = best.max(reduced[i].dot(z) + off[i]);
        }
        best
    };

    let mut best: Option<(T, DVector<T>)> = None;
    let mut combo = vec![0usize; m + 1];
    // Iterate over all (m+1)-subsets of pieces.
    fn next_combo(combo: &mut [usize], k: usize, init: &mut bool) -> bool {
        let r = combo.len();
        if *init {
            for (i, c) in combo.iter_mut().enumerate() {
                *c = i;
            }
            *init = false;
            return r <= k;
        }
        let mut i = r;
        while i > 0 {
            i -= 1;
            if combo[i] < k - (r - i) {
                combo[i] += 1;
                for j in i + 1..r {
                    combo[j] = combo[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    let mut init = true;
    while next_combo(&mut combo, k, &mut init) {
        // Solve: <red_c, z> - t = -off_c for each c in the combo.
        let mut a = DMatrix::<T>::zeros(m + 1, m + 1);
        let mut rhs = DVector::<T>::zeros(m + 1);
        for (row, &c) in combo.iter().enumerate() {
            for col in 0..m {
                a[(row, col)] = reduced[c][col];
            }
            a[(row, m)] = -T::one();
            rhs[row] = -off[c];
        }
        let Some(sol) = a.lu().solve(&rhs) else {
            continue;
        };
        let z = sol.rows(0, m).into_owned();
        let t = sol[m];
        if !t.is_finite() || z.iter().any(|c| !c.is_finite()) {
            continue;
        }
        let actual = eval_max(&z);
        let scale = T::one().max(actual.abs());
        // Feasible vertex: no piece exceeds t.
        if actual <= t + fl::<T>(1e-9) * scale {
            match &best {
                Some((bt, _)) if *bt <= t => {}
                _ => best = Some((t, z)),
            }
        }
    }
    best.map(|(_, z)| base + v * z)
}

fn coordinate_sweeps<T: Float>(
    oracle: &dyn Oracle<T>,
    base: &DVector<T>,
    dirs: &[DVector<T>],
    tol: T,
) -> Result<DVector<T>, SearchError> {
    const CAP: usize = 6;
    const MAX_SWEEPS: usize = 50;
    if dirs.len() > CAP {
        return Err(SearchError::TooManyDirections {
            cap: CAP,
            got: dirs.len(),
        });
    }
    let mut point = base.clone();
    for _ in 0..MAX_SWEEPS {
        for dir in dirs {
            if dir.norm() == T::zero() {
                continue;
            }
            let alpha = exact_line_search(oracle, &point, dir, tol)?;
            point -= dir * alpha;
        }
        let (_, g) = oracle.evaluate(&point);
        let g_scale = T::one().max(g.norm());
        let stationary = dirs.iter().all(|dir| {
            g.dot(dir).abs() <= tol * g_scale * T::one().max(dir.norm())
        });
        if stationary {
            break;
        }
    }
    Ok(point)
}

/// Picks a subgradient at `x` orthogonal to every direction in `dirs`,
/// returning it with its relative orthogonality residual.
///
/// The oracle's own subgradient is used when it already passes; otherwise,
/// for oracles exposing active pieces, the convex combination minimizing the
/// squared direction inner products is found by projected gradient over the
/// simplex.
pub fn select_orthogonal_subgradient<T: Float>(
    oracle: &dyn Oracle<T>,
    x: &DVector<T>,
    dirs: &[DVector<T>],
    tol: T,
) -> Result<(DVector<T>, T), SearchError> {
    let (_, g) = oracle.evaluate(x);
    let res = orthogonality_residual(&g, dirs);
    if res <= tol || dirs.is_empty() {
        return Ok((g, res));
    }
    let Some(active) = oracle.active_gradients(x, fl::<T>(1e-9) * T::one().max(g.norm())) else {
        if oracle.differentiable() {
            // The gradient is the only subgradient; report it with whatever
            // residual the upstream search left behind.
            return Ok((g, res));
        }
        return Err(SearchError::NonDifferentiable(format!(
            "oracle returned a subgradient with orthogonality residual {res} and exposes no active pieces"
        )));
    };
    if active.is_empty() {
        return Err(SearchError::NonDifferentiable(
            "oracle reported no active pieces".to_string(),
        ));
    }
    let combo = min_residual_combination(&active, dirs);
    let res = orthogonality_residual(&combo, dirs);
    Ok((combo, res))
}

/// `max_k |⟨g, d_k⟩| / (max(1, ‖g‖) · max(1, ‖d_k‖))`.
pub fn orthogonality_residual<T: Float>(g: &DVector<T>, dirs: &[DVector<T>]) -> T {
    let g_scale = T::one().max(g.norm());
    dirs.iter().fold(T::zero(), |acc, d| {
        acc.max(g.dot(d).abs() / (g_scale * T::one().max(d.norm())))
    })
}

/// Minimizes `‖Dᵀ G λ‖²` over the probability simplex: projected gradient
/// to locate the support, then an equality-constrained polish on it.
fn min_residual_combination<T: Float>(active: &[DVector<T>], dirs: &[DVector<T>]) -> DVector<T> {
    let m = active.len();
    let d = active[0].len();
    let g = DMatrix::<T>::from_fn(d, m, |i, j| active[j][i]);
    let dm = DMatrix::<T>::from_fn(d, dirs.len(), |i, j| dirs[j][i]);
    let a = dm.transpose() * &g; // residual map: a * lambda
    let hess = a.transpose() * &a;
    let lip = hess.amax() * fl::<T>(m as f64) + fl::<T>(1e-12);
    let step = T::one() / lip;
    let mut lambda = DVector::<T>::from_element(m, T::one() / fl::<T>(m as f64));
    for _ in 0..500 {
        let grad = &hess * &lambda * fl::<T>(2.0);
        lambda = project_simplex(&(lambda - grad * step));
    }

    // Polish: solve min ‖Aλ‖² with Σλ = 1 restricted to the detected
    // support; keep the result only if it stays in the simplex and improves.
    let support: Vec<usize> = (0..m)
        .filter(|&j| lambda[j] > fl::<T>(1e-8))
        .collect();
    if !support.is_empty() {
        let k = support.len();
        let mut kkt = DMatrix::<T>::zeros(k + 1, k + 1);
        for (r, &jr) in support.iter().enumerate() {
            for (c, &jc) in support.iter().enumerate() {
                kkt[(r, c)] = fl::<T>(2.0) * hess[(jr, jc)];
            }
            kkt[(r, k)] = T::one();
            kkt[(k, r)] = T::one();
        }
        let mut rhs = DVector::<T>::zeros(k + 1);
        rhs[k] = T::one();
        if let Some(sol) = kkt.lu().solve(&rhs) {
            if (0..k).all(|r| sol[r] >= T::zero()) {
                let mut polished = DVector::<T>::zeros(m);
                for (r, &jr) in support.iter().enumerate() {
                    polished[jr] = sol[r];
                }
                let before = (&a * &lambda).norm_squared();
                let after = (&a * &polished).norm_squared();
                if after <= before {
                    lambda = polished;
                }
            }
        }
    }
    &g * lambda
}

fn project_simplex<T: Float>(v: &DVector<T>) -> DVector<T> {
    let m = v.len();
    let mut sorted: Vec<T> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (i, &val) in sorted.iter().enumerate() {
        cumsum += val;
        let candidate = (cumsum - T::one()) / fl::<T>((i + 1) as f64);
        if val - candidate > T::zero() {
            theta = candidate;
        } else {
            break;
        }
    }
    DVector::from_fn(m, |i, _| (v[i] - theta).max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runners::oracle::{AbsValue, NesterovMax, PolyhedralMax, Quadratic};
    use nalgebra::{DMatrix, DVector};

    fn vec_of(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn line_search_quadratic() {
        let f = Quadratic::centered(DMatrix::identity(1, 1) * 2.0, &vec_of(&[0.0]), 0.0);
        let alpha =
            exact_line_search(&f, &vec_of(&[1.0]), &vec_of(&[1.0]), 1e-12).unwrap();
        assert!((alpha - 1.0).abs() < 1e-9, "{alpha}");
    }

    #[test]
    fn line_search_kink() {
        let f = AbsValue::new(1.0);
        let alpha =
            exact_line_search(&f, &vec_of(&[1.0]), &vec_of(&[1.0]), 1e-12).unwrap();
        assert!((alpha - 1.0).abs() < 1e-9, "{alpha}");
    }

    #[test]
    fn line_search_signed_direction() {
        // f(x) = (x-3)^2 + 1 from x = 0 along dir = -1: the point probed at
        // alpha is x - alpha*dir = alpha, so the signed minimizer is +3.
        let f = Quadratic::centered(
            DMatrix::identity(1, 1) * 2.0,
            &vec_of(&[3.0]),
            1.0,
        );
        let alpha =
            exact_line_search(&f, &vec_of(&[0.0]), &vec_of(&[-1.0]), 1e-12).unwrap();
        assert!((alpha - 3.0).abs() < 1e-7, "{alpha}");
    }

    #[test]
    fn line_search_rejects_unbounded() {
        // max of a single affine piece is unbounded below along its negative
        // gradient.
        let f = PolyhedralMax::new(vec![vec_of(&[1.0, 0.0])], vec![0.0]);
        let err = exact_line_search(&f, &vec_of(&[0.0, 0.0]), &vec_of(&[1.0, 0.0]), 1e-10);
        assert!(matches!(err, Err(SearchError::UnboundedBelow)));
    }

    #[test]
    fn subspace_minimize_coordinate() {
        let f = Quadratic::centered(DMatrix::identity(2, 2), &vec_of(&[0.0, 0.0]), 0.0);
        let p = subspace_minimize(&f, &vec_of(&[1.0, 1.0]), &[vec_of(&[1.0, 0.0])], 1e-12)
            .unwrap();
        assert!((p - vec_of(&[0.0, 1.0])).norm() < 1e-10);
    }

    #[test]
    fn subspace_minimize_diagonal_quadratic() {
        let q = DMatrix::from_diagonal(&vec_of(&[1.0, 2.0]));
        let f = Quadratic::centered(q, &vec_of(&[0.0, 0.0]), 0.0);
        let p = subspace_minimize(&f, &vec_of(&[1.0, 1.0]), &[vec_of(&[1.0, 1.0])], 1e-12)
            .unwrap();
        assert!((p - vec_of(&[0.0, 0.0])).norm() < 1e-10);
    }

    #[test]
    fn subspace_minimize_caps_general_direction_counts() {
        struct Opaque;
        impl Oracle<f64> for Opaque {
            fn dim(&self) -> usize {
                8
            }
            fn evaluate(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
                (x.norm_squared().sqrt(), x / x.norm().max(1e-12))
            }
        }
        let dirs: Vec<DVector<f64>> = (0..7)
            .map(|k| DVector::from_fn(8, |i, _| if i == k { 1.0 } else { 0.0 }))
            .collect();
        let err = subspace_minimize(&Opaque, &DVector::from_element(8, 1.0), &dirs, 1e-8);
        assert!(matches!(err, Err(SearchError::TooManyDirections { .. })));
    }

    #[test]
    fn subspace_minimize_empty_dirs() {
        let f = Quadratic::centered(DMatrix::identity(2, 2), &vec_of(&[0.0, 0.0]), 0.0);
        let base = vec_of(&[2.0, -1.0]);
        let p = subspace_minimize(&f, &base, &[], 1e-12).unwrap();
        assert_eq!(p, base);
    }

    #[test]
    fn subspace_minimize_polyhedral_exact() {
        // f = max(|x1 - 1|, |x2 + 0.5|) over the full 2-D space: min 0 at
        // (1, -0.5). Exercises the vertex-enumeration path, including the
        // diagonal ridge that defeats plain coordinate descent.
        let f = PolyhedralMax::symmetric(
            vec![vec_of(&[1.0, 1.0]), vec_of(&[1.0, -1.0])],
            &vec_of(&[1.0, -0.5]),
        );
        let p = subspace_minimize(
            &f,
            &vec_of(&[4.0, 3.0]),
            &[vec_of(&[1.0, 0.0]), vec_of(&[0.0, 1.0])],
            1e-12,
        )
        .unwrap();
        assert!((f.evaluate(&p).0).abs() < 1e-8, "min value {}", f.evaluate(&p).0);
    }

    #[test]
    fn orthogonal_subgradient_at_symmetric_kink() {
        // f(x) = max(x_1, x_2, ||x|| - 1) at the origin with direction
        // (1, -1): the symmetric combination (1/2, 1/2) is the orthogonal
        // choice.
        let f = NesterovMax::new(1.0, 2);
        let (g, res) = select_orthogonal_subgradient(
            &f,
            &vec_of(&[0.0, 0.0]),
            &[vec_of(&[1.0, -1.0])],
            1e-9,
        )
        .unwrap();
        assert!(res < 1e-7, "residual {res}");
        assert!((&g - vec_of(&[0.5, 0.5])).norm() < 1e-6, "{g}");
    }

    #[test]
    fn zero_subgradient_is_orthogonal() {
        let f = AbsValue::new(1.0);
        let (g, res) =
            select_orthogonal_subgradient(&f, &vec_of(&[0.0]), &[vec_of(&[1.0])], 1e-9)
                .unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(res, 0.0);
    }

    #[test]
    fn smooth_point_returns_gradient() {
        let f = Quadratic::centered(DMatrix::identity(2, 2), &vec_of(&[0.0, 0.0]), 0.0);
        // At the minimizer over span{e_1}, the gradient is orthogonal to e_1.
        let (g, res) = select_orthogonal_subgradient(
            &f,
            &vec_of(&[0.0, 1.0]),
            &[vec_of(&[1.0, 0.0])],
            1e-9,
        )
        .unwrap();
        assert!(res < 1e-12);
        assert!((g - vec_of(&[0.0, 1.0])).norm() < 1e-12);
    }
}
