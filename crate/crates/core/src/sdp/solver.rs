//! Dense primal-dual interior-point method.
//!
//! Problem form, as produced by the PEP builders:
//!
//! ```text
//! maximize    cᵀF
//! subject to  ⟨A_k, X⟩ + a_kᵀF + b_k ≤ 0   (inequality rows)
//!             ⟨A_k, X⟩ + a_kᵀF + b_k = 0   (equality rows)
//!             X ⪰ 0,   F free.
//! ```
//!
//! The dual pairs a PSD slack `Z = Σ_k y_k A_k` with multipliers `y_k ≥ 0`
//! on inequalities and sign-free on equalities, subject to
//! `Σ_k y_k a_k = c`, minimizing `−Σ_k y_k b_k`.
//!
//! The method is Mehrotra predictor-corrector with Nesterov-Todd scaling on
//! the PSD block and the standard `s/y` scaling on the inequality slacks.
//! Each step solves one quasi-definite KKT system in `(Δy, ΔF)` by dense LU
//! with a tiny static regularization and iterative refinement against the
//! unregularized matrix. No randomization or pivot reordering is involved,
//! so runs are deterministic.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::classes::Sense;
use crate::pep::SdpProblem;
use crate::{fl, Float};

use super::{SdpSolution, SolveStatus, SolverOptions};

struct Row<T> {
    /// Upper-triangle entries `(i, j, A[(i,j)])` with `i ≤ j`.
    entries: Vec<(usize, usize, T)>,
    vec: DVector<T>,
    offset: T,
    eq: bool,
    scale: T,
}

impl<T: Float> Row<T> {
    fn inner_gram(&self, x: &DMatrix<T>) -> T {
        let two = fl::<T>(2.0);
        let mut acc = T::zero();
        for &(i, j, v) in &self.entries {
            if i == j {
                acc += v * x[(i, i)];
            } else {
                acc += two * v * x[(i, j)];
            }
        }
        acc
    }

    fn scatter_into(&self, m: &mut DMatrix<T>, weight: T) {
        for &(i, j, v) in &self.entries {
            m[(i, j)] += weight * v;
            if i != j {
                m[(j, i)] += weight * v;
            }
        }
    }
}

struct Direction<T> {
    dy: DVector<T>,
    df: DVector<T>,
    dx: DMatrix<T>,
    dz: DMatrix<T>,
    ds: DVector<T>,
}

/// Nesterov-Todd scaling data for the PSD block.
struct NtScaling<T> {
    r: DMatrix<T>,
    r_inv: DMatrix<T>,
    lambda: DVector<T>,
}

fn nt_scaling<T: Float>(x: &DMatrix<T>, z: &DMatrix<T>) -> Option<NtScaling<T>> {
    let lx = Cholesky::new(x.clone())?;
    let lz = Cholesky::new(z.clone())?;
    let m = lz.l().transpose() * lx.l();
    let svd = m.svd(true, true);
    let u = svd.u.as_ref()?;
    let vt = svd.v_t.as_ref()?;
    let side = x.nrows();
    let mut sqrt_inv = DMatrix::<T>::zeros(side, side);
    for i in 0..side {
        let sv = svd.singular_values[i];
        if sv <= T::zero() {
            return None;
        }
        sqrt_inv[(i, i)] = T::one() / sv.sqrt();
    }
    // R = L_x V Σ^{-1/2}; R⁻¹ = Σ^{-1/2} Uᵀ L_zᵀ. Then RᵀZR = R⁻¹XR⁻ᵀ = Σ.
    let r = lx.l() * vt.transpose() * &sqrt_inv;
    let r_inv = &sqrt_inv * u.transpose() * lz.l().transpose();
    Some(NtScaling {
        r,
        r_inv,
        lambda: svd.singular_values,
    })
}

/// Largest `α` keeping `X + α ΔX ⪰ 0`, or `None` for unbounded.
fn max_step_psd<T: Float>(x: &DMatrix<T>, dx: &DMatrix<T>) -> Option<T> {
    let chol = Cholesky::new(x.clone())?;
    let a1 = chol.l().solve_lower_triangular(dx)?;
    let a2 = chol.l().solve_lower_triangular(&a1.transpose())?;
    let sym = (&a2 + a2.transpose()) * fl::<T>(0.5);
    let min_eig = crate::linalg::min_eigenvalue(&sym);
    if min_eig >= T::zero() {
        return Some(T::max_value().unwrap());
    }
    Some(-T::one() / min_eig)
}

fn max_step_vec<T: Float>(v: &DVector<T>, dv: &DVector<T>, active: &[bool]) -> T {
    let mut alpha = T::max_value().unwrap();
    for k in 0..v.len() {
        if active[k] && dv[k] < T::zero() {
            alpha = alpha.min(-v[k] / dv[k]);
        }
    }
    alpha
}

fn svec_len(side: usize) -> usize {
    side * (side + 1) / 2
}

fn pack_svec<T: Float>(m: &DMatrix<T>, out: &mut [T]) {
    let sqrt2 = fl::<T>(2.0).sqrt();
    let side = m.nrows();
    let mut idx = 0;
    for i in 0..side {
        for j in i..side {
            out[idx] = if i == j { m[(i, i)] } else { sqrt2 * m[(i, j)] };
            idx += 1;
        }
    }
}

/// Subtracts the symmetric matrix encoded by `packed` from `m`.
fn unpack_svec_sub<T: Float>(packed: &DVector<T>, m: &mut DMatrix<T>) {
    let inv_sqrt2 = T::one() / fl::<T>(2.0).sqrt();
    let side = m.nrows();
    let mut idx = 0;
    for i in 0..side {
        for j in i..side {
            if i == j {
                m[(i, i)] -= packed[idx];
            } else {
                let v = packed[idx] * inv_sqrt2;
                m[(i, j)] -= v;
                m[(j, i)] -= v;
            }
            idx += 1;
        }
    }
}

pub(super) fn solve<T: Float>(problem: &SdpProblem<T>, opts: SolverOptions<T>) -> SdpSolution<T> {
    let p = problem.value_len();
    let c = problem.objective().clone();
    let mut rows: Vec<Row<T>> = problem
        .constraints()
        .iter()
        .map(|con| {
            let mut scale = con
                .gram_coeff
                .norm()
                .max(con.value_coeff.norm())
                .max(con.offset.abs());
            if !opts.scaling || scale <= T::default_epsilon() {
                scale = T::one();
            }
            Row {
                entries: con
                    .gram_coeff
                    .entries()
                    .iter()
                    .map(|&(i, j, v)| (i, j, v / scale))
                    .collect(),
                vec: &con.value_coeff / scale,
                offset: con.offset / scale,
                eq: con.sense == Sense::Eq,
                scale,
            }
        })
        .collect();

    // Drop the PSD block entirely when no constraint touches it.
    let side = if rows.iter().all(|r| r.entries.is_empty()) {
        0
    } else {
        problem.psd_side()
    };
    if side == 0 {
        for r in &mut rows {
            r.entries.clear();
        }
    }

    let k_rows = rows.len();
    let ineq: Vec<bool> = rows.iter().map(|r| !r.eq).collect();
    let q = ineq.iter().filter(|&&b| b).count();
    let state = IpmState {
        problem,
        rows,
        c,
        side,
        p,
        q,
        ineq,
        k_rows,
        opts,
    };
    state.run()
}

struct IpmState<'a, T: Float> {
    problem: &'a SdpProblem<T>,
    rows: Vec<Row<T>>,
    c: DVector<T>,
    side: usize,
    p: usize,
    q: usize,
    ineq: Vec<bool>,
    k_rows: usize,
    opts: SolverOptions<T>,
}

impl<'a, T: Float> IpmState<'a, T> {
    fn run(&self) -> SdpSolution<T> {
        let side = self.side;
        let kr = self.k_rows;
        let p = self.p;
        let one = T::one();

        if side == 0 && self.q == 0 {
            return self.solve_pure_equalities();
        }

        let mut x = DMatrix::<T>::identity(side, side);
        let mut z = DMatrix::<T>::identity(side, side);
        let mut f = DVector::<T>::zeros(p);
        let mut s = DVector::<T>::from_element(kr, one);
        let mut y = DVector::<T>::from_element(kr, one);
        for k in 0..kr {
            if !self.ineq[k] {
                s[k] = T::zero();
                y[k] = T::zero();
            }
        }

        let mut status = SolveStatus::MaxIterations;
        let mut iterations = 0;
        let mut stall_count = 0usize;
        let mut no_progress = 0usize;
        let mut best_merit = T::max_value().unwrap();
        let mut last = self.diagnostics(&x, &f, &s, &y, &z);

        for iter in 0..self.opts.max_iterations {
            iterations = iter;
            let diag = self.diagnostics(&x, &f, &s, &y, &z);
            if !diag.finite {
                status = SolveStatus::NumericalFailure;
                break;
            }
            last = diag;
            if last.pres <= self.opts.feas_tol
                && last.dres <= self.opts.feas_tol
                && last.rel_gap <= self.opts.gap_tol
            {
                status = SolveStatus::Optimal;
                break;
            }
            let huge = fl::<T>(1e10);
            if last.dobj < -huge || last.pobj > huge {
                status = SolveStatus::Infeasible;
                break;
            }

            // Keep the complementarity target from dropping far below what
            // the gap tolerance requires: directions computed at much
            // smaller mu lose accuracy without helping termination.
            let degree = fl::<T>((side + self.q) as f64);
            let gap_scale = T::one().max((last.pobj.abs() + last.dobj.abs()) * fl(0.5));
            let mu_floor = fl::<T>(0.6) * self.opts.gap_tol * gap_scale / degree;
            let step = self.newton_step(&x, &f, &s, &y, &z, mu_floor);
            let Some((dir, alpha_p, alpha_d)) = step else {
                status = SolveStatus::NumericalFailure;
                break;
            };
            if std::env::var_os("SSEP_IPM_TRACE").is_some() {
                eprintln!(
                    "iter {iter}: pres {:.2e} dres {:.2e} gap {:.2e} ap {:.2e} ad {:.2e}",
                    last.pres, last.dres, last.rel_gap, alpha_p, alpha_d
                );
            }
            // Stall detection: collapsed step lengths, or a long run of
            // iterations without any improvement of the convergence merit.
            let merit = last.pres.max(last.dres).max(last.rel_gap);
            if merit < best_merit {
                best_merit = merit;
                no_progress = 0;
            } else {
                no_progress += 1;
            }
            if alpha_p.max(alpha_d) < fl(1e-7) {
                stall_count += 1;
            } else {
                stall_count = 0;
            }
            if stall_count >= 3 || no_progress >= 15 {
                status = SolveStatus::NumericalFailure;
                break;
            }

            x += dir.dx * alpha_p;
            f += dir.df * alpha_p;
            s += dir.ds * alpha_p;
            y += dir.dy * alpha_d;
            z += dir.dz * alpha_d;
            for k in 0..kr {
                if !self.ineq[k] {
                    s[k] = T::zero();
                }
            }
        }

        if status == SolveStatus::MaxIterations {
            // One last check at the final iterate.
            let diag = self.diagnostics(&x, &f, &s, &y, &z);
            if diag.finite {
                last = diag;
                if last.pres <= self.opts.feas_tol
                    && last.dres <= self.opts.feas_tol
                    && last.rel_gap <= self.opts.gap_tol
                {
                    status = SolveStatus::Optimal;
                }
            }
        }

        let mut dual = BTreeMap::new();
        for (k, con) in self.problem.constraints().iter().enumerate() {
            dual.insert(con.tag, y[k] / self.rows[k].scale);
        }
        let gram = if self.side == 0 {
            DMatrix::zeros(self.problem.psd_side(), self.problem.psd_side())
        } else {
            x
        };
        SdpSolution {
            gram,
            values: f,
            dual,
            primal_objective: last.pobj,
            dual_objective: last.dobj,
            status,
            iterations: iterations + 1,
            primal_residual: last.pres,
            dual_residual: last.dres,
            relative_gap: last.rel_gap,
            feas_tol: self.opts.feas_tol,
        }
    }

    /// Equality-only problems with no cone blocks reduce to two linear
    /// least-squares systems: `ĀF = −b` for the primal and `Āᵀy = c` for
    /// the dual.
    fn solve_pure_equalities(&self) -> SdpSolution<T> {
        let kr = self.k_rows;
        let p = self.p;
        let a = DMatrix::<T>::from_fn(kr, p, |k, col| self.rows[k].vec[col]);
        let b = DVector::<T>::from_fn(kr, |k, _| self.rows[k].offset);
        let eps = fl::<T>(1e-13) * T::one().max(a.amax());
        let f = a
            .clone()
            .svd(true, true)
            .solve(&(-&b), eps)
            .unwrap_or_else(|_| DVector::zeros(p));
        let y = a
            .transpose()
            .svd(true, true)
            .solve(&self.c, eps)
            .unwrap_or_else(|_| DVector::zeros(kr));
        let x = DMatrix::zeros(self.problem.psd_side(), self.problem.psd_side());
        let s = DVector::zeros(kr);
        let diag = self.diagnostics(&x, &f, &s, &y, &DMatrix::zeros(0, 0));
        let status = if diag.finite
            && diag.pres <= self.opts.feas_tol
            && diag.dres <= self.opts.feas_tol
            && diag.rel_gap <= self.opts.gap_tol
        {
            SolveStatus::Optimal
        } else if diag.finite && diag.pres > self.opts.feas_tol {
            SolveStatus::Infeasible
        } else {
            SolveStatus::NumericalFailure
        };
        let mut dual = BTreeMap::new();
        for (k, con) in self.problem.constraints().iter().enumerate() {
            dual.insert(con.tag, y[k] / self.rows[k].scale);
        }
        SdpSolution {
            gram: x,
            values: f,
            dual,
            primal_objective: diag.pobj,
            dual_objective: diag.dobj,
            status,
            iterations: 1,
            primal_residual: diag.pres,
            dual_residual: diag.dres,
            relative_gap: diag.rel_gap,
            feas_tol: self.opts.feas_tol,
        }
    }

    fn residuals(
        &self,
        x: &DMatrix<T>,
        f: &DVector<T>,
        s: &DVector<T>,
        y: &DVector<T>,
    ) -> (DVector<T>, DMatrix<T>, DVector<T>) {
        let kr = self.k_rows;
        let mut rp = DVector::<T>::zeros(kr);
        for (k, row) in self.rows.iter().enumerate() {
            rp[k] = -row.offset - row.inner_gram(x) - row.vec.dot(f) - s[k];
        }
        let mut rd_mat = DMatrix::<T>::zeros(self.side, self.side);
        for (k, row) in self.rows.iter().enumerate() {
            row.scatter_into(&mut rd_mat, y[k]);
        }
        let mut rf = self.c.clone();
        for (k, row) in self.rows.iter().enumerate() {
            rf.axpy(-y[k], &row.vec, T::one());
        }
        (rp, rd_mat, rf)
    }

    fn diagnostics(
        &self,
        x: &DMatrix<T>,
        f: &DVector<T>,
        s: &DVector<T>,
        y: &DVector<T>,
        z: &DMatrix<T>,
    ) -> Diagnostics<T> {
        let (rp, mut rd_mat, rf) = self.residuals(x, f, s, y);
        rd_mat -= z;
        let pobj = self.c.dot(f);
        let mut dobj = T::zero();
        for (k, row) in self.rows.iter().enumerate() {
            dobj -= y[k] * row.offset;
        }
        let mut pres = T::zero();
        for k in 0..self.k_rows {
            pres = pres.max(rp[k].abs() / (T::one() + self.rows[k].offset.abs()));
        }
        let obj_scale = T::one() + self.c.amax();
        let rd_norm = if self.side == 0 { T::zero() } else { rd_mat.amax() };
        let rf_norm = if rf.is_empty() { T::zero() } else { rf.amax() };
        let dres = rd_norm.max(rf_norm) / obj_scale;
        let gap_scale = T::one().max((pobj.abs() + dobj.abs()) * fl(0.5));
        let rel_gap = (pobj - dobj).abs() / gap_scale;
        let finite = pobj.is_finite() && dobj.is_finite() && pres.is_finite() && dres.is_finite();
        Diagnostics {
            pobj,
            dobj,
            pres,
            dres,
            rel_gap,
            finite,
        }
    }

    /// One predictor-corrector step. Returns the combined direction and the
    /// primal/dual step lengths.
    #[allow(clippy::too_many_lines)]
    fn newton_step(
        &self,
        x: &DMatrix<T>,
        f: &DVector<T>,
        s: &DVector<T>,
        y: &DVector<T>,
        z: &DMatrix<T>,
        mu_floor: T,
    ) -> Option<(Direction<T>, T, T)> {
        let side = self.side;
        let kr = self.k_rows;
        let p = self.p;
        let one = T::one();
        let two = fl::<T>(2.0);

        let (rp, rd0, rf) = self.residuals(x, f, s, y);
        let mut rd_mat = rd0;
        rd_mat -= z; // RD = Σ y A − Z

        let nt = if side > 0 {
            Some(nt_scaling(x, z)?)
        } else {
            None
        };

        // Barrier parameter over both cone blocks.
        let mut compl = s.dot(y);
        if let Some(nt) = &nt {
            for i in 0..side {
                compl += nt.lambda[i] * nt.lambda[i];
            }
        }
        let degree = fl::<T>((side + self.q) as f64);
        if degree == T::zero() {
            return None;
        }
        let mu = compl / degree;

        // Scaled constraint matrices T_k = Rᵀ A_k R, packed for the Schur
        // product, plus the scaled dual residual.
        let (tsv, rd_scaled) = if let Some(nt) = &nt {
            let r_rows: Vec<DVector<T>> =
                (0..side).map(|i| nt.r.row(i).transpose()).collect();
            let sv = svec_len(side);
            let mut tsv = DMatrix::<T>::zeros(kr, sv);
            let mut packed = vec![T::zero(); sv];
            let mut tk = DMatrix::<T>::zeros(side, side);
            for (k, row) in self.rows.iter().enumerate() {
                tk.fill(T::zero());
                for &(i, j, v) in &row.entries {
                    if i == j {
                        tk.ger(v, &r_rows[i], &r_rows[i], one);
                    } else {
                        tk.ger(v, &r_rows[i], &r_rows[j], one);
                        tk.ger(v, &r_rows[j], &r_rows[i], one);
                    }
                }
                pack_svec(&tk, &mut packed);
                for (col, &val) in packed.iter().enumerate() {
                    tsv[(k, col)] = val;
                }
            }
            let rd_scaled = nt.r.transpose() * &rd_mat * &nt.r;
            (Some(tsv), rd_scaled)
        } else {
            (None, DMatrix::zeros(0, 0))
        };

        // KKT matrix: [[M + D, -Abar], [Abarᵀ, 0]] with static regularization.
        let dim = kr + p;
        let mut kkt0 = DMatrix::<T>::zeros(dim, dim);
        if let Some(tsv) = &tsv {
            let m = tsv * tsv.transpose();
            kkt0.view_mut((0, 0), (kr, kr)).copy_from(&m);
        }
        for k in 0..kr {
            if self.ineq[k] {
                kkt0[(k, k)] += s[k] / y[k];
            }
            for col in 0..p {
                kkt0[(k, kr + col)] = -self.rows[k].vec[col];
                kkt0[(kr + col, k)] = self.rows[k].vec[col];
            }
        }
        // Ruiz equilibration tames the wide dynamic range of the slack
        // diagonal near convergence; refinement then runs against the
        // original matrix.
        let mut equil = DVector::<T>::from_element(dim, T::one());
        let mut kkt_eq = kkt0.clone();
        for _ in 0..5 {
            let mut r = DVector::<T>::from_element(dim, T::one());
            for i in 0..dim {
                let mut m = T::zero();
                for j in 0..dim {
                    m = m.max(kkt_eq[(i, j)].abs());
                }
                if m > T::zero() {
                    r[i] = T::one() / m.sqrt();
                }
            }
            for i in 0..dim {
                for j in 0..dim {
                    kkt_eq[(i, j)] = kkt_eq[(i, j)] * r[i] * r[j];
                }
            }
            for i in 0..dim {
                equil[i] *= r[i];
            }
        }
        let delta = fl::<T>(1e-12);
        for i in 0..kr {
            kkt_eq[(i, i)] += delta;
        }
        for i in kr..dim {
            kkt_eq[(i, i)] -= delta;
        }
        let lu = kkt_eq.lu();

        // Solves against the equilibrated factorization with iterative
        // refinement on the unscaled, unregularized system.
        let solve_kkt = |rhs: &DVector<T>| -> Option<DVector<T>> {
            let scaled_solve = |r: &DVector<T>| -> Option<DVector<T>> {
                let rs = DVector::from_fn(dim, |i, _| r[i] * equil[i]);
                let xs = lu.solve(&rs)?;
                Some(DVector::from_fn(dim, |i, _| xs[i] * equil[i]))
            };
            let rhs_scale = T::one().max(rhs.amax());
            let mut sol = scaled_solve(rhs)?;
            let mut best = sol.clone();
            let mut best_res = T::max_value().unwrap();
            for _ in 0..4 {
                let res = rhs - &kkt0 * &sol;
                let res_norm = res.amax();
                if res_norm < best_res {
                    best = sol.clone();
                    best_res = res_norm;
                }
                if res_norm <= fl::<T>(1e2) * T::default_epsilon() * rhs_scale {
                    break;
                }
                let corr = scaled_solve(&res)?;
                sol += corr;
            }
            let final_res = (rhs - &kkt0 * &sol).amax();
            if final_res > best_res {
                sol = best;
            }
            Some(sol)
        };

        // Direction for a given centering target and corrector terms. All
        // PSD-block algebra happens in the scaled space, where the
        // complementarity target and the dual update are of comparable
        // magnitude; only the final congruences leave it.
        let build_direction = |sigma_mu: T,
                               corr_psd: Option<&DMatrix<T>>,
                               corr_lp: Option<&DVector<T>>|
         -> Option<Direction<T>> {
            let nt_ref = nt.as_ref();
            // E ∘ (σμ I − Λ² − corr) − RᵀRD R, the scaled-space aggregate
            // entering both the Schur right-hand side and the ΔX recovery.
            let agg_scaled = nt_ref.map(|nt| {
                let mut m = DMatrix::<T>::zeros(side, side);
                for u in 0..side {
                    m[(u, u)] = sigma_mu - nt.lambda[u] * nt.lambda[u];
                }
                if let Some(corr) = corr_psd {
                    m -= corr;
                }
                for u in 0..side {
                    for v in 0..side {
                        m[(u, v)] *= two / (nt.lambda[u] + nt.lambda[v]);
                    }
                }
                m -= &rd_scaled;
                m
            });

            let mut rhs = DVector::<T>::zeros(dim);
            if let (Some(agg), Some(tsv)) = (&agg_scaled, &tsv) {
                let mut packed = vec![T::zero(); svec_len(side)];
                pack_svec(agg, &mut packed);
                let contrib = tsv * DVector::from_vec(packed);
                for k in 0..kr {
                    rhs[k] = contrib[k];
                }
            }
            for k in 0..kr {
                rhs[k] -= rp[k];
                if self.ineq[k] {
                    let mut cmp = (sigma_mu - y[k] * s[k]) / y[k];
                    if let Some(corr) = corr_lp {
                        cmp -= corr[k] / y[k];
                    }
                    rhs[k] += cmp;
                }
            }
            for col in 0..p {
                rhs[kr + col] = rf[col];
            }
            let sol = solve_kkt(&rhs)?;
            let dy = sol.rows(0, kr).into_owned();
            let df = sol.rows(kr, p).into_owned();

            let mut dz = rd_mat.clone();
            for (k, row) in self.rows.iter().enumerate() {
                row.scatter_into(&mut dz, dy[k]);
            }
            let dx = if let (Some(agg), Some(nt), Some(tsv)) = (&agg_scaled, nt_ref, &tsv) {
                // ΔX̃ = agg − Σ_k Δy_k T_k, assembled in scaled space, then
                // ΔX = R ΔX̃ Rᵀ.
                let dz_scaled_packed = tsv.transpose() * &dy;
                let mut dx_scaled = agg.clone();
                unpack_svec_sub(&dz_scaled_packed, &mut dx_scaled);
                &nt.r * dx_scaled * nt.r.transpose()
            } else {
                DMatrix::zeros(side, side)
            };
            let mut ds = DVector::<T>::zeros(kr);
            for k in 0..kr {
                if self.ineq[k] {
                    let mut cmp = (sigma_mu - y[k] * s[k]) / y[k];
                    if let Some(corr) = corr_lp {
                        cmp -= corr[k] / y[k];
                    }
                    ds[k] = cmp - s[k] / y[k] * dy[k];
                }
            }
            Some(Direction { dy, df, dx, dz, ds })
        };

        let step_lengths = |dir: &Direction<T>| -> Option<(T, T)> {
            let mut ap = max_step_vec(s, &dir.ds, &self.ineq);
            let mut ad = max_step_vec(y, &dir.dy, &self.ineq);
            if side > 0 {
                ap = ap.min(max_step_psd(x, &dir.dx)?);
                ad = ad.min(max_step_psd(z, &dir.dz)?);
            }
            Some((ap, ad))
        };

        // Predictor.
        let aff = build_direction(T::zero(), None, None)?;
        let (ap_aff, ad_aff) = step_lengths(&aff)?;
        let ap_aff = ap_aff.min(one);
        let ad_aff = ad_aff.min(one);

        // Centering weight from the affine progress.
        let mut compl_aff = T::zero();
        for k in 0..kr {
            if self.ineq[k] {
                compl_aff += (s[k] + ap_aff * aff.ds[k]) * (y[k] + ad_aff * aff.dy[k]);
            }
        }
        if side > 0 {
            let xa = x + &aff.dx * ap_aff;
            let za = z + &aff.dz * ad_aff;
            compl_aff += (&xa * &za).trace();
        }
        let mu_aff = compl_aff / degree;
        let ratio = (mu_aff / mu).max(T::zero());
        let sigma = (ratio * ratio * ratio).max(fl(1e-12)).min(one);
        let target = (sigma * mu).max(mu_floor.min(mu));

        // Corrector terms in the scaled space.
        let corr_psd = nt.as_ref().map(|nt| {
            let dx_s = &nt.r_inv * &aff.dx * nt.r_inv.transpose();
            let dz_s = nt.r.transpose() * &aff.dz * &nt.r;
            let prod = &dx_s * &dz_s;
            (&prod + prod.transpose()) * fl::<T>(0.5)
        });
        let mut corr_lp = DVector::<T>::zeros(kr);
        for k in 0..kr {
            if self.ineq[k] {
                corr_lp[k] = aff.ds[k] * aff.dy[k];
            }
        }

        let dir = build_direction(target, corr_psd.as_ref(), Some(&corr_lp))?;
        let (ap_max, ad_max) = step_lengths(&dir)?;

        if std::env::var_os("SSEP_IPM_TRACE").is_some() {
            // Block-equation residuals of the computed direction.
            let mut r1 = T::zero();
            for (k, row) in self.rows.iter().enumerate() {
                let lhs = row.inner_gram(&dir.dx) + row.vec.dot(&dir.df) + dir.ds[k];
                r1 = r1.max((lhs - rp[k]).abs());
            }
            let mut rd_block = rd_mat.clone();
            for (k, row) in self.rows.iter().enumerate() {
                row.scatter_into(&mut rd_block, dir.dy[k]);
            }
            rd_block -= &dir.dz;
            let mut r3 = self.c.clone() * T::zero();
            for (k, row) in self.rows.iter().enumerate() {
                r3.axpy(dir.dy[k], &row.vec, T::one());
            }
            let r3_norm = (&r3 - &rf).amax();
            eprintln!(
                "    dir residuals: primal {:.2e} dualmat {:.2e} dualvec {:.2e} sigma {:.2e} mu {:.2e} apaff {:.2e} adaff {:.2e}",
                r1,
                rd_block.amax(),
                r3_norm,
                sigma,
                mu,
                ap_aff,
                ad_aff
            );
        }

        // The second-order correction occasionally overshoots close to the
        // boundary; a plain centering step recovers.
        let (dir, ap_max, ad_max) =
            if ap_max.min(ad_max) < fl::<T>(0.1) * ap_aff.min(ad_aff) {
                let target_safe = (sigma.max(fl(0.5)) * mu).max(mu_floor.min(mu));
                let fallback = build_direction(target_safe, None, None)?;
                let (ap_f, ad_f) = step_lengths(&fallback)?;
                if ap_f.min(ad_f) > ap_max.min(ad_max) {
                    (fallback, ap_f, ad_f)
                } else {
                    (dir, ap_max, ad_max)
                }
            } else {
                (dir, ap_max, ad_max)
            };

        // A common step length for both sides: the degenerate geometry of
        // performance problems (both optimal blocks rank-deficient) makes
        // independently stepped iterates see-saw off the central path.
        let frac = fl::<T>(0.99);
        let alpha = (frac * ap_max.min(ad_max)).min(one);
        Some((dir, alpha, alpha))
    }
}

struct Diagnostics<T> {
    pobj: T,
    dobj: T,
    pres: T,
    dres: T,
    rel_gap: T,
    finite: bool,
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;

    use crate::basis::sym_outer;
    use crate::classes::{AffineConstraint, ConstraintTag, Sense, SymCoeff};
    use crate::pep::{ProblemKind, SdpProblem};
    use crate::sdp::{solve, SolveStatus, SolverOptions};

    fn unit(side: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(side);
        v[i] = 1.0;
        v
    }

    fn custom(n: usize, side: usize, value_len: usize, obj: Vec<f64>) -> SdpProblem<f64> {
        SdpProblem::new(
            n,
            side,
            value_len,
            DVector::from_vec(obj),
            ProblemKind::Custom,
        )
    }

    #[test]
    fn objective_capped_by_single_inequality() {
        // maximize F_0 - F_1 subject to F_0 - F_1 <= 0 and G >= 0.
        let mut prob = custom(0, 2, 2, vec![1.0, -1.0]);
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::zero(2),
            value_coeff: DVector::from_vec(vec![1.0, -1.0]),
            offset: 0.0,
            sense: Sense::Le,
            tag: ConstraintTag::Interp(
                crate::classes::PointIndex::Iter(0),
                crate::classes::PointIndex::Star,
            ),
        })
        .unwrap();
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.primal_objective.abs() < 1e-7, "{}", sol.primal_objective);
    }

    #[test]
    fn rank_one_boundary_solution() {
        // maximize F_0 with F_0 = G_01, G_00 <= 1, G_11 <= 1: optimum G = all
        // ones, value 1.
        let mut prob = custom(0, 2, 1, vec![1.0]);
        let e0 = unit(2, 0);
        let e1 = unit(2, 1);
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::from_dense(&sym_outer(&e0, &e1)),
            value_coeff: DVector::from_vec(vec![-1.0]),
            offset: 0.0,
            sense: Sense::Eq,
            tag: ConstraintTag::Aggregate(1),
        })
        .unwrap();
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::from_dense(&sym_outer(&e0, &e0)),
            value_coeff: DVector::zeros(1),
            offset: -1.0,
            sense: Sense::Le,
            tag: ConstraintTag::GradBound(crate::classes::PointIndex::Iter(0)),
        })
        .unwrap();
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::from_dense(&sym_outer(&e1, &e1)),
            value_coeff: DVector::zeros(1),
            offset: -1.0,
            sense: Sense::Le,
            tag: ConstraintTag::GradBound(crate::classes::PointIndex::Star),
        })
        .unwrap();
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-7);
        assert!((sol.gram[(0, 1)] - 1.0).abs() < 1e-6);
        // Duals: maximize G_01 under diagonal caps has value (y0 + y1) with
        // y0 = y1 = 1/2.
        let d0 = sol.dual[&ConstraintTag::GradBound(crate::classes::PointIndex::Iter(0))];
        let d1 = sol.dual[&ConstraintTag::GradBound(crate::classes::PointIndex::Star)];
        assert!((d0 - 0.5).abs() < 1e-6, "{d0}");
        assert!((d1 - 0.5).abs() < 1e-6, "{d1}");
    }

    #[test]
    fn equality_pins_free_variable() {
        // maximize F_0 with F_0 + 2 = 0: value -2, equality dual 1.
        let mut prob = custom(0, 1, 1, vec![1.0]);
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::zero(1),
            value_coeff: DVector::from_vec(vec![1.0]),
            offset: 2.0,
            sense: Sense::Eq,
            tag: ConstraintTag::Aggregate(1),
        })
        .unwrap();
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective + 2.0).abs() < 1e-7);
        assert!((sol.dual[&ConstraintTag::Aggregate(1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn contradictory_rows_reported_infeasible() {
        // F_0 <= -1 and -F_0 <= -1 cannot hold together.
        let mut prob = custom(0, 1, 1, vec![1.0]);
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::zero(1),
            value_coeff: DVector::from_vec(vec![1.0]),
            offset: 1.0,
            sense: Sense::Le,
            tag: ConstraintTag::Aggregate(1),
        })
        .unwrap();
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::zero(1),
            value_coeff: DVector::from_vec(vec![-1.0]),
            offset: 1.0,
            sense: Sense::Le,
            tag: ConstraintTag::Aggregate(2),
        })
        .unwrap();
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn iteration_cap_respected() {
        let mut prob = custom(0, 2, 1, vec![1.0]);
        let e0 = unit(2, 0);
        let e1 = unit(2, 1);
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::from_dense(&sym_outer(&e0, &e1)),
            value_coeff: DVector::from_vec(vec![-1.0]),
            offset: 0.0,
            sense: Sense::Eq,
            tag: ConstraintTag::Aggregate(1),
        })
        .unwrap();
        prob.push(AffineConstraint {
            gram_coeff: SymCoeff::from_dense(&(sym_outer(&e0, &e0) + sym_outer(&e1, &e1))),
            value_coeff: DVector::zeros(1),
            offset: -2.0,
            sense: Sense::Le,
            tag: ConstraintTag::InitDistance,
        })
        .unwrap();
        let opts = SolverOptions {
            max_iterations: 2,
            ..SolverOptions::default()
        };
        let sol = solve(&prob, &opts);
        assert_eq!(sol.status, SolveStatus::MaxIterations);
        assert!(sol.iterations <= 2);
    }
}
