//! Reference primal-dual interior-point solver (HKM direction, Mehrotra
//! predictor-corrector, dense block linear algebra).
//!
//! The problem is kept in the inequality form
//! `min q.y  s.t.  S_b(y) = A0_b + sum_t y_t A_{b,t}  PSD for every block b`,
//! with the dual multiplier `Z_b PSD` satisfying `sum_b <A_{b,t}, Z_b> = q_t`
//! and complementarity `Z_b S_b = 0` at the optimum. The slack `S` is kept as
//! an independent iterate so the start can be infeasible; both residuals
//! contract linearly with the step lengths.

use nalgebra::{DMatrix, DVector};

use super::{reduce, SdpError, SolveReport, SolveStatus, SolverOptions};
use crate::moments::{LinearSdp, MomentSolution};
use crate::scalar::Scalar;

/// `<A, W>` for a symmetric sparse `A` (upper triplets) and dense `W`.
fn inner_sparse<T: Scalar>(triplets: &[(u32, u32, T)], w: &DMatrix<T>) -> T {
    let mut acc = T::zero();
    for &(i, j, v) in triplets {
        let (i, j) = (i as usize, j as usize);
        if i == j {
            acc += v * w[(i, i)];
        } else {
            acc += v * (w[(i, j)] + w[(j, i)]);
        }
    }
    acc
}

use super::solver_add_scaled_sym as add_scaled_sym;

fn frob_inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += *x * *y;
    }
    acc
}

fn symmetrize<T: Scalar>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = T::c(0.5);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest step `alpha` keeping `P + alpha * D` positive semidefinite,
/// given a Cholesky factor of `P`. Returns `None` for "unbounded".
fn max_step<T: Scalar>(chol_l: &DMatrix<T>, delta: &DMatrix<T>) -> Option<T> {
    let t1 = chol_l.solve_lower_triangular(delta)?;
    let t1t = t1.transpose();
    let mut w = chol_l.solve_lower_triangular(&t1t)?;
    symmetrize(&mut w);
    let eigs = w.symmetric_eigenvalues();
    let lam_min = eigs.iter().copied().fold(T::huge(), |a, b| a.min(b));
    if lam_min >= -T::c(1e-14) {
        None
    } else {
        Some(-T::one() / lam_min)
    }
}

struct BlockState<T: Scalar> {
    s: DMatrix<T>,
    z: DMatrix<T>,
    // per-iteration work data
    s_inv: DMatrix<T>,
    chol_s_l: DMatrix<T>,
    chol_z_l: DMatrix<T>,
    residual: DMatrix<T>,
}

pub(crate) fn solve_reference<T: Scalar>(
    sdp: &LinearSdp<T>,
    opts: &SolverOptions,
) -> Result<(MomentSolution<T>, SolveReport<T>), SdpError> {
    let red = reduce(sdp)?;
    let m = red.vars.len();
    let blocks = &red.blocks;
    let total_dim: usize = blocks.iter().map(|b| b.size).sum();
    let tol_gap = T::c(opts.tol_gap);
    let tol_feas = T::c(opts.tol_feas);
    let loosened = T::c(1e-5);

    let q_scale = red.q.iter().fold(T::one(), |a, &b| a.max(b.abs()));
    let mut appears = vec![false; m];
    for b in blocks {
        for (t, _) in &b.entries {
            appears[*t] = true;
        }
    }

    // Fixed identity-scaled interior start.
    let mut y = vec![T::zero(); m];
    let mut state: Vec<BlockState<T>> = blocks
        .iter()
        .map(|b| {
            let norm_a0 = b.a0.norm();
            let norm_max = b
                .entries
                .iter()
                .map(|(_, tr)| {
                    let mut acc = T::zero();
                    for &(i, j, v) in tr {
                        let w = v * v;
                        acc += if i == j { w } else { w + w };
                    }
                    acc.sqrt()
                })
                .fold(T::zero(), |a, b| a.max(b));
            let s_scale = T::c(10.0).max(norm_a0).max(norm_max);
            let z_scale = T::c(10.0).max(T::c((b.size as f64).sqrt())).max(q_scale);
            BlockState {
                s: DMatrix::identity(b.size, b.size) * s_scale,
                z: DMatrix::identity(b.size, b.size) * z_scale,
                s_inv: DMatrix::zeros(b.size, b.size),
                chol_s_l: DMatrix::zeros(b.size, b.size),
                chol_z_l: DMatrix::zeros(b.size, b.size),
                residual: DMatrix::zeros(b.size, b.size),
            }
        })
        .collect();

    let trace = std::env::var_os("FRAMEOPT_IPM_TRACE").is_some();
    let mut best: Option<(Vec<T>, T, T, T, T, T)> = None; // y, score, relgap, pinf, dinf, pobj(+dobj via recompute)
    let mut best_obj = (T::zero(), T::zero());
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = 0;
    let mut final_metrics = (T::huge(), T::huge(), T::huge()); // relgap, pinf, dinf
    let mut final_obj = (T::zero(), T::zero());
    let mut stall_count = 0usize;
    let mut best_gap_seen = T::huge();
    let mut no_progress = 0usize;
    // Once converged, a couple of pure centering steps (sigma = 1) pull the
    // iterate to the analytic center of the near-optimal set. On degenerate
    // optimal faces (multiple global minimizers) this is what makes the
    // first-order moments a balanced mixture rather than an arbitrary one.
    let mut centering_left: i32 = -1;

    for iter in 0..opts.max_iterations {
        iterations = iter;

        // Residuals and objectives at the current iterate.
        let mut pinf = T::zero();
        for (b, st) in blocks.iter().zip(state.iter_mut()) {
            let mut r = b.a0.clone();
            for (t, tr) in &b.entries {
                add_scaled_sym(&mut r, tr, y[*t]);
            }
            r -= &st.s;
            let rel = r.norm() / (T::one() + b.a0.norm());
            pinf = pinf.max(rel);
            st.residual = r;
        }
        let mut dinf = T::zero();
        for (t, &qt) in red.q.iter().enumerate() {
            let mut sum = T::zero();
            for (b, st) in blocks.iter().zip(state.iter()) {
                for (u, tr) in &b.entries {
                    if *u == t {
                        sum += inner_sparse(tr, &st.z);
                    }
                }
            }
            dinf = dinf.max((qt - sum).abs() / (T::one() + q_scale));
        }
        let pobj = red
            .q
            .iter()
            .zip(&y)
            .fold(red.offset, |acc, (&qt, &yt)| acc + qt * yt);
        let dobj = blocks
            .iter()
            .zip(state.iter())
            .fold(red.offset, |acc, (b, st)| acc - frob_inner(&b.a0, &st.z));
        let relgap = (pobj - dobj).abs() / (T::one() + pobj.abs() + dobj.abs());

        final_metrics = (relgap, pinf, dinf);
        final_obj = (pobj, dobj);
        let score = relgap.max(pinf).max(dinf);
        if best.as_ref().map_or(true, |b| score < b.1) {
            best = Some((y.clone(), score, relgap, pinf, dinf, pobj));
            best_obj = (pobj, dobj);
        }

        if trace {
            eprintln!(
                "ipm iter {iter:3}  pobj {:+.9e}  dobj {:+.9e}  relgap {:.2e}  pinf {:.2e}  dinf {:.2e}",
                pobj.to_f64(),
                dobj.to_f64(),
                relgap.to_f64(),
                pinf.to_f64(),
                dinf.to_f64()
            );
        }
        if centering_left == 0 {
            status = SolveStatus::Optimal;
            break;
        }
        if relgap <= tol_gap && pinf <= tol_feas && dinf <= tol_feas && centering_left < 0 {
            status = SolveStatus::Optimal;
            centering_left = 2;
        }
        if pobj < -T::c(1e13) * q_scale && pinf <= loosened {
            status = SolveStatus::Unbounded;
            break;
        }
        let z_norm: T = state.iter().fold(T::zero(), |a, st| a.max(st.z.norm()));
        if z_norm > T::c(1e13) && dinf <= loosened {
            status = SolveStatus::Infeasible;
            break;
        }

        // Factorizations; a failure here is a numerical breakdown.
        let mut broke = false;
        for st in state.iter_mut() {
            match st.s.clone().cholesky() {
                Some(ch) => {
                    st.s_inv = ch.inverse();
                    st.chol_s_l = ch.l();
                }
                None => {
                    broke = true;
                    break;
                }
            }
            match st.z.clone().cholesky() {
                Some(ch) => st.chol_z_l = ch.l(),
                None => {
                    broke = true;
                    break;
                }
            }
        }
        if broke {
            status = if centering_left >= 0 { SolveStatus::Optimal } else { SolveStatus::Inaccurate };
            break;
        }

        let mu = {
            let gap: T = blocks
                .iter()
                .zip(state.iter())
                .fold(T::zero(), |a, (_, st)| a + frob_inner(&st.z, &st.s));
            gap / T::c(total_dim as f64)
        };
        // Terminal stagnation: the complementarity measure stops shrinking.
        // Only cut the tail once the best iterate is already acceptable at
        // the loosened tolerance; otherwise keep polishing until the
        // iteration cap or a factorization breakdown.
        if mu < T::c(0.9) * best_gap_seen {
            best_gap_seen = mu;
            no_progress = 0;
        } else if centering_left < 0 {
            no_progress += 1;
            let best_score = best.as_ref().map(|b| b.1).unwrap_or_else(T::huge);
            if no_progress >= 12 && best_score <= loosened {
                status = SolveStatus::Inaccurate;
                break;
            }
        }

        // Schur complement M[t,u] = sum_b <A_t, Z A_u S^{-1}> and the
        // constant vectors.
        let mut schur = DMatrix::<T>::zeros(m, m);
        let mut s_vec = vec![T::zero(); m];
        let mut h_vec = vec![T::zero(); m];
        for (b, st) in blocks.iter().zip(state.iter()) {
            let n = b.size;
            let mut p = DMatrix::<T>::zeros(n, n);
            for (ui, (u, a_u)) in b.entries.iter().enumerate() {
                // rows touched by A_u
                let mut rows: Vec<usize> = Vec::with_capacity(a_u.len() * 2);
                for &(i, j, _) in a_u {
                    rows.push(i as usize);
                    if i != j {
                        rows.push(j as usize);
                    }
                }
                rows.sort_unstable();
                rows.dedup();
                let nr = rows.len();
                let mut row_pos = vec![usize::MAX; n];
                for (k, &r) in rows.iter().enumerate() {
                    row_pos[r] = k;
                }
                // U = (A_u S^{-1}) restricted to its nonzero rows
                let mut u_rows = DMatrix::<T>::zeros(nr, n);
                for &(i, j, v) in a_u {
                    let (i, j) = (i as usize, j as usize);
                    let (ri, rj) = (row_pos[i], row_pos[j]);
                    for k in 0..n {
                        u_rows[(ri, k)] += v * st.s_inv[(j, k)];
                    }
                    if i != j {
                        for k in 0..n {
                            u_rows[(rj, k)] += v * st.s_inv[(i, k)];
                        }
                    }
                }
                // Xr = Z[:, rows]
                let mut z_cols = DMatrix::<T>::zeros(n, nr);
                for (k, &r) in rows.iter().enumerate() {
                    z_cols.column_mut(k).copy_from(&st.z.column(r));
                }
                // P = Z A_u S^{-1}
                z_cols.mul_to(&u_rows, &mut p);
                for (t, a_t) in b.entries.iter().take(ui + 1) {
                    schur[(*t, *u)] += inner_sparse(a_t, &p);
                }
            }
            // s_vec and h_vec
            let w = &st.z * &st.residual * &st.s_inv;
            for (t, a_t) in &b.entries {
                s_vec[*t] += inner_sparse(a_t, &st.s_inv);
                h_vec[*t] += inner_sparse(a_t, &w);
            }
        }
        for t in 0..m {
            for u in (t + 1)..m {
                schur[(u, t)] = schur[(t, u)];
            }
            if !appears[t] {
                schur[(t, t)] = T::one();
            }
        }

        // Factor the Schur complement, regularizing on failure.
        let diag_scale = (0..m).fold(T::c(1e-300), |a, i| a.max(schur[(i, i)].abs()));
        let mut chol = None;
        let mut reg = T::c(1e-14) * diag_scale;
        for _ in 0..4 {
            match schur.clone().cholesky() {
                Some(c) => {
                    chol = Some(c);
                    break;
                }
                None => {
                    for i in 0..m {
                        schur[(i, i)] += reg;
                    }
                    reg *= T::c(100.0);
                }
            }
        }
        let Some(chol) = chol else {
            status = SolveStatus::Inaccurate;
            break;
        };
        // two rounds of iterative refinement keep the Newton solves accurate
        // deep in the tail, where the Schur complement is ill-conditioned
        let refine = |rhs: &DVector<T>| -> DVector<T> {
            let mut sol = chol.solve(rhs);
            for _ in 0..2 {
                let resid = rhs - &schur * &sol;
                sol += chol.solve(&resid);
            }
            sol
        };

        // Predictor (affine scaling, sigma = 0).
        let mut rhs = DVector::<T>::zeros(m);
        for t in 0..m {
            rhs[t] = -red.q[t] - h_vec[t];
        }
        let dy_aff = refine(&rhs);
        let mut ds_aff = Vec::with_capacity(blocks.len());
        let mut dz_aff = Vec::with_capacity(blocks.len());
        for (b, st) in blocks.iter().zip(state.iter()) {
            let mut ds = st.residual.clone();
            for (t, tr) in &b.entries {
                add_scaled_sym(&mut ds, tr, dy_aff[*t]);
            }
            let mut dz = -&st.z - &st.z * &ds * &st.s_inv;
            symmetrize(&mut dz);
            ds_aff.push(ds);
            dz_aff.push(dz);
        }
        let mut ap_aff = T::one();
        let mut ad_aff = T::one();
        for (st, (ds, dz)) in state.iter().zip(ds_aff.iter().zip(dz_aff.iter())) {
            if let Some(a) = max_step(&st.chol_s_l, ds) {
                ad_aff = ad_aff.min(a);
            }
            if let Some(a) = max_step(&st.chol_z_l, dz) {
                ap_aff = ap_aff.min(a);
            }
        }
        let mu_aff = {
            let mut acc = T::zero();
            for (st, (ds, dz)) in state.iter().zip(ds_aff.iter().zip(dz_aff.iter())) {
                let znew = &st.z + dz * ap_aff;
                let snew = &st.s + ds * ad_aff;
                acc += frob_inner(&znew, &snew);
            }
            acc / T::c(total_dim as f64)
        };
        let sigma = if centering_left > 0 {
            centering_left -= 1;
            T::one()
        } else {
            let ratio = (mu_aff / mu).max(T::zero()).min(T::one());
            // the floor keeps iterates near the central path; on degenerate
            // optimal faces an aggressive predictor drifts tangentially and
            // returns an arbitrary point of the face instead of its center
            (ratio * ratio * ratio).max(T::c(0.05))
        };

        // Corrector.
        let mut w_vec = vec![T::zero(); m];
        let mut corr = Vec::with_capacity(blocks.len());
        for ((b, st), (dz, ds)) in
            blocks.iter().zip(state.iter()).zip(dz_aff.iter().zip(ds_aff.iter()))
        {
            let v = dz * ds * &st.s_inv;
            for (t, a_t) in &b.entries {
                w_vec[*t] += inner_sparse(a_t, &v);
            }
            corr.push(v);
        }
        for t in 0..m {
            rhs[t] = sigma * mu * s_vec[t] - red.q[t] - h_vec[t] - w_vec[t];
        }
        let dy = refine(&rhs);
        let mut ap = T::one();
        let mut ad = T::one();
        let mut ds_all = Vec::with_capacity(blocks.len());
        let mut dz_all = Vec::with_capacity(blocks.len());
        for ((b, st), v) in blocks.iter().zip(state.iter()).zip(corr.iter()) {
            let mut ds = st.residual.clone();
            for (t, tr) in &b.entries {
                add_scaled_sym(&mut ds, tr, dy[*t]);
            }
            let mut dz = &st.s_inv * (sigma * mu) - &st.z - &st.z * &ds * &st.s_inv - v;
            symmetrize(&mut dz);
            if let Some(a) = max_step(&st.chol_s_l, &ds) {
                ad = ad.min(a);
            }
            if let Some(a) = max_step(&st.chol_z_l, &dz) {
                ap = ap.min(a);
            }
            ds_all.push(ds);
            dz_all.push(dz);
        }
        let gamma = T::c(0.9) + T::c(0.09) * ap_aff.min(ad_aff).min(T::one());
        let ap = (gamma * ap).min(T::one());
        let ad = (gamma * ad).min(T::one());

        if ap < T::c(1e-10) && ad < T::c(1e-10) {
            stall_count += 1;
            if stall_count >= 2 {
                status = SolveStatus::Inaccurate;
                break;
            }
        } else {
            stall_count = 0;
        }

        for (t, dyt) in dy.iter().enumerate() {
            y[t] += ad * *dyt;
        }
        for (st, (ds, dz)) in state.iter_mut().zip(ds_all.iter().zip(dz_all.iter())) {
            st.s += ds * ad;
            st.z += dz * ap;
            symmetrize(&mut st.s);
            symmetrize(&mut st.z);
        }
    }

    // On anything but clean convergence, fall back to the best iterate and
    // decide the final label from the loosened tolerances.
    let (relgap, pinf, dinf) = final_metrics;
    let (mut pobj, mut dobj) = final_obj;
    if status != SolveStatus::Optimal {
        if let Some((by, _, brelgap, bpinf, bdinf, _)) = &best {
            y = by.clone();
            let (bp, bd) = best_obj;
            pobj = bp;
            dobj = bd;
            if matches!(status, SolveStatus::Inaccurate | SolveStatus::IterationLimit)
                && *brelgap <= loosened
                && *bpinf <= loosened
                && *bdinf <= loosened
            {
                status = SolveStatus::Inaccurate;
            } else if matches!(status, SolveStatus::Inaccurate) {
                status = SolveStatus::IterationLimit;
            }
        }
    }
    let (relgap, pinf, dinf) = if status == SolveStatus::Optimal {
        (relgap, pinf, dinf)
    } else {
        best.as_ref().map(|b| (b.2, b.3, b.4)).unwrap_or((relgap, pinf, dinf))
    };

    let mut y_full = DVector::<T>::zeros(sdp.n_vars);
    for &(v, val) in &sdp.equalities {
        y_full[v] = val;
    }
    for (t, &orig) in red.vars.iter().enumerate() {
        y_full[orig] = y[t];
    }

    let sol = MomentSolution {
        y: y_full,
        objective: pobj,
        dual_objective: dobj,
        status,
        rel_gap: relgap,
        primal_residual: pinf,
        dual_residual: dinf,
    };
    let report = SolveReport {
        status,
        primal_objective: pobj,
        dual_objective: dobj,
        iterations: iterations + 1,
        max_residual: pinf.max(dinf),
    };
    Ok((sol, report))
}
