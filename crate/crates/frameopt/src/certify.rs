//! Certified results: feasible upper-bound recovery, epsilon-optimality
//! certificates, the flat-extension rank test, global-minimizer extraction,
//! and the hierarchy driver loop.
//!
//! Each relaxation order yields a lower bound (the relaxation optimum) and an
//! upper bound (the compliance of the design rebuilt from first-order
//! moments, which is always feasible). Their gap is the epsilon certificate.
//! When the moment matrix ranks flatten, all global minimizers are extracted
//! by the multiplication-matrix procedure and cross-checked against the
//! lower bound.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::fem::{self, FemError, PinvOptions, PolynomialStiffness};
use crate::formulate::{self, BoundData, CbarSource, FormulateError, ScaledNsdp};
use crate::moments::{
    self, build_relaxation, first_order_moments, MomentError, MomentIndexing, MomentSolution,
};
use crate::polyalg::basis_len;
use crate::scalar::Scalar;
use crate::sdpcore::{self, SdpError, SolveStatus, SolverOptions};
use crate::structmodel::GroundStructure;

#[derive(Debug, thiserror::Error)]
pub enum CertifyError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Formulate(#[from] FormulateError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("first-order moment {index} = {value} lies outside [-1, 1] beyond tolerance")]
    MomentOutOfRange { index: usize, value: f64 },
    #[error("recovered design violates the image condition (residual {residual:e}); the relaxation solve is inaccurate")]
    InfeasibleRecovery { residual: f64 },
    #[error("minimizer extraction failed: {0}")]
    Extraction(String),
}

/// One extracted global minimizer, validated through the physics.
#[derive(Debug, Clone, Serialize)]
pub struct Minimizer<T: Scalar> {
    pub design: Vec<T>,
    pub compliances: Vec<T>,
    pub objective: T,
}

/// Everything one relaxation order certifies.
#[derive(Debug, Clone)]
pub struct Certificate<T: Scalar> {
    pub order: u32,
    pub lower_bound: T,
    /// Design recovered from the first-order moments.
    pub design: Vec<T>,
    pub compliances: Vec<T>,
    pub upper_bound: T,
    /// `max(upper_bound - lower_bound, 0)` with tiny negative values clamped.
    pub gap: T,
    pub certified: bool,
    pub flat: bool,
    pub rank_high: usize,
    pub rank_low: usize,
    /// Number of global minimizers guaranteed by the rank test, when flat.
    pub s: Option<usize>,
    pub minimizers: Vec<Minimizer<T>>,
    pub solver_status: SolveStatus,
    pub wall_time_s: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EpsilonMet,
    FlatExtension,
    OrderBudget,
    SolverFailure,
}

/// Which certificate stops the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    #[default]
    Epsilon,
    Flat,
    /// Stop only when both the epsilon and the rank certificate hold.
    Both,
}

/// Source of the compliance cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CbarChoice {
    /// Compliance of the uniform design.
    #[default]
    Uniform,
    /// Convex truss bound when applicable, uniform design otherwise.
    Truss,
}

#[derive(Debug, Clone)]
pub struct HierarchyOptions {
    pub r_min: Option<u32>,
    pub r_max: u32,
    /// Absolute epsilon target; `None` uses `1e-6 * max(1, |UB|)` per order.
    pub eps_target: Option<f64>,
    pub stop: StopRule,
    pub cbar: CbarChoice,
    pub solver: SolverOptions,
    /// Absolute eigenvalue threshold of the rank test.
    pub rank_tol: f64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            r_min: None,
            r_max: 4,
            eps_target: None,
            stop: StopRule::Epsilon,
            cbar: CbarChoice::Uniform,
            solver: SolverOptions::default(),
            rank_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport<T: Scalar> {
    pub orders: Vec<Certificate<T>>,
    pub termination: Termination,
    pub r_min: u32,
    pub r_max: u32,
    pub cbar: T,
    pub cbar_source: CbarSource,
    pub failure: Option<String>,
    pub total_wall_time_s: f64,
}

impl<T: Scalar> RunReport<T> {
    pub fn best(&self) -> Option<&Certificate<T>> {
        self.orders.last()
    }

    pub fn certified(&self) -> bool {
        matches!(self.termination, Termination::EpsilonMet | Termination::FlatExtension)
    }

    /// CSV trace, one line per solved order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,LB,UB,gap,flat,s,wall_time_s\n");
        for c in &self.orders {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.3}\n",
                c.order,
                c.lower_bound.to_f64(),
                c.upper_bound.to_f64(),
                c.gap.to_f64(),
                c.flat,
                c.s.map(|s| s.to_string()).unwrap_or_default(),
                c.wall_time_s,
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let orders: Vec<serde_json::Value> = self
            .orders
            .iter()
            .map(|c| {
                serde_json::json!({
                    "r": c.order,
                    "lower_bound": c.lower_bound.to_f64(),
                    "upper_bound": c.upper_bound.to_f64(),
                    "gap": c.gap.to_f64(),
                    "certified": c.certified,
                    "flat": c.flat,
                    "rank_high": c.rank_high,
                    "rank_low": c.rank_low,
                    "s": c.s,
                    "design": c.design.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                    "compliances": c.compliances.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                    "minimizers": c.minimizers.iter().map(|m| serde_json::json!({
                        "design": m.design.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                        "compliances": m.compliances.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
                        "objective": m.objective.to_f64(),
                    })).collect::<Vec<_>>(),
                    "solver_status": c.solver_status,
                    "wall_time_s": c.wall_time_s,
                    "note": c.note,
                })
            })
            .collect();
        serde_json::json!({
            "orders": orders,
            "termination": self.termination,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "cbar": self.cbar.to_f64(),
            "cbar_source": self.cbar_source,
            "failure": self.failure,
            "total_wall_time_s": self.total_wall_time_s,
        })
    }
}

// ---------------------------------------------------------------------------
// Upper-bound recovery
// ---------------------------------------------------------------------------

/// Rebuild a feasible design from first-order area moments and evaluate its
/// exact compliance; the result is an upper bound for the original problem.
pub fn recover_upper_bound<T: Scalar>(
    ps: &PolynomialStiffness<T>,
    bounds: &BoundData<T>,
    ya1: &[T],
) -> Result<(Vec<T>, Vec<T>, T), CertifyError> {
    let clamp_tol = T::c(1e-8);
    let mut a = Vec::with_capacity(ya1.len());
    for (i, &y) in ya1.iter().enumerate() {
        if y < -T::one() - clamp_tol || y > T::one() + clamp_tol {
            return Err(CertifyError::MomentOutOfRange { index: i, value: y.to_f64() });
        }
        let yc = y.max(-T::one()).min(T::one());
        a.push(T::c(0.5) * (yc + T::one()) * bounds.a_bar[i]);
    }
    let res = fem::compliance(ps, &a, PinvOptions::default())?;
    if !res.image_ok {
        let worst = res
            .cases
            .iter()
            .map(|c| c.residual.to_f64())
            .fold(0.0, f64::max);
        return Err(CertifyError::InfeasibleRecovery { residual: worst });
    }
    let compliances: Vec<T> = res.cases.iter().map(|c| c.value).collect();
    Ok((a, compliances, res.objective))
}

// ---------------------------------------------------------------------------
// Epsilon certificate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EpsilonCertificate<T: Scalar> {
    pub gap: T,
    pub certified: bool,
    pub note: Option<String>,
}

/// Gap between the recovered upper bound and the relaxation lower bound.
/// Slightly negative gaps (solver noise) are reported as zero with a note.
pub fn epsilon_certificate<T: Scalar>(lb: T, ub: T, eps_target: T) -> EpsilonCertificate<T> {
    let raw = ub - lb;
    let noise = T::c(1e-6) * T::one().max(ub.abs());
    let (gap, note) = if raw < T::zero() && raw >= -noise {
        (T::zero(), Some(format!("negative gap {:e} clamped to zero", raw.to_f64())))
    } else {
        (raw, None)
    };
    EpsilonCertificate { gap, certified: gap <= eps_target, note }
}

// ---------------------------------------------------------------------------
// Flat extension
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FlatRank {
    pub rank_high: usize,
    pub rank_low: usize,
    pub flat: bool,
    pub s: Option<usize>,
}

/// Dense moment matrix of order `k` from a solved moment vector.
pub fn moment_matrix_dense<T: Scalar>(
    sol: &MomentSolution<T>,
    idx: &MomentIndexing,
    k: u32,
) -> DMatrix<T> {
    let n = basis_len(idx.n_vars(), k);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mono = idx.basis()[i].plus(&idx.basis()[j]);
            m[(i, j)] = sol.y[idx.position(&mono)];
        }
    }
    m
}

fn numerical_rank<T: Scalar>(m: &DMatrix<T>, tol: T) -> usize {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .filter(|&&l| l.abs() > tol)
        .count()
}

/// Rank test between the order-`r` and order-`r-d` moment matrices with an
/// absolute eigenvalue threshold.
pub fn flat_extension_rank<T: Scalar>(
    sol: &MomentSolution<T>,
    idx: &MomentIndexing,
    d: u32,
    tol: T,
) -> FlatRank {
    let r = idx.order();
    let low_order = r.saturating_sub(d);
    let high = moment_matrix_dense(sol, idx, r);
    let low = moment_matrix_dense(sol, idx, low_order);
    let rank_high = numerical_rank(&high, tol);
    let rank_low = numerical_rank(&low, tol);
    let flat = rank_high == rank_low;
    FlatRank { rank_high, rank_low, flat, s: flat.then_some(rank_high) }
}

// ---------------------------------------------------------------------------
// Minimizer extraction
// ---------------------------------------------------------------------------

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Fixed seed of the random convex combination used in extraction; recorded
/// here so runs are reproducible.
pub const EXTRACTION_SEED: u64 = 0x5eed_cafe_f00d_0001;

/// Extract `s` scaled minimizer candidates from a flat moment solution using
/// rank factorization, column-echelon reduction, and joint diagonalization of
/// the multiplication matrices via a seeded random convex combination.
pub fn extract_minimizers<T: Scalar>(
    sol: &MomentSolution<T>,
    idx: &MomentIndexing,
    s: usize,
) -> Result<Vec<Vec<T>>, CertifyError> {
    extract_minimizers_at(sol, idx, idx.order(), s)
}

/// [`extract_minimizers`] on the order-`k` moment matrix; sound whenever the
/// rank is flat at `k`, which permits extraction below the relaxation order.
pub fn extract_minimizers_at<T: Scalar>(
    sol: &MomentSolution<T>,
    idx: &MomentIndexing,
    k: u32,
    s: usize,
) -> Result<Vec<Vec<T>>, CertifyError> {
    let n_vars = idx.n_vars();
    let r = k;
    let m = moment_matrix_dense(sol, idx, r);
    let nb = m.nrows();
    if s == 0 || s > nb {
        return Err(CertifyError::Extraction(format!("rank {s} out of range")));
    }

    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues")
    });
    if eig.eigenvalues[order[s - 1]] <= T::zero() {
        return Err(CertifyError::Extraction("rank factor is not positive".into()));
    }
    // U^T: s x nb, rows scaled eigenvectors
    let mut ut = DMatrix::<T>::zeros(s, nb);
    for (row, &k) in order.iter().take(s).enumerate() {
        let scale = eig.eigenvalues[k].sqrt();
        for col in 0..nb {
            ut[(row, col)] = eig.eigenvectors[(col, k)] * scale;
        }
    }

    // Reduced row echelon form with partial pivoting, scanning columns in
    // graded-lex order; pivot columns form the polynomial basis of the
    // solution support.
    let u_max = ut.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let piv_tol = T::c(1e-8) * u_max;
    let mut pivots = Vec::with_capacity(s);
    let mut row = 0usize;
    for col in 0..nb {
        if row == s {
            break;
        }
        let mut best = row;
        for k in (row + 1)..s {
            if ut[(k, col)].abs() > ut[(best, col)].abs() {
                best = k;
            }
        }
        if ut[(best, col)].abs() <= piv_tol {
            continue;
        }
        ut.swap_rows(row, best);
        let piv = ut[(row, col)];
        for c in 0..nb {
            ut[(row, c)] /= piv;
        }
        for k in 0..s {
            if k != row {
                let f = ut[(k, col)];
                if f != T::zero() {
                    for c in 0..nb {
                        let sub = f * ut[(row, c)];
                        ut[(k, c)] -= sub;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() < s {
        return Err(CertifyError::Extraction(format!(
            "echelon form found rank {} instead of {s}",
            pivots.len()
        )));
    }

    // Multiplication matrices N_v[k', k] = coordinates of x_v * b_k.
    let mut mult = Vec::with_capacity(n_vars);
    for v in 0..n_vars {
        let mut nv = DMatrix::<T>::zeros(s, s);
        for (k, &piv_col) in pivots.iter().enumerate() {
            let mono = idx.basis()[piv_col].plus(&crate::polyalg::MultiIndex::unit(n_vars, v));
            if mono.degree() > r {
                return Err(CertifyError::Extraction(
                    "pivot basis is not closed under multiplication at this order".into(),
                ));
            }
            let col = idx
                .basis()
                .iter()
                .position(|b| *b == mono)
                .expect("shifted monomial stays within the moment basis");
            for kp in 0..s {
                nv[(kp, k)] = ut[(kp, col)];
            }
        }
        mult.push(nv);
    }

    // Seeded random convex combination, then an orthogonal similarity from
    // its real Schur decomposition diagonalizes all N_v jointly.
    let mut rng = EXTRACTION_SEED;
    let mut lambda: Vec<T> = (0..n_vars)
        .map(|_| T::c(0.05) + T::c((splitmix64(&mut rng) >> 11) as f64 / (1u64 << 53) as f64))
        .collect();
    let total: T = lambda.iter().fold(T::zero(), |a, &b| a + b);
    for l in lambda.iter_mut() {
        *l /= total;
    }
    let mut combo = DMatrix::<T>::zeros(s, s);
    for (v, nv) in mult.iter().enumerate() {
        combo += nv * lambda[v];
    }
    let schur = nalgebra::linalg::Schur::try_new(combo, T::c(1e-12), 10_000)
        .ok_or_else(|| CertifyError::Extraction("Schur iteration did not converge".into()))?;
    let (q, _t) = schur.unpack();

    let mut points = Vec::with_capacity(s);
    for k in 0..s {
        let qk = q.column(k);
        let mut x = Vec::with_capacity(n_vars);
        for nv in &mult {
            x.push((qk.transpose() * nv * qk)[(0, 0)]);
        }
        points.push(x);
    }
    // Deterministic output order.
    points.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    Ok(points)
}

// ---------------------------------------------------------------------------
// Hierarchy driver
// ---------------------------------------------------------------------------

/// Run the relaxation hierarchy on a ground structure until a certificate
/// fires or the order budget is exhausted.
pub fn run_hierarchy<T: Scalar>(
    gs: &GroundStructure<T>,
    opts: &HierarchyOptions,
) -> Result<RunReport<T>, CertifyError> {
    let run_start = Instant::now();
    let ps = fem::assemble(gs)?;
    let mut bounds = formulate::variable_bounds(&ps)?;
    if opts.cbar == CbarChoice::Truss {
        if let Some(tb) = formulate::truss_upper_bound(&ps, &opts.solver)? {
            bounds = BoundData {
                a_bar: bounds.a_bar,
                c_bar: tb.objective,
                source: CbarSource::TrussSdp,
            };
        }
    }
    let nsdp = formulate::scale_problem(&ps, bounds);
    let weights = nsdp.weights.clone();

    let r_floor = moments::minimum_order(&nsdp.program);
    let r_min = opts.r_min.unwrap_or(0).max(r_floor);
    let d = constraint_half_degree(&nsdp);

    let mut report = RunReport {
        orders: Vec::new(),
        termination: Termination::OrderBudget,
        r_min,
        r_max: opts.r_max,
        cbar: nsdp.bounds.c_bar,
        cbar_source: nsdp.bounds.source,
        failure: None,
        total_wall_time_s: 0.0,
    };

    for r in r_min..=opts.r_max.max(r_min) {
        let t0 = Instant::now();
        let (sdp, idx) = build_relaxation(&nsdp.program, r)?;
        let solved = sdpcore::solve(&sdp, &opts.solver);
        let (sol, solve_report) = match solved {
            Ok(v) => v,
            Err(e) => {
                report.termination = Termination::SolverFailure;
                report.failure = Some(e.to_string());
                break;
            }
        };
        if !matches!(solve_report.status, SolveStatus::Optimal | SolveStatus::Inaccurate) {
            report.termination = Termination::SolverFailure;
            report.failure = Some(format!("order {r}: solver status {:?}", solve_report.status));
            break;
        }

        let lb = sol.objective;
        let fom = first_order_moments(&sol, &idx, &nsdp);
        let (design, compliances, ub) = match recover_upper_bound(&ps, &nsdp.bounds, &fom.a_s) {
            Ok(v) => v,
            Err(e) => {
                report.termination = Termination::SolverFailure;
                report.failure = Some(format!("order {r}: {e}"));
                break;
            }
        };
        let eps_target =
            T::c(opts.eps_target.unwrap_or_else(|| 1e-6 * 1.0f64.max(ub.to_f64().abs())));
        let ec = epsilon_certificate(lb, ub, eps_target);
        let fr = flat_extension_rank(&sol, &idx, d, T::c(opts.rank_tol));

        let mut note = fom.accuracy_warning.clone().or_else(|| ec.note.clone());
        let mut minimizers = Vec::new();
        if fr.flat {
            match extract_minimizers(&sol, &idx, fr.s.unwrap()) {
                Ok(points) => {
                    match validate_minimizers(&ps, &nsdp, &weights, &points, lb) {
                        Ok(list) => minimizers = list,
                        Err(msg) => {
                            note.get_or_insert(msg);
                        }
                    }
                }
                Err(e) => {
                    note.get_or_insert(format!("extraction failed: {e}"));
                }
            }
        }

        let cert = Certificate {
            order: r,
            lower_bound: lb,
            design,
            compliances,
            upper_bound: ub,
            gap: ec.gap,
            certified: ec.certified,
            flat: fr.flat,
            rank_high: fr.rank_high,
            rank_low: fr.rank_low,
            s: fr.s,
            minimizers,
            solver_status: solve_report.status,
            wall_time_s: t0.elapsed().as_secs_f64(),
            note,
        };
        let stop = match opts.stop {
            StopRule::Epsilon => cert.certified,
            StopRule::Flat => cert.flat,
            StopRule::Both => cert.certified && cert.flat,
        };
        let was_flat = cert.flat;
        report.orders.push(cert);
        if stop {
            report.termination = match opts.stop {
                StopRule::Epsilon => Termination::EpsilonMet,
                StopRule::Flat => Termination::FlatExtension,
                StopRule::Both => {
                    if was_flat {
                        Termination::FlatExtension
                    } else {
                        Termination::EpsilonMet
                    }
                }
            };
            break;
        }
    }
    report.total_wall_time_s = run_start.elapsed().as_secs_f64();
    Ok(report)
}

/// Half-degree `d` of the constraint set, the offset of the rank test.
fn constraint_half_degree<T: Scalar>(nsdp: &ScaledNsdp<T>) -> u32 {
    let mut maxdeg = 0;
    for g in &nsdp.program.pmi_blocks {
        maxdeg = maxdeg.max(g.degree());
    }
    for g in &nsdp.program.scalar_constraints {
        maxdeg = maxdeg.max(g.degree());
    }
    maxdeg.div_ceil(2).max(1)
}

fn validate_minimizers<T: Scalar>(
    ps: &PolynomialStiffness<T>,
    nsdp: &ScaledNsdp<T>,
    weights: &[T],
    points: &[Vec<T>],
    lb: T,
) -> Result<Vec<Minimizer<T>>, String> {
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let clamped: Vec<T> = p.iter().map(|&v| v.max(-T::one()).min(T::one())).collect();
        let (a, _) = formulate::unscale(&clamped, &nsdp.bounds, weights);
        let res = fem::compliance(ps, &a, PinvOptions::default())
            .map_err(|e| format!("extracted point rejected: {e}"))?;
        if !res.image_ok {
            return Err("extracted point violates the image condition".into());
        }
        let volume: T =
            ps.lengths.iter().zip(&a).fold(T::zero(), |acc, (&l, &ai)| acc + l * ai);
        if volume > ps.volume_bound * (T::one() + T::c(1e-9)) {
            return Err("extracted point violates the volume bound".into());
        }
        let rel = (res.objective - lb).abs() / T::one().max(lb.abs());
        if rel > T::c(1e-4) {
            return Err(format!(
                "extracted point objective {} differs from the lower bound {} beyond tolerance",
                res.objective.to_f64(),
                lb.to_f64()
            ));
        }
        out.push(Minimizer {
            design: a,
            compliances: res.cases.iter().map(|c| c.value).collect(),
            objective: res.objective,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::moments::point_mass_moments;
    use crate::structmodel::load_problem;
    use std::path::{Path, PathBuf};

    fn fixtures() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
    }

    fn lifted_solution(
        nsdp: &ScaledNsdp<f64>,
        r: u32,
        point: &[f64],
    ) -> (MomentSolution<f64>, MomentIndexing) {
        let (_, idx) = build_relaxation(&nsdp.program, r).unwrap();
        let y = point_mass_moments(&idx, point);
        let objective = nsdp.program.objective.eval(point).unwrap();
        (
            MomentSolution {
                y,
                objective,
                dual_objective: objective,
                status: SolveStatus::Optimal,
                rel_gap: 0.0,
                primal_residual: 0.0,
                dual_residual: 0.0,
            },
            idx,
        )
    }

    fn motivating_nsdp() -> (PolynomialStiffness<f64>, ScaledNsdp<f64>) {
        let gs = load_problem(&fixtures().join("motivating.json")).unwrap();
        let ps = assemble(&gs).unwrap();
        let bounds = formulate::variable_bounds(&ps).unwrap();
        let nsdp = formulate::scale_problem(&ps, bounds);
        (ps, nsdp)
    }

    #[test]
    fn recovery_is_idempotent_on_lifted_points() {
        let (ps, nsdp) = motivating_nsdp();
        let a = [0.4, 0.3];
        let res = fem::compliance(&ps, &a, PinvOptions::default()).unwrap();
        let c: Vec<f64> = res.cases.iter().map(|c| c.value).collect();
        let point = formulate::scale_point(&a, &c, &nsdp.bounds, &nsdp.weights);
        let (a2, _c2, ub) = recover_upper_bound(&ps, &nsdp.bounds, &point[..2]).unwrap();
        for (x, y) in a.iter().zip(&a2) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((ub - res.objective).abs() <= 1e-12 * res.objective);
    }

    #[test]
    fn recovery_rejects_far_out_of_range_moments() {
        let (ps, nsdp) = motivating_nsdp();
        let err = recover_upper_bound(&ps, &nsdp.bounds, &[1.5, 0.0]).unwrap_err();
        assert!(matches!(err, CertifyError::MomentOutOfRange { index: 0, .. }));
    }

    #[test]
    fn epsilon_certificate_clamps_solver_noise() {
        let ec = epsilon_certificate(70.442, 70.442 - 7e-8, 1e-6);
        assert_eq!(ec.gap, 0.0);
        assert!(ec.certified);
        assert!(ec.note.is_some());
    }

    #[test]
    fn epsilon_certificate_reports_real_gaps() {
        let ec = epsilon_certificate(1.640_f64, 2.161, 1e-6);
        assert!((ec.gap - 0.521).abs() < 1e-12);
        assert!(!ec.certified);
        let exact = epsilon_certificate(5.0_f64, 5.0, 0.0);
        assert!(exact.certified);
    }

    #[test]
    fn point_mass_moments_are_rank_one_and_flat() {
        let (_, nsdp) = motivating_nsdp();
        let point = [0.2, -0.5, 0.1];
        let (sol, idx) = lifted_solution(&nsdp, 2, &point);
        let fr = flat_extension_rank(&sol, &idx, 1, 1e-8);
        assert_eq!((fr.rank_high, fr.rank_low), (1, 1));
        assert!(fr.flat);
        assert_eq!(fr.s, Some(1));
    }

    #[test]
    fn extraction_recovers_the_generating_point() {
        let (_, nsdp) = motivating_nsdp();
        let point = [0.37, -0.62, 0.05];
        let (sol, idx) = lifted_solution(&nsdp, 2, &point);
        let got = extract_minimizers(&sol, &idx, 1).unwrap();
        assert_eq!(got.len(), 1);
        for (x, y) in got[0].iter().zip(&point) {
            assert!((x - y).abs() < 1e-9, "{:?}", got);
        }
    }

    #[test]
    fn extraction_recovers_two_atoms() {
        // mixture of two point masses: flat at (r, r-1) with rank 2
        let (_, nsdp) = motivating_nsdp();
        let p1 = [0.6, -0.4, 0.2];
        let p2 = [-0.3, 0.5, -0.7];
        let (mut sol, idx) = lifted_solution(&nsdp, 3, &p1);
        let y2 = point_mass_moments(&idx, &p2);
        sol.y = (sol.y + y2) * 0.5;
        let fr = flat_extension_rank(&sol, &idx, 1, 1e-8);
        assert!(fr.flat, "ranks {} vs {}", fr.rank_high, fr.rank_low);
        assert_eq!(fr.s, Some(2));
        let got = extract_minimizers(&sol, &idx, 2).unwrap();
        assert_eq!(got.len(), 2);
        let mut expected = [p1.to_vec(), p2.to_vec()];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip(&expected) {
            for (x, y) in g.iter().zip(e) {
                assert!((x - y).abs() < 1e-8, "{got:?}");
            }
        }
    }
}
