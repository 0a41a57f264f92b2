//! Linear-SDP solving: an embedded primal-dual interior-point method for
//! small instances plus SDPA sparse-format export/import for external
//! backends.
//!
//! The reference solver is a Mehrotra predictor-corrector path-following
//! method with the HKM direction and dense per-block linear algebra. It is
//! deterministic: a fixed identity-scaled interior start, no randomized
//! pivoting, purely sequential arithmetic. Two runs on the same input produce
//! bitwise-identical iterates.

mod sdpa;
mod solver;

use std::path::PathBuf;

pub use sdpa::{export_sdpa, import_sdpa, import_sdpa_solution, sdpa_to_string};

use crate::moments::{LinearSdp, MomentSolution};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum SdpError {
    #[error("total PSD dimension {dim} exceeds the reference-solver cap {cap}; raise the cap or export the problem in SDPA format")]
    Capacity { dim: usize, cap: usize },
    #[error("invalid solver options: {0}")]
    BadOptions(String),
    #[error("variable {0} appears in no PSD block but carries an objective coefficient; the problem is unbounded")]
    UnconstrainedVariable(usize),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("external solver failed: {0}")]
    External(String),
}

/// Which engine carries out a solve.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Backend {
    /// The embedded interior-point method.
    #[default]
    Reference,
    /// An external executable invoked as `<exe> <input.dat-s> <output>`;
    /// the output must contain the primal variable vector.
    External(PathBuf),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Primal/dual feasibility tolerance.
    pub tol_feas: f64,
    /// Reference-backend capacity: total PSD dimension across blocks.
    pub max_psd_dim: usize,
    pub backend: Backend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200,
            tol_gap: 1e-9,
            tol_feas: 1e-9,
            max_psd_dim: 400,
            backend: Backend::Reference,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SdpError> {
        for (name, v) in [("tol_gap", self.tol_gap), ("tol_feas", self.tol_feas)] {
            if !(v > 0.0 && v <= 1e-2) {
                return Err(SdpError::BadOptions(format!("{name} must lie in (0, 1e-2], got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(SdpError::BadOptions("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Inaccurate,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T: Scalar> {
    pub status: SolveStatus,
    pub primal_objective: T,
    pub dual_objective: T,
    pub iterations: usize,
    pub max_residual: T,
}

/// Solve a linear SDP with the selected backend.
pub fn solve<T: Scalar>(
    sdp: &LinearSdp<T>,
    opts: &SolverOptions,
) -> Result<(MomentSolution<T>, SolveReport<T>), SdpError> {
    opts.validate()?;
    match &opts.backend {
        Backend::Reference => {
            let dim = sdp.total_psd_dim();
            if dim > opts.max_psd_dim {
                return Err(SdpError::Capacity { dim, cap: opts.max_psd_dim });
            }
            solver::solve_reference(sdp, opts)
        }
        Backend::External(exe) => solve_external(sdp, exe, opts),
    }
}

fn solve_external<T: Scalar>(
    sdp: &LinearSdp<T>,
    exe: &PathBuf,
    _opts: &SolverOptions,
) -> Result<(MomentSolution<T>, SolveReport<T>), SdpError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let tag = format!(
        "frameopt-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    );
    let dir = std::env::temp_dir();
    let input = dir.join(format!("{tag}.dat-s"));
    let output = dir.join(format!("{tag}.result"));

    export_sdpa(sdp, &input)?;
    let status = std::process::Command::new(exe)
        .arg(&input)
        .arg(&output)
        .status()
        .map_err(|e| SdpError::External(format!("cannot launch {}: {e}", exe.display())))?;
    if !status.success() {
        return Err(SdpError::External(format!("{} exited with {status}", exe.display())));
    }
    let sol = import_sdpa_solution(&output, sdp)?;
    let report = SolveReport {
        status: sol.status,
        primal_objective: sol.objective,
        dual_objective: sol.dual_objective,
        iterations: 0,
        max_residual: sol.primal_residual,
    };
    let _ = std::fs::remove_file(&input);
    let _ = std::fs::remove_file(&output);
    Ok((sol, report))
}

// ---------------------------------------------------------------------------
// Shared reduction: pin equality-fixed variables, fold them into constants.
// ---------------------------------------------------------------------------

/// Accumulate `factor * A` into a dense matrix, `A` given as symmetric
/// upper-triangle triplets.
pub(crate) fn solver_add_scaled_sym<T: Scalar>(
    out: &mut nalgebra::DMatrix<T>,
    triplets: &[(u32, u32, T)],
    factor: T,
) {
    for &(i, j, v) in triplets {
        let (i, j) = (i as usize, j as usize);
        out[(i, j)] += factor * v;
        if i != j {
            out[(j, i)] += factor * v;
        }
    }
}

pub(crate) struct Reduced<T: Scalar> {
    /// Original variable index per reduced variable.
    pub vars: Vec<usize>,
    /// Reduced objective, dense.
    pub q: Vec<T>,
    /// Objective constant including fixed-variable contributions.
    pub offset: T,
    pub blocks: Vec<ReducedBlock<T>>,
}

pub(crate) struct ReducedBlock<T: Scalar> {
    pub size: usize,
    pub a0: nalgebra::DMatrix<T>,
    /// Sorted by reduced variable; upper-triangle triplets per variable.
    pub entries: Vec<(usize, Vec<(u32, u32, T)>)>,
    /// Normalization factor the block data was divided by; the block is
    /// PSD-equivalent, only the dual variable is rescaled.
    pub data_scale: T,
}

pub(crate) fn reduce<T: Scalar>(sdp: &LinearSdp<T>) -> Result<Reduced<T>, SdpError> {
    let n = sdp.n_vars;
    let mut fixed: Vec<Option<T>> = vec![None; n];
    for &(v, val) in &sdp.equalities {
        fixed[v] = Some(val);
    }
    let mut red_of: Vec<Option<usize>> = vec![None; n];
    let mut vars = Vec::new();
    for (v, f) in fixed.iter().enumerate() {
        if f.is_none() {
            red_of[v] = Some(vars.len());
            vars.push(v);
        }
    }
    let m = vars.len();

    let mut q = vec![T::zero(); m];
    let mut offset = sdp.objective_offset;
    for &(v, c) in &sdp.objective {
        match red_of[v] {
            Some(t) => q[t] += c,
            None => offset += c * fixed[v].unwrap(),
        }
    }

    let mut appears = vec![false; m];
    let mut blocks = Vec::with_capacity(sdp.blocks.len());
    for tpl in &sdp.blocks {
        let sz = tpl.size;
        let mut a0 = nalgebra::DMatrix::<T>::zeros(sz, sz);
        let mut add = |i: u32, j: u32, v: T| {
            a0[(i as usize, j as usize)] += v;
            if i != j {
                a0[(j as usize, i as usize)] += v;
            }
        };
        for &(i, j, v) in &tpl.constant {
            add(i, j, v);
        }
        let mut per_var: std::collections::BTreeMap<usize, Vec<(u32, u32, T)>> =
            std::collections::BTreeMap::new();
        for &(t, i, j, v) in &tpl.terms {
            match red_of[t] {
                Some(rt) => per_var.entry(rt).or_default().push((i, j, v)),
                None => add(i, j, v * fixed[t].unwrap()),
            }
        }
        let mut entries: Vec<(usize, Vec<(u32, u32, T)>)> = Vec::with_capacity(per_var.len());
        for (rt, mut list) in per_var {
            appears[rt] = true;
            list.sort_by_key(|&(i, j, _)| (i, j));
            // merge duplicates at the same position
            let mut merged: Vec<(u32, u32, T)> = Vec::with_capacity(list.len());
            for (i, j, v) in list {
                if let Some(last) = merged.last_mut() {
                    if last.0 == i && last.1 == j {
                        last.2 += v;
                        continue;
                    }
                }
                merged.push((i, j, v));
            }
            merged.retain(|&(_, _, v)| v != T::zero());
            if !merged.is_empty() {
                entries.push((rt, merged));
            }
        }

        // Normalize the block data to unit scale; equilibrates the Schur
        // complement when block magnitudes differ by orders of magnitude.
        let norm = |tr: &[(u32, u32, T)]| -> T {
            let mut acc = T::zero();
            for &(i, j, v) in tr {
                let w = v * v;
                acc += if i == j { w } else { w + w };
            }
            acc.sqrt()
        };
        let mut data_scale = a0.norm();
        for (_, tr) in &entries {
            data_scale = data_scale.max(norm(tr));
        }
        if data_scale <= T::zero() {
            data_scale = T::one();
        }
        let inv = T::one() / data_scale;
        a0 *= inv;
        for (_, tr) in entries.iter_mut() {
            for t in tr.iter_mut() {
                t.2 *= inv;
            }
        }
        blocks.push(ReducedBlock { size: sz, a0, entries, data_scale });
    }

    for (t, seen) in appears.iter().enumerate() {
        if !seen && q[t] != T::zero() {
            return Err(SdpError::UnconstrainedVariable(vars[t]));
        }
    }

    Ok(Reduced { vars, q, offset, blocks })
}
