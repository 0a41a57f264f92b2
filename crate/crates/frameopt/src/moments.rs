//! Moment relaxations: truncated moment matrix, scalar and matrix localizing
//! blocks, and assembly of one relaxation order into a linear SDP.
//!
//! A relaxation of order `r` works with the moment vector `y` indexed by the
//! graded-lexicographic basis of degree `<= 2r`. Every block is affine in
//! `y`; a matrix-valued constraint `G(x) >= 0` of degree `d` contributes a
//! localizing block of size `m * |basis(n, r - ceil(d/2))|` whose
//! `((alpha,i), (beta,j))` entry is `sum_gamma G_gamma[i,j] y_{alpha+beta+gamma}`,
//! laid out basis-monomial-major.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::formulate::PmiProgram;
use crate::polyalg::{basis_len, monomial_basis, MultiIndex, PolyMatrix, Polynomial};
use crate::scalar::Scalar;
use crate::sdpcore::SolveStatus;

#[derive(Debug, thiserror::Error)]
pub enum MomentError {
    #[error("relaxation order {r} is below the minimum {r_min} for this program")]
    OrderTooLow { r: u32, r_min: u32 },
    #[error("constraint of degree {degree} does not fit relaxation order {r}")]
    DegreeTooHigh { degree: u32, r: u32 },
}

/// Mapping between multi-indices and positions in the moment vector.
#[derive(Debug, Clone)]
pub struct MomentIndexing {
    n_vars: usize,
    r: u32,
    basis: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
}

impl MomentIndexing {
    pub fn new(n_vars: usize, r: u32) -> Self {
        let basis = monomial_basis(n_vars, 2 * r);
        let position = basis.iter().cloned().zip(0..).collect();
        MomentIndexing { n_vars, r, basis, position }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn order(&self) -> u32 {
        self.r
    }

    /// Total number of moments, `C(n + 2r, 2r)`.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    /// Position of a monomial in the moment vector.
    pub fn position(&self, idx: &MultiIndex) -> usize {
        self.position[idx]
    }

    /// Position of the degree-one moment of variable `v`.
    pub fn first_order_position(&self, v: usize) -> usize {
        self.position(&MultiIndex::unit(self.n_vars, v))
    }
}

/// One PSD block, affine in the scalar variables.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlockTemplate<T: Scalar> {
    pub size: usize,
    /// Constant part, upper triangle `(i, j, value)` with `i <= j`.
    pub constant: Vec<(u32, u32, T)>,
    /// Variable part: `(variable, i, j, coefficient)` with `i <= j`.
    pub terms: Vec<(usize, u32, u32, T)>,
}

impl<T: Scalar> PsdBlockTemplate<T> {
    pub fn new(size: usize) -> Self {
        PsdBlockTemplate { size, constant: Vec::new(), terms: Vec::new() }
    }

    /// Dense evaluation at a variable vector.
    pub fn eval(&self, x: &DVector<T>) -> nalgebra::DMatrix<T> {
        let mut m = nalgebra::DMatrix::zeros(self.size, self.size);
        for &(i, j, v) in &self.constant {
            m[(i as usize, j as usize)] += v;
            if i != j {
                m[(j as usize, i as usize)] += v;
            }
        }
        for &(t, i, j, v) in &self.terms {
            let w = v * x[t];
            m[(i as usize, j as usize)] += w;
            if i != j {
                m[(j as usize, i as usize)] += w;
            }
        }
        m
    }
}

/// Linear SDP over scalar variables `y`:
/// minimize `objective . y + objective_offset` subject to every block being
/// PSD and the listed single-variable equalities holding.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSdp<T: Scalar> {
    pub n_vars: usize,
    pub objective: Vec<(usize, T)>,
    pub objective_offset: T,
    pub blocks: Vec<PsdBlockTemplate<T>>,
    /// `(variable, value)` pins; the moment relaxation pins `y_0 = 1`.
    pub equalities: Vec<(usize, T)>,
}

impl<T: Scalar> LinearSdp<T> {
    pub fn total_psd_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn objective_value(&self, y: &DVector<T>) -> T {
        let mut v = self.objective_offset;
        for &(t, c) in &self.objective {
            v += c * y[t];
        }
        v
    }
}

/// Solved moment vector together with solver quality data.
#[derive(Debug, Clone)]
pub struct MomentSolution<T: Scalar> {
    pub y: DVector<T>,
    pub objective: T,
    pub dual_objective: T,
    pub status: SolveStatus,
    pub rel_gap: T,
    pub primal_residual: T,
    pub dual_residual: T,
}

// ---------------------------------------------------------------------------
// Block construction
// ---------------------------------------------------------------------------

/// Moment matrix of order `k`: entry `(alpha, beta) -> y_{alpha+beta}`.
pub fn moment_matrix_template<T: Scalar>(idx: &MomentIndexing, k: u32) -> PsdBlockTemplate<T> {
    assert!(k <= idx.order(), "moment matrix order exceeds relaxation order");
    let n = basis_len(idx.n_vars(), k);
    let mut block = PsdBlockTemplate::new(n);
    for i in 0..n {
        for j in i..n {
            let mono = idx.basis[i].plus(&idx.basis[j]);
            block.terms.push((idx.position(&mono), i as u32, j as u32, T::one()));
        }
    }
    block
}

/// Localizing block of a scalar constraint `g(x) >= 0`.
pub fn localizing_scalar<T: Scalar>(
    g: &Polynomial<T>,
    idx: &MomentIndexing,
    r: u32,
) -> Result<PsdBlockTemplate<T>, MomentError> {
    let deg = g.degree();
    if deg > 2 * r {
        return Err(MomentError::DegreeTooHigh { degree: deg, r });
    }
    let k = r - deg.div_ceil(2);
    let n = basis_len(idx.n_vars(), k);
    let mut block = PsdBlockTemplate::new(n);
    for i in 0..n {
        for j in i..n {
            let base = idx.basis[i].plus(&idx.basis[j]);
            for (gamma, &coeff) in g.terms() {
                let mono = base.plus(gamma);
                block.terms.push((idx.position(&mono), i as u32, j as u32, coeff));
            }
        }
    }
    Ok(block)
}

/// Localizing block of a polynomial matrix inequality `G(x) >= 0`, in
/// basis-monomial-major layout: row `alpha * m + i`.
pub fn localizing_pmi<T: Scalar>(
    g: &PolyMatrix<T>,
    idx: &MomentIndexing,
    r: u32,
) -> Result<PsdBlockTemplate<T>, MomentError> {
    let deg = g.degree();
    if deg > 2 * r {
        return Err(MomentError::DegreeTooHigh { degree: deg, r });
    }
    let k = r - deg.div_ceil(2);
    let nb = basis_len(idx.n_vars(), k);
    let m = g.size();
    let mut block = PsdBlockTemplate::new(nb * m);
    for bi in 0..nb {
        for bj in bi..nb {
            let base = idx.basis[bi].plus(&idx.basis[bj]);
            for gi in 0..m {
                let gj_start = if bi == bj { gi } else { 0 };
                for gj in gj_start..m {
                    let Some(poly) = g.get(gi, gj) else { continue };
                    let p = (bi * m + gi) as u32;
                    let q = (bj * m + gj) as u32;
                    for (gamma, &coeff) in poly.terms() {
                        let mono = base.plus(gamma);
                        block.terms.push((idx.position(&mono), p, q, coeff));
                    }
                }
            }
        }
    }
    Ok(block)
}

/// Minimum admissible relaxation order of a program.
pub fn minimum_order<T: Scalar>(prog: &PmiProgram<T>) -> u32 {
    let mut maxdeg = prog.objective.degree();
    for g in &prog.scalar_constraints {
        maxdeg = maxdeg.max(g.degree());
    }
    for g in &prog.pmi_blocks {
        maxdeg = maxdeg.max(g.degree());
    }
    maxdeg.div_ceil(2).max(1)
}

/// Assemble the order-`r` relaxation of a PMI program.
///
/// Block order: one localizing block per PMI, then one per scalar constraint,
/// then the order-`r` moment matrix; the single equality pins `y_0 = 1`.
pub fn build_relaxation<T: Scalar>(
    prog: &PmiProgram<T>,
    r: u32,
) -> Result<(LinearSdp<T>, MomentIndexing), MomentError> {
    let r_min = minimum_order(prog);
    if r < r_min {
        return Err(MomentError::OrderTooLow { r, r_min });
    }
    let idx = MomentIndexing::new(prog.n_vars, r);

    let mut blocks = Vec::with_capacity(prog.pmi_blocks.len() + prog.scalar_constraints.len() + 1);
    for g in &prog.pmi_blocks {
        blocks.push(localizing_pmi(g, &idx, r)?);
    }
    for g in &prog.scalar_constraints {
        blocks.push(localizing_scalar(g, &idx, r)?);
    }
    blocks.push(moment_matrix_template(&idx, r));

    let mut objective = Vec::new();
    for (mono, &coeff) in prog.objective.terms() {
        objective.push((idx.position(mono), coeff));
    }
    objective.sort_by_key(|&(t, _)| t);

    let sdp = LinearSdp {
        n_vars: idx.len(),
        objective,
        objective_offset: T::zero(),
        blocks,
        equalities: vec![(0, T::one())],
    };
    Ok((sdp, idx))
}

/// First-order moments of a solution, split by variable group, with the
/// feasibility checks they provably satisfy.
#[derive(Debug, Clone)]
pub struct FirstOrderMoments<T: Scalar> {
    pub a_s: Vec<T>,
    pub c_s: Vec<T>,
    /// Set when a provable first-order-moment inequality is violated beyond
    /// 1e-6, indicating solver inaccuracy. Not fatal.
    pub accuracy_warning: Option<String>,
}

/// Extract degree-one moments and verify the volume, compliance-cap, and box
/// inequalities they must satisfy at any relaxation solution.
pub fn first_order_moments<T: Scalar>(
    sol: &MomentSolution<T>,
    idx: &MomentIndexing,
    nsdp: &crate::formulate::ScaledNsdp<T>,
) -> FirstOrderMoments<T> {
    let ne = nsdp.n_elements;
    let nlc = nsdp.n_load_cases;
    let a_s: Vec<T> = (0..ne).map(|v| sol.y[idx.first_order_position(v)]).collect();
    let c_s: Vec<T> = (0..nlc).map(|j| sol.y[idx.first_order_position(ne + j)]).collect();

    let tol = T::c(1e-6);
    let mut warn = None;
    let volume = T::c(2.0 - ne as f64) - a_s.iter().copied().fold(T::zero(), |s, v| s + v);
    if volume < -tol {
        warn = Some(format!("scaled volume inequality violated by {:e}", (-volume).to_f64()));
    }
    let cap = T::one()
        - nsdp
            .weights
            .iter()
            .zip(&c_s)
            .fold(T::zero(), |s, (&w, &c)| s + w * c);
    if cap < -tol && warn.is_none() {
        warn = Some(format!("compliance cap inequality violated by {:e}", (-cap).to_f64()));
    }
    for (v, &m1) in a_s.iter().chain(c_s.iter()).enumerate() {
        let p = match nsdp.box_family {
            crate::formulate::BoxFamily::Quadratic => m1 * m1,
            crate::formulate::BoxFamily::Quartic => m1 * m1 * m1 * m1,
        };
        if p > T::one() + tol && warn.is_none() {
            warn = Some(format!("box inequality violated at variable {v}"));
        }
    }

    FirstOrderMoments { a_s, c_s, accuracy_warning: warn }
}

/// Moment vector of the point mass at `x`: `y_alpha = x^alpha`.
pub fn point_mass_moments<T: Scalar>(idx: &MomentIndexing, x: &[T]) -> DVector<T> {
    assert_eq!(x.len(), idx.n_vars());
    let mut y = DVector::zeros(idx.len());
    for (p, mono) in idx.basis().iter().enumerate() {
        let mut v = T::one();
        for (vi, &e) in mono.0.iter().enumerate() {
            if e > 0 {
                v *= x[vi].powi(e as i32);
            }
        }
        y[p] = v;
    }
    y
}
