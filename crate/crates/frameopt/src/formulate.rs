//! Compact scaled PMI program: variable bounds, compliance cap, affine
//! scaling of all variables into `[-1, 1]`, and box-constraint selection.
//!
//! Variables are ordered scaled areas first, then scaled compliances. With
//! `a_i = 0.5 (a_s_i + 1) abar_i` and `c_j = (c_s_j + 1) cbar / (2 w_j)`, the
//! volume constraint becomes `2 - n_e - sum(a_s) >= 0` and the compliance cap
//! `1 - w . c_s >= 0`. Box constraints are quadratic (`1 - x^2`) when the
//! stiffness has degree at most two and quartic (`1 - x^4`) otherwise, which
//! keeps the low-order relaxations as tight as the moment side allows.

use crate::fem::{compliance, FemError, PinvOptions, PolynomialStiffness};
use crate::polyalg::{MultiIndex, PolyMatrix, Polynomial};
use crate::scalar::Scalar;
use crate::sdpcore::{self, SdpError, SolveStatus, SolverOptions};
use crate::moments::{LinearSdp, PsdBlockTemplate};

#[derive(Debug, thiserror::Error)]
pub enum FormulateError {
    #[error("stiffness at the uniform design is singular; the ground structure cannot carry the loads")]
    SingularUniformDesign,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error("truss bound solve ended with status {status:?}")]
    TrussSolve { status: SolveStatus },
}

/// Minimization of a linear polynomial objective over scalar polynomial
/// inequalities and polynomial matrix inequalities.
#[derive(Debug, Clone)]
pub struct PmiProgram<T: Scalar> {
    pub n_vars: usize,
    pub objective: Polynomial<T>,
    pub pmi_blocks: Vec<PolyMatrix<T>>,
    pub scalar_constraints: Vec<Polynomial<T>>,
}

/// Which box-constraint family the scaled program carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxFamily {
    /// `1 - x^2 >= 0`, used when the stiffness degree is at most 2.
    Quadratic,
    /// `1 - x^4 >= 0`, used when cubic stiffness terms are present.
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CbarSource {
    UniformDesign,
    TrussSdp,
    User,
}

/// Per-variable bounds of the compact program.
#[derive(Debug, Clone)]
pub struct BoundData<T: Scalar> {
    /// `abar_i = vbar / l_i`.
    pub a_bar: Vec<T>,
    /// Upper bound on the weighted compliance of any optimal design.
    pub c_bar: T,
    pub source: CbarSource,
}

/// The scaled program together with its scaling data.
#[derive(Debug, Clone)]
pub struct ScaledNsdp<T: Scalar> {
    pub program: PmiProgram<T>,
    pub n_elements: usize,
    pub n_load_cases: usize,
    pub weights: Vec<T>,
    pub bounds: BoundData<T>,
    pub box_family: BoxFamily,
}

impl<T: Scalar> ScaledNsdp<T> {
    pub fn n_vars(&self) -> usize {
        self.program.n_vars
    }
}

/// Area caps from the volume budget and the compliance cap from the uniform
/// design, the always-available feasible point.
pub fn variable_bounds<T: Scalar>(
    ps: &PolynomialStiffness<T>,
) -> Result<BoundData<T>, FormulateError> {
    let a_bar: Vec<T> = ps.lengths.iter().map(|&l| ps.volume_bound / l).collect();
    let total: T = ps.lengths.iter().fold(T::zero(), |a, &l| a + l);
    let a_hat = vec![ps.volume_bound / total; ps.n_elements()];

    let k = ps.stiffness_at(&a_hat);
    let eigs = k.symmetric_eigenvalues();
    let lam_max = eigs.iter().copied().fold(T::zero(), |a, b| a.max(b.abs()));
    let lam_min = eigs.iter().copied().fold(T::huge(), |a, b| a.min(b));
    if lam_min <= T::c(1e-12) * lam_max {
        return Err(FormulateError::SingularUniformDesign);
    }
    let res = compliance(ps, &a_hat, PinvOptions::default())?;
    if !res.image_ok {
        return Err(FormulateError::SingularUniformDesign);
    }
    Ok(BoundData { a_bar, c_bar: res.objective, source: CbarSource::UniformDesign })
}

/// Result of the convex truss relaxation.
#[derive(Debug, Clone)]
pub struct TrussBound<T: Scalar> {
    /// Optimal weighted truss compliance; an upper bound for the frame
    /// problem whenever the truss can carry the loads.
    pub objective: T,
    pub design: Vec<T>,
}

/// Solve the convex truss problem (bending stiffness dropped, a linear SDP).
///
/// Returns `None` when the bound does not apply: design-dependent loads are
/// present, or the truss stiffness cannot carry the loads for any design
/// (checked at the uniform design, whose truss image is maximal).
pub fn truss_upper_bound<T: Scalar>(
    ps: &PolynomialStiffness<T>,
    opts: &SolverOptions,
) -> Result<Option<TrussBound<T>>, FormulateError> {
    if ps.has_design_dependent_loads() {
        return Ok(None);
    }
    let ne = ps.n_elements();
    let nlc = ps.n_load_cases();

    // Image precheck: Im(K_t(a)) is the span of the element images for any
    // a > 0, so one evaluation decides applicability.
    let total: T = ps.lengths.iter().fold(T::zero(), |a, &l| a + l);
    let a_hat = vec![ps.volume_bound / total; ne];
    let kt = ps.truss_stiffness_at(&a_hat);
    let eig = kt.symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b.abs()));
    let cutoff = T::c(1e-10) * lam_max;
    for lv in &ps.cases {
        let f = &lv.f0;
        let mut kept = nalgebra::DVector::<T>::zeros(f.len());
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > cutoff && lam > T::zero() {
                let v = eig.eigenvectors.column(i);
                kept.axpy(v.dot(f), &v, T::one());
            }
        }
        if (f - &kept).norm() > T::c(1e-8) * f.norm().max(T::c(1e-300)) {
            return Ok(None);
        }
    }

    // Drop dofs outside the truss span; their rows are identically zero.
    let mut active = vec![false; ps.n_dof];
    for k1 in &ps.k1 {
        for &(i, j, _) in &k1.triplets {
            active[i] = true;
            active[j] = true;
        }
    }
    for &(i, j, _) in &ps.k0.triplets {
        active[i] = true;
        active[j] = true;
    }
    let keep: Vec<usize> = (0..ps.n_dof).filter(|&d| active[d]).collect();
    let pos_of: Vec<Option<usize>> = {
        let mut v = vec![None; ps.n_dof];
        for (k, &d) in keep.iter().enumerate() {
            v[d] = Some(k);
        }
        v
    };
    let nd = keep.len();

    let mut blocks = Vec::with_capacity(nlc + 1 + ne);
    for (j, lv) in ps.cases.iter().enumerate() {
        let mut tpl = PsdBlockTemplate::new(nd + 1);
        for (d, &fd) in lv.f0.iter().enumerate() {
            if fd != T::zero() {
                let p = pos_of[d].expect("loaded dof is in the truss span");
                tpl.constant.push((0, (p + 1) as u32, -fd));
            }
        }
        tpl.terms.push((ne + j, 0, 0, T::one()));
        for (i, k1) in ps.k1.iter().enumerate() {
            for &(p, q, v) in &k1.triplets {
                let (rp, rq) = (pos_of[p].unwrap(), pos_of[q].unwrap());
                tpl.terms.push((i, (rp + 1) as u32, (rq + 1) as u32, v));
            }
        }
        for &(p, q, v) in &ps.k0.triplets {
            let (rp, rq) = (pos_of[p].unwrap(), pos_of[q].unwrap());
            tpl.constant.push(((rp + 1) as u32, (rq + 1) as u32, v));
        }
        blocks.push(tpl);
    }
    let mut vol = PsdBlockTemplate::new(1);
    vol.constant.push((0, 0, ps.volume_bound));
    for (i, &l) in ps.lengths.iter().enumerate() {
        vol.terms.push((i, 0, 0, -l));
    }
    blocks.push(vol);
    for i in 0..ne {
        let mut nn = PsdBlockTemplate::new(1);
        nn.terms.push((i, 0, 0, T::one()));
        blocks.push(nn);
    }

    let weights = ps.weights();
    let sdp = LinearSdp {
        n_vars: ne + nlc,
        objective: weights.iter().enumerate().map(|(j, &w)| (ne + j, w)).collect(),
        objective_offset: T::zero(),
        blocks,
        equalities: Vec::new(),
    };
    let (sol, report) = sdpcore::solve(&sdp, opts)?;
    match report.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => {
            let design: Vec<T> = (0..ne).map(|i| sol.y[i].max(T::zero())).collect();
            Ok(Some(TrussBound { objective: sol.objective, design }))
        }
        SolveStatus::Infeasible | SolveStatus::Unbounded => Ok(None),
        status => Err(FormulateError::TrussSolve { status }),
    }
}

/// Substitute the affine variable scalings into stiffness, loads, and the
/// PMI, and emit the scaled constraint set.
pub fn scale_problem<T: Scalar>(
    ps: &PolynomialStiffness<T>,
    bounds: BoundData<T>,
) -> ScaledNsdp<T> {
    let ne = ps.n_elements();
    let nlc = ps.n_load_cases();
    let n = ne + nlc;
    let weights = ps.weights();
    let half = T::c(0.5);

    // powers of a_i(a_s_i) = 0.5 abar_i (a_s_i + 1)
    let mut pow1 = Vec::with_capacity(ne);
    let mut pow2 = Vec::with_capacity(ne);
    let mut pow3 = Vec::with_capacity(ne);
    for i in 0..ne {
        let scale = half * bounds.a_bar[i];
        let mut p1 = Polynomial::constant(n, scale);
        p1.add_term(MultiIndex::unit(n, i), scale);
        let p2 = p1.checked_mul(&p1).expect("same vars");
        let p3 = p2.checked_mul(&p1).expect("same vars");
        pow1.push(p1);
        pow2.push(p2);
        pow3.push(p3);
    }

    let nd = ps.n_dof;
    let mut pmi_blocks = Vec::with_capacity(nlc);
    for (j, lv) in ps.cases.iter().enumerate() {
        let mut g = PolyMatrix::zero(n, nd + 1);
        // compliance corner: cbar/(2 w_j) (c_s_j + 1)
        let corner_scale = bounds.c_bar / (T::c(2.0) * weights[j]);
        let mut corner = Polynomial::constant(n, corner_scale);
        corner.add_term(MultiIndex::unit(n, ne + j), corner_scale);
        g.set(0, 0, corner);
        // load row: -f_j(a)
        for (d, &fd) in lv.f0.iter().enumerate() {
            if fd != T::zero() {
                g.add_to(0, d + 1, &Polynomial::constant(n, -fd));
            }
        }
        for (i, vec) in &lv.f1 {
            for (d, &fd) in vec.iter().enumerate() {
                if fd != T::zero() {
                    g.add_to(0, d + 1, &pow1[*i].scale(-fd));
                }
            }
        }
        // stiffness block
        for &(p, q, v) in &ps.k0.triplets {
            g.add_to(p + 1, q + 1, &Polynomial::constant(n, v));
        }
        for i in 0..ne {
            for &(p, q, v) in &ps.k1[i].triplets {
                g.add_to(p + 1, q + 1, &pow1[i].scale(v));
            }
            for &(p, q, v) in &ps.k2[i].triplets {
                g.add_to(p + 1, q + 1, &pow2[i].scale(v));
            }
            for &(p, q, v) in &ps.k3[i].triplets {
                g.add_to(p + 1, q + 1, &pow3[i].scale(v));
            }
        }
        pmi_blocks.push(g);
    }

    let mut scalar_constraints = Vec::with_capacity(2 + n);
    // volume: 2 - n_e - sum(a_s)
    let mut vol = Polynomial::constant(n, T::c(2.0 - ne as f64));
    for i in 0..ne {
        vol.add_term(MultiIndex::unit(n, i), -T::one());
    }
    scalar_constraints.push(vol);
    // compliance cap: 1 - w . c_s
    let mut cap = Polynomial::constant(n, T::one());
    for (j, &w) in weights.iter().enumerate() {
        cap.add_term(MultiIndex::unit(n, ne + j), -w);
    }
    scalar_constraints.push(cap);
    // boxes, one per variable so each gets its own localizing block
    let box_family =
        if ps.stiffness_degree() <= 2 { BoxFamily::Quadratic } else { BoxFamily::Quartic };
    let power = match box_family {
        BoxFamily::Quadratic => 2,
        BoxFamily::Quartic => 4,
    };
    for v in 0..n {
        let mut e = vec![0u32; n];
        e[v] = power;
        let mut b = Polynomial::constant(n, T::one());
        b.add_term(MultiIndex(e), -T::one());
        scalar_constraints.push(b);
    }

    // objective: sum_j 0.5 cbar (c_s_j + 1)
    let mut objective = Polynomial::constant(n, half * bounds.c_bar * T::c(nlc as f64));
    for j in 0..nlc {
        objective.add_term(MultiIndex::unit(n, ne + j), half * bounds.c_bar);
    }

    ScaledNsdp {
        program: PmiProgram { n_vars: n, objective, pmi_blocks, scalar_constraints },
        n_elements: ne,
        n_load_cases: nlc,
        weights,
        bounds,
        box_family,
    }
}

/// Map a scaled point back to areas and compliances.
pub fn unscale<T: Scalar>(
    point: &[T],
    bounds: &BoundData<T>,
    weights: &[T],
) -> (Vec<T>, Vec<T>) {
    let ne = bounds.a_bar.len();
    let half = T::c(0.5);
    let a: Vec<T> =
        (0..ne).map(|i| half * (point[i] + T::one()) * bounds.a_bar[i]).collect();
    let c: Vec<T> = weights
        .iter()
        .enumerate()
        .map(|(j, &w)| (point[ne + j] + T::one()) * bounds.c_bar / (T::c(2.0) * w))
        .collect();
    (a, c)
}

/// Map areas and compliances to the scaled point; inverse of [`unscale`].
pub fn scale_point<T: Scalar>(
    a: &[T],
    c: &[T],
    bounds: &BoundData<T>,
    weights: &[T],
) -> Vec<T> {
    let mut point = Vec::with_capacity(a.len() + c.len());
    for (i, &ai) in a.iter().enumerate() {
        point.push(T::c(2.0) * ai / bounds.a_bar[i] - T::one());
    }
    for (j, &cj) in c.iter().enumerate() {
        point.push(T::c(2.0) * weights[j] * cj / bounds.c_bar - T::one());
    }
    point
}
