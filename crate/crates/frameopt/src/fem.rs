//! Element stiffness and load coefficients, global assembly, and
//! pseudo-inverse compliance evaluation.
//!
//! The assembled stiffness is polynomial in the cross-section areas,
//! `K(a) = K0 + sum_i (K1_i a_i + K2_i a_i^2 + K3_i a_i^3)`, with every
//! coefficient matrix positive semidefinite. Loads are affine,
//! `f(a) = f0 + sum_i f1_i a_i`. Compliance is evaluated through a symmetric
//! eigendecomposition and the Moore-Penrose pseudo-inverse so that designs
//! with vanished elements (singular stiffness) are handled exactly: the
//! residual of `K K^+ f = f` decides whether the loads are carried at all.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};

use crate::scalar::Scalar;
use crate::structmodel::{Dof, Element, ElementKind, GroundStructure, ModelError, DOFS_PER_NODE};

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("all degrees of freedom are fixed; nothing to analyze")]
    EmptySystem,
    #[error("element {element}: coefficient matrix K{power} is not positive semidefinite (min eigenvalue {eigmin:e})")]
    NotPsd { element: u32, power: u32, eigmin: f64 },
    #[error("element {element}: stiffness matrices are ingested from a file, not computed")]
    Ingested { element: u32 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("cross-section areas must be non-negative (a[{index}] = {value})")]
    NegativeArea { index: usize, value: f64 },
    #[error("non-finite value encountered: {0}")]
    Numeric(String),
    #[error("grid oracle supports at most 3 elements, got {0}")]
    TooManyElements(usize),
    #[error("grid oracle needs resolution >= 100, got {0}")]
    ResolutionTooCoarse(usize),
}

/// Numbering of the free (unconstrained) degrees of freedom.
///
/// Global dofs are node-major in ascending node-id order, `(ux, uy, rot)` per
/// node; fixed dofs are eliminated and the remainder renumbered contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    free_of_global: Vec<Option<usize>>,
    pub n_free: usize,
}

impl DofMap {
    pub fn build<T: Scalar>(gs: &GroundStructure<T>) -> Self {
        let mut free_of_global = vec![None; gs.nodes.len() * DOFS_PER_NODE];
        let mut next = 0;
        for (pos, node) in gs.nodes.iter().enumerate() {
            for (d, dof) in [Dof::Ux, Dof::Uy, Dof::Rot].into_iter().enumerate() {
                if !node.is_fixed(dof) {
                    free_of_global[pos * DOFS_PER_NODE + d] = Some(next);
                    next += 1;
                }
            }
        }
        DofMap { free_of_global, n_free: next }
    }

    /// Reduced index of a global dof, if free.
    pub fn free(&self, node_pos: usize, local_dof: usize) -> Option<usize> {
        self.free_of_global[node_pos * DOFS_PER_NODE + local_dof]
    }
}

/// Symmetric sparse matrix stored as upper-triangle triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparse<T: Scalar> {
    pub n: usize,
    /// `(i, j, value)` with `i <= j`, sorted, at most one triplet per position.
    pub triplets: Vec<(usize, usize, T)>,
}

impl<T: Scalar> SymSparse<T> {
    pub fn zero(n: usize) -> Self {
        SymSparse { n, triplets: Vec::new() }
    }

    pub fn from_triplets(n: usize, mut raw: Vec<(usize, usize, T)>) -> Self {
        for t in raw.iter_mut() {
            if t.0 > t.1 {
                *t = (t.1, t.0, t.2);
            }
        }
        raw.sort_by_key(|&(i, j, _)| (i, j));
        let mut triplets: Vec<(usize, usize, T)> = Vec::with_capacity(raw.len());
        for (i, j, v) in raw {
            if let Some(last) = triplets.last_mut() {
                if last.0 == i && last.1 == j {
                    last.2 += v;
                    continue;
                }
            }
            triplets.push((i, j, v));
        }
        triplets.retain(|&(_, _, v)| v != T::zero());
        SymSparse { n, triplets }
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Accumulate `factor * self` into a dense symmetric matrix.
    pub fn add_scaled_to(&self, dense: &mut DMatrix<T>, factor: T) {
        for &(i, j, v) in &self.triplets {
            dense[(i, j)] += factor * v;
            if i != j {
                dense[(j, i)] += factor * v;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.n, self.n);
        self.add_scaled_to(&mut m, T::one());
        m
    }

    pub fn frobenius_norm(&self) -> T {
        let mut acc = T::zero();
        for &(i, j, v) in &self.triplets {
            let w = v * v;
            acc += if i == j { w } else { w + w };
        }
        acc.sqrt()
    }
}

/// Per-load-case assembled load coefficients on the free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVectors<T: Scalar> {
    pub weight: T,
    pub f0: DVector<T>,
    /// Design-dependent loads: `(element index, per-unit-area vector)`.
    pub f1: Vec<(usize, DVector<T>)>,
}

impl<T: Scalar> LoadVectors<T> {
    pub fn force_at(&self, a: &[T]) -> DVector<T> {
        let mut f = self.f0.clone();
        for (idx, v) in &self.f1 {
            f.axpy(a[*idx], v, T::one());
        }
        f
    }

    pub fn is_design_dependent(&self) -> bool {
        !self.f1.is_empty()
    }
}

/// Polynomial coefficients of the reduced global stiffness and loads.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialStiffness<T: Scalar> {
    pub n_dof: usize,
    pub k0: SymSparse<T>,
    pub k1: Vec<SymSparse<T>>,
    pub k2: Vec<SymSparse<T>>,
    pub k3: Vec<SymSparse<T>>,
    pub cases: Vec<LoadVectors<T>>,
    pub lengths: Vec<T>,
    pub volume_bound: T,
}

impl<T: Scalar> PolynomialStiffness<T> {
    pub fn n_elements(&self) -> usize {
        self.k1.len()
    }

    pub fn n_load_cases(&self) -> usize {
        self.cases.len()
    }

    pub fn weights(&self) -> Vec<T> {
        self.cases.iter().map(|c| c.weight).collect()
    }

    /// Max polynomial degree of `K(a)`: 1, 2, or 3.
    pub fn stiffness_degree(&self) -> u32 {
        if self.k3.iter().any(|m| !m.is_empty()) {
            3
        } else if self.k2.iter().any(|m| !m.is_empty()) {
            2
        } else {
            1
        }
    }

    pub fn has_design_dependent_loads(&self) -> bool {
        self.cases.iter().any(|c| c.is_design_dependent())
    }

    pub fn stiffness_at(&self, a: &[T]) -> DMatrix<T> {
        let mut k = self.k0.to_dense();
        for (i, &ai) in a.iter().enumerate() {
            self.k1[i].add_scaled_to(&mut k, ai);
            self.k2[i].add_scaled_to(&mut k, ai * ai);
            self.k3[i].add_scaled_to(&mut k, ai * ai * ai);
        }
        k
    }

    /// Truss part of the stiffness, `K0 + sum K1_i a_i`.
    pub fn truss_stiffness_at(&self, a: &[T]) -> DMatrix<T> {
        let mut k = self.k0.to_dense();
        for (i, &ai) in a.iter().enumerate() {
            self.k1[i].add_scaled_to(&mut k, ai);
        }
        k
    }
}

/// Numerical options for pseudo-inverse compliance evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PinvOptions<T: Scalar> {
    /// Eigenvalues below `rel_cutoff * max|lambda|` are treated as zero.
    pub rel_cutoff: T,
    /// Image membership requires `||K K^+ f - f|| <= image_rel_tol * ||f||`.
    pub image_rel_tol: T,
}

impl<T: Scalar> Default for PinvOptions<T> {
    fn default() -> Self {
        PinvOptions { rel_cutoff: T::c(1e-10), image_rel_tol: T::c(1e-8) }
    }
}

#[derive(Debug, Clone)]
pub struct CaseCompliance<T: Scalar> {
    pub value: T,
    pub image_ok: bool,
    pub residual: T,
}

#[derive(Debug, Clone)]
pub struct ComplianceResult<T: Scalar> {
    pub cases: Vec<CaseCompliance<T>>,
    /// Weighted total `sum_j w_j c_j`.
    pub objective: T,
    /// True when every load case satisfies the image condition.
    pub image_ok: bool,
}

// ---------------------------------------------------------------------------
// Element matrices
// ---------------------------------------------------------------------------

type M6<T> = SMatrix<T, 6, 6>;
type V6<T> = SVector<T, 6>;

fn rotation<T: Scalar>(c: T, s: T) -> M6<T> {
    let mut t = M6::zeros();
    for node in 0..2 {
        let o = 3 * node;
        t[(o, o)] = c;
        t[(o, o + 1)] = s;
        t[(o + 1, o)] = -s;
        t[(o + 1, o + 1)] = c;
        t[(o + 2, o + 2)] = T::one();
    }
    t
}

fn to_global<T: Scalar>(k_local: &M6<T>, t: &M6<T>) -> M6<T> {
    t.transpose() * k_local * t
}

/// Unit-inertia Euler-Bernoulli bending matrix in local coordinates.
fn bending_unit_eb<T: Scalar>(e: T, l: T) -> M6<T> {
    let mut b = M6::zeros();
    let l2 = l * l;
    let l3 = l2 * l;
    let twelve = T::c(12.0);
    let six = T::c(6.0);
    let four = T::c(4.0);
    let two = T::c(2.0);
    // (w1, th1, w2, th2) = local dofs (1, 2, 4, 5)
    let idx = [1usize, 2, 4, 5];
    let k = [
        [twelve * e / l3, six * e / l2, -twelve * e / l3, six * e / l2],
        [six * e / l2, four * e / l, -six * e / l2, two * e / l],
        [-twelve * e / l3, -six * e / l2, twelve * e / l3, -six * e / l2],
        [six * e / l2, two * e / l, -six * e / l2, four * e / l],
    ];
    for i in 0..4 {
        for j in 0..4 {
            b[(idx[i], idx[j])] = k[i][j];
        }
    }
    b
}

/// Unit-inertia bending matrix of the linear Timoshenko element.
fn bending_unit_timo<T: Scalar>(e: T, l: T) -> M6<T> {
    let mut b = M6::zeros();
    let k = e / l;
    b[(2, 2)] = k;
    b[(2, 5)] = -k;
    b[(5, 2)] = -k;
    b[(5, 5)] = k;
    b
}

/// Per-unit-area shear matrix of the linear Timoshenko element, exactly
/// integrated: `k = kappa G A int B_s^T B_s dx` with
/// `gamma(x) = w'(x) - theta(x)` linear along the element.
fn shear_unit_timo<T: Scalar>(kappa_g: T, l: T) -> M6<T> {
    let idx = [1usize, 2, 4, 5];
    let half = T::c(0.5);
    let third = T::c(1.0 / 3.0);
    let sixth = T::c(1.0 / 6.0);
    let k = [
        [T::one() / l, half, -T::one() / l, half],
        [half, l * third, -half, l * sixth],
        [-T::one() / l, -half, T::one() / l, -half],
        [half, l * sixth, -half, l * third],
    ];
    let mut m = M6::zeros();
    for i in 0..4 {
        for j in 0..4 {
            m[(idx[i], idx[j])] = kappa_g * k[i][j];
        }
    }
    m
}

fn axial_unit<T: Scalar>(e: T, l: T) -> M6<T> {
    let mut m = M6::zeros();
    let k = e / l;
    m[(0, 0)] = k;
    m[(0, 3)] = -k;
    m[(3, 0)] = -k;
    m[(3, 3)] = k;
    m
}

/// Global-coordinate stiffness coefficients `(K1, K2, K3)` of one element,
/// each per the corresponding power of the cross-section area.
pub fn element_stiffness<T: Scalar>(
    gs: &GroundStructure<T>,
    element: &Element<T>,
    length: T,
) -> Result<(M6<T>, M6<T>, M6<T>), FemError> {
    let (c, s) = gs.element_direction(element);
    let t = rotation(c, s);
    let e = element.young_modulus;
    match &element.kind {
        ElementKind::EulerBernoulli => {
            let b = bending_unit_eb(e, length);
            let k1 = to_global(&axial_unit(e, length), &t);
            let k2 = to_global(&(b * element.c2), &t);
            let k3 = to_global(&(b * element.c3), &t);
            Ok((k1, k2, k3))
        }
        ElementKind::Timoshenko { shear_modulus, shear_correction } => {
            let b = bending_unit_timo(e, length);
            let shear = shear_unit_timo(*shear_correction * *shear_modulus, length);
            let k1 = to_global(&(axial_unit(e, length) + shear), &t);
            let k2 = to_global(&(b * element.c2), &t);
            let k3 = to_global(&(b * element.c3), &t);
            Ok((k1, k2, k3))
        }
        ElementKind::Ingested { .. } => Err(FemError::Ingested { element: element.id }),
    }
}

/// Nodal loads of the uniform line load `rho * g * a_i` per unit
/// cross-section area: half the element weight at each end node, no end
/// moments (lumped convention). Returned in global coordinates.
///
/// The Hermite-consistent variant adds end moments `-/+ q l^2 / 12`; the
/// published sizing results for self-weighted frames are reproduced by the
/// lumped convention, so that is what assembly uses.
pub fn selfweight_load<T: Scalar>(
    gs: &GroundStructure<T>,
    element: &Element<T>,
    length: T,
    rho: T,
    gravity: [T; 2],
) -> V6<T> {
    let (c, s) = gs.element_direction(element);
    let q = [rho * gravity[0], rho * gravity[1]];
    // local components of the line load
    let p_ax = q[0] * c + q[1] * s;
    let p_tr = -q[0] * s + q[1] * c;
    let half = T::c(0.5);
    let f_local = V6::from_column_slice(&[
        p_ax * length * half,
        p_tr * length * half,
        T::zero(),
        p_ax * length * half,
        p_tr * length * half,
        T::zero(),
    ]);
    rotation(c, s).transpose() * f_local
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

fn scatter<T: Scalar>(
    dofs: &DofMap,
    n1_pos: usize,
    n2_pos: usize,
    m: &M6<T>,
    n_free: usize,
) -> SymSparse<T> {
    let mut reduced = [None; 6];
    for d in 0..3 {
        reduced[d] = dofs.free(n1_pos, d);
        reduced[3 + d] = dofs.free(n2_pos, d);
    }
    let mut raw = Vec::new();
    for i in 0..6 {
        let Some(ri) = reduced[i] else { continue };
        for j in i..6 {
            let Some(rj) = reduced[j] else { continue };
            let v = m[(i, j)];
            if v != T::zero() {
                raw.push((ri, rj, v));
            }
        }
    }
    SymSparse::from_triplets(n_free, raw)
}

fn psd_check<T: Scalar>(m: &M6<T>, element: u32, power: u32) -> Result<(), FemError> {
    let dm = DMatrix::from_fn(6, 6, |i, j| m[(i, j)]);
    let norm = dm.norm();
    if norm == T::zero() {
        return Ok(());
    }
    let eig = dm.symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(T::huge(), |a, b| a.min(b));
    if min < -T::psd_tol() * norm {
        return Err(FemError::NotPsd { element, power, eigmin: min.to_f64() });
    }
    Ok(())
}

/// Assemble the polynomial stiffness and load coefficients on free dofs.
pub fn assemble<T: Scalar>(gs: &GroundStructure<T>) -> Result<PolynomialStiffness<T>, FemError> {
    let dofs = DofMap::build(gs);
    let n = dofs.n_free;
    if n == 0 {
        return Err(FemError::EmptySystem);
    }

    let mut k1 = Vec::with_capacity(gs.n_elements());
    let mut k2 = Vec::with_capacity(gs.n_elements());
    let mut k3 = Vec::with_capacity(gs.n_elements());
    let mut ingested_f1: Vec<Option<V6<T>>> = Vec::with_capacity(gs.n_elements());
    for (idx, e) in gs.elements.iter().enumerate() {
        let length = gs.lengths()[idx];
        let (m1, m2, m3, f1) = match &e.kind {
            ElementKind::Ingested { matrices, .. } => (
                matrices.k1,
                matrices.k2,
                matrices.k3,
                (matrices.f1 != V6::zeros()).then_some(matrices.f1),
            ),
            _ => {
                let (m1, m2, m3) = element_stiffness(gs, e, length)?;
                (m1, m2, m3, None)
            }
        };
        psd_check(&m1, e.id, 1)?;
        psd_check(&m2, e.id, 2)?;
        psd_check(&m3, e.id, 3)?;
        let n1_pos = gs.node_position(e.n1);
        let n2_pos = gs.node_position(e.n2);
        k1.push(scatter(&dofs, n1_pos, n2_pos, &m1, n));
        k2.push(scatter(&dofs, n1_pos, n2_pos, &m2, n));
        k3.push(scatter(&dofs, n1_pos, n2_pos, &m3, n));
        ingested_f1.push(f1);
    }

    let mut cases = Vec::with_capacity(gs.n_load_cases());
    for lc in &gs.load_cases {
        let mut f0 = DVector::zeros(n);
        for load in &lc.loads {
            let pos = gs.node_position(load.node);
            for (d, v) in [(0, load.fx), (1, load.fy), (2, load.moment)] {
                if let Some(r) = dofs.free(pos, d) {
                    f0[r] += v;
                }
            }
        }
        let mut f1 = Vec::new();
        for (idx, e) in gs.elements.iter().enumerate() {
            let mut fe = V6::zeros();
            if let Some(sw) = &lc.self_weight {
                if !matches!(e.kind, ElementKind::Ingested { .. }) {
                    fe += selfweight_load(gs, e, gs.lengths()[idx], sw.rho, sw.gravity);
                }
            }
            if let Some(fi) = ingested_f1[idx] {
                fe += fi;
            }
            if fe != V6::zeros() {
                let mut v = DVector::zeros(n);
                let n1_pos = gs.node_position(e.n1);
                let n2_pos = gs.node_position(e.n2);
                for d in 0..3 {
                    if let Some(r) = dofs.free(n1_pos, d) {
                        v[r] += fe[d];
                    }
                    if let Some(r) = dofs.free(n2_pos, d) {
                        v[r] += fe[3 + d];
                    }
                }
                f1.push((idx, v));
            }
        }
        cases.push(LoadVectors { weight: lc.weight, f0, f1 });
    }

    Ok(PolynomialStiffness {
        n_dof: n,
        k0: SymSparse::zero(n),
        k1,
        k2,
        k3,
        cases,
        lengths: gs.lengths().to_vec(),
        volume_bound: gs.volume_bound,
    })
}

// ---------------------------------------------------------------------------
// Compliance
// ---------------------------------------------------------------------------

/// Pseudo-inverse compliance of a design, per load case.
pub fn compliance<T: Scalar>(
    ps: &PolynomialStiffness<T>,
    a: &[T],
    opts: PinvOptions<T>,
) -> Result<ComplianceResult<T>, FemError> {
    if a.len() != ps.n_elements() {
        return Err(FemError::Dimension { expected: ps.n_elements(), got: a.len() });
    }
    for (i, &ai) in a.iter().enumerate() {
        if !ai.is_finite() {
            return Err(FemError::Numeric(format!("a[{i}] is not finite")));
        }
        if ai < T::zero() {
            return Err(FemError::NegativeArea { index: i, value: ai.to_f64() });
        }
    }

    let k = ps.stiffness_at(a);
    let eig = k.symmetric_eigen();
    compliance_with_eig(ps, a, &eig, opts)
}

fn compliance_with_eig<T: Scalar>(
    ps: &PolynomialStiffness<T>,
    a: &[T],
    eig: &nalgebra::SymmetricEigen<T, nalgebra::Dyn>,
    opts: PinvOptions<T>,
) -> Result<ComplianceResult<T>, FemError> {
    let lam_max = eig.eigenvalues.iter().copied().fold(T::zero(), |m, l| m.max(l.abs()));
    let cutoff = opts.rel_cutoff * lam_max;

    let mut cases = Vec::with_capacity(ps.n_load_cases());
    let mut objective = T::zero();
    let mut all_ok = true;
    for lv in &ps.cases {
        let f = lv.force_at(a);
        let fnorm = f.norm();
        let mut value = T::zero();
        let mut kept = DVector::<T>::zeros(f.len());
        for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > cutoff && lam > T::zero() {
                let v = eig.eigenvectors.column(idx);
                let proj = v.dot(&f);
                value += proj * proj / lam;
                kept.axpy(proj, &v, T::one());
            }
        }
        let residual = (&f - &kept).norm();
        let image_ok = residual <= opts.image_rel_tol * fnorm || fnorm == T::zero();
        all_ok &= image_ok;
        objective += lv.weight * value;
        cases.push(CaseCompliance { value, image_ok, residual });
    }
    Ok(ComplianceResult { cases, objective, image_ok: all_ok })
}

// ---------------------------------------------------------------------------
// Grid oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct GridResult<T: Scalar> {
    pub best_a: Vec<T>,
    pub best_objective: T,
    pub evaluated: usize,
}

/// Brute-force minimizer over the design simplex `{a >= 0, l^T a <= V}` for
/// problems with at most three elements. Image-infeasible grid points are
/// skipped. Ties are broken toward the lexicographically smallest design, so
/// the result does not depend on the number of threads.
pub fn grid_oracle<T: Scalar>(
    gs: &GroundStructure<T>,
    resolution: usize,
    threads: usize,
) -> Result<GridResult<T>, FemError> {
    let ne = gs.n_elements();
    if ne > 3 {
        return Err(FemError::TooManyElements(ne));
    }
    if resolution < 100 {
        return Err(FemError::ResolutionTooCoarse(resolution));
    }
    let ps = assemble(gs)?;
    let vbar = gs.volume_bound;
    let caps: Vec<T> = gs.lengths().iter().map(|&l| vbar / l).collect();
    let steps: Vec<T> = caps.iter().map(|&c| c / T::c(resolution as f64)).collect();
    let slack = vbar * (T::one() + T::c(1e-12));
    let opts = PinvOptions::default();

    let scan_rows = |row_range: std::ops::Range<usize>| -> (Option<(T, Vec<T>)>, usize) {
        let mut best: Option<(T, Vec<T>)> = None;
        let mut count = 0usize;
        let mut a = vec![T::zero(); ne];
        for i0 in row_range {
            a[0] = steps[0] * T::c(i0 as f64);
            let used0 = gs.lengths()[0] * a[0];
            if used0 > slack {
                continue;
            }
            let inner = |a: &mut Vec<T>, best: &mut Option<(T, Vec<T>)>, count: &mut usize| {
                *count += 1;
                if let Ok(res) = compliance(&ps, a, opts) {
                    if res.image_ok && better(res.objective, a, best) {
                        *best = Some((res.objective, a.clone()));
                    }
                }
            };
            if ne == 1 {
                inner(&mut a, &mut best, &mut count);
            } else {
                for i1 in 0..=resolution {
                    a[1] = steps[1] * T::c(i1 as f64);
                    let used1 = used0 + gs.lengths()[1] * a[1];
                    if used1 > slack {
                        break;
                    }
                    if ne == 2 {
                        inner(&mut a, &mut best, &mut count);
                    } else {
                        for i2 in 0..=resolution {
                            a[2] = steps[2] * T::c(i2 as f64);
                            if used1 + gs.lengths()[2] * a[2] > slack {
                                break;
                            }
                            inner(&mut a, &mut best, &mut count);
                        }
                    }
                }
            }
        }
        (best, count)
    };

    let threads = threads.max(1);
    let results: Vec<(Option<(T, Vec<T>)>, usize)> = if threads == 1 {
        vec![scan_rows(0..resolution + 1)]
    } else {
        let chunk = (resolution + threads) / threads;
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for t in 0..threads {
                let lo = (t * chunk).min(resolution + 1);
                let hi = ((t + 1) * chunk).min(resolution + 1);
                let scan = &scan_rows;
                handles.push(scope.spawn(move || scan(lo..hi)));
            }
            handles.into_iter().map(|h| h.join().expect("grid worker panicked")).collect()
        })
    };

    let mut best: Option<(T, Vec<T>)> = None;
    let mut evaluated = 0;
    for (candidate, count) in results {
        evaluated += count;
        if let Some((val, a)) = candidate {
            if better(val, &a, &best) {
                best = Some((val, a));
            }
        }
    }
    let (best_objective, best_a) =
        best.ok_or_else(|| FemError::Numeric("no image-feasible grid point".into()))?;
    Ok(GridResult { best_a, best_objective, evaluated })
}

fn better<T: Scalar>(val: T, a: &[T], best: &Option<(T, Vec<T>)>) -> bool {
    match best {
        None => true,
        Some((bv, ba)) => {
            if val < *bv {
                true
            } else if val > *bv {
                false
            } else {
                a < &ba[..]
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Physical validation used by the problem loader
// ---------------------------------------------------------------------------

/// Check that the uniform design has positive-definite stiffness and carries
/// every load case. Elements contribute stiffness proportionally for any
/// `a > 0`, so this single check covers the whole open orthant.
pub fn check_loadable<T: Scalar>(gs: &GroundStructure<T>) -> Result<(), ModelError> {
    let ps = assemble(gs).map_err(|e| ModelError::NotLoadable(e.to_string()))?;
    let a = crate::structmodel::uniform_design(gs);
    let k = ps.stiffness_at(&a);
    let eig = k.clone().symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().copied().fold(T::zero(), |m, l| m.max(l.abs()));
    let lam_min = eig.eigenvalues.iter().copied().fold(T::huge(), |m, l| m.min(l));
    if lam_min <= T::c(1e-12) * lam_max {
        return Err(ModelError::NotLoadable(format!(
            "stiffness at the uniform design is singular (min eigenvalue {:e})",
            lam_min.to_f64()
        )));
    }
    let res = compliance_with_eig(&ps, &a, &eig, PinvOptions::default())
        .map_err(|e| ModelError::NotLoadable(e.to_string()))?;
    if !res.image_ok {
        return Err(ModelError::NotLoadable(
            "a load case is not carried by the structure at the uniform design".into(),
        ));
    }
    Ok(())
}
