//! Ground-structure data model: nodes, frame elements, load cases, volume
//! budget, and problem-file I/O.
//!
//! Problem files are JSON documents:
//!
//! ```json
//! {
//!   "nodes": [{"id": 1, "x": 0.0, "y": 0.0, "fixed": ["ux", "uy", "rot"]}],
//!   "elements": [{"id": 1, "n1": 1, "n2": 2, "E": 1.0, "cII": 1.0, "cIII": 0.0,
//!                 "kind": "euler_bernoulli"}],
//!   "load_cases": [{"weight": 1.0,
//!                   "loads": [{"node": 2, "fx": 1.6, "fy": -1.0, "m": 0.0}],
//!                   "self_weight": {"rho": 10.0, "gx": 0.0, "gy": -1.0}}],
//!   "volume_bound": 1.0
//! }
//! ```
//!
//! `kind` is one of `euler_bernoulli`, `timoshenko` (requires `G` and
//! `kappa`), or `ingested` (requires `matrices_file`, a path resolved
//! relative to the problem file). An ingested-matrices file holds dense
//! symmetric 6x6 matrices `K1`, `K2`, `K3` and a 6-vector `f1`, all expressed
//! in global coordinates on the dof ordering
//! `(ux_n1, uy_n1, rot_n1, ux_n2, uy_n2, rot_n2)`; `K(a) = K1 a + K2 a^2 +
//! K3 a^3` and `f(a) = f1 a` is the element's design-dependent load.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Errors raised while loading or validating a problem document.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("ground structure cannot carry the loads: {0}")]
    NotLoadable(String),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Invalid { path: path.into(), message: message.into() }
}

/// Nodal degree of freedom of a planar frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    Ux,
    Uy,
    Rot,
}

pub const DOFS_PER_NODE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T: Scalar> {
    pub id: u32,
    pub x: T,
    pub y: T,
    pub fixed: Vec<Dof>,
}

impl<T: Scalar> Node<T> {
    pub fn is_fixed(&self, dof: Dof) -> bool {
        self.fixed.contains(&dof)
    }

    pub fn fully_fixed(&self) -> bool {
        self.is_fixed(Dof::Ux) && self.is_fixed(Dof::Uy) && self.is_fixed(Dof::Rot)
    }
}

/// Dense symmetric element matrices ingested from a side file.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedMatrices<T: Scalar> {
    pub k1: SMatrix<T, 6, 6>,
    pub k2: SMatrix<T, 6, 6>,
    pub k3: SMatrix<T, 6, 6>,
    pub f1: nalgebra::SVector<T, 6>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind<T: Scalar> {
    EulerBernoulli,
    Timoshenko { shear_modulus: T, shear_correction: T },
    Ingested { matrices_file: String, matrices: IngestedMatrices<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element<T: Scalar> {
    pub id: u32,
    pub n1: u32,
    pub n2: u32,
    pub young_modulus: T,
    /// Quadratic inertia-law constant: `I(a) = c2 a^2 + c3 a^3`.
    pub c2: T,
    /// Cubic inertia-law constant.
    pub c3: T,
    pub kind: ElementKind<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalLoad<T: Scalar> {
    pub node: u32,
    pub fx: T,
    pub fy: T,
    pub moment: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfWeight<T: Scalar> {
    pub rho: T,
    pub gravity: [T; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase<T: Scalar> {
    pub weight: T,
    pub loads: Vec<NodalLoad<T>>,
    pub self_weight: Option<SelfWeight<T>>,
}

/// Validated ground structure: the physical problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStructure<T: Scalar> {
    /// Sorted by node id; dof numbering is node-major in this order.
    pub nodes: Vec<Node<T>>,
    pub elements: Vec<Element<T>>,
    pub load_cases: Vec<LoadCase<T>>,
    pub volume_bound: T,
    lengths: Vec<T>,
    node_index: BTreeMap<u32, usize>,
}

impl<T: Scalar> GroundStructure<T> {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_load_cases(&self) -> usize {
        self.load_cases.len()
    }

    /// Precomputed element lengths, in element order.
    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn node(&self, id: u32) -> &Node<T> {
        &self.nodes[self.node_index[&id]]
    }

    pub fn node_position(&self, id: u32) -> usize {
        self.node_index[&id]
    }

    /// Unit direction cosines `(cos, sin)` of an element axis, n1 -> n2.
    pub fn element_direction(&self, e: &Element<T>) -> (T, T) {
        let a = self.node(e.n1);
        let b = self.node(e.n2);
        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let l = (dx * dx + dy * dy).sqrt();
        (dx / l, dy / l)
    }

    pub fn has_self_weight(&self) -> bool {
        self.load_cases.iter().any(|lc| lc.self_weight.is_some())
    }
}

/// Uniform-mass design: every element gets `vbar / sum(lengths)`, which
/// exhausts the volume budget exactly.
pub fn uniform_design<T: Scalar>(gs: &GroundStructure<T>) -> Vec<T> {
    let total: T = gs.lengths.iter().fold(T::zero(), |acc, &l| acc + l);
    let a = gs.volume_bound / total;
    vec![a; gs.elements.len()]
}

// ---------------------------------------------------------------------------
// Raw on-disk schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct RawProblem {
    nodes: Vec<RawNode>,
    elements: Vec<RawElement>,
    load_cases: Vec<RawLoadCase>,
    volume_bound: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawNode {
    id: u32,
    x: f64,
    y: f64,
    #[serde(default)]
    fixed: Vec<Dof>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawElement {
    id: u32,
    n1: u32,
    n2: u32,
    #[serde(rename = "E")]
    e: f64,
    #[serde(rename = "cII")]
    c2: f64,
    #[serde(rename = "cIII")]
    c3: f64,
    #[serde(default = "default_kind")]
    kind: String,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrices_file: Option<String>,
}

fn default_kind() -> String {
    "euler_bernoulli".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLoadCase {
    weight: f64,
    #[serde(default)]
    loads: Vec<RawLoad>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    self_weight: Option<RawSelfWeight>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawLoad {
    node: u32,
    #[serde(default)]
    fx: f64,
    #[serde(default)]
    fy: f64,
    #[serde(default)]
    m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSelfWeight {
    rho: f64,
    #[serde(default)]
    gx: f64,
    #[serde(default = "default_gy")]
    gy: f64,
}

fn default_gy() -> f64 {
    -1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct RawMatrices {
    #[serde(rename = "K1")]
    k1: Vec<Vec<f64>>,
    #[serde(rename = "K2")]
    k2: Vec<Vec<f64>>,
    #[serde(rename = "K3")]
    k3: Vec<Vec<f64>>,
    #[serde(rename = "f1", default)]
    f1: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Loading and validation
// ---------------------------------------------------------------------------

/// Load and fully validate a problem file.
pub fn load_problem<T: Scalar>(path: &Path) -> Result<GroundStructure<T>, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    load_problem_str(&text, path.parent())
}

/// Load a problem from JSON text; `base_dir` resolves ingested-matrix paths.
pub fn load_problem_str<T: Scalar>(
    json: &str,
    base_dir: Option<&Path>,
) -> Result<GroundStructure<T>, ModelError> {
    let raw: RawProblem =
        serde_json::from_str(json).map_err(|e| ModelError::Schema(e.to_string()))?;
    let gs = validate(raw, base_dir)?;
    crate::fem::check_loadable(&gs)?;
    Ok(gs)
}

fn validate<T: Scalar>(
    raw: RawProblem,
    base_dir: Option<&Path>,
) -> Result<GroundStructure<T>, ModelError> {
    if raw.nodes.is_empty() {
        return Err(invalid("nodes", "at least one node is required"));
    }
    if raw.elements.is_empty() {
        return Err(invalid("elements", "at least one element is required"));
    }
    if raw.load_cases.is_empty() {
        return Err(invalid("load_cases", "at least one load case is required"));
    }
    if !(raw.volume_bound.is_finite() && raw.volume_bound > 0.0) {
        return Err(invalid("volume_bound", "must be finite and positive"));
    }

    let mut nodes: Vec<Node<T>> = Vec::with_capacity(raw.nodes.len());
    let mut node_index = BTreeMap::new();
    for (k, rn) in raw.nodes.iter().enumerate() {
        if !(rn.x.is_finite() && rn.y.is_finite()) {
            return Err(invalid(format!("nodes[{k}]"), "coordinates must be finite"));
        }
        nodes.push(Node { id: rn.id, x: T::c(rn.x), y: T::c(rn.y), fixed: rn.fixed.clone() });
    }
    nodes.sort_by_key(|n| n.id);
    for (pos, n) in nodes.iter().enumerate() {
        if node_index.insert(n.id, pos).is_some() {
            return Err(invalid("nodes", format!("duplicate node id {}", n.id)));
        }
    }

    let mut elements: Vec<Element<T>> = Vec::with_capacity(raw.elements.len());
    let mut lengths: Vec<T> = Vec::with_capacity(raw.elements.len());
    let mut seen_eids = BTreeMap::new();
    for (k, re) in raw.elements.iter().enumerate() {
        let path = format!("elements[{k}]");
        if seen_eids.insert(re.id, k).is_some() {
            return Err(invalid("elements", format!("duplicate element id {}", re.id)));
        }
        for (field, nid) in [("n1", re.n1), ("n2", re.n2)] {
            if !node_index.contains_key(&nid) {
                return Err(invalid(
                    format!("{path}.{field}"),
                    format!("references unknown node {nid}"),
                ));
            }
        }
        if re.n1 == re.n2 {
            return Err(invalid(path, "element endpoints must differ"));
        }
        let a = &nodes[node_index[&re.n1]];
        let b = &nodes[node_index[&re.n2]];
        let dx = (b.x - a.x).to_f64();
        let dy = (b.y - a.y).to_f64();
        let l = (dx * dx + dy * dy).sqrt();
        if l <= 0.0 {
            return Err(invalid(path, "zero-length element"));
        }
        if !(re.e.is_finite() && re.e > 0.0) {
            return Err(invalid(format!("{path}.E"), "Young modulus must be positive"));
        }
        if re.c2 < 0.0 || re.c3 < 0.0 {
            return Err(invalid(&path[..], "cII and cIII must be non-negative"));
        }
        let kind = match re.kind.as_str() {
            "euler_bernoulli" => {
                if re.c2 == 0.0 && re.c3 == 0.0 {
                    return Err(invalid(&path[..], "cII and cIII cannot both be zero"));
                }
                ElementKind::EulerBernoulli
            }
            "timoshenko" => {
                if re.c2 == 0.0 && re.c3 == 0.0 {
                    return Err(invalid(&path[..], "cII and cIII cannot both be zero"));
                }
                let g = re.g.ok_or_else(|| {
                    invalid(format!("{path}.G"), "timoshenko elements need a shear modulus")
                })?;
                let kappa = re.kappa.ok_or_else(|| {
                    invalid(format!("{path}.kappa"), "timoshenko elements need a shear correction")
                })?;
                if !(g > 0.0 && kappa > 0.0) {
                    return Err(invalid(&path[..], "G and kappa must be positive"));
                }
                ElementKind::Timoshenko {
                    shear_modulus: T::c(g),
                    shear_correction: T::c(kappa),
                }
            }
            "ingested" => {
                let file = re.matrices_file.clone().ok_or_else(|| {
                    invalid(format!("{path}.matrices_file"), "ingested elements need a matrices file")
                })?;
                let matrices = load_matrices(&file, base_dir, &path)?;
                ElementKind::Ingested { matrices_file: file, matrices }
            }
            other => {
                return Err(invalid(format!("{path}.kind"), format!("unknown element kind `{other}`")))
            }
        };
        elements.push(Element {
            id: re.id,
            n1: re.n1,
            n2: re.n2,
            young_modulus: T::c(re.e),
            c2: T::c(re.c2),
            c3: T::c(re.c3),
            kind,
        });
        lengths.push(T::c(l));
    }

    let mut load_cases = Vec::with_capacity(raw.load_cases.len());
    for (k, rlc) in raw.load_cases.iter().enumerate() {
        let path = format!("load_cases[{k}]");
        if !(rlc.weight.is_finite() && rlc.weight > 0.0) {
            return Err(invalid(format!("{path}.weight"), "load-case weight must be positive"));
        }
        let mut loads = Vec::with_capacity(rlc.loads.len());
        for (li, rl) in rlc.loads.iter().enumerate() {
            let lpath = format!("{path}.loads[{li}]");
            let Some(&pos) = node_index.get(&rl.node) else {
                return Err(invalid(lpath, format!("references unknown node {}", rl.node)));
            };
            if nodes[pos].fully_fixed() {
                return Err(invalid(lpath, format!("node {} is fully fixed", rl.node)));
            }
            loads.push(NodalLoad {
                node: rl.node,
                fx: T::c(rl.fx),
                fy: T::c(rl.fy),
                moment: T::c(rl.m),
            });
        }
        let self_weight = match &rlc.self_weight {
            None => None,
            Some(sw) => {
                if !(sw.rho.is_finite() && sw.rho > 0.0) {
                    return Err(invalid(format!("{path}.self_weight.rho"), "density must be positive"));
                }
                Some(SelfWeight { rho: T::c(sw.rho), gravity: [T::c(sw.gx), T::c(sw.gy)] })
            }
        };
        load_cases.push(LoadCase { weight: T::c(rlc.weight), loads, self_weight });
    }

    Ok(GroundStructure {
        nodes,
        elements,
        load_cases,
        volume_bound: T::c(raw.volume_bound),
        lengths,
        node_index,
    })
}

fn load_matrices<T: Scalar>(
    file: &str,
    base_dir: Option<&Path>,
    epath: &str,
) -> Result<IngestedMatrices<T>, ModelError> {
    let path = match base_dir {
        Some(dir) => dir.join(file),
        None => PathBuf::from(file),
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|source| ModelError::Io { path: path.clone(), source })?;
    let raw: RawMatrices =
        serde_json::from_str(&text).map_err(|e| ModelError::Schema(format!("{epath}: {e}")))?;

    let to_mat = |name: &str, rows: &Vec<Vec<f64>>| -> Result<SMatrix<T, 6, 6>, ModelError> {
        if rows.len() != 6 || rows.iter().any(|r| r.len() != 6) {
            return Err(invalid(format!("{epath}.{name}"), "matrix must be 6x6"));
        }
        let mut m = SMatrix::<T, 6, 6>::zeros();
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] = T::c(rows[i][j]);
            }
        }
        for i in 0..6 {
            for j in 0..i {
                let d = (m[(i, j)] - m[(j, i)]).abs();
                let scale = T::one() + m[(i, j)].abs();
                if d > T::c(1e-9) * scale {
                    return Err(invalid(format!("{epath}.{name}"), "matrix must be symmetric"));
                }
            }
        }
        Ok(m)
    };

    let k1 = to_mat("K1", &raw.k1)?;
    let k2 = to_mat("K2", &raw.k2)?;
    let k3 = to_mat("K3", &raw.k3)?;
    let mut f1 = nalgebra::SVector::<T, 6>::zeros();
    if let Some(v) = &raw.f1 {
        if v.len() != 6 {
            return Err(invalid(format!("{epath}.f1"), "load vector must have 6 entries"));
        }
        for i in 0..6 {
            f1[i] = T::c(v[i]);
        }
    }
    Ok(IngestedMatrices { k1, k2, k3, f1 })
}

// ---------------------------------------------------------------------------
// Saving
// ---------------------------------------------------------------------------

/// Serialize a ground structure back to the problem-file schema.
pub fn save_problem<T: Scalar>(gs: &GroundStructure<T>, path: &Path) -> Result<(), ModelError> {
    let text = problem_to_json(gs);
    std::fs::write(path, text)
        .map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

pub fn problem_to_json<T: Scalar>(gs: &GroundStructure<T>) -> String {
    let raw = RawProblem {
        nodes: gs
            .nodes
            .iter()
            .map(|n| RawNode {
                id: n.id,
                x: n.x.to_f64(),
                y: n.y.to_f64(),
                fixed: n.fixed.clone(),
            })
            .collect(),
        elements: gs
            .elements
            .iter()
            .map(|e| {
                let (kind, g, kappa, matrices_file) = match &e.kind {
                    ElementKind::EulerBernoulli => ("euler_bernoulli", None, None, None),
                    ElementKind::Timoshenko { shear_modulus, shear_correction } => (
                        "timoshenko",
                        Some(shear_modulus.to_f64()),
                        Some(shear_correction.to_f64()),
                        None,
                    ),
                    ElementKind::Ingested { matrices_file, .. } => {
                        ("ingested", None, None, Some(matrices_file.clone()))
                    }
                };
                RawElement {
                    id: e.id,
                    n1: e.n1,
                    n2: e.n2,
                    e: e.young_modulus.to_f64(),
                    c2: e.c2.to_f64(),
                    c3: e.c3.to_f64(),
                    kind: kind.to_string(),
                    g,
                    kappa,
                    matrices_file,
                }
            })
            .collect(),
        load_cases: gs
            .load_cases
            .iter()
            .map(|lc| RawLoadCase {
                weight: lc.weight.to_f64(),
                loads: lc
                    .loads
                    .iter()
                    .map(|l| RawLoad {
                        node: l.node,
                        fx: l.fx.to_f64(),
                        fy: l.fy.to_f64(),
                        m: l.moment.to_f64(),
                    })
                    .collect(),
                self_weight: lc.self_weight.as_ref().map(|sw| RawSelfWeight {
                    rho: sw.rho.to_f64(),
                    gx: sw.gravity[0].to_f64(),
                    gy: sw.gravity[1].to_f64(),
                }),
            })
            .collect(),
        volume_bound: gs.volume_bound.to_f64(),
    };
    serde_json::to_string_pretty(&raw).expect("problem serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixtures() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems")
    }

    #[test]
    fn motivating_problem_loads() {
        let gs: GroundStructure<f64> = load_problem(&fixtures().join("motivating.json")).unwrap();
        assert_eq!(gs.nodes.len(), 3);
        assert_eq!(gs.n_elements(), 2);
        let l = 1.25_f64.sqrt();
        for &li in gs.lengths() {
            assert!((li - l).abs() < 1e-15);
        }
        assert_eq!(gs.volume_bound, 1.0);
        assert_eq!(gs.load_cases[0].loads[0].fx, 1.6);
        assert_eq!(gs.load_cases[0].loads[0].fy, -1.0);
    }

    #[test]
    fn dangling_node_reference_is_reported() {
        let json = r#"{
            "nodes": [{"id": 1, "x": 0, "y": 0, "fixed": ["ux","uy","rot"]},
                      {"id": 2, "x": 1, "y": 0}],
            "elements": [{"id": 1, "n1": 1, "n2": 99, "E": 1.0, "cII": 1.0, "cIII": 0.0}],
            "load_cases": [{"weight": 1.0, "loads": [{"node": 2, "fy": -1.0}]}],
            "volume_bound": 1.0
        }"#;
        let err = load_problem_str::<f64>(json, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("elements[0].n2"), "got: {msg}");
        assert!(msg.contains("99"), "got: {msg}");
    }

    #[test]
    fn twenty_two_element_frame_loads() {
        let gs: GroundStructure<f64> = load_problem(&fixtures().join("ex45.json")).unwrap();
        assert_eq!(gs.nodes.len(), 8);
        assert_eq!(gs.n_elements(), 22);
        assert_eq!(gs.volume_bound, 0.5);
        let c2 = 46.125 / (81.0 * std::f64::consts::PI);
        for e in &gs.elements {
            assert!((e.c2 - c2).abs() <= 1e-15);
            assert_eq!(e.c3, 0.0);
        }
    }

    #[test]
    fn uniform_design_motivating() {
        let gs: GroundStructure<f64> = load_problem(&fixtures().join("motivating.json")).unwrap();
        let a = uniform_design(&gs);
        let expected = 0.2 * 5.0_f64.sqrt();
        for ai in &a {
            assert!((ai - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_design_single_element() {
        let json = r#"{
            "nodes": [{"id": 1, "x": 0, "y": 0, "fixed": ["ux","uy","rot"]},
                      {"id": 2, "x": 2, "y": 0}],
            "elements": [{"id": 1, "n1": 1, "n2": 2, "E": 1.0, "cII": 1.0, "cIII": 0.0}],
            "load_cases": [{"weight": 1.0, "loads": [{"node": 2, "fy": -1.0}]}],
            "volume_bound": 1.0
        }"#;
        let gs = load_problem_str::<f64>(json, None).unwrap();
        assert_eq!(uniform_design(&gs), vec![0.5]);
    }

    #[test]
    fn uniform_design_two_load_case_frame() {
        let gs: GroundStructure<f64> = load_problem(&fixtures().join("ex41.json")).unwrap();
        let a = uniform_design(&gs);
        let expected = 0.816597322 / (2.0 * 2.0_f64.sqrt());
        for ai in &a {
            assert!((ai - expected).abs() <= 1e-12);
        }
    }

    #[test]
    fn uniform_design_exhausts_volume() {
        for file in ["motivating.json", "ex41.json", "ex43.json", "ex44_eb.json", "ex45.json"] {
            let gs: GroundStructure<f64> = load_problem(&fixtures().join(file)).unwrap();
            let a = uniform_design(&gs);
            let vol: f64 = gs.lengths().iter().zip(&a).map(|(l, ai)| l * ai).sum();
            assert!(
                (vol - gs.volume_bound).abs() <= 1e-12 * gs.volume_bound,
                "{file}: volume {vol} vs bound {}",
                gs.volume_bound
            );
        }
    }

    #[test]
    fn save_load_round_trip_is_identity() {
        let dir = std::env::temp_dir().join("frameopt-structmodel-tests");
        std::fs::create_dir_all(&dir).unwrap();
        for file in ["motivating.json", "ex41.json", "ex43.json", "ex44_timo.json"] {
            let gs: GroundStructure<f64> = load_problem(&fixtures().join(file)).unwrap();
            let out = dir.join(file);
            save_problem(&gs, &out).unwrap();
            let back: GroundStructure<f64> = load_problem(&out).unwrap();
            assert_eq!(gs, back, "round trip changed {file}");
        }
    }

    #[test]
    fn nonpositive_volume_is_rejected() {
        let json = r#"{
            "nodes": [{"id": 1, "x": 0, "y": 0, "fixed": ["ux","uy","rot"]},
                      {"id": 2, "x": 1, "y": 0}],
            "elements": [{"id": 1, "n1": 1, "n2": 2, "E": 1.0, "cII": 1.0, "cIII": 0.0}],
            "load_cases": [{"weight": 1.0, "loads": [{"node": 2, "fy": -1.0}]}],
            "volume_bound": 0.0
        }"#;
        let err = load_problem_str::<f64>(json, None).unwrap_err();
        assert!(err.to_string().contains("volume_bound"));
    }

    #[test]
    fn zero_length_element_is_rejected() {
        let json = r#"{
            "nodes": [{"id": 1, "x": 0, "y": 0, "fixed": ["ux","uy","rot"]},
                      {"id": 2, "x": 0, "y": 0}],
            "elements": [{"id": 1, "n1": 1, "n2": 2, "E": 1.0, "cII": 1.0, "cIII": 0.0}],
            "load_cases": [{"weight": 1.0, "loads": [{"node": 2, "fy": -1.0}]}],
            "volume_bound": 1.0
        }"#;
        let err = load_problem_str::<f64>(json, None).unwrap_err();
        assert!(err.to_string().contains("zero-length"));
    }

    #[test]
    fn load_on_fully_fixed_node_is_rejected() {
        let json = r#"{
            "nodes": [{"id": 1, "x": 0, "y": 0, "fixed": ["ux","uy","rot"]},
                      {"id": 2, "x": 1, "y": 0}],
            "elements": [{"id": 1, "n1": 1, "n2": 2, "E": 1.0, "cII": 1.0, "cIII": 0.0}],
            "load_cases": [{"weight": 1.0, "loads": [{"node": 1, "fy": -1.0}]}],
            "volume_bound": 1.0
        }"#;
        let err = load_problem_str::<f64>(json, None).unwrap_err();
        assert!(err.to_string().contains("fully fixed"));
    }
}
