//! Certified global minimum-compliance sizing of frame structures.
//!
//! The pipeline: a ground structure ([`structmodel`]) is assembled into
//! polynomial stiffness/load coefficients ([`fem`]), rewritten as a compact
//! scaled program with one polynomial matrix inequality per load case
//! ([`formulate`]), relaxed into a sequence of linear semidefinite programs
//! over truncated moments ([`moments`]), solved by an embedded interior-point
//! method or exported in SDPA sparse format ([`sdpcore`]), and finally turned
//! into certified bounds, optimality certificates, and extracted global
//! minimizers ([`certify`]). A classical optimality-criteria local optimizer
//! ([`baseline`]) provides the comparison column.
//!
//! The numeric core is generic over the scalar type; the aliases below pin
//! the `f64` instantiation used by the CLI and the shipped problem files.

pub mod baseline;
pub mod certify;
pub mod fem;
pub mod formulate;
pub mod moments;
pub mod polyalg;
pub mod scalar;
pub mod sdpcore;
pub mod structmodel;

pub use scalar::Scalar;

/// Default scalar type of the artifact.
pub type Real = f64;

pub type Problem = structmodel::GroundStructure<Real>;
pub type Stiffness = fem::PolynomialStiffness<Real>;
pub type Program = formulate::ScaledNsdp<Real>;
pub type Relaxation = moments::LinearSdp<Real>;
pub type Report = certify::RunReport<Real>;
