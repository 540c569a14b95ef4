//! Space-time finite element solver for linear parabolic problems.
//!
//! The space-time cylinder `Q = Ω × (0, T)` is meshed directly with
//! axis-aligned brick elements (time is just another coordinate), discretized
//! with a locally stabilized conforming Galerkin scheme on tensor-product
//! nodal elements, and solved as one sparse nonsymmetric positive-definite
//! system by preconditioned FGMRES. Guaranteed functional error majorants
//! drive Dörfler marking and anisotropic hanging-node refinement.
//!
//! Element loops run on rayon when the default `parallel` feature is on and
//! fall back to plain sequential iteration without it.
//!
//! Entry points:
//! - [`mesh::build_tensor_mesh`] / [`mesh::BrickMesh::refine`] for meshes,
//! - [`fespace::FeSpace::build`] for the constrained nodal space,
//! - [`assembly::assemble`] for the linear system,
//! - [`solver::fgmres`] / [`solver::nested_solve`] for the solve,
//! - [`estimator::estimate`] for majorants and anisotropy indicators,
//! - [`adaptivity::adaptive_loop`] for the full solve–estimate–mark–refine
//!   loop, and [`study`] for config-driven benchmark runs (CLI: `solve`).

pub mod adaptivity;
pub mod assembly;
pub mod error;
pub mod estimator;
pub mod fespace;
pub mod mesh;
pub mod norms;
pub mod problem;
pub mod quadrature;
pub mod shapes;
pub mod solver;
pub mod study;

pub(crate) mod dyadic;
pub(crate) mod par;

pub use error::{Error, Result};
