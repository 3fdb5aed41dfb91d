//! Roundness certificates for smooth bounded domains in R^3.
//!
//! Given a closed triangulated boundary (or one of the built-in analytic
//! families), this crate solves the exterior capacitary potential with a
//! single-layer boundary element method, sweeps the level sets of
//! `w = -log u`, evaluates the level-set functionals `W`, `U` and the
//! umbilicity defect, and turns them into certified upper bounds on the
//! exterior Yamabe and Sobolev quotients together with deficit lower
//! bounds. A separate medial-axis pipeline produces ball-sandwich,
//! Gromov-Hausdorff and flow-retraction certificates.
//!
//! The command line entry point is the `rondure` binary; see the README
//! for the subcommands and the report formats.

pub mod bem;
pub mod curvature;
pub mod domains;
pub mod error;
pub mod kernels;
pub mod marching;
pub mod medial;
pub mod mesh;
pub mod quad;
pub mod seb;

pub use error::{Error, Result};
pub use mesh::TriangleMesh;

/// Crate version echoed into analysis reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
