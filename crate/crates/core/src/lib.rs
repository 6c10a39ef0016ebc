//! Nonconforming least-squares h-p spectral element method for elliptic
//! boundary-value problems on three-dimensional polyhedral domains.
//!
//! The solution is represented by independent polynomials on hexahedral
//! elements. Continuity and boundary conditions are enforced by a
//! least-squares functional with fractional Sobolev face norms, minimized by
//! preconditioned conjugate gradients on the normal equations. Near vertices
//! and edges the elements live in logarithmic coordinate frames over
//! geometrically graded meshes, which restores exponential convergence for
//! singular solutions.

pub mod basis;
pub mod dense;
pub mod error;
pub mod functional;
pub mod mesh;
pub mod norms;
pub mod precond;
pub mod problems;
pub mod solver;
pub mod study;
pub mod tensor;

pub use error::{Error, Result};
