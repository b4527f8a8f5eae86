//! Symmetric interior penalty discontinuous Galerkin (SIPG) toolkit for the
//! Steklov–Lamé eigenvalue problem of isotropic linear elasticity.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: simplicial meshes of the square, disk, L-shape and cube with
//!   red refinement and face topology.
//! - [`fe_basis`]: Lagrange shape functions on the reference simplex,
//!   quadrature rules and the broken vector-valued space [`fe_basis::DgSpace`].
//! - [`sparse`]: compressed sparse storage, block assembly and a block sparse
//!   Cholesky factorization.
//! - [`dg_assembly`]: the SIPG stiffness, boundary mass, load vector, the dG
//!   and energy norms, and a conforming (continuous) discretization.
//! - [`eigensolve`]: the generalized pencil `A x = ρ B x` with rigid-mode
//!   separation.
//! - [`source_solve`]: manufactured solutions and the discrete source problem.
//! - [`study`]: convergence and robustness sweeps, reference values, CSV output.

// Dense kernels index several arrays in lockstep, and parameter checks use
// `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dg_assembly;
pub mod eigensolve;
mod error;
pub mod fe_basis;
pub mod geometry;
pub mod mesh;
pub mod source_solve;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};
