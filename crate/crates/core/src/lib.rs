//! 2D mixed finite element solver for the steady-state Stefan-Maxwell
//! multicomponent diffusion problem.
//!
//! Species concentrations are discretized with continuous Lagrange elements
//! of order `m` and species velocities with discontinuous vector elements of
//! order `m-1`, so that gradients of the concentration space lie exactly in
//! the velocity space. The mass-flux constraint enters through a rank-1
//! augmentation of the Onsager transport matrix, which makes the velocity
//! block of the linearized saddle-point system symmetric positive definite.
//! The nonlinearity is handled by Picard iteration: concentrations multiplying
//! velocities are frozen at the previous iterate.
//!
//! The crate is organized to mirror the pipeline:
//!
//! - [`mesh`]: structured triangulations of rectangles with tagged boundaries,
//!   plus legacy VTK export.
//! - [`quadrature`]: Gauss rules on the reference triangle and on facets.
//! - [`fespace`]: finite element spaces, fields, interpolation, and norms.
//! - [`transport`]: the pointwise Onsager matrix, its rank-1 augmentation,
//!   and spectral diagnostics.
//! - [`system`]: assembly of the block saddle-point system with Dirichlet
//!   lifting, plus Matrix Market export.
//! - [`solver`]: sparse direct linear solves and the outer Picard loop.
//! - [`verify`]: a four-species manufactured solution, the convergence study
//!   driver, and a mixed boundary-condition demo with air-species data.
//! - [`cli`]: JSON-configured entry points used by the `smfem` binary.
//!
//! Runnable examples for each capability live under `examples/`.

// Validation sites use `!(x > 0.0)` so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod fespace;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod system;
pub mod transport;
pub mod verify;

pub use fespace::{Field, FiniteSpace, SpaceKind};
pub use mesh::{RegionTag, TriMesh};
pub use solver::{PicardSettings, SolveReport};
pub use system::{ProblemData, SaddleSystem};
pub use transport::{PointState, TransportCoefficients};
