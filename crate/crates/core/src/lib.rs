//! Convex variational problems for the standard Gaussian measure on
//! tensor grids: weighted total variation and its relatives, their
//! primal-dual solution, and the level-set geometry of the minimisers.

// parameter checks are written `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod integrands;
pub mod optim;
pub mod ou;
pub mod quadrature;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{build_grid, inner_product, integrate, GaussianGrid, GridSpec, Scheme, ScalarField, VectorField};
pub use integrands::Integrand;
pub use solver::{solve, Solution, SolverParams};
