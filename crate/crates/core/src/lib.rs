//! Sparse recovery from sparsely corrupted Gaussian measurements.
//!
//! The recovery program is `min ‖u‖₁ s.t. ‖y − Φu‖₁ ≤ ε`. The crate provides
//! instance generators, an exact simplex solver and a restarted primal-dual
//! solver for it, estimators for the matrix conditions of the recovery
//! guarantee `‖x* − x‖ ≤ 8ε/M + 12e₀(K)`, and a tracer that evaluates each
//! step of that guarantee's proof on concrete solves.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the `f64` instantiation used by the file formats and the CLI.

pub mod analysis;
pub mod bundle;
pub mod conditions;
pub mod error;
pub mod generators;
pub mod io;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DenseMatrix = model::Matrix<f64>;
pub type RealVector = model::Vector<f64>;
pub type Instance = generators::SparseInstance<f64>;
pub type SolverResult = solver::SolverResult<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type ConditionEstimate = conditions::ConditionEstimate<f64>;
pub type ProofTrace = analysis::ProofTrace<f64>;
