//! Solver and certifier for weighted vector equilibrium problems of
//! logarithmic potential theory.
//!
//! A problem is a tuple of real interval unions `Δ_i`, a positive
//! semidefinite interaction matrix `C`, external fields `Q_i` and a
//! polyhedron `K = {x >= 0 : Ax = a}` of admissible component masses. The
//! weighted energy
//!
//! ```text
//! J_Q(μ) = Σ_ij c_ij I(μ_i, μ_j) + 2 Σ_i ∫ Q_i dμ_i,   I(μ, ν) = ∫∫ log 1/|x - y| dμ dν
//! ```
//!
//! is minimized over measure tuples with masses in `K`.
//!
//! - [`model`] and [`graphs`] hold the problem data,
//! - [`assumptions`] checks the hypotheses guaranteeing existence and uniqueness,
//! - [`discretize`] and [`solver`] build and minimize the discrete energy,
//! - [`equilibrium`] certifies a solution against the equilibrium inequalities,
//! - [`oracles`] provides closed-form reference values.

// `!(a < b)` also rejects NaN; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assumptions;
#[cfg(feature = "cli")]
pub mod cli;
pub mod discretize;
pub mod equilibrium;
pub mod error;
pub mod graphs;
pub mod lp;
pub mod model;
pub mod oracles;
pub mod solver;

pub use assumptions::{AssumptionReport, Status};
pub use discretize::{DiscreteProblem, Grid, MeasureTuple};
pub use equilibrium::{EquilibriumReport, VerifyOptions};
pub use error::{DiscretizeError, EquilibriumError, LpError, ModelError, OracleError};
pub use graphs::DirectedMultigraph;
pub use model::{ExternalField, InteractionMatrix, Interval, IntervalUnion, MassPolyhedron, ProblemInstance};
pub use solver::{SolveOptions, SolveResult};
