//! Monotone Picard solver for kinetic equations with isotone gain and loss
//! operators on a finite positive cone.
//!
//! The solver iterates a reformulated equation whose iterates increase
//! monotonically to the solution, so positivity and the moment bounds hold
//! at every sweep rather than only in the limit. `oracle` holds independent
//! reference integrators and `diagnostics` turns the conserved and bounded
//! quantities into per-run ledgers.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod kinetics;
pub mod oracle;
pub mod solver;
pub mod space;
pub mod transport;

pub use error::{Error, Result};
pub use kinetics::{CollisionModel, KernelFamily, KernelSpec, ModelSpec};
pub use solver::{solve, SolveResult, SolverConfig, TimeGrid, Trajectory};
pub use space::{DiagonalOperator, StateVec};
