//! Distributed randomized Kaczmarz with adversarial workers.
//!
//! The crate simulates a central server that solves `Ax = b` by broadcasting
//! one row per iteration to `n` sampled workers, aggregating the returned step
//! coefficients by their mode, and learning a block-list of workers whose
//! answers keep disagreeing with the mode. The [`analysis`] module evaluates
//! the exact mode distributions and the convergence bound for the same setup.

pub mod adversary;
pub mod aggregate;
pub mod analysis;
pub mod blocklist;
mod error;
pub mod kaczmarz;
pub mod rng;
pub mod solver;

pub use adversary::{CategorySpec, ErrorSpec, Response, WorkerPool};
pub use aggregate::{ModeDecision, ModeOutcome, ResponseGroup, TieBreak};
pub use blocklist::{BlockListState, BlockPolicy};
pub use error::{Error, Result};
pub use kaczmarz::{Matrix, Problem, RowDistribution};
pub use solver::{IterationRecord, SolveConfig, SolveStatus, SolveTrace};
