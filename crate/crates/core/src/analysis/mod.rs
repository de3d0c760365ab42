//! Exact mode probabilities, the convergence bound and independent
//! references for both.

pub mod bound;
pub mod combinatorics;
pub mod mode;
pub mod oracle;

pub use bound::{convergence_bound, convergence_bound_uniform, ConvergenceBoundInputs};
pub use combinatorics::{binomial, binomial_rational, to_f64, truncation_polynomial};
pub use mode::{
    coefficient_a, mode_category_probability, mode_exists_probability, mode_probabilities,
    non_mode_count_pmf, selection_probability, worker_mode_probability, CategoryCounts,
    ModeProbabilities, PmfForm, WorkerModeProbability,
};
pub use oracle::{brute_force_mode_probability, mc_mode_probability, McEstimate};
