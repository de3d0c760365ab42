//! Expected-error bound for the mode-aggregated iteration.

use serde::{Deserialize, Serialize};

use crate::adversary::WorkerPool;
use crate::kaczmarz::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceBoundInputs {
    /// Smallest squared singular value of A.
    pub sigma_min_sq: f64,
    /// `‖A‖_F²`.
    pub frob_sq: f64,
    /// `‖e_ℓ‖²` for `ℓ = 1..=k`.
    pub error_norms_sq: Vec<f64>,
    /// Conditional mode probabilities `q_ℓ` for `ℓ = 0..=k`.
    pub q_conditional: Vec<f64>,
    /// `‖x_0 - x*‖²`.
    pub x0_error_sq: f64,
}

impl ConvergenceBoundInputs {
    pub fn from_system(
        a: &Matrix,
        pool: &WorkerPool,
        q_conditional: Vec<f64>,
        x0_error_sq: f64,
    ) -> Self {
        Self {
            sigma_min_sq: a.sigma_min_sq(),
            frob_sq: a.frobenius_sq(),
            error_norms_sq: pool.categories()[1..]
                .iter()
                .map(|c| c.error.norm_sq(a.rows()))
                .collect(),
            q_conditional,
            x0_error_sq,
        }
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.sigma_min_sq / self.frob_sq
    }

    fn checked_alpha(&self) -> Result<f64> {
        let alpha = self.alpha();
        if alpha.is_nan() || alpha >= 1.0 {
            return Err(Error::RankDeficient(alpha));
        }
        Ok(alpha)
    }
}

/// `α^{i+1}‖x_0 - x*‖² + (1 - α^{i+1})/(1 - α) · Σ_ℓ q_ℓ‖e_ℓ‖² / ‖A‖_F²`.
pub fn convergence_bound(inp: &ConvergenceBoundInputs, iteration: u64) -> Result<f64> {
    let alpha = inp.checked_alpha()?;
    if inp.q_conditional.len() != inp.error_norms_sq.len() + 1 {
        return Err(Error::Dimension(format!(
            "{} conditional probabilities for {} error categories",
            inp.q_conditional.len(),
            inp.error_norms_sq.len()
        )));
    }
    let decay = alpha.powf(iteration as f64 + 1.0);
    let noise: f64 = inp.q_conditional[1..]
        .iter()
        .zip(&inp.error_norms_sq)
        .map(|(q, e)| q * e)
        .sum();
    Ok(decay * inp.x0_error_sq + geometric(alpha, decay) * noise / inp.frob_sq)
}

/// Variant for `‖e_ℓ‖ ≤ C`: `α^{i+1}‖x_0 - x*‖² + (1 - α^{i+1})/(1 - α) · C q_0 / ‖A‖_F²`.
pub fn convergence_bound_uniform(inp: &ConvergenceBoundInputs, c: f64, iteration: u64) -> Result<f64> {
    let alpha = inp.checked_alpha()?;
    let q0 = *inp
        .q_conditional
        .first()
        .ok_or_else(|| Error::Dimension("q_0 missing".into()))?;
    let decay = alpha.powf(iteration as f64 + 1.0);
    Ok(decay * inp.x0_error_sq + geometric(alpha, decay) * c * q0 / inp.frob_sq)
}

/// `(1 - α^{i+1}) / (1 - α)` for `α < 1`.
fn geometric(alpha: f64, decay: f64) -> f64 {
    (1.0 - decay) / (1.0 - alpha)
}
