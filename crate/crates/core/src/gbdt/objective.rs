//! Training objectives: Poisson deviance with log link (unit-sales counts)
//! and plain squared error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Poisson,
    Squared,
}

impl Objective {
    /// Score-space starting point: log-mean for poisson, mean for squared.
    pub fn base_score(&self, targets: &[f64]) -> f64 {
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        match self {
            Objective::Poisson => (mean + 1e-8).ln(),
            Objective::Squared => mean,
        }
    }

    /// Maps a raw score to prediction space.
    pub fn inverse_link(&self, score: f64) -> f64 {
        match self {
            Objective::Poisson => score.exp(),
            Objective::Squared => score,
        }
    }

    /// Per-row loss at score `f` (poisson: log-link negative log-likelihood
    /// up to the target-only constant).
    pub fn loss(&self, score: f64, target: f64) -> f64 {
        match self {
            Objective::Poisson => score.exp() - target * score,
            Objective::Squared => 0.5 * (score - target) * (score - target),
        }
    }

    pub fn grad_hess(&self, score: f64, target: f64) -> (f64, f64) {
        match self {
            Objective::Poisson => {
                let e = score.exp();
                (e - target, e)
            }
            Objective::Squared => (score - target, 1.0),
        }
    }
}

/// Gradient and hessian of the Poisson negative log-likelihood
/// `e^f - y f` at score `f`. Targets must be non-negative counts.
pub fn poisson_grad_hess(score: f64, target: f64) -> Result<(f64, f64)> {
    if target < 0.0 {
        return Err(Error::invalid(format!(
            "poisson target must be non-negative, got {}",
            target
        )));
    }
    Ok(Objective::Poisson.grad_hess(score, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson_grad_hess(0.0, 1.0).unwrap(), (0.0, 1.0));
        let (g, h) = poisson_grad_hess(2.0f64.ln(), 2.0).unwrap();
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 2.0, epsilon = 1e-12);
        assert_eq!(poisson_grad_hess(0.0, 0.0).unwrap(), (1.0, 1.0));
        assert!(poisson_grad_hess(0.0, -1.0).is_err());
    }

    #[test]
    fn squared_gradient_is_residual() {
        assert_eq!(Objective::Squared.grad_hess(3.0, 1.0), (2.0, 1.0));
    }

    #[test]
    fn gradients_are_loss_derivatives() {
        // Finite differences against the loss.
        for obj in [Objective::Poisson, Objective::Squared] {
            for (f, y) in [(0.3, 2.0), (-1.0, 0.0), (1.5, 5.0)] {
                let eps = 1e-6;
                let num_grad = (obj.loss(f + eps, y) - obj.loss(f - eps, y)) / (2.0 * eps);
                let (g, h) = obj.grad_hess(f, y);
                assert_abs_diff_eq!(g, num_grad, epsilon = 1e-5);
                // Wider step for the second difference: cancellation noise
                // scales as machine-eps / step^2.
                let eps = 1e-4;
                let num_hess = (obj.loss(f + eps, y) + obj.loss(f - eps, y) - 2.0 * obj.loss(f, y))
                    / (eps * eps);
                assert_abs_diff_eq!(h, num_hess, epsilon = 1e-3);
            }
        }
    }
}
