//! Richardson iteration over an abstract symmetric positive-definite
//! operator.
//!
//! The recursion `x_k = (I - alpha*A) x_{k-1} + alpha*b` solves `A x = b`
//! and converges exactly when `0 < alpha < 2 / lambda_max(A)`. The operator
//! is supplied as a closure, so callers can hand in a Hessian-vector product
//! without ever forming the matrix.

use crate::error::{Error, Result};
use crate::vector::ParamVector;

#[derive(Clone, Debug)]
pub struct RichardsonSettings {
    pub alpha: f64,
    pub rounds: usize,
    /// Initial iterate; `None` means the zero vector.
    pub x0: Option<ParamVector>,
}

impl RichardsonSettings {
    pub fn new(alpha: f64, rounds: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
        }
        Ok(RichardsonSettings {
            alpha,
            rounds,
            x0: None,
        })
    }

    pub fn with_start(mut self, x0: ParamVector) -> Self {
        self.x0 = Some(x0);
        self
    }
}

/// Runs exactly `settings.rounds` Richardson steps and returns the final
/// iterate. A NaN/Inf entry or an iterate norm beyond
/// `1e12 * (||b|| + ||x0|| + 1)` aborts with the offending round index.
pub fn richardson_solve<F>(
    apply: F,
    b: &ParamVector,
    settings: &RichardsonSettings,
) -> Result<ParamVector>
where
    F: Fn(&ParamVector) -> ParamVector,
{
    let mut x = match &settings.x0 {
        Some(x0) => {
            if x0.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    expected: b.len(),
                    got: x0.len(),
                });
            }
            x0.clone()
        }
        None => ParamVector::zeros(b.len()),
    };
    let guard = 1e12 * (b.norm() + x.norm() + 1.0);
    let alpha = settings.alpha;

    for round in 1..=settings.rounds {
        let ax = apply(&x);
        if ax.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                got: ax.len(),
            });
        }
        for ((xi, bi), ai) in x.iter_mut().zip(b.iter()).zip(ax.iter()) {
            *xi += alpha * (bi - ai);
        }
        if !x.all_finite() || x.norm() > guard {
            return Err(Error::RichardsonDiverged { round });
        }
    }
    Ok(x)
}

/// Relaxation factor `min(1/rounds, 1/lambda_max_hat)`: small enough for the
/// averaged per-worker iterates to track the centralized ones while staying
/// inside the convergence region.
pub fn spectral_alpha(lambda_max_hat: f64, rounds: usize) -> Result<f64> {
    if !(lambda_max_hat > 0.0) {
        return Err(Error::invalid(
            "lambda_max_hat",
            format!("must be > 0, got {lambda_max_hat}"),
        ));
    }
    if rounds < 1 {
        return Err(Error::invalid("rounds", "must be >= 1"));
    }
    Ok((1.0 / rounds as f64).min(1.0 / lambda_max_hat))
}

/// Post-hoc estimate of the relative quality of an averaged direction:
/// the centralized residual contraction plus the heterogeneity tail
/// `nu * L / rounds^2` (the unknown constant in the tail is taken as 1).
pub fn delta_approximation_estimate(
    centralized_contraction: f64,
    nu: f64,
    smoothness: f64,
    rounds: usize,
) -> f64 {
    centralized_contraction + nu * smoothness / (rounds * rounds) as f64
}
