//! Power-iteration estimates of extreme curvature.
//!
//! Operators are taken as closures so estimates work directly on
//! Hessian-vector products without forming a matrix.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::vector::ParamVector;

/// Default step count used by the run harness.
pub const DEFAULT_POWER_ITERS: usize = 30;

/// Rayleigh-quotient estimate of the largest eigenvalue of a symmetric
/// positive-definite operator after `iters` power steps from a seeded
/// random unit vector. The estimate is non-decreasing in `iters` up to
/// floating-point noise.
pub fn estimate_lambda_max<F>(apply: F, dim: usize, iters: usize, seed: u64) -> Result<f64>
where
    F: Fn(&ParamVector) -> ParamVector,
{
    let rayleigh = power_iteration(apply, dim, iters, seed)?;
    Ok(rayleigh)
}

/// Spectral-norm estimate for a symmetric (possibly indefinite) operator:
/// the magnitude of the dominant eigenvalue.
pub fn estimate_spectral_norm<F>(apply: F, dim: usize, iters: usize, seed: u64) -> Result<f64>
where
    F: Fn(&ParamVector) -> ParamVector,
{
    let rayleigh = power_iteration(apply, dim, iters, seed)?;
    Ok(rayleigh.abs())
}

fn power_iteration<F>(apply: F, dim: usize, iters: usize, seed: u64) -> Result<f64>
where
    F: Fn(&ParamVector) -> ParamVector,
{
    if dim == 0 {
        return Err(Error::invalid("dim", "must be >= 1"));
    }
    if iters == 0 {
        return Err(Error::invalid("iters", "must be >= 1"));
    }
    let mut rng = seed::stream_rng(seed, seed::STREAM_POWER_ITER, 0);
    let mut v: ParamVector = (0..dim)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    let start_norm = v.norm();
    if start_norm == 0.0 {
        // astronomically unlikely, but normalize defensively rather than
        // divide by zero
        v = ParamVector::new(vec![1.0; dim]);
    }
    let n = v.norm();
    v.scale(1.0 / n);

    let mut rayleigh = 0.0;
    for _ in 0..iters {
        let u = apply(&v);
        if u.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: u.len(),
            });
        }
        let norm_u = u.norm();
        if norm_u == 0.0 {
            return Err(Error::ZeroOperator);
        }
        if !norm_u.is_finite() {
            return Err(Error::invalid("operator", "produced non-finite values"));
        }
        rayleigh = v.dot(&u);
        v = u;
        v.scale(1.0 / norm_u);
    }
    Ok(rayleigh)
}
