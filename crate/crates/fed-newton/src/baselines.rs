//! Reference algorithms sharing the federation round and trace machinery:
//! first-order distributed gradient descent and the centralized
//! Newton-via-Richardson method, which runs the Richardson recursion against
//! the global averaged curvature (one aggregation per inner iteration, hence
//! `inner_rounds + 2` communication rounds per global iteration).

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::federation::{evaluate_global, hvp_operator, AggregatorState, WorkerState};
use crate::richardson::{richardson_solve, RichardsonSettings};
use crate::trace::{RunStatus, TraceRecord};
use crate::vector::{mean_of, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaselineKind {
    DistributedGd { eta: f64 },
    NewtonRichardson { alpha: f64, inner_rounds: usize },
}

impl BaselineKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineKind::DistributedGd { eta } => {
                if !(eta > 0.0) {
                    return Err(Error::invalid("eta", format!("must be > 0, got {eta}")));
                }
            }
            BaselineKind::NewtonRichardson { alpha, inner_rounds } => {
                if !(alpha > 0.0) {
                    return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
                }
                if inner_rounds < 1 {
                    return Err(Error::invalid("inner_rounds", "must be >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn round(
        &self,
        agg: &mut AggregatorState,
        workers: &mut [WorkerState],
    ) -> Result<TraceRecord> {
        match *self {
            BaselineKind::DistributedGd { eta } => gd_round(agg, workers, eta),
            BaselineKind::NewtonRichardson { alpha, inner_rounds } => {
                newton_richardson_round(agg, workers, alpha, inner_rounds)
            }
        }
    }
}

fn full_gradient(workers: &[WorkerState], w: &ParamVector) -> Result<ParamVector> {
    let grads: Vec<ParamVector> = workers
        .par_iter()
        .map(|wk| wk.model.gradient(&wk.shard, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_of(&grads))
}

/// `w_{t+1} = w_t - eta * mean_i(grad_i(w_t))`; two communication rounds.
/// `eta = 0` is accepted as a degenerate no-op step.
pub fn gd_round(
    agg: &mut AggregatorState,
    workers: &mut [WorkerState],
    eta: f64,
) -> Result<TraceRecord> {
    let started = Instant::now();
    if !(eta >= 0.0) {
        return Err(Error::invalid("eta", format!("must be >= 0, got {eta}")));
    }
    if workers.is_empty() {
        return Err(Error::EmptyShard);
    }
    let round = agg.round;
    let grad = full_gradient(workers, &agg.w)?;
    let mut new_w = agg.w.clone();
    new_w.add_scaled(-eta, &grad);
    if !new_w.all_finite() {
        return Err(Error::NonFiniteUpdate { round });
    }
    agg.w = new_w;
    agg.comm_count += 2;
    agg.round += 1;

    let (train_loss, grad_norm, val_metric) = evaluate_global(workers, &agg.w)?;
    Ok(TraceRecord {
        run_id: String::new(),
        repeat: 0,
        round,
        train_loss,
        grad_norm,
        val_metric,
        eta,
        comm_rounds: agg.comm_count,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        status: RunStatus::Ok,
    })
}

/// Richardson on the global curvature: every inner iteration aggregates
/// per-worker Hessian-vector products, so one global iteration costs
/// `inner_rounds + 2` communication rounds.
pub fn newton_richardson_round(
    agg: &mut AggregatorState,
    workers: &mut [WorkerState],
    alpha: f64,
    inner_rounds: usize,
) -> Result<TraceRecord> {
    let started = Instant::now();
    if inner_rounds < 1 {
        return Err(Error::invalid("inner_rounds", "must be >= 1"));
    }
    if workers.is_empty() {
        return Err(Error::EmptyShard);
    }
    let round = agg.round;
    let w = agg.w.clone();
    let grad = full_gradient(workers, &w)?;
    let grad_norm = grad.norm();

    let ops = workers
        .iter()
        .map(|wk| hvp_operator(&wk.model, &wk.shard, &w))
        .collect::<Result<Vec<_>>>()?;
    let apply = |v: &ParamVector| -> ParamVector {
        let parts: Vec<ParamVector> = ops.par_iter().map(|op| op(v)).collect();
        mean_of(&parts)
    };
    let mut b = grad.clone();
    b.scale(-1.0);
    let settings = RichardsonSettings::new(alpha, inner_rounds)?;
    let direction = richardson_solve(apply, &b, &settings)?;

    let eta = agg.stepsize.eta(grad_norm, &agg.constants);
    let mut new_w = agg.w.clone();
    new_w.add_scaled(eta, &direction);
    if !new_w.all_finite() {
        return Err(Error::NonFiniteUpdate { round });
    }
    agg.w = new_w;
    agg.comm_count += inner_rounds as u64 + 2;
    agg.round += 1;

    let (train_loss, grad_norm, val_metric) = evaluate_global(workers, &agg.w)?;
    Ok(TraceRecord {
        run_id: String::new(),
        repeat: 0,
        round,
        train_loss,
        grad_norm,
        val_metric,
        eta,
        comm_rounds: agg.comm_count,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
        status: RunStatus::Ok,
    })
}
