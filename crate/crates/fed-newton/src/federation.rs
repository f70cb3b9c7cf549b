//! The two-communication-round protocol: per global iteration the
//! aggregator broadcasts the model, averages worker gradients, sends the
//! aggregated gradient back, and averages the workers' locally-approximated
//! Newton directions `d_{i}^R` obtained by running R Richardson steps
//! against their own curvature.
//!
//! Worker computations between the two barriers are independent and may run
//! on separate threads (capped by `FED_NEWTON_THREADS`); partial results are
//! always combined in ascending worker-id order, so traces do not depend on
//! scheduling.

use std::sync::Once;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines;
use crate::error::{Error, Result};
use crate::experiment::{Algo, RunConfig, StepSizeSpec};
use crate::datasets::FederatedDataset;
use crate::glm::{ConvergenceConstants, GlmFamily, GlmModel, Sample};
use crate::richardson::{richardson_solve, RichardsonSettings};
use crate::seed;
use crate::spectral::{estimate_lambda_max, estimate_spectral_norm, DEFAULT_POWER_ITERS};
use crate::trace::{RunStatus, TraceRecord, ValMetric};
use crate::vector::{mean_of, ParamVector};

/// Sender id used by aggregator-originated messages.
pub const AGGREGATOR_ID: usize = usize::MAX;

static THREAD_POOL_INIT: Once = Once::new();

/// Applies `FED_NEWTON_THREADS` to the global worker pool (first caller
/// wins; results are identical for any thread count).
pub fn init_thread_pool_from_env() {
    THREAD_POOL_INIT.call_once(|| {
        if let Some(n) = std::env::var("FED_NEWTON_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|n| *n >= 1)
        {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    });
}

/// Typed protocol messages. Payload layouts are documented in
/// `docs/formats.md`; there is no wire serialization here, but the round
/// driver only moves state through these messages so a real transport could
/// be slotted in behind them.
#[derive(Clone, Debug, PartialEq)]
pub enum MessageKind {
    /// Current model, aggregator to workers.
    ModelBroadcast(ParamVector),
    /// Local gradient at the broadcast model, worker to aggregator.
    GradientUp(ParamVector),
    /// Aggregated gradient, aggregator to workers.
    GradientDown(ParamVector),
    /// Locally approximated Newton direction after R Richardson rounds,
    /// worker to aggregator.
    DirectionUp(ParamVector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMessage {
    pub kind: MessageKind,
    pub round: usize,
    pub sender: usize,
}

impl RoundMessage {
    pub fn model_broadcast(w: ParamVector, round: usize) -> Self {
        RoundMessage { kind: MessageKind::ModelBroadcast(w), round, sender: AGGREGATOR_ID }
    }

    pub fn gradient_down(grad: ParamVector, round: usize) -> Self {
        RoundMessage { kind: MessageKind::GradientDown(grad), round, sender: AGGREGATOR_ID }
    }

    pub fn payload(&self) -> &ParamVector {
        match &self.kind {
            MessageKind::ModelBroadcast(v)
            | MessageKind::GradientUp(v)
            | MessageKind::GradientDown(v)
            | MessageKind::DirectionUp(v) => v,
        }
    }

    fn expect_broadcast(&self, round: usize) -> Result<&ParamVector> {
        match &self.kind {
            MessageKind::ModelBroadcast(w) if self.round == round => Ok(w),
            _ => Err(Error::Protocol(format!(
                "expected ModelBroadcast for round {round}, got {:?} round {}",
                kind_name(&self.kind),
                self.round
            ))),
        }
    }

    fn expect_gradient_down(&self, round: usize) -> Result<&ParamVector> {
        match &self.kind {
            MessageKind::GradientDown(g) if self.round == round => Ok(g),
            _ => Err(Error::Protocol(format!(
                "expected GradientDown for round {round}, got {:?} round {}",
                kind_name(&self.kind),
                self.round
            ))),
        }
    }
}

fn kind_name(kind: &MessageKind) -> &'static str {
    match kind {
        MessageKind::ModelBroadcast(_) => "ModelBroadcast",
        MessageKind::GradientUp(_) => "GradientUp",
        MessageKind::GradientDown(_) => "GradientDown",
        MessageKind::DirectionUp(_) => "DirectionUp",
    }
}

/// One worker sends exactly one uplink of the expected kind per
/// participating round, with payloads matching the model dimension.
fn validate_uplinks(
    msgs: &[RoundMessage],
    ids: &[usize],
    round: usize,
    dim: usize,
    expect_direction: bool,
) -> Result<()> {
    if msgs.len() != ids.len() {
        return Err(Error::Protocol(format!(
            "expected {} uplinks, got {}",
            ids.len(),
            msgs.len()
        )));
    }
    for (msg, id) in msgs.iter().zip(ids.iter()) {
        let ok_kind = match (&msg.kind, expect_direction) {
            (MessageKind::GradientUp(_), false) => true,
            (MessageKind::DirectionUp(_), true) => true,
            _ => false,
        };
        if !ok_kind || msg.round != round || msg.sender != *id {
            return Err(Error::Protocol(format!(
                "bad uplink from worker {}: {} round {}",
                msg.sender,
                kind_name(&msg.kind),
                msg.round
            )));
        }
        if msg.payload().len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: msg.payload().len() });
        }
    }
    Ok(())
}

/// Mini-batch and worker-subset sampling knobs for a run.
#[derive(Clone, Debug)]
pub struct SamplingPolicy {
    /// Samples per worker per round used for gradients and curvature;
    /// `None` (or a size covering the shard) means the full shard.
    pub batch_size: Option<usize>,
    pub subset_size: usize,
    pub seed: u64,
}

impl SamplingPolicy {
    pub fn full(n: usize) -> Self {
        SamplingPolicy { batch_size: None, subset_size: n, seed: 0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.subset_size < 1 || self.subset_size > n {
            return Err(Error::invalid(
                "subset_size",
                format!("must be in [1, {n}], got {}", self.subset_size),
            ));
        }
        if let Some(b) = self.batch_size {
            if b < 1 {
                return Err(Error::invalid("batch_size", "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// One worker: its shard, model description, and private RNG stream for
/// batch sampling.
#[derive(Clone, Debug)]
pub struct WorkerState {
    pub id: usize,
    pub shard: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub model: GlmModel,
    rng: ChaCha8Rng,
    round_batch: Option<Vec<Sample>>,
}

impl WorkerState {
    pub fn new(
        id: usize,
        shard: Vec<Sample>,
        validation: Vec<Sample>,
        model: GlmModel,
        rng_seed: u64,
    ) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::EmptyShard);
        }
        for s in shard.iter().chain(validation.iter()) {
            if s.dim() != model.dim() {
                return Err(Error::DimensionMismatch { expected: model.dim(), got: s.dim() });
            }
        }
        Ok(WorkerState {
            id,
            shard,
            validation,
            model,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            round_batch: None,
        })
    }

    /// Draws the batch used for this round's gradient and curvature, or
    /// clears it for full-shard mode. A batch size covering the whole shard
    /// degenerates to full-shard mode without consuming randomness.
    pub fn begin_round(&mut self, batch_size: Option<usize>) {
        self.round_batch = match batch_size {
            Some(b) if b < self.shard.len() => {
                let len = self.shard.len();
                let mut idx: Vec<usize> = (0..len).collect();
                for i in 0..b {
                    let j = self.rng.random_range(i..len);
                    idx.swap(i, j);
                }
                let mut chosen = idx[..b].to_vec();
                chosen.sort_unstable();
                Some(chosen.iter().map(|&k| self.shard[k].clone()).collect())
            }
            _ => None,
        };
    }

    /// Samples backing the current round: the drawn batch if one exists,
    /// else the full shard (ascending shard order either way).
    pub fn active_samples(&self) -> &[Sample] {
        match &self.round_batch {
            Some(batch) => batch,
            None => &self.shard,
        }
    }

    fn round_gradient(&mut self, broadcast: &RoundMessage, batch: Option<usize>) -> Result<RoundMessage> {
        let w = broadcast.expect_broadcast(broadcast.round)?;
        self.begin_round(batch);
        let grad = self.model.gradient(self.active_samples(), w)?;
        Ok(RoundMessage { kind: MessageKind::GradientUp(grad), round: broadcast.round, sender: self.id })
    }

    fn round_direction(
        &self,
        broadcast: &RoundMessage,
        grad_down: &RoundMessage,
        alpha: f64,
        rounds: usize,
    ) -> Result<RoundMessage> {
        let w = broadcast.expect_broadcast(broadcast.round)?;
        let g = grad_down.expect_gradient_down(broadcast.round)?;
        let dir = self.direction(w, g, alpha, rounds)?;
        Ok(RoundMessage { kind: MessageKind::DirectionUp(dir), round: broadcast.round, sender: self.id })
    }

    /// `d^r = (I - alpha * H_i) d^{r-1} - alpha * grad`, started from zero,
    /// with the local Hessian applied to the round's active samples.
    pub fn direction(
        &self,
        w: &ParamVector,
        global_grad: &ParamVector,
        alpha: f64,
        rounds: usize,
    ) -> Result<ParamVector> {
        let apply = hvp_operator(&self.model, self.active_samples(), w)?;
        let mut b = global_grad.clone();
        b.scale(-1.0);
        let settings = RichardsonSettings::new(alpha, rounds)?;
        richardson_solve(apply, &b, &settings).map_err(|e| Error::WorkerDiverged {
            worker: self.id,
            source: Box::new(e),
        })
    }
}

/// Validates the operator once, then exposes it as an infallible closure
/// suitable for the iterative solvers.
pub(crate) fn hvp_operator<'a>(
    model: &'a GlmModel,
    shard: &'a [Sample],
    w: &'a ParamVector,
) -> Result<impl Fn(&ParamVector) -> ParamVector + Sync + 'a> {
    let probe = ParamVector::zeros(model.param_len());
    model.hvp(shard, w, &probe)?;
    Ok(move |v: &ParamVector| model.hvp(shard, w, v).expect("operator validated above"))
}

/// Samples a worker's local approximate Newton direction, drawing a fresh
/// batch first when `batch` is set.
pub fn local_direction(
    worker: &mut WorkerState,
    w_t: &ParamVector,
    global_grad: &ParamVector,
    alpha: f64,
    rounds: usize,
    batch: Option<usize>,
) -> Result<ParamVector> {
    worker.begin_round(batch);
    worker.direction(w_t, global_grad, alpha, rounds)
}

/// `eta_t = min{1, lambda^2 / (L * ||grad||)}`; 1 when the gradient is zero.
pub fn adaptive_stepsize(grad_norm: f64, constants: &ConvergenceConstants) -> f64 {
    if grad_norm == 0.0 {
        return 1.0;
    }
    (constants.newton_phase_threshold() / grad_norm).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSizeRule {
    Adaptive,
    Fixed(f64),
}

impl StepSizeRule {
    pub fn eta(&self, grad_norm: f64, constants: &ConvergenceConstants) -> f64 {
        match self {
            StepSizeRule::Adaptive => adaptive_stepsize(grad_norm, constants),
            StepSizeRule::Fixed(v) => *v,
        }
    }
}

/// Aggregator-side state of a run.
#[derive(Clone, Debug)]
pub struct AggregatorState {
    pub w: ParamVector,
    pub round: usize,
    pub constants: ConvergenceConstants,
    /// Cumulative communication rounds (2 per full global iteration here;
    /// baselines account for their own exchanges).
    pub comm_count: u64,
    pub stepsize: StepSizeRule,
}

impl AggregatorState {
    pub fn new(w0: ParamVector, constants: ConvergenceConstants, stepsize: StepSizeRule) -> Self {
        AggregatorState { w: w0, round: 0, constants, comm_count: 0, stepsize }
    }
}

/// Uniform sample of `subset_size` distinct worker ids, deterministic in
/// `(seed, round)`, returned sorted.
pub fn sample_workers(n: usize, subset_size: usize, round: usize, seed: u64) -> Result<Vec<usize>> {
    if n < 1 || subset_size < 1 || subset_size > n {
        return Err(Error::invalid(
            "subset_size",
            format!("must be in [1, {n}], got {subset_size}"),
        ));
    }
    let mut rng = seed::stream_rng(seed, seed::STREAM_SUBSET, round as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..subset_size {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen = idx[..subset_size].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Evaluation plane shared by every algorithm: full-shard training loss and
/// gradient norm averaged over all workers, plus the validation metric
/// (top-1 accuracy for classification, mean per-sample loss for
/// regression) weighted by validation-set size.
pub fn evaluate_global(workers: &[WorkerState], w: &ParamVector) -> Result<(f64, f64, ValMetric)> {
    struct Part {
        loss: f64,
        grad: ParamVector,
        correct: usize,
        val_count: usize,
        val_loss: f64,
    }
    let classification = !matches!(workers[0].model.family(), GlmFamily::Ridge);
    let parts: Vec<Part> = workers
        .par_iter()
        .map(|wk| -> Result<Part> {
            let loss = wk.model.loss(&wk.shard, w)?;
            let grad = wk.model.gradient(&wk.shard, w)?;
            let mut correct = 0usize;
            let mut val_loss = 0.0;
            for s in &wk.validation {
                if classification {
                    correct += usize::from(wk.model.predicts_correctly(s, w)?);
                } else {
                    val_loss += wk.model.sample_loss(s, w)?;
                }
            }
            Ok(Part { loss, grad, correct, val_count: wk.validation.len(), val_loss })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = parts.len() as f64;
    let train_loss = parts.iter().map(|p| p.loss).sum::<f64>() / n;
    let mut grad = ParamVector::zeros(parts[0].grad.len());
    for p in &parts {
        grad.add_scaled(1.0, &p.grad);
    }
    grad.scale(1.0 / n);
    let total: usize = parts.iter().map(|p| p.val_count).sum();
    let val = if classification {
        let correct: usize = parts.iter().map(|p| p.correct).sum();
        ValMetric::Accuracy(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
    } else {
        let loss: f64 = parts.iter().map(|p| p.val_loss).sum();
        ValMetric::Loss(if total == 0 { 0.0 } else { loss / total as f64 })
    };
    Ok((train_loss, grad.norm(), val))
}

/// Executes one global iteration against the sampled worker subset and
/// advances the aggregator. The returned record reports the evaluation
/// plane at the updated model; `run_id`/`repeat` are stamped by the caller.
pub fn done_round(
    agg: &mut AggregatorState,
    workers: &mut [WorkerState],
    alpha: f64,
    rounds: usize,
    policy: &SamplingPolicy,
) -> Result<TraceRecord> {
    let started = Instant::now();
    let n = workers.len();
    policy.validate(n)?;
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    let round = agg.round;
    let dim = workers[0].model.param_len();
    if agg.w.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: agg.w.len() });
    }

    let ids = sample_workers(n, policy.subset_size, round, policy.seed)?;
    let broadcast = RoundMessage::model_broadcast(agg.w.clone(), round);

    let (global_grad, direction) = {
        let mut in_subset = vec![false; n];
        for &id in &ids {
            in_subset[id] = true;
        }
        let mut selected: Vec<&mut WorkerState> = workers
            .iter_mut()
            .enumerate()
            .filter_map(|(i, w)| in_subset[i].then_some(w))
            .collect();

        let batch = policy.batch_size;
        let grad_msgs: Vec<RoundMessage> = selected
            .par_iter_mut()
            .map(|w| w.round_gradient(&broadcast, batch))
            .collect::<Result<Vec<_>>>()?;
        validate_uplinks(&grad_msgs, &ids, round, dim, false)?;
        let mut global_grad = ParamVector::zeros(dim);
        for m in &grad_msgs {
            global_grad.add_scaled(1.0, m.payload());
        }
        global_grad.scale(1.0 / ids.len() as f64);

        let grad_down = RoundMessage::gradient_down(global_grad.clone(), round);
        let dir_msgs: Vec<RoundMessage> = selected
            .par_iter()
            .map(|w| w.round_direction(&broadcast, &grad_down, alpha, rounds))
            .collect::<Result<Vec<_>>>()?;
        validate_uplinks(&dir_msgs, &ids, round, dim, true)?;
        let mut direction = ParamVector::zeros(dim);
        for m in &dir_msgs {
            direction.add_scaled(1.0, m.payload());
        }
        direction.scale(1.0 / ids.len() as f64);
        (global_grad, direction)
    };

    let eta = agg.stepsize.eta(global_grad.norm(), &agg.constants);
    let mut new_w = agg.w.clone();
    new_w.add_scaled(eta, &direction);
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

/// Full run output: the trace plus the final model and the constants the
/// run operated with.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub final_params: ParamVector,
    pub constants: ConvergenceConstants,
}

/// Drives `rounds_global` iterations of the configured algorithm over the
/// dataset. Divergence ends the run early with a marker record; all other
/// errors propagate.
pub fn run(config: &RunConfig, data: &FederatedDataset, repeat: usize) -> Result<RunOutput> {
    init_thread_pool_from_env();
    data.validate()?;
    let n = data.n_workers();
    let subset = config.subset.unwrap_or(n);
    if subset < 1 || subset > n {
        return Err(Error::invalid(
            "subset",
            format!("must be in [1, {n}], got {subset}"),
        ));
    }
    let model = GlmModel::new(data.task.family(), config.lambda, data.dim)?;
    let repeat_base = seed::derive(config.seeds.1, seed::STREAM_REPEAT, repeat as u64);
    let mut workers: Vec<WorkerState> = data
        .shards
        .iter()
        .enumerate()
        .map(|(i, s)| {
            WorkerState::new(
                i,
                s.train.clone(),
                s.validation.clone(),
                model.clone(),
                seed::derive(repeat_base, seed::STREAM_WORKER, i as u64),
            )
        })
        .collect::<Result<_>>()?;

    let w0 = ParamVector::zeros(model.param_len());
    let constants = estimate_constants(config, &workers, &w0)?;
    let stepsize = match (config.algo, config.stepsize) {
        (_, StepSizeSpec::Fixed(v)) => StepSizeRule::Fixed(v),
        // for gd, "adaptive" resolves to the constant 2/(lambda + L)
        (Algo::Gd, StepSizeSpec::Adaptive) => {
            StepSizeRule::Fixed(2.0 / (constants.lambda_strong() + constants.smoothness()))
        }
        (_, StepSizeSpec::Adaptive) => StepSizeRule::Adaptive,
    };
    let mut agg = AggregatorState::new(w0, constants, stepsize);
    let policy = SamplingPolicy {
        batch_size: config.batch,
        subset_size: subset,
        seed: repeat_base,
    };
    let run_id = config.run_id();

    let mut records = Vec::with_capacity(config.rounds_global);
    for _ in 0..config.rounds_global {
        if config.smoothness_refresh && matches!(agg.stepsize, StepSizeRule::Adaptive) {
            let lam_hat = estimate_lambda_max_over_workers(&workers, &agg.w, config.seeds.1)?;
            agg.constants = ConvergenceConstants::new(
                agg.constants.lambda_strong(),
                lam_hat.max(agg.constants.lambda_strong()),
                agg.constants.hessian_lipschitz(),
                agg.constants.nu(),
            )?;
        }
        let gd_eta = match agg.stepsize {
            StepSizeRule::Fixed(v) => v,
            StepSizeRule::Adaptive => 0.0, // unused: gd always resolves to Fixed
        };
        let outcome = match config.algo {
            Algo::Done => done_round(&mut agg, &mut workers, config.alpha, config.rounds_local, &policy),
            Algo::Gd => baselines::gd_round(&mut agg, &mut workers, gd_eta),
            Algo::Newton => {
                baselines::newton_richardson_round(&mut agg, &mut workers, config.alpha, config.rounds_local)
            }
        };
        match outcome {
            Ok(mut rec) => {
                rec.run_id = run_id.clone();
                rec.repeat = repeat;
                let stop = config
                    .early_stop_tol
                    .map_or(false, |tol| rec.grad_norm <= tol);
                records.push(rec);
                if stop {
                    break;
                }
            }
            Err(e) if e.is_divergence() => {
                let (train_loss, grad_norm, val_metric) = evaluate_global(&workers, &agg.w)?;
                records.push(TraceRecord {
                    run_id: run_id.clone(),
                    repeat,
                    round: agg.round,
                    train_loss,
                    grad_norm,
                    val_metric,
                    eta: 0.0,
                    comm_rounds: agg.comm_count,
                    wall_ms: 0.0,
                    status: RunStatus::Diverged,
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunOutput {
        records,
        final_params: agg.w,
        constants: agg.constants,
    })
}

fn estimate_constants(
    config: &RunConfig,
    workers: &[WorkerState],
    w0: &ParamVector,
) -> Result<ConvergenceConstants> {
    let lambda_strong = config.lambda_strong.unwrap_or(config.lambda);
    if !(lambda_strong > 0.0) {
        return Err(Error::invalid(
            "lambda_strong",
            "must be > 0; set lambda > 0 or provide lambda_strong explicitly",
        ));
    }
    let smoothness = match config.smoothness {
        Some(l) => l,
        None => estimate_lambda_max_over_workers(workers, w0, config.seeds.1)?,
    }
    .max(lambda_strong);
    let nu = if config.estimate_nu {
        match estimate_heterogeneity(workers, w0, config.seeds.1) {
            Ok(nu) => nu,
            // a perfectly homogeneous difference operator maps everything
            // to zero, which simply means no heterogeneity
            Err(Error::ZeroOperator) => 0.0,
            Err(e) => return Err(e),
        }
    } else {
        0.0
    };
    ConvergenceConstants::new(lambda_strong, smoothness, config.hessian_lipschitz, nu)
}

/// `max_i lambda_max(H_i)` at `w`, each factor from seeded power iteration
/// on the worker's full-shard curvature.
pub fn estimate_lambda_max_over_workers(
    workers: &[WorkerState],
    w: &ParamVector,
    seed_base: u64,
) -> Result<f64> {
    let estimates: Vec<f64> = workers
        .par_iter()
        .map(|wk| {
            let apply = hvp_operator(&wk.model, &wk.shard, w)?;
            estimate_lambda_max(
                apply,
                wk.model.param_len(),
                DEFAULT_POWER_ITERS,
                seed::derive(seed_base, seed::STREAM_POWER_ITER, wk.id as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(estimates.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Spectral-norm estimate of `A^2 - mean_i(A_i^2)` at `w`, where `A_i` is
/// worker i's curvature and `A` their mean. Quantifies how far averaging
/// per-worker solves can drift from the centralized solve.
pub fn estimate_heterogeneity(
    workers: &[WorkerState],
    w: &ParamVector,
    seed_base: u64,
) -> Result<f64> {
    let ops = workers
        .iter()
        .map(|wk| hvp_operator(&wk.model, &wk.shard, w))
        .collect::<Result<Vec<_>>>()?;
    let dim = workers[0].model.param_len();
    let averaged = |v: &ParamVector| -> ParamVector {
        let parts: Vec<ParamVector> = ops.par_iter().map(|op| op(v)).collect();
        mean_of(&parts)
    };
    let apply = |v: &ParamVector| -> ParamVector {
        let av = averaged(v);
        let mut out = averaged(&av);
        let sq_parts: Vec<ParamVector> = ops.par_iter().map(|op| op(&op(v))).collect();
        out.add_scaled(-1.0, &mean_of(&sq_parts));
        out
    };
    estimate_spectral_norm(
        apply,
        dim,
        DEFAULT_POWER_ITERS,
        seed::derive(seed_base, seed::STREAM_HETEROGENEITY, 0),
    )
}
