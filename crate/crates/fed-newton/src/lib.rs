//! Federated second-order optimization at desk scale.
//!
//! Workers approximate their local Newton directions with R rounds of
//! Richardson iteration against their own curvature (applied matrix-free as
//! Hessian-vector products), and the aggregator averages those directions to
//! build the global update. One global iteration costs exactly two
//! communication rounds: gradient aggregation and direction aggregation.
//! First-order distributed GD and a centralized Newton-via-Richardson
//! reference share the same round and trace machinery for comparisons.
//!
//! The library is organized around a handful of modules:
//!
//! - [`glm`]: loss/gradient/Hessian-vector kernels for ridge, binary
//!   logistic, and multinomial logistic models (never materializing a
//!   d-by-d matrix anywhere).
//! - [`richardson`]: the generic stationary solver and its relaxation rule.
//! - [`spectral`]: power-iteration curvature estimates.
//! - [`federation`]: the worker/aggregator round protocol, step sizes,
//!   mini-batch and worker-subset sampling, and the run driver.
//! - [`baselines`]: distributed GD and centralized Newton-Richardson.
//! - [`datasets`]: condition-number-controlled synthetic data, IDX and
//!   LIBSVM loaders, label-skew partitioning, and shard-file persistence.
//! - [`experiment`]: config parsing, repeated runs, CSV traces, summaries,
//!   and SVG plots.
//!
//! Every run is deterministic given its two seeds, independent of worker
//! thread count (`FED_NEWTON_THREADS`).
//!
//! The `fed-newton` binary exposes `run`, `plot`, and `rounds-to-target`
//! subcommands over this library; the `examples/` directory demonstrates
//! each capability in isolation.

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod glm;
pub mod richardson;
pub mod spectral;
pub mod trace;
pub mod vector;

mod fsutil;
mod seed;

pub use error::{Error, Result};
pub use glm::{ConvergenceConstants, GlmFamily, GlmModel, Sample};
pub use vector::ParamVector;
