//! Federated data: synthetic generation, real-data loaders, label-skew
//! partitioning, train/validation splitting, and shard-file persistence.

mod idx;
mod libsvm;
mod partition;
mod shards;
mod synthetic;

pub use idx::load_idx;
pub use libsvm::load_libsvm;
pub use partition::partition_by_label;
pub use shards::{read_shards, write_shards};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::glm::{GlmFamily, Sample};
use crate::seed;
use rand::Rng;

/// Train fraction used when shards are split.
pub const DEFAULT_SPLIT_RATIO: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    BinaryClassification,
    MultiClass(usize),
}

impl TaskKind {
    pub fn family(&self) -> GlmFamily {
        match *self {
            TaskKind::Regression => GlmFamily::Ridge,
            TaskKind::BinaryClassification => GlmFamily::BinaryLogistic,
            TaskKind::MultiClass(classes) => GlmFamily::MultinomialLogistic { classes },
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, TaskKind::Regression)
    }
}

/// One worker's data, already split.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerShard {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
}

/// The data plane of a run: per-worker shards with heterogeneous sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct FederatedDataset {
    pub shards: Vec<WorkerShard>,
    pub dim: usize,
    pub task: TaskKind,
    /// Human-readable descriptor of how the data was produced, seeds
    /// included. Round-trips unchanged through the shard file format.
    pub provenance: String,
}

impl FederatedDataset {
    pub fn n_workers(&self) -> usize {
        self.shards.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shards.is_empty() {
            return Err(Error::invalid("dataset", "needs at least one worker shard"));
        }
        for (i, shard) in self.shards.iter().enumerate() {
            if shard.train.is_empty() {
                return Err(Error::invalid(
                    "dataset",
                    format!("worker {i} has an empty training shard"),
                ));
            }
            for s in shard.train.iter().chain(shard.validation.iter()) {
                if s.dim() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        got: s.dim(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Seeded shuffle-then-split at `floor(ratio * len)`.
pub fn split_train_validation(
    shard: Vec<Sample>,
    ratio: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid("ratio", format!("must be in (0, 1), got {ratio}")));
    }
    if shard.len() < 2 {
        return Err(Error::invalid(
            "shard",
            format!("needs at least 2 samples to split, got {}", shard.len()),
        ));
    }
    let mut samples = shard;
    let mut rng = seed::stream_rng(seed, seed::STREAM_SPLIT, 0);
    for i in (1..samples.len()).rev() {
        let j = rng.random_range(0..=i);
        samples.swap(i, j);
    }
    let cut = (ratio * samples.len() as f64).floor() as usize;
    let validation = samples.split_off(cut);
    Ok((samples, validation))
}
