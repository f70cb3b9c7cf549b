//! Label-skew partitioning: each worker holds only a few classes.

use std::collections::BTreeMap;

use rand::Rng;

use super::{split_train_validation, FederatedDataset, TaskKind, WorkerShard, DEFAULT_SPLIT_RATIO};
use crate::error::{Error, Result};
use crate::glm::Sample;
use crate::seed;

/// Assigns each worker exactly `labels_per_worker` distinct labels
/// (round-robin over the sorted label universe, so every label is covered),
/// draws each worker's size uniformly from `size_range`, and fills the shard
/// from the assigned labels' pools without reusing any sample. Leftover
/// samples stay unassigned.
pub fn partition_by_label(
    samples: Vec<Sample>,
    workers: usize,
    labels_per_worker: usize,
    size_range: (usize, usize),
    seed: u64,
) -> Result<FederatedDataset> {
    if workers < 1 {
        return Err(Error::invalid("workers", "must be >= 1"));
    }
    if size_range.0 > size_range.1 || size_range.0 < 2 {
        return Err(Error::invalid(
            "size_range",
            "min must be >= 2 (so shards can be split) and <= max",
        ));
    }
    if samples.is_empty() {
        return Err(Error::EmptyShard);
    }
    let dim = samples[0].dim();
    for s in &samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
        }
    }

    // Sorted label universe and per-label index pools.
    let mut by_label: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (idx, s) in samples.iter().enumerate() {
        if !s.label.is_finite() {
            return Err(Error::InvalidLabel { label: s.label, why: "labels must be finite" });
        }
        by_label.entry(s.label.to_bits()).or_default().push(idx);
    }
    let labels: Vec<f64> = {
        let mut l: Vec<f64> = by_label.keys().map(|b| f64::from_bits(*b)).collect();
        l.sort_by(|a, b| a.partial_cmp(b).unwrap());
        l
    };
    let class_count = labels.len();
    if labels_per_worker < 1 || labels_per_worker > class_count {
        return Err(Error::invalid(
            "labels_per_worker",
            format!("must be in [1, {class_count}], got {labels_per_worker}"),
        ));
    }
    if workers * labels_per_worker < class_count {
        return Err(Error::invalid(
            "labels_per_worker",
            format!(
                "{workers} workers x {labels_per_worker} labels cannot cover all {class_count} labels"
            ),
        ));
    }
    let task = infer_task(&labels)?;

    // Shuffle each label pool.
    let mut pools: Vec<Vec<usize>> = labels
        .iter()
        .map(|l| by_label.remove(&l.to_bits()).unwrap())
        .collect();
    for (li, pool) in pools.iter_mut().enumerate() {
        let mut rng = seed::stream_rng(seed, seed::STREAM_PARTITION, 1 + li as u64);
        for i in (1..pool.len()).rev() {
            let j = rng.random_range(0..=i);
            pool.swap(i, j);
        }
    }

    // Plan demands first so deficits can be reported in full.
    let mut size_rng = seed::stream_rng(seed, seed::STREAM_PARTITION, 0);
    let mut plans: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(workers); // (label idx, count)
    for i in 0..workers {
        let size = size_rng.random_range(size_range.0..=size_range.1);
        let assigned: Vec<usize> = (0..labels_per_worker)
            .map(|j| (i * labels_per_worker + j) % class_count)
            .collect();
        let base = size / labels_per_worker;
        let extra = size % labels_per_worker;
        let counts: Vec<usize> = (0..labels_per_worker)
            .map(|j| base + usize::from(j < extra))
            .collect();
        plans.push((assigned, counts));
    }

    let mut demand = vec![0usize; class_count];
    for (assigned, counts) in &plans {
        for (l, c) in assigned.iter().zip(counts.iter()) {
            demand[*l] += c;
        }
    }
    let deficits: Vec<String> = (0..class_count)
        .filter(|&l| demand[l] > pools[l].len())
        .map(|l| {
            format!(
                "label {} needs {} samples but only {} are available",
                labels[l],
                demand[l],
                pools[l].len()
            )
        })
        .collect();
    if !deficits.is_empty() {
        return Err(Error::PartitionDeficit { deficits: deficits.join("; ") });
    }

    // Assign by moving samples out of the input.
    let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    let mut cursors = vec![0usize; class_count];
    let mut shards = Vec::with_capacity(workers);
    for (i, (assigned, counts)) in plans.iter().enumerate() {
        let mut shard = Vec::new();
        for (l, c) in assigned.iter().zip(counts.iter()) {
            for _ in 0..*c {
                let idx = pools[*l][cursors[*l]];
                cursors[*l] += 1;
                shard.push(slots[idx].take().expect("sample assigned twice"));
            }
        }
        let (train, validation) = split_train_validation(
            shard,
            DEFAULT_SPLIT_RATIO,
            seed::derive(seed, seed::STREAM_SPLIT, i as u64),
        )?;
        shards.push(WorkerShard { train, validation });
    }

    let provenance = format!(
        "label-partition{{n={},labels={},labels_per_worker={},size_range=[{},{}],seed={},input_samples={}}}",
        workers, class_count, labels_per_worker, size_range.0, size_range.1, seed, slots.len()
    );
    let dataset = FederatedDataset { shards, dim, task, provenance };
    dataset.validate()?;
    Ok(dataset)
}

fn infer_task(labels: &[f64]) -> Result<TaskKind> {
    if labels == [-1.0, 1.0] || labels == [1.0] || labels == [-1.0] {
        return Ok(TaskKind::BinaryClassification);
    }
    let integral = labels.iter().all(|l| l.fract() == 0.0 && *l >= 0.0);
    if integral {
        let max = labels.iter().cloned().fold(0.0, f64::max) as usize;
        return Ok(TaskKind::MultiClass(max + 1));
    }
    Err(Error::invalid(
        "labels",
        "label partition needs class labels (-1/+1 or non-negative integers)",
    ))
}
