//! Experiment orchestration: dataset resolution, repeated runs, and
//! persistence of traces plus a summary.

use std::path::PathBuf;

use super::config::{DatasetSpec, RunConfig};
use crate::datasets::{
    generate_synthetic, load_idx, load_libsvm, partition_by_label, read_shards, FederatedDataset,
};
use crate::error::{Error, Result};
use crate::federation;
use crate::fsutil::atomic_write;
use crate::glm::ConvergenceConstants;
use crate::trace::{records_to_csv, RunStatus, TraceRecord, ValMetric, TRACE_SCHEMA_VERSION};

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub records: Vec<TraceRecord>,
    pub diverged_repeats: usize,
}

/// Materializes the dataset a config describes.
pub fn resolve_dataset(config: &RunConfig) -> Result<FederatedDataset> {
    let data_seed = config.seeds.0;
    let dataset = match &config.dataset {
        DatasetSpec::Synthetic { .. } => {
            let spec = config.synthetic_spec().expect("synthetic descriptor");
            let (data, _w_star) = generate_synthetic(&spec)?;
            data
        }
        DatasetSpec::Idx { images, labels, partition } => {
            let samples = load_idx(images, labels)?;
            partition_by_label(
                samples,
                config.workers,
                partition.labels_per_worker,
                partition.size_range,
                data_seed,
            )?
        }
        DatasetSpec::Libsvm { path, dim, partition } => {
            let samples = load_libsvm(path, *dim)?;
            partition_by_label(
                samples,
                config.workers,
                partition.labels_per_worker,
                partition.size_range,
                data_seed,
            )?
        }
        DatasetSpec::Shards { path } => read_shards(path)?,
    };
    dataset.validate()?;
    if let Some(s) = config.subset {
        if s > dataset.n_workers() {
            return Err(Error::Config {
                issues: vec![format!(
                    "subset: must be <= worker count ({}), got {s}",
                    dataset.n_workers()
                )],
            });
        }
    }
    Ok(dataset)
}

/// Runs every repeat, writes `<out>/<run_id>.csv` and
/// `<out>/<run_id>.summary.json`, and returns the paths. A diverged repeat
/// is recorded in its trace and the summary, not treated as fatal.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput> {
    let dataset = resolve_dataset(config)?;
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;

    let mut all_records: Vec<TraceRecord> = Vec::new();
    let mut final_metrics: Vec<f64> = Vec::new();
    let mut final_losses: Vec<f64> = Vec::new();
    let mut diverged = 0usize;
    let mut constants: Option<ConvergenceConstants> = None;
    let mut classification = false;

    for repeat in 0..config.repeats {
        let output = federation::run(config, &dataset, repeat)?;
        if let Some(last) = output.records.last() {
            if last.status == RunStatus::Diverged {
                diverged += 1;
            } else {
                classification = matches!(last.val_metric, ValMetric::Accuracy(_));
                final_metrics.push(last.val_metric.value());
                final_losses.push(last.train_loss);
            }
        }
        constants.get_or_insert(output.constants);
        all_records.extend(output.records);
    }

    let run_id = config.run_id();
    let csv_path = config.out_dir.join(format!("{run_id}.csv"));
    atomic_write(&csv_path, records_to_csv(&all_records).as_bytes())?;

    let summary_path = config.out_dir.join(format!("{run_id}.summary.json"));
    let summary = render_summary(
        config,
        &run_id,
        classification,
        &final_metrics,
        &final_losses,
        diverged,
        constants.as_ref(),
    );
    atomic_write(&summary_path, summary.as_bytes())?;

    Ok(ExperimentOutput { csv_path, summary_path, records: all_records, diverged_repeats: diverged })
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn render_summary(
    config: &RunConfig,
    run_id: &str,
    classification: bool,
    final_metrics: &[f64],
    final_losses: &[f64],
    diverged: usize,
    constants: Option<&ConvergenceConstants>,
) -> String {
    let (metric_mean, metric_std) = mean_std(final_metrics);
    let (loss_mean, loss_std) = mean_std(final_losses);
    let metric_name = if classification { "val_accuracy" } else { "val_loss" };
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"schema_version\": {TRACE_SCHEMA_VERSION},\n"));
    out.push_str(&format!("  \"run_id\": \"{run_id}\",\n"));
    out.push_str(&format!("  \"algo\": \"{}\",\n", config.algo.as_str()));
    out.push_str(&format!("  \"repeats\": {},\n", config.repeats));
    out.push_str(&format!("  \"diverged_repeats\": {diverged},\n"));
    out.push_str(&format!("  \"final_metric\": \"{metric_name}\",\n"));
    out.push_str(&format!("  \"final_metric_mean\": {},\n", json_num(metric_mean)));
    out.push_str(&format!("  \"final_metric_std\": {},\n", json_num(metric_std)));
    out.push_str(&format!("  \"final_train_loss_mean\": {},\n", json_num(loss_mean)));
    out.push_str(&format!("  \"final_train_loss_std\": {},\n", json_num(loss_std)));
    match constants {
        Some(c) => {
            out.push_str(&format!("  \"lambda_strong\": {},\n", json_num(c.lambda_strong())));
            out.push_str(&format!("  \"smoothness\": {},\n", json_num(c.smoothness())));
            out.push_str(&format!("  \"kappa\": {},\n", json_num(c.kappa())));
            out.push_str(&format!(
                "  \"hessian_lipschitz\": {},\n",
                json_num(c.hessian_lipschitz())
            ));
            out.push_str(&format!("  \"nu\": {},\n", json_num(c.nu())));
        }
        None => {}
    }
    out.push_str(&format!("  \"csv\": \"{}.csv\"\n", run_id));
    out.push_str("}\n");
    out
}

fn json_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "null".to_string()
    }
}
