//! Run configuration: a flat key=value file, with CLI flags mirroring keys
//! one to one. Flags override file values; unknown keys are rejected and
//! validation reports every offending key at once.
//!
//! The grammar and full key list are documented in `docs/formats.md`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::datasets::SyntheticSpec;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    Done,
    Gd,
    Newton,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Done => "done",
            Algo::Gd => "gd",
            Algo::Newton => "newton",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSizeSpec {
    /// min{1, lambda^2 / (L * ||grad||)} each round. For `gd` this resolves
    /// to the constant 2 / (lambda + L) instead.
    Adaptive,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    pub labels_per_worker: usize,
    pub size_range: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    Synthetic {
        dim: usize,
        kappa: f64,
        size_range: (usize, usize),
        noise_std: f64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        partition: PartitionSpec,
    },
    Libsvm {
        path: PathBuf,
        dim: usize,
        partition: PartitionSpec,
    },
    Shards {
        path: PathBuf,
    },
}

impl DatasetSpec {
    fn tag(&self) -> String {
        match self {
            DatasetSpec::Synthetic { dim, kappa, .. } => format!("synth-d{dim}-k{kappa}"),
            DatasetSpec::Idx { .. } => "idx".into(),
            DatasetSpec::Libsvm { .. } => "libsvm".into(),
            DatasetSpec::Shards { .. } => "shards".into(),
        }
    }
}

/// Full experiment specification.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algo: Algo,
    pub dataset: DatasetSpec,
    /// Worker count for synthetic generation and label partitioning.
    pub workers: usize,
    pub alpha: f64,
    /// Local Richardson rounds per global iteration (R).
    pub rounds_local: usize,
    /// Global iterations (T).
    pub rounds_global: usize,
    /// Mini-batch size for local curvature and gradients; `None` = full shard.
    pub batch: Option<usize>,
    /// Workers sampled per round; `None` = full participation.
    pub subset: Option<usize>,
    pub lambda: f64,
    pub stepsize: StepSizeSpec,
    /// (data seed, run seed).
    pub seeds: (u64, u64),
    pub repeats: usize,
    pub out_dir: PathBuf,
    pub lambda_strong: Option<f64>,
    pub smoothness: Option<f64>,
    /// Re-estimate curvature at the current iterate every round.
    pub smoothness_refresh: bool,
    pub hessian_lipschitz: f64,
    pub estimate_nu: bool,
    pub early_stop_tol: Option<f64>,
}

impl RunConfig {
    /// Deterministic identifier used for output file names and the run_id
    /// trace column.
    pub fn run_id(&self) -> String {
        let batch = match self.batch {
            Some(b) => format!("{b}"),
            None => "full".into(),
        };
        let subset = match self.subset {
            Some(s) => format!("{s}"),
            None => "all".into(),
        };
        let step = match self.stepsize {
            StepSizeSpec::Adaptive => "adaptive".to_string(),
            StepSizeSpec::Fixed(v) => format!("fixed{v}"),
        };
        let raw = format!(
            "{}_{}_n{}_a{}_R{}_T{}_B{}_S{}_lam{}_{}_d{}_r{}",
            self.algo.as_str(),
            self.dataset.tag(),
            self.workers,
            self.alpha,
            self.rounds_local,
            self.rounds_global,
            batch,
            subset,
            self.lambda,
            step,
            self.seeds.0,
            self.seeds.1,
        );
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '-' })
            .collect()
    }

    /// Synthetic generation spec for this config (valid only for synthetic
    /// dataset descriptors).
    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match &self.dataset {
            DatasetSpec::Synthetic { dim, kappa, size_range, noise_std } => Some(SyntheticSpec {
                workers: self.workers,
                dim: *dim,
                kappa: *kappa,
                size_range: *size_range,
                noise_std: *noise_std,
                seed: self.seeds.0,
            }),
            _ => None,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "algo",
    "dataset",
    "workers",
    "alpha",
    "R",
    "T",
    "batch",
    "subset",
    "lambda",
    "stepsize",
    "seed",
    "seed_data",
    "seed_run",
    "repeats",
    "out",
    "synth_d",
    "synth_kappa",
    "synth_size_min",
    "synth_size_max",
    "synth_noise_std",
    "idx_images",
    "idx_labels",
    "libsvm_path",
    "libsvm_dim",
    "shards_path",
    "part_labels",
    "part_size_min",
    "part_size_max",
    "lambda_strong",
    "smoothness",
    "smoothness_refresh",
    "hessian_lipschitz",
    "estimate_nu",
    "early_stop_tol",
];

/// Builds a validated [`RunConfig`] from an optional config file plus
/// key/value overrides (typically CLI flags). Later values win.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut issues: Vec<String> = Vec::new();
    let mut kv: BTreeMap<String, String> = BTreeMap::new();

    if let Some(path) = file {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        for (i, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    kv.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => issues.push(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    i + 1
                )),
            }
        }
    }
    for (k, v) in overrides {
        kv.insert(k.clone(), v.clone());
    }

    for key in kv.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            issues.push(format!("unknown key '{key}'"));
        }
    }

    let get = |key: &str| kv.get(key).cloned();

    let algo = match get("algo").as_deref() {
        Some("done") => Algo::Done,
        Some("gd") => Algo::Gd,
        Some("newton") => Algo::Newton,
        Some(other) => {
            issues.push(format!("algo: expected done|gd|newton, got '{other}'"));
            Algo::Done
        }
        None => {
            issues.push("algo: required (done|gd|newton)".into());
            Algo::Done
        }
    };

    let alpha = parse_num(&kv, &mut issues, "alpha", 0.05, |v| v > 0.0, "must be > 0");
    if matches!(algo, Algo::Done | Algo::Newton) && get("alpha").is_none() {
        issues.push("alpha: required for algo done|newton".into());
    }
    let lambda = parse_num(&kv, &mut issues, "lambda", 0.01, |v| v >= 0.0, "must be >= 0");
    let synth_kappa = parse_num(&kv, &mut issues, "synth_kappa", 100.0, |v| v >= 1.0, "must be >= 1");
    let synth_noise_std =
        parse_num(&kv, &mut issues, "synth_noise_std", 1.0, |v| v >= 0.0, "must be >= 0");
    let hessian_lipschitz =
        parse_num(&kv, &mut issues, "hessian_lipschitz", 0.0, |v| v >= 0.0, "must be >= 0");

    let workers = parse_usize(&kv, &mut issues, "workers", 32, 1);
    let rounds_local = parse_usize(&kv, &mut issues, "R", 40, 1);
    let rounds_global = parse_usize(&kv, &mut issues, "T", 100, 0);
    let repeats = parse_usize(&kv, &mut issues, "repeats", 1, 1);
    let synth_d = parse_usize(&kv, &mut issues, "synth_d", 40, 2);
    let synth_size_min = parse_usize(&kv, &mut issues, "synth_size_min", 540, 2);
    let synth_size_max = parse_usize(&kv, &mut issues, "synth_size_max", 5630, 2);
    let part_labels = parse_usize(&kv, &mut issues, "part_labels", 3, 1);
    let part_size_min = parse_usize(&kv, &mut issues, "part_size_min", 219, 2);
    let part_size_max = parse_usize(&kv, &mut issues, "part_size_max", 3536, 2);
    let libsvm_dim = parse_usize(&kv, &mut issues, "libsvm_dim", 0, 0);

    let batch = parse_opt_usize(&kv, &mut issues, "batch");
    let subset = parse_opt_usize(&kv, &mut issues, "subset");
    if let Some(s) = subset {
        if s > workers {
            issues.push(format!("subset: must be <= workers ({workers}), got {s}"));
        }
    }

    let stepsize = match get("stepsize").as_deref() {
        None | Some("adaptive") => StepSizeSpec::Adaptive,
        Some(s) => match s.strip_prefix("fixed:").map(str::parse::<f64>) {
            Some(Ok(v)) if v > 0.0 => StepSizeSpec::Fixed(v),
            _ => {
                issues.push(format!(
                    "stepsize: expected adaptive or fixed:<v> with v > 0, got '{s}'"
                ));
                StepSizeSpec::Adaptive
            }
        },
    };

    let seed = parse_seed(&kv, &mut issues, "seed").unwrap_or(7);
    let seed_data = parse_seed(&kv, &mut issues, "seed_data").unwrap_or(seed);
    let seed_run = parse_seed(&kv, &mut issues, "seed_run").unwrap_or(seed);

    let lambda_strong = parse_opt_pos(&kv, &mut issues, "lambda_strong");
    let smoothness = parse_opt_pos(&kv, &mut issues, "smoothness");
    let early_stop_tol = parse_opt_pos(&kv, &mut issues, "early_stop_tol");

    let smoothness_refresh = parse_bool(&kv, &mut issues, "smoothness_refresh", false);
    let estimate_nu = parse_bool(&kv, &mut issues, "estimate_nu", true);

    let partition = PartitionSpec {
        labels_per_worker: part_labels,
        size_range: (part_size_min, part_size_max),
    };
    let dataset = match get("dataset").as_deref() {
        None | Some("synthetic") => DatasetSpec::Synthetic {
            dim: synth_d,
            kappa: synth_kappa,
            size_range: (synth_size_min, synth_size_max),
            noise_std: synth_noise_std,
        },
        Some("idx") => {
            let images = get("idx_images");
            let labels = get("idx_labels");
            if images.is_none() {
                issues.push("idx_images: required for dataset=idx".into());
            }
            if labels.is_none() {
                issues.push("idx_labels: required for dataset=idx".into());
            }
            DatasetSpec::Idx {
                images: PathBuf::from(images.unwrap_or_default()),
                labels: PathBuf::from(labels.unwrap_or_default()),
                partition,
            }
        }
        Some("libsvm") => {
            let path = get("libsvm_path");
            if path.is_none() {
                issues.push("libsvm_path: required for dataset=libsvm".into());
            }
            if libsvm_dim == 0 {
                issues.push("libsvm_dim: required (>= 1) for dataset=libsvm".into());
            }
            DatasetSpec::Libsvm {
                path: PathBuf::from(path.unwrap_or_default()),
                dim: libsvm_dim,
                partition,
            }
        }
        Some("shards") => {
            // the shard file carries its own worker count, dim, and task
            let path = get("shards_path");
            if path.is_none() {
                issues.push("shards_path: required for dataset=shards".into());
            }
            DatasetSpec::Shards {
                path: PathBuf::from(path.unwrap_or_default()),
            }
        }
        Some(other) => {
            issues.push(format!("dataset: expected synthetic|idx|libsvm|shards, got '{other}'"));
            DatasetSpec::Synthetic {
                dim: synth_d,
                kappa: synth_kappa,
                size_range: (synth_size_min, synth_size_max),
                noise_std: synth_noise_std,
            }
        }
    };
    if synth_size_min > synth_size_max {
        issues.push("synth_size_min: must be <= synth_size_max".into());
    }
    if part_size_min > part_size_max {
        issues.push("part_size_min: must be <= part_size_max".into());
    }

    let out_dir = PathBuf::from(get("out").unwrap_or_else(|| "runs".into()));

    if !issues.is_empty() {
        return Err(Error::Config { issues });
    }
    Ok(RunConfig {
        algo,
        dataset,
        workers,
        alpha,
        rounds_local,
        rounds_global,
        batch,
        subset,
        lambda,
        stepsize,
        seeds: (seed_data, seed_run),
        repeats,
        out_dir,
        lambda_strong,
        smoothness,
        smoothness_refresh,
        hessian_lipschitz,
        estimate_nu,
        early_stop_tol,
    })
}

fn parse_num(
    kv: &BTreeMap<String, String>,
    issues: &mut Vec<String>,
    key: &str,
    default: f64,
    check: fn(f64) -> bool,
    rule: &str,
) -> f64 {
    match kv.get(key) {
        None => default,
        Some(s) => match s.parse::<f64>() {
            Ok(v) if check(v) => v,
            Ok(v) => {
                issues.push(format!("{key}: {rule}, got {v}"));
                default
            }
            Err(_) => {
                issues.push(format!("{key}: not a number: '{s}'"));
                default
            }
        },
    }
}

fn parse_usize(
    kv: &BTreeMap<String, String>,
    issues: &mut Vec<String>,
    key: &str,
    default: usize,
    min: usize,
) -> usize {
    match kv.get(key) {
        None => default,
        Some(s) => match s.parse::<usize>() {
            Ok(v) if v >= min => v,
            Ok(v) => {
                issues.push(format!("{key}: must be >= {min}, got {v}"));
                default
            }
            Err(_) => {
                issues.push(format!("{key}: not a non-negative integer: '{s}'"));
                default
            }
        },
    }
}

fn parse_opt_usize(
    kv: &BTreeMap<String, String>,
    issues: &mut Vec<String>,
    key: &str,
) -> Option<usize> {
    match kv.get(key) {
        None => None,
        Some(s) => match s.parse::<usize>() {
            Ok(v) if v >= 1 => Some(v),
            _ => {
                issues.push(format!("{key}: must be an integer >= 1, got '{s}'"));
                None
            }
        },
    }
}

fn parse_seed(kv: &BTreeMap<String, String>, issues: &mut Vec<String>, key: &str) -> Option<u64> {
    match kv.get(key) {
        None => None,
        Some(s) => match s.parse::<u64>() {
            Ok(v) => Some(v),
            Err(_) => {
                issues.push(format!("{key}: not an unsigned integer: '{s}'"));
                None
            }
        },
    }
}

fn parse_opt_pos(
    kv: &BTreeMap<String, String>,
    issues: &mut Vec<String>,
    key: &str,
) -> Option<f64> {
    match kv.get(key) {
        None => None,
        Some(s) => match s.parse::<f64>() {
            Ok(v) if v > 0.0 => Some(v),
            _ => {
                issues.push(format!("{key}: must be a number > 0, got '{s}'"));
                None
            }
        },
    }
}

fn parse_bool(
    kv: &BTreeMap<String, String>,
    issues: &mut Vec<String>,
    key: &str,
    default: bool,
) -> bool {
    match kv.get(key).map(String::as_str) {
        None => default,
        Some("true") => true,
        Some("false") => false,
        Some(other) => {
            issues.push(format!("{key}: expected true|false, got '{other}'"));
            default
        }
    }
}
