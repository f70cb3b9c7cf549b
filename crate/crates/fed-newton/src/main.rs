//! Thin CLI over the library: `fed-newton run|plot|rounds-to-target`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fed_newton::experiment::{
    emit_plots, parse_config, plot_metric_list, rounds_to_target, run_experiment, PlotSpec,
};
use fed_newton::trace::parse_csv;

#[derive(Parser)]
#[command(name = "fed-newton", version, about = "Federated second-order optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file and/or flags.
    Run(Box<RunArgs>),
    /// Render SVG charts from trace CSVs.
    Plot(PlotArgs),
    /// First round at which a trace reaches a target validation accuracy.
    RoundsToTarget(RoundsArgs),
}

/// Flags mirror config-file keys one to one; flags override file values.
#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    algo: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    dataset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    workers: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Local Richardson rounds per global iteration.
    #[arg(long = "R", allow_hyphen_values = true)]
    rounds_local: Option<String>,
    /// Global iterations.
    #[arg(long = "T", allow_hyphen_values = true)]
    rounds_global: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    batch: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    subset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// adaptive | fixed:<v>
    #[arg(long, allow_hyphen_values = true)]
    stepsize: Option<String>,
    /// Sets both seed_data and seed_run.
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed_data: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed_run: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    repeats: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    out: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    synth_d: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    synth_kappa: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    synth_size_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    synth_size_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    synth_noise_std: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    idx_images: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    idx_labels: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    libsvm_path: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    libsvm_dim: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    shards_path: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    part_labels: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    part_size_min: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    part_size_max: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_strong: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    smoothness: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    smoothness_refresh: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    hessian_lipschitz: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    estimate_nu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    early_stop_tol: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        let mut push = |key: &str, value: &Option<String>| {
            if let Some(v) = value {
                kv.push((key.to_string(), v.clone()));
            }
        };
        push("algo", &self.algo);
        push("dataset", &self.dataset);
        push("workers", &self.workers);
        push("alpha", &self.alpha);
        push("R", &self.rounds_local);
        push("T", &self.rounds_global);
        push("batch", &self.batch);
        push("subset", &self.subset);
        push("lambda", &self.lambda);
        push("stepsize", &self.stepsize);
        push("seed", &self.seed);
        push("seed_data", &self.seed_data);
        push("seed_run", &self.seed_run);
        push("repeats", &self.repeats);
        push("out", &self.out);
        push("synth_d", &self.synth_d);
        push("synth_kappa", &self.synth_kappa);
        push("synth_size_min", &self.synth_size_min);
        push("synth_size_max", &self.synth_size_max);
        push("synth_noise_std", &self.synth_noise_std);
        push("idx_images", &self.idx_images);
        push("idx_labels", &self.idx_labels);
        push("libsvm_path", &self.libsvm_path);
        push("libsvm_dim", &self.libsvm_dim);
        push("shards_path", &self.shards_path);
        push("part_labels", &self.part_labels);
        push("part_size_min", &self.part_size_min);
        push("part_size_max", &self.part_size_max);
        push("lambda_strong", &self.lambda_strong);
        push("smoothness", &self.smoothness);
        push("smoothness_refresh", &self.smoothness_refresh);
        push("hessian_lipschitz", &self.hessian_lipschitz);
        push("estimate_nu", &self.estimate_nu);
        push("early_stop_tol", &self.early_stop_tol);
        kv
    }
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV files (one curve each).
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Metric column to plot; repeatable (train_loss, grad_norm, val_accuracy).
    #[arg(long = "metric")]
    metrics: Vec<String>,
    /// Plot log10 of the metric.
    #[arg(long)]
    log: bool,
    #[arg(long, default_value = "plots")]
    out_dir: PathBuf,
    #[arg(long, default_value = "plot")]
    stem: String,
}

#[derive(Args)]
struct RoundsArgs {
    trace: PathBuf,
    /// Target validation accuracy in [0, 1].
    #[arg(long)]
    target: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> fed_newton::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = parse_config(args.config.as_deref(), &args.overrides())?;
            let output = run_experiment(&config)?;
            println!("trace:   {}", output.csv_path.display());
            println!("summary: {}", output.summary_path.display());
            if output.diverged_repeats > 0 {
                println!("diverged repeats: {}", output.diverged_repeats);
            }
            Ok(())
        }
        Command::Plot(args) => {
            let spec = PlotSpec {
                metrics: plot_metric_list(&args.metrics)?,
                log_scale: args.log,
                out_dir: args.out_dir,
                stem: args.stem,
            };
            for path in emit_plots(&args.traces, &spec)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::RoundsToTarget(args) => {
            let content = std::fs::read_to_string(&args.trace).map_err(|e| {
                fed_newton::Error::Io {
                    path: args.trace.display().to_string(),
                    source: e,
                }
            })?;
            let records = parse_csv(&content, &args.trace)?;
            let mut repeats: Vec<usize> = records.iter().map(|r| r.repeat).collect();
            repeats.sort_unstable();
            repeats.dedup();
            for repeat in repeats {
                let slice: Vec<_> = records
                    .iter()
                    .filter(|r| r.repeat == repeat)
                    .cloned()
                    .collect();
                match rounds_to_target(&slice, args.target)? {
                    Some(round) => println!("repeat {repeat}: round {round}"),
                    None => println!("repeat {repeat}: never reached"),
                }
            }
            Ok(())
        }
    }
}
