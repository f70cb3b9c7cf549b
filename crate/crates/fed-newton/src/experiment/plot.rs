//! Deterministic SVG line charts over trace CSVs.
//!
//! One curve per trace file (repeats are averaged per round), legend labels
//! from run ids, byte-identical output for identical inputs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::trace::{parse_csv, RunStatus, TraceRecord};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotMetric {
    TrainLoss,
    GradNorm,
    ValAccuracy,
}

impl PlotMetric {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train_loss" => Ok(PlotMetric::TrainLoss),
            "grad_norm" => Ok(PlotMetric::GradNorm),
            "val_accuracy" => Ok(PlotMetric::ValAccuracy),
            other => Err(Error::invalid(
                "metric",
                format!("expected train_loss|grad_norm|val_accuracy, got '{other}'"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlotMetric::TrainLoss => "train_loss",
            PlotMetric::GradNorm => "grad_norm",
            PlotMetric::ValAccuracy => "val_accuracy",
        }
    }

    fn extract(self, r: &TraceRecord) -> f64 {
        match self {
            PlotMetric::TrainLoss => r.train_loss,
            PlotMetric::GradNorm => r.grad_norm,
            PlotMetric::ValAccuracy => r.val_metric.value(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlotSpec {
    pub metrics: Vec<PlotMetric>,
    pub log_scale: bool,
    pub out_dir: PathBuf,
    pub stem: String,
}

struct Curve {
    label: String,
    points: Vec<(f64, f64)>, // (round, metric)
}

/// Renders one SVG per requested metric and returns the written paths.
pub fn emit_plots(trace_paths: &[PathBuf], spec: &PlotSpec) -> Result<Vec<PathBuf>> {
    if trace_paths.is_empty() {
        return Err(Error::invalid("traces", "at least one trace file is required"));
    }
    if spec.metrics.is_empty() {
        return Err(Error::invalid("metrics", "at least one metric is required"));
    }
    let traces: Vec<(String, Vec<TraceRecord>)> = trace_paths
        .iter()
        .map(|p| -> Result<_> {
            let content =
                std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            let records = parse_csv(&content, p)?;
            if records.is_empty() {
                return Err(Error::TraceFormat {
                    path: p.display().to_string(),
                    why: "no data rows".into(),
                });
            }
            let label = records[0].run_id.clone();
            Ok((label, records))
        })
        .collect::<Result<Vec<_>>>()?;

    std::fs::create_dir_all(&spec.out_dir)
        .map_err(|e| Error::io(spec.out_dir.display().to_string(), e))?;
    let mut written = Vec::new();
    for metric in &spec.metrics {
        let curves: Vec<Curve> = traces
            .iter()
            .map(|(label, records)| Curve {
                label: label.clone(),
                points: averaged_points(records, *metric, spec.log_scale),
            })
            .collect();
        let y_label = if spec.log_scale {
            format!("log10({})", metric.name())
        } else {
            metric.name().to_string()
        };
        let svg = render_svg(&curves, &y_label);
        let path = spec.out_dir.join(format!("{}_{}.svg", spec.stem, metric.name()));
        atomic_write(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// Mean of the metric across repeats per round; diverged marker rows are
/// dropped since they carry pre-failure state.
fn averaged_points(records: &[TraceRecord], metric: PlotMetric, log_scale: bool) -> Vec<(f64, f64)> {
    let mut by_round: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == RunStatus::Ok) {
        let entry = by_round.entry(r.round).or_insert((0.0, 0));
        entry.0 += metric.extract(r);
        entry.1 += 1;
    }
    by_round
        .into_iter()
        .map(|(round, (sum, count))| {
            let mut v = sum / count as f64;
            if log_scale {
                v = v.max(1e-300).log10();
            }
            (round as f64, v)
        })
        .collect()
}

fn render_svg(curves: &[Curve], y_label: &str) -> String {
    let xs: Vec<f64> = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)).collect();
    let ys: Vec<f64> = curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)).collect();
    let (x_min, x_max) = padded_range(&xs, 0.0);
    let (y_min, y_max) = padded_range(&ys, 0.05);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_x = |v: f64| MARGIN_LEFT + (v - x_min) / (x_max - x_min) * plot_w;
    let to_y = |v: f64| MARGIN_TOP + (1.0 - (v - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // axes
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + plot_h),
        fmt(MARGIN_LEFT + plot_w),
        fmt(MARGIN_TOP + plot_h)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + plot_h)
    ));

    // ticks
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = to_x(fx);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            fmt(px),
            fmt(MARGIN_TOP + plot_h),
            fmt(MARGIN_TOP + plot_h + 5.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(px),
            fmt(MARGIN_TOP + plot_h + 18.0),
            fmt_tick(fx)
        ));
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let py = to_y(fy);
        svg.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            fmt(py),
            fmt(MARGIN_LEFT - 5.0),
            fmt(MARGIN_LEFT)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 8.0),
            fmt(py + 4.0),
            fmt_tick(fy)
        ));
    }

    // axis labels
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">Global rounds</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 14.0)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt(MARGIN_TOP + plot_h / 2.0),
        fmt(MARGIN_TOP + plot_h / 2.0),
        y_label
    ));

    // curves
    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = curve
            .points
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(to_x(*x)), fmt(to_y(*y))))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            color,
            points.join(" ")
        ));
    }

    // legend
    for (i, curve) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 14.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            fmt(MARGIN_LEFT + plot_w - 190.0),
            fmt(y - 4.0),
            fmt(MARGIN_LEFT + plot_w - 170.0),
            fmt(y - 4.0),
            color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            fmt(MARGIN_LEFT + plot_w - 164.0),
            fmt(y),
            escape(&curve.label)
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

fn padded_range(values: &[f64], pad_fraction: f64) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for v in values {
        min = min.min(*v);
        max = max.max(*v);
    }
    if !min.is_finite() || !max.is_finite() {
        return (0.0, 1.0);
    }
    if min == max {
        return (min - 1.0, max + 1.0);
    }
    let pad = (max - min) * pad_fraction;
    (min - pad, max + pad)
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t.is_empty() || t == "-" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Parses `--metric` values; defaults to train_loss when none are given.
pub fn plot_metric_list(raw: &[String]) -> Result<Vec<PlotMetric>> {
    if raw.is_empty() {
        return Ok(vec![PlotMetric::TrainLoss]);
    }
    raw.iter().map(|s| PlotMetric::parse(s)).collect()
}
