//! Per-round trace records and their CSV form.
//!
//! The CSV schema is frozen; see `docs/formats.md` at the repository root.
//! Record `t` describes the model state after round `t`'s update, together
//! with the step size that produced it.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Frozen column list of the trace CSV.
pub const TRACE_CSV_HEADER: &str =
    "run_id,repeat,round,train_loss,grad_norm,val_accuracy,eta,comm_rounds,wall_ms,status";

/// Bumped whenever the CSV schema changes.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Validation-set metric: top-1 accuracy for classification tasks,
/// mean per-sample loss for regression. Both serialize into the same
/// CSV column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValMetric {
    Accuracy(f64),
    Loss(f64),
}

impl ValMetric {
    pub fn value(self) -> f64 {
        match self {
            ValMetric::Accuracy(v) | ValMetric::Loss(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    Diverged,
}

impl RunStatus {
    fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub run_id: String,
    pub repeat: usize,
    pub round: usize,
    pub train_loss: f64,
    pub grad_norm: f64,
    pub val_metric: ValMetric,
    pub eta: f64,
    pub comm_rounds: u64,
    pub wall_ms: f64,
    pub status: RunStatus,
}

impl TraceRecord {
    pub fn csv_row(&self) -> String {
        let mut row = String::new();
        // f64 Display is shortest round-trip, so reruns are byte-identical.
        write!(
            row,
            "{},{},{},{},{},{},{},{},{:.3},{}",
            self.run_id,
            self.repeat,
            self.round,
            self.train_loss,
            self.grad_norm,
            self.val_metric.value(),
            self.eta,
            self.comm_rounds,
            self.wall_ms,
            self.status.as_str()
        )
        .expect("write to String cannot fail");
        row
    }
}

/// Serializes records under the frozen header.
pub fn records_to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Parses a trace CSV produced by this crate. The validation column is
/// task-agnostic on disk; rows come back tagged as accuracy.
pub fn parse_csv(content: &str, path: &Path) -> Result<Vec<TraceRecord>> {
    let bad = |line: usize, why: &str| Error::TraceFormat {
        path: path.display().to_string(),
        why: format!("line {line}: {why}"),
    };
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRACE_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::TraceFormat {
                path: path.display().to_string(),
                why: format!("unexpected header {header:?}"),
            })
        }
        None => {
            return Err(Error::TraceFormat {
                path: path.display().to_string(),
                why: "empty file".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(bad(idx + 1, "expected 10 fields"));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| bad(idx + 1, &format!("bad {what} {s:?}")))
        };
        let parse_u = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| bad(idx + 1, &format!("bad {what} {s:?}")))
        };
        let status = match fields[9] {
            "ok" => RunStatus::Ok,
            "diverged" => RunStatus::Diverged,
            other => return Err(bad(idx + 1, &format!("bad status {other:?}"))),
        };
        records.push(TraceRecord {
            run_id: fields[0].to_string(),
            repeat: parse_u(fields[1], "repeat")? as usize,
            round: parse_u(fields[2], "round")? as usize,
            train_loss: parse_f(fields[3], "train_loss")?,
            grad_norm: parse_f(fields[4], "grad_norm")?,
            val_metric: ValMetric::Accuracy(parse_f(fields[5], "val_accuracy")?),
            eta: parse_f(fields[6], "eta")?,
            comm_rounds: parse_u(fields[7], "comm_rounds")?,
            wall_ms: parse_f(fields[8], "wall_ms")?,
            status,
        });
    }
    Ok(records)
}

/// Smallest round index whose validation accuracy reaches `target`, or
/// `None` if the trace never does. Regression traces carry validation
/// losses instead of accuracies and are rejected.
pub fn rounds_to_target(records: &[TraceRecord], target_accuracy: f64) -> Result<Option<usize>> {
    for r in records {
        match r.val_metric {
            ValMetric::Loss(_) => return Err(Error::NoAccuracy),
            ValMetric::Accuracy(acc) => {
                if r.status == RunStatus::Ok && acc >= target_accuracy {
                    return Ok(Some(r.round));
                }
            }
        }
    }
    Ok(None)
}
