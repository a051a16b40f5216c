//! Training artifacts: the metrics CSV and the JSON run report.

use std::path::{Path, PathBuf};

use cilp_core::training::LogRow;
use cilp_core::{MetricsRecord, TrainConfig, TrainLog};
use serde::Serialize;

use crate::error::CliError;

pub const METRICS_HEADER: [&str; 7] = [
    "epoch",
    "split",
    "h",
    "estimate_loss",
    "decision_loss",
    "subopt_mean",
    "wall_ms",
];

/// Resolved inputs of a training run; enough to repeat it.
#[derive(Debug, Serialize)]
pub struct TrainEcho {
    pub train: PathBuf,
    pub val: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: PathBuf,
    pub config: TrainConfig,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub echo: TrainEcho,
    pub initial: Vec<MetricsRecord>,
    #[serde(rename = "final")]
    pub final_metrics: Vec<MetricsRecord>,
    pub rows: Vec<LogRow>,
    /// Time spent in optimizer steps.
    pub train_wall_ms: f64,
    /// Time for the whole command, including loading and evaluation.
    pub total_wall_ms: f64,
}

impl RunReport {
    pub fn new(echo: TrainEcho, log: TrainLog, total_wall_ms: f64) -> Self {
        let splits = log.initial.len().max(1);
        let final_metrics = log.rows[log.rows.len().saturating_sub(splits)..]
            .iter()
            .map(|r| r.record.clone())
            .collect();
        let train_wall_ms = log.rows.last().map_or(0.0, |r| r.wall_ms);
        Self {
            echo,
            initial: log.initial,
            final_metrics,
            rows: log.rows,
            train_wall_ms,
            total_wall_ms,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One line per epoch and evaluated split; absent values are left empty.
pub fn write_metrics_csv(path: &Path, rows: &[LogRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.epoch.to_string(),
            r.record.split.as_str().to_string(),
            r.record.h.to_string(),
            opt(r.record.estimate_loss),
            r.record.decision_loss.to_string(),
            opt(r.record.subopt_mean),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}
