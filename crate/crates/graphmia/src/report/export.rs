//! Report files: JSON documents (one timestamp metadata field, everything
//! else deterministic) and flat CSVs for plotting. All writes are atomic.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::{CorrelationTable, EvalError, SweepSeries, TransferGrid};
use crate::engine::EpochRecord;
use crate::graph::DatasetStats;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    kind: &'a str,
    /// Wall-clock write time; the only non-deterministic field in any report.
    generated_unix_ms: u128,
    payload: &'a T,
}

/// Write any report type as a JSON document with a `kind` tag and a
/// timestamp metadata field.
pub fn write_json<T: Serialize>(payload: &T, kind: &str, path: &Path) -> Result<(), EvalError> {
    let doc = Document {
        kind,
        generated_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        payload,
    };
    let json = serde_json::to_vec_pretty(&doc).map_err(|e| EvalError::Serialize(e.to_string()))?;
    crate::io_util::write_atomic(path, &json).map_err(io_err(path))
}

/// Flat CSV, one row per run:
/// `run,seed,precision,recall,f1,train_acc,test_acc,gap`.
pub fn write_runs_csv(report: &super::AttackReport, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("run,seed,precision,recall,f1,train_acc,test_acc,gap\n");
    for (i, r) in report.per_run.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            r.seed, r.precision, r.recall, r.f1, r.train_acc, r.test_acc, r.gap
        );
    }
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(io_err(path))
}

/// Sweep CSV with columns `x,gap,f1`.
pub fn write_series_csv(series: &SweepSeries, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("x,gap,f1\n");
    for i in 0..series.x.len() {
        let _ = writeln!(out, "{},{},{}", series.x[i], series.gap[i], series.f1[i]);
    }
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(io_err(path))
}

/// Which per-cell statistic a transfer-grid CSV carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridStat {
    Precision,
    Recall,
    F1,
}

impl GridStat {
    pub fn name(&self) -> &'static str {
        match self {
            GridStat::Precision => "precision",
            GridStat::Recall => "recall",
            GridStat::F1 => "f1",
        }
    }
}

/// Matrix CSV of one statistic's mean: rows are shadow settings, columns are
/// target settings.
pub fn write_transfer_csv(
    grid: &TransferGrid,
    stat: GridStat,
    path: &Path,
) -> Result<(), EvalError> {
    let mut out = String::from("shadow\\target");
    for c in &grid.col_labels {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (row, label) in grid.cells.iter().zip(&grid.row_labels) {
        let _ = write!(out, "{label}");
        for cell in row {
            let v = match stat {
                GridStat::Precision => cell.precision.mean,
                GridStat::Recall => cell.recall.mean,
                GridStat::F1 => cell.f1.mean,
            };
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(io_err(path))
}

/// Correlation CSV with columns `factor,rho,note`.
pub fn write_correlations_csv(table: &CorrelationTable, path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("factor,rho,note\n");
    for e in &table.entries {
        let rho = e.rho.map(|r| r.to_string()).unwrap_or_default();
        let note = e.note.as_deref().unwrap_or("");
        let _ = writeln!(out, "{},{rho},{note}", e.factor);
    }
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(io_err(path))
}

/// Per-epoch training history CSV: `epoch,train_loss,train_acc,test_acc`
/// (test accuracy blank when not tracked).
pub fn write_history_csv(history: &[EpochRecord], path: &Path) -> Result<(), EvalError> {
    let mut out = String::from("epoch,train_loss,train_acc,test_acc\n");
    for (i, e) in history.iter().enumerate() {
        let test = e.test_acc.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{i},{},{},{test}", e.train_loss, e.train_acc);
    }
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(io_err(path))
}

/// Dataset statistics CSV (single row plus header).
pub fn write_stats_csv(stats: &DatasetStats, path: &Path) -> Result<(), EvalError> {
    let mut out =
        String::from("graph_count,class_count,avg_nodes,avg_edges,avg_density,avg_degree\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        stats.graph_count,
        stats.class_count,
        stats.avg_nodes,
        stats.avg_edges,
        stats.avg_density,
        stats.avg_degree
    );
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(io_err(path))
}
