//! Attack evaluation and analysis: precision/recall/F1 over repeated seeded
//! runs, overfitting measurement, rank correlations, epoch/depth sweeps, and
//! transferability grids.

mod experiment;
mod export;
mod metrics;

pub use experiment::{
    depth_sweep, epoch_sweep, factor_correlations, first_run_seed, run_attack_experiment, salt,
    transfer_matrix, AttackKind, ExperimentSetting, FactorRow, RunOutcome, TransferSide,
};
pub use export::{
    write_correlations_csv, write_history_csv, write_json, write_runs_csv, write_series_csv,
    write_stats_csv, write_transfer_csv, GridStat,
};
pub use metrics::{attack_metrics, spearman, train_test_gap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::AttackError;
use crate::engine::EngineError;
use crate::graph::GraphError;

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("prediction and label lists differ in length: {predicted} vs {actual}")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("series too short for correlation: {len} points, need at least 3")]
    TooFewPoints { len: usize },
    #[error("series is constant; rank correlation is undefined")]
    ConstantSeries,
    #[error("invalid experiment setting: {0}")]
    InvalidSetting(String),
    #[error("report I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization: {0}")]
    Serialize(String),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Mean and population standard deviation over runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub(crate) fn over(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Attack performance over repeated seeded runs: per-run precision, recall,
/// and F1 aggregated as mean plus standard deviation, with the target's
/// train-test gap carried alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    /// Human-readable description of the setting (architectures, datasets,
    /// attack kind).
    pub setting: String,
    pub runs: usize,
    pub precision: Stat,
    pub recall: Stat,
    pub f1: Stat,
    pub train_test_gap: Stat,
    pub per_run: Vec<experiment::RunOutcome>,
}

/// One point per x (epoch budget or layer count): the target's train-test
/// gap and the attack F1, aligned by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub x: Vec<f64>,
    pub gap: Vec<f64>,
    pub f1: Vec<f64>,
}

/// Complete grid of attack reports: rows are shadow-side settings, columns
/// are target-side settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferGrid {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// `cells[row][col]`.
    pub cells: Vec<Vec<AttackReport>>,
}

/// Spearman rho of each experiment factor against attack F1. Factors whose
/// column is constant carry a note instead of a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub entries: Vec<CorrelationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub factor: String,
    pub rho: Option<f64>,
    pub note: Option<String>,
}

impl CorrelationTable {
    pub fn rho(&self, factor: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.factor == factor)
            .and_then(|e| e.rho)
    }
}
