//! Membership inference attacks.
//!
//! [`training`] implements the training-based attack: split the shadow data
//! into member and non-member halves, train a shadow model on the member
//! half, harvest its labeled confidence vectors, fit a binary attack
//! classifier on them, and query it against the target model.
//!
//! [`threshold`] implements the threshold-based attack: reduce a posterior
//! to one scalar confidence metric, pick a threshold from the shadow
//! member/non-member value distributions, and compare.

pub mod threshold;
pub mod training;

pub use threshold::{
    metric_value, select_threshold, threshold_attack, write_metric_distribution_csv,
    ConfidenceMetric, Orientation, ThresholdObjective, ThresholdRule,
};
pub use training::{
    distill_topk, gather_attack_records, infer_membership, load_attack_model, save_attack_model,
    split_shadow, train_attack_model, train_shadow, write_records_csv, AttackModel,
    AttackModelConfig, AttackRecord,
};

use thiserror::Error;

use crate::engine::EngineError;
use crate::graph::GraphError;

#[derive(Error, Debug)]
pub enum AttackError {
    #[error("shadow dataset too small: {len} graphs, need at least 2")]
    ShadowTooSmall { len: usize },
    #[error("attack training set is empty")]
    NoRecords,
    #[error("attack training set contains only '{}' records", if *.member { "in" } else { "out" })]
    SingleLabel { member: bool },
    #[error("attack records disagree on feature length: {expected} vs {found}")]
    RecordLenMismatch { expected: usize, found: usize },
    #[error("distillation width k must be >= 1")]
    InvalidK,
    #[error("feature length {found} does not match the attack model input {expected}")]
    FeatureLenMismatch { expected: usize, found: usize },
    #[error("attack model training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("member and non-member value lists must both be non-empty")]
    EmptyValues,
    #[error("quantile {q} outside [0, 1]")]
    InvalidQuantile { q: f64 },
    #[error("metric values must be finite, got {value}")]
    NonFiniteValue { value: f64 },
    #[error("checkpoint I/O on {path}: {source}")]
    CheckpointIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
    #[error("checkpoint version {found} unsupported (expected {expected})")]
    CheckpointVersion { expected: u32, found: u32 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
