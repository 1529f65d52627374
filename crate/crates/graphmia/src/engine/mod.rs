//! Minimal graph-classification engine.
//!
//! Six architectures share one pipeline: a stack of message-passing (or
//! per-node, for the MLP baseline) layers, mean pooling over node
//! embeddings, one affine map to class scores, and a softmax. Training is
//! full-batch gradient descent on mean cross-entropy with hand-derived
//! analytic gradients; [`grad_check`] validates them against central finite
//! differences.
//!
//! Everything is deterministic: weights come from a seeded stream, and the
//! same `(seed, config, data)` triple always reproduces the same model.

mod checkpoint;
mod gradcheck;
mod layers;
mod params;
mod train;

pub use checkpoint::{load_model, save_model};
pub(crate) use checkpoint::CHECKPOINT_VERSION;
pub use gradcheck::grad_check;
pub use layers::normalize_adjacency;
pub use train::{evaluate_accuracy, train};

pub(crate) use layers::{forward_trace, GraphContext};
pub(crate) use params::ModelParams;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};

#[derive(Error, Debug)]
pub enum EngineError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("feature dimension mismatch: model expects {expected}, graph has {found}")]
    FeatureDimMismatch { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("posterior is not a probability vector: {0}")]
    InvalidPosterior(String),
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
    Graph(#[from] GraphError),
}

/// Layer aggregation family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    /// Symmetric-normalized convolution: `H <- act(norm_adj . H . W)`.
    Gcn,
    /// Sum aggregation through a small MLP: `h <- mlp((1 + eps) h + sum_nbr h)`.
    Gin,
    /// Attention-weighted neighbor sum with per-neighbor softmax.
    Gat,
    /// Mean-aggregator SAGE: `h <- act(W . [h || mean_nbr h])`.
    SageMean,
    /// GCN layer plus identity skip wherever widths match.
    DeepGcn,
    /// Per-node MLP baseline that ignores edges entirely.
    Mlp,
}

impl Arch {
    pub const ALL: [Arch; 6] = [
        Arch::Gcn,
        Arch::Gin,
        Arch::Gat,
        Arch::SageMean,
        Arch::DeepGcn,
        Arch::Mlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Gin => "gin",
            Arch::Gat => "gat",
            Arch::SageMean => "sage-mean",
            Arch::DeepGcn => "deep-gcn",
            Arch::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Arch::Gcn),
            "gin" => Ok(Arch::Gin),
            "gat" => Ok(Arch::Gat),
            "sage" | "sage-mean" | "graphsage" => Ok(Arch::SageMean),
            "deep-gcn" | "deep-gcn-residual" | "deepgcn" => Ok(Arch::DeepGcn),
            "mlp" => Ok(Arch::Mlp),
            other => Err(format!("unknown architecture {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative evaluated at the pre-activation; ReLU uses 0 at the kink.
    #[inline]
    pub(crate) fn prime(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(format!("unknown activation {other:?}")),
        }
    }
}

/// Architecture hyperparameters. Readout is fixed: mean pooling over node
/// embeddings, then one affine layer and a softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub num_layers: usize,
    pub hidden_dim: usize,
    /// GIN only: the epsilon in `(1 + eps) h + sum_nbr h`.
    pub gin_epsilon: f64,
    /// GIN only: update epsilon during training.
    pub gin_train_epsilon: bool,
    /// GAT only: number of attention heads; head outputs are concatenated,
    /// so `hidden_dim` must be divisible by it.
    pub attention_heads: usize,
    pub activation: Activation,
}

impl ModelConfig {
    pub fn new(arch: Arch) -> Self {
        Self {
            arch,
            num_layers: 2,
            hidden_dim: 64,
            gin_epsilon: 0.0,
            gin_train_epsilon: false,
            attention_heads: 1,
            activation: Activation::Relu,
        }
    }

    pub fn with_layers(mut self, num_layers: usize) -> Self {
        self.num_layers = num_layers;
        self
    }

    pub fn with_hidden_dim(mut self, hidden_dim: usize) -> Self {
        self.hidden_dim = hidden_dim;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.num_layers < 1 {
            return Err(EngineError::InvalidConfig("num_layers must be >= 1".into()));
        }
        if self.hidden_dim < 1 {
            return Err(EngineError::InvalidConfig("hidden_dim must be >= 1".into()));
        }
        if !self.gin_epsilon.is_finite() {
            return Err(EngineError::InvalidConfig("gin_epsilon must be finite".into()));
        }
        if self.arch == Arch::Gat {
            if self.attention_heads < 1 {
                return Err(EngineError::InvalidConfig(
                    "attention_heads must be >= 1".into(),
                ));
            }
            if self.hidden_dim % self.attention_heads != 0 {
                return Err(EngineError::InvalidConfig(format!(
                    "hidden_dim {} not divisible by attention_heads {}",
                    self.hidden_dim, self.attention_heads
                )));
            }
        }
        Ok(())
    }
}

/// Optimization settings. The loss is fixed to mean cross-entropy and the
/// optimizer to plain full-batch gradient descent; weights initialize from
/// a seeded uniform(-s, s) with `s = sqrt(6 / (fan_in + fan_out))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64, seed: u64) -> Self {
        Self {
            epochs,
            learning_rate,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EngineError::InvalidConfig(
                "learning_rate must be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// A probability vector over classes: entries nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    pub fn new(probs: Vec<f64>) -> Result<Self, EngineError> {
        if probs.is_empty() {
            return Err(EngineError::InvalidPosterior("empty vector".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || p > 1.0 + 1e-9) {
            return Err(EngineError::InvalidPosterior(format!(
                "entries outside [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EngineError::InvalidPosterior(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub(crate) fn from_softmax(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    /// Index of the largest entry; ties break toward the lowest class index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax()]
    }
}

/// Per-epoch training record, captured before the epoch's parameter update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

/// A trained (or freshly initialized, for zero epochs) classifier.
///
/// Immutable after [`train`] returns; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub(crate) params: ModelParams,
    pub history: Vec<EpochRecord>,
}

impl TrainedModel {
    /// Posterior for one graph.
    pub fn forward(&self, g: &Graph) -> Result<Posterior, EngineError> {
        if g.feature_dim() != self.feature_dim {
            return Err(EngineError::FeatureDimMismatch {
                expected: self.feature_dim,
                found: g.feature_dim(),
            });
        }
        let ctx = GraphContext::new(g, self.config.arch);
        let trace = forward_trace(&self.params, &self.config, &ctx);
        Ok(Posterior::from_softmax(trace.probs.to_vec()))
    }

    /// Fraction of graphs whose argmax posterior equals the label.
    pub fn accuracy(&self, ds: &crate::graph::Dataset) -> Result<f64, EngineError> {
        evaluate_accuracy(self, ds)
    }
}
