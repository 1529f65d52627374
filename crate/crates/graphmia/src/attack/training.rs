//! Training-based attack: shadow split, shadow model, confidence harvesting,
//! and the binary attack classifier.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AttackError;
use crate::engine::{self, EngineError, ModelConfig, Posterior, TrainConfig, TrainedModel};
use crate::graph::{split_dataset, Dataset, Graph, SplitSpec};

/// One attack-training unit: a distilled confidence vector plus the
/// membership flag of the graph it came from. Features are the top-k
/// posterior entries in non-increasing order, zero-padded to length k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub features: Vec<f64>,
    /// `true` for "in" (shadow member), `false` for "out".
    pub member: bool,
}

/// Hyperparameters of the attack classifier.
///
/// `k` is the distillation width; `None` lets the pipeline pick
/// `min(10, shadow classes, target classes)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModelConfig {
    pub k: Option<usize>,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AttackModelConfig {
    fn default() -> Self {
        Self {
            k: None,
            hidden_dim: 64,
            epochs: 400,
            learning_rate: 0.5,
            seed: 0,
        }
    }
}

impl AttackModelConfig {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.k == Some(0) {
            return Err(AttackError::InvalidK);
        }
        if self.hidden_dim < 1 {
            return Err(AttackError::Engine(EngineError::InvalidConfig(
                "attack hidden_dim must be >= 1".into(),
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(AttackError::Engine(EngineError::InvalidConfig(
                "attack learning_rate must be positive and finite".into(),
            )));
        }
        Ok(())
    }
}

/// Binary membership classifier: one ReLU hidden layer, sigmoid output.
/// Scores at or above `decision_threshold` are called members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub input_dim: usize,
    pub decision_threshold: f64,
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array1<f64>,
    b2: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl AttackModel {
    /// Membership score in (0, 1) for a distilled confidence vector.
    pub fn score(&self, features: &[f64]) -> Result<f64, AttackError> {
        if features.len() != self.input_dim {
            return Err(AttackError::FeatureLenMismatch {
                expected: self.input_dim,
                found: features.len(),
            });
        }
        let x = ndarray::ArrayView1::from(features);
        let hidden = (x.dot(&self.w1) + &self.b1).mapv(|v| v.max(0.0));
        Ok(sigmoid(hidden.dot(&self.w2) + self.b2))
    }
}

/// Split the shadow dataset into equal member and non-member halves.
/// Only the member half ever trains the shadow model.
pub fn split_shadow(shadow: &Dataset, seed: u64) -> Result<(Dataset, Dataset), AttackError> {
    if shadow.len() < 2 {
        return Err(AttackError::ShadowTooSmall { len: shadow.len() });
    }
    Ok(split_dataset(shadow, SplitSpec::new(0.5, seed))?)
}

/// Train the shadow model on the shadow member half.
///
/// Same contract as [`engine::train`]; it exists as a named step so
/// transferability experiments can deliberately mismatch the architecture or
/// the shadow data domain against the target.
pub fn train_shadow(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    member: &Dataset,
) -> Result<TrainedModel, EngineError> {
    engine::train(model_cfg, train_cfg, member, None)
}

/// The k largest posterior entries in non-increasing order, zero-padded to
/// length k. Dropping class positions keeps the feature shape uniform when
/// shadow and target domains disagree on the class count.
pub fn distill_topk(p: &Posterior, k: usize) -> Vec<f64> {
    let mut sorted = p.probs().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("posterior entries are finite"));
    sorted.resize(k, 0.0);
    sorted
}

/// Query the shadow model on both halves and label the confidence vectors:
/// member graphs "in", non-member graphs "out".
pub fn gather_attack_records(
    shadow_model: &TrainedModel,
    member: &Dataset,
    non_member: &Dataset,
    k: usize,
) -> Result<Vec<AttackRecord>, AttackError> {
    if k == 0 {
        return Err(AttackError::InvalidK);
    }
    let mut records = Vec::with_capacity(member.len() + non_member.len());
    for (ds, flag) in [(member, true), (non_member, false)] {
        for g in ds.graphs() {
            let posterior = shadow_model.forward(g)?;
            records.push(AttackRecord {
                features: distill_topk(&posterior, k),
                member: flag,
            });
        }
    }
    Ok(records)
}

/// Fit the attack classifier on labeled records by seeded full-batch
/// gradient descent on binary cross-entropy. Requires both labels.
pub fn train_attack_model(
    records: &[AttackRecord],
    cfg: &AttackModelConfig,
) -> Result<AttackModel, AttackError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(AttackError::NoRecords);
    }
    let input_dim = records[0].features.len();
    for r in records {
        if r.features.len() != input_dim {
            return Err(AttackError::RecordLenMismatch {
                expected: input_dim,
                found: r.features.len(),
            });
        }
    }
    if let Some(k) = cfg.k {
        if k != input_dim {
            return Err(AttackError::FeatureLenMismatch {
                expected: k,
                found: input_dim,
            });
        }
    }
    let positives = records.iter().filter(|r| r.member).count();
    if positives == 0 || positives == records.len() {
        return Err(AttackError::SingleLabel {
            member: positives > 0,
        });
    }

    let n = records.len();
    let hidden = cfg.hidden_dim;
    let mut x = Array2::zeros((n, input_dim));
    let mut y = Array1::zeros(n);
    for (i, r) in records.iter().enumerate() {
        for (j, &f) in r.features.iter().enumerate() {
            x[[i, j]] = f;
        }
        y[i] = if r.member { 1.0 } else { 0.0 };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut glorot = |rows: usize, cols: usize| {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-s..s))
    };
    let mut w1 = glorot(input_dim, hidden);
    let mut b1 = Array1::zeros(hidden);
    let mut w2 = glorot(hidden, 1).column(0).to_owned();
    let mut b2 = 0.0;

    let scale = 1.0 / n as f64;
    for epoch in 0..cfg.epochs {
        let z1 = x.dot(&w1) + &b1;
        let r = z1.mapv(|v| v.max(0.0));
        let s = r.dot(&w2) + b2;
        let p = s.mapv(sigmoid);

        let loss = p
            .iter()
            .zip(y.iter())
            .map(|(&pi, &yi)| {
                let pi = pi.clamp(1e-12, 1.0 - 1e-12);
                -(yi * pi.ln() + (1.0 - yi) * (1.0 - pi).ln())
            })
            .sum::<f64>()
            * scale;
        if !loss.is_finite() {
            return Err(AttackError::Diverged { epoch });
        }

        let ds = (&p - &y) * scale;
        let gw2 = r.t().dot(&ds);
        let gb2 = ds.sum();
        let mut dz1 = ds
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&w2.view().insert_axis(ndarray::Axis(0)));
        dz1.zip_mut_with(&z1, |d, &pre| {
            if pre <= 0.0 {
                *d = 0.0;
            }
        });
        let gw1 = x.t().dot(&dz1);
        let gb1 = dz1.sum_axis(ndarray::Axis(0));

        w1.scaled_add(-cfg.learning_rate, &gw1);
        b1.scaled_add(-cfg.learning_rate, &gb1);
        w2.scaled_add(-cfg.learning_rate, &gw2);
        b2 -= cfg.learning_rate * gb2;
    }

    Ok(AttackModel {
        input_dim,
        decision_threshold: 0.5,
        w1,
        b1,
        w2,
        b2,
    })
}

/// Query the target model for one graph and decide membership: the flag is
/// set when the attack score reaches the decision threshold (boundary counts
/// as member).
pub fn infer_membership(
    attack: &AttackModel,
    target: &TrainedModel,
    g: &Graph,
    k: usize,
) -> Result<(bool, f64), AttackError> {
    if k != attack.input_dim {
        return Err(AttackError::FeatureLenMismatch {
            expected: attack.input_dim,
            found: k,
        });
    }
    let posterior = target.forward(g)?;
    let score = attack.score(&distill_topk(&posterior, k))?;
    Ok((score >= attack.decision_threshold, score))
}

/// Export attack records as CSV with header `f1,...,fk,label`
/// (label 1 = member, 0 = non-member).
pub fn write_records_csv(records: &[AttackRecord], path: &Path) -> Result<(), AttackError> {
    let k = records.first().map_or(0, |r| r.features.len());
    let mut out = String::new();
    let header: Vec<String> = (1..=k).map(|i| format!("f{i}")).collect();
    let _ = writeln!(out, "{},label", header.join(","));
    for r in records {
        let feats: Vec<String> = r.features.iter().map(|f| format!("{f}")).collect();
        let _ = writeln!(out, "{},{}", feats.join(","), if r.member { 1 } else { 0 });
    }
    crate::io_util::write_atomic(path, out.as_bytes()).map_err(|e| AttackError::CheckpointIo {
        path: path.display().to_string(),
        source: e,
    })
}

#[derive(Serialize, Deserialize)]
struct AttackCheckpointFile {
    format_version: u32,
    model: AttackModel,
}

/// Save the attack classifier in the same versioned JSON format as engine
/// checkpoints.
pub fn save_attack_model(model: &AttackModel, path: &Path) -> Result<(), AttackError> {
    let file = AttackCheckpointFile {
        format_version: crate::engine::CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let json =
        serde_json::to_vec_pretty(&file).map_err(|e| AttackError::CheckpointFormat(e.to_string()))?;
    crate::io_util::write_atomic(path, &json).map_err(|e| AttackError::CheckpointIo {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_attack_model(path: &Path) -> Result<AttackModel, AttackError> {
    let bytes = fs::read(path).map_err(|e| AttackError::CheckpointIo {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: AttackCheckpointFile =
        serde_json::from_slice(&bytes).map_err(|e| AttackError::CheckpointFormat(e.to_string()))?;
    if file.format_version != crate::engine::CHECKPOINT_VERSION {
        return Err(AttackError::CheckpointVersion {
            expected: crate::engine::CHECKPOINT_VERSION,
            found: file.format_version,
        });
    }
    Ok(file.model)
}
