//! TOML experiment configuration.
//!
//! A config names the experiment, the dataset source (synthetic recipe or a
//! benchmark directory), target and shadow model/training settings, the
//! attack, and the seeding. Unknown keys are rejected, and every value the
//! inner modules would reject fails validation here, before any training
//! starts. All randomness flows from one `base_seed`.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::attack::{AttackError, AttackModelConfig, ConfidenceMetric, ThresholdObjective};
use crate::engine::{Activation, Arch, EngineError, ModelConfig, TrainConfig};
use crate::graph::{gen_synthetic, parse_tu_dataset, Dataset, GraphError, SyntheticSpec};
use crate::report::{AttackKind, ExperimentSetting, TransferSide};

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("dataset: {0}")]
    Data(#[from] GraphError),
    #[error("model: {0}")]
    Engine(#[from] EngineError),
    #[error("attack: {0}")]
    Attack(#[from] AttackError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Dataset source: `kind = "synthetic"` with a generator recipe, or
/// `kind = "tu"` with a benchmark directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub kind: String,
    /// Only used inside transfer dataset lists.
    pub label: Option<String>,
    // synthetic fields
    pub num_graphs: Option<usize>,
    pub num_classes: Option<usize>,
    pub nodes_min: Option<usize>,
    pub nodes_max: Option<usize>,
    pub edge_probs: Option<Vec<f64>>,
    pub feature_dim: Option<usize>,
    pub class_mean_shift: Option<f64>,
    pub seed: Option<u64>,
    // benchmark fields
    pub dir: Option<PathBuf>,
    pub dataset_name: Option<String>,
}

impl DataSection {
    fn forbid(&self, field: &str, present: bool, kind: &str) -> Result<(), ConfigError> {
        if present {
            return Err(invalid(format!("field `{field}` does not apply to kind = \"{kind}\"")));
        }
        Ok(())
    }

    /// Build the dataset. `default_seed` feeds synthetic generation when the
    /// section has no seed of its own.
    pub fn resolve(&self, default_seed: u64) -> Result<Dataset, ConfigError> {
        match self.kind.as_str() {
            "synthetic" => {
                self.forbid("dir", self.dir.is_some(), "synthetic")?;
                self.forbid("dataset_name", self.dataset_name.is_some(), "synthetic")?;
                let need = |name: &str, v: Option<usize>| {
                    v.ok_or_else(|| invalid(format!("synthetic data requires `{name}`")))
                };
                let spec = SyntheticSpec {
                    num_graphs: need("num_graphs", self.num_graphs)?,
                    num_classes: need("num_classes", self.num_classes)?,
                    nodes_range: (
                        need("nodes_min", self.nodes_min)?,
                        need("nodes_max", self.nodes_max)?,
                    ),
                    edge_prob_per_class: self
                        .edge_probs
                        .clone()
                        .ok_or_else(|| invalid("synthetic data requires `edge_probs`"))?,
                    feature_dim: need("feature_dim", self.feature_dim)?,
                    seed: self.seed.unwrap_or(default_seed),
                    class_mean_shift: self.class_mean_shift.unwrap_or(0.5),
                };
                Ok(gen_synthetic(&spec)?)
            }
            "tu" => {
                for (field, present) in [
                    ("num_graphs", self.num_graphs.is_some()),
                    ("num_classes", self.num_classes.is_some()),
                    ("nodes_min", self.nodes_min.is_some()),
                    ("nodes_max", self.nodes_max.is_some()),
                    ("edge_probs", self.edge_probs.is_some()),
                    ("feature_dim", self.feature_dim.is_some()),
                    ("class_mean_shift", self.class_mean_shift.is_some()),
                    ("seed", self.seed.is_some()),
                ] {
                    self.forbid(field, present, "tu")?;
                }
                let dir = self
                    .dir
                    .as_ref()
                    .ok_or_else(|| invalid("tu data requires `dir`"))?;
                let name = match &self.dataset_name {
                    Some(n) => n.clone(),
                    None => dir
                        .file_name()
                        .map(|f| f.to_string_lossy().into_owned())
                        .ok_or_else(|| invalid("cannot infer dataset name from `dir`"))?,
                };
                Ok(parse_tu_dataset(dir, &name)?)
            }
            other => Err(invalid(format!(
                "unknown data kind {other:?}, expected \"synthetic\" or \"tu\""
            ))),
        }
    }
}

/// One model plus its training settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub arch: String,
    pub num_layers: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub activation: Option<String>,
    pub attention_heads: Option<usize>,
    pub gin_epsilon: Option<f64>,
    pub gin_train_epsilon: Option<bool>,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl ModelSection {
    pub fn resolve(&self) -> Result<(ModelConfig, TrainConfig), ConfigError> {
        let arch: Arch = self.arch.parse().map_err(invalid)?;
        let mut model = ModelConfig::new(arch);
        if let Some(l) = self.num_layers {
            model.num_layers = l;
        }
        if let Some(h) = self.hidden_dim {
            model.hidden_dim = h;
        }
        if let Some(a) = &self.activation {
            model.activation = a.parse::<Activation>().map_err(invalid)?;
        }
        if let Some(h) = self.attention_heads {
            model.attention_heads = h;
        }
        if let Some(e) = self.gin_epsilon {
            model.gin_epsilon = e;
        }
        if let Some(t) = self.gin_train_epsilon {
            model.gin_train_epsilon = t;
        }
        model.validate()?;
        let train = TrainConfig::new(self.epochs, self.learning_rate, 0);
        train.validate()?;
        Ok((model, train))
    }

    fn with_arch(&self, arch: &str) -> ModelSection {
        let mut section = self.clone();
        section.arch = arch.to_string();
        section
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSection {
    pub kind: String,
    // training-based fields
    pub k: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    // threshold fields
    pub metric: Option<String>,
    pub objective: Option<String>,
}

fn parse_objective(text: &str) -> Result<ThresholdObjective, ConfigError> {
    let lower = text.to_ascii_lowercase();
    if lower == "max-f1" {
        return Ok(ThresholdObjective::MaxF1);
    }
    for (prefix, build) in [
        (
            "precision-quantile:",
            ThresholdObjective::PrecisionQuantile as fn(f64) -> ThresholdObjective,
        ),
        ("recall-quantile:", ThresholdObjective::RecallQuantile),
    ] {
        if let Some(rest) = lower.strip_prefix(prefix) {
            let q: f64 = rest
                .parse()
                .map_err(|_| invalid(format!("bad quantile in objective {text:?}")))?;
            return Ok(build(q));
        }
    }
    Err(invalid(format!(
        "unknown objective {text:?}; expected \"max-f1\", \"precision-quantile:Q\", or \"recall-quantile:Q\""
    )))
}

impl AttackSection {
    pub fn resolve(&self) -> Result<AttackKind, ConfigError> {
        match self.kind.as_str() {
            "training" => {
                if self.metric.is_some() || self.objective.is_some() {
                    return Err(invalid(
                        "`metric`/`objective` apply only to kind = \"threshold\"",
                    ));
                }
                let defaults = AttackModelConfig::default();
                let cfg = AttackModelConfig {
                    k: self.k,
                    hidden_dim: self.hidden_dim.unwrap_or(defaults.hidden_dim),
                    epochs: self.epochs.unwrap_or(defaults.epochs),
                    learning_rate: self.learning_rate.unwrap_or(defaults.learning_rate),
                    seed: 0,
                };
                cfg.validate()?;
                Ok(AttackKind::Training(cfg))
            }
            "threshold" => {
                for (field, present) in [
                    ("k", self.k.is_some()),
                    ("hidden_dim", self.hidden_dim.is_some()),
                    ("epochs", self.epochs.is_some()),
                    ("learning_rate", self.learning_rate.is_some()),
                ] {
                    if present {
                        return Err(invalid(format!(
                            "field `{field}` does not apply to kind = \"threshold\""
                        )));
                    }
                }
                let metric: ConfidenceMetric = self
                    .metric
                    .as_deref()
                    .ok_or_else(|| invalid("threshold attack requires `metric`"))?
                    .parse()
                    .map_err(invalid)?;
                let objective = match &self.objective {
                    Some(o) => parse_objective(o)?,
                    None => ThresholdObjective::MaxF1,
                };
                if let ThresholdObjective::PrecisionQuantile(q)
                | ThresholdObjective::RecallQuantile(q) = objective
                {
                    if !(0.0..=1.0).contains(&q) {
                        return Err(ConfigError::Attack(AttackError::InvalidQuantile { q }));
                    }
                }
                Ok(AttackKind::Threshold { metric, objective })
            }
            other => Err(invalid(format!(
                "unknown attack kind {other:?}, expected \"training\" or \"threshold\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSection {
    pub axis: String,
    pub shadow_archs: Option<Vec<String>>,
    pub target_archs: Option<Vec<String>>,
    pub datasets: Option<Vec<DataSection>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub repeats: Option<usize>,
    pub base_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub data: DataSection,
    pub shadow_data: Option<DataSection>,
    pub target: ModelSection,
    pub shadow: Option<ModelSection>,
    pub attack: AttackSection,
    pub transfer: Option<TransferSection>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub out: Option<PathBuf>,
}

/// A config with every section validated and every dataset materialized.
pub struct ResolvedExperiment {
    pub name: String,
    pub repeats: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    pub data: Dataset,
    pub shadow_data: Option<Dataset>,
    pub setting: ExperimentSetting,
    pub transfer: Option<(Vec<TransferSide>, Vec<TransferSide>)>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn resolve(&self, overrides: &Overrides) -> Result<ResolvedExperiment, ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(invalid("`name` must be a non-empty path-safe string"));
        }
        let repeats = overrides.repeats.or(self.repeats).unwrap_or(1);
        if repeats == 0 {
            return Err(invalid("`repeats` must be >= 1"));
        }
        let base_seed = overrides.seed.or(self.base_seed).unwrap_or(0);
        let out_dir = overrides
            .out
            .clone()
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs"));

        // dataset seeds are fixed per config so the data itself does not
        // change across the repeated runs
        let data = self.data.resolve(base_seed ^ 0x5EED)?;
        let shadow_data = self
            .shadow_data
            .as_ref()
            .map(|d| d.resolve(base_seed ^ 0x5AD0))
            .transpose()?;

        let (target_model, target_train) = self.target.resolve()?;
        let (shadow_model, shadow_train) = match &self.shadow {
            Some(section) => section.resolve()?,
            None => (target_model.clone(), target_train.clone()),
        };
        let attack = self.attack.resolve()?;
        let setting = ExperimentSetting {
            label: self.name.clone(),
            target_model,
            target_train,
            shadow_model,
            shadow_train,
            attack,
        };

        let transfer = self
            .transfer
            .as_ref()
            .map(|t| self.resolve_transfer(t, base_seed))
            .transpose()?;

        Ok(ResolvedExperiment {
            name: self.name.clone(),
            repeats,
            base_seed,
            out_dir,
            data,
            shadow_data,
            setting,
            transfer,
        })
    }

    fn resolve_transfer(
        &self,
        section: &TransferSection,
        base_seed: u64,
    ) -> Result<(Vec<TransferSide>, Vec<TransferSide>), ConfigError> {
        match section.axis.as_str() {
            "arch" => {
                if section.datasets.is_some() {
                    return Err(invalid("`datasets` does not apply to axis = \"arch\""));
                }
                let shadow_archs = section
                    .shadow_archs
                    .as_ref()
                    .ok_or_else(|| invalid("axis = \"arch\" requires `shadow_archs`"))?;
                let target_archs = section
                    .target_archs
                    .as_ref()
                    .ok_or_else(|| invalid("axis = \"arch\" requires `target_archs`"))?;
                if shadow_archs.is_empty() || target_archs.is_empty() {
                    return Err(invalid("transfer arch lists must be non-empty"));
                }
                let shadow_base = self.shadow.as_ref().unwrap_or(&self.target);
                let build = |archs: &[String], base: &ModelSection| {
                    archs
                        .iter()
                        .map(|arch| {
                            let (model, train) = base.with_arch(arch).resolve()?;
                            Ok(TransferSide::new(arch.clone(), model, train))
                        })
                        .collect::<Result<Vec<_>, ConfigError>>()
                };
                Ok((
                    build(shadow_archs, shadow_base)?,
                    build(target_archs, &self.target)?,
                ))
            }
            "dataset" => {
                if section.shadow_archs.is_some() || section.target_archs.is_some() {
                    return Err(invalid(
                        "`shadow_archs`/`target_archs` do not apply to axis = \"dataset\"",
                    ));
                }
                let datasets = section
                    .datasets
                    .as_ref()
                    .filter(|d| !d.is_empty())
                    .ok_or_else(|| invalid("axis = \"dataset\" requires a non-empty `datasets` list"))?;
                let (target_model, target_train) = self.target.resolve()?;
                let (shadow_model, shadow_train) = match &self.shadow {
                    Some(s) => s.resolve()?,
                    None => (target_model.clone(), target_train.clone()),
                };
                let mut shadow_sides = Vec::with_capacity(datasets.len());
                let mut target_sides = Vec::with_capacity(datasets.len());
                for (i, section) in datasets.iter().enumerate() {
                    let label = section
                        .label
                        .clone()
                        .ok_or_else(|| invalid("each transfer dataset needs a `label`"))?;
                    let data = section.resolve(base_seed ^ (0xDA7A + i as u64))?;
                    shadow_sides.push(
                        TransferSide::new(label.clone(), shadow_model.clone(), shadow_train.clone())
                            .with_data(data.clone()),
                    );
                    target_sides.push(
                        TransferSide::new(label, target_model.clone(), target_train.clone())
                            .with_data(data),
                    );
                }
                Ok((shadow_sides, target_sides))
            }
            other => Err(invalid(format!(
                "unknown transfer axis {other:?}, expected \"arch\" or \"dataset\""
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "demo"
        repeats = 2
        base_seed = 5

        [data]
        kind = "synthetic"
        num_graphs = 24
        num_classes = 2
        nodes_min = 4
        nodes_max = 6
        edge_probs = [0.1, 0.4]
        feature_dim = 3

        [target]
        arch = "gcn"
        hidden_dim = 8
        epochs = 10
        learning_rate = 0.05

        [attack]
        kind = "training"
        epochs = 50
    "#;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    #[test]
    fn minimal_config_resolves() {
        let cfg = parse(MINIMAL).unwrap();
        let resolved = cfg.resolve(&Overrides::default()).unwrap();
        assert_eq!(resolved.repeats, 2);
        assert_eq!(resolved.base_seed, 5);
        assert_eq!(resolved.data.len(), 24);
        assert_eq!(resolved.setting.shadow_model, resolved.setting.target_model);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("repeats = 2", "repeats = 2\nbogus = 1");
        match parse(&text) {
            Err(ConfigError::Parse(msg)) => assert!(msg.contains("bogus"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn field_module_mixups_are_rejected() {
        let text = MINIMAL.replace("kind = \"training\"", "kind = \"training\"\nmetric = \"mse\"");
        let cfg = parse(&text).unwrap();
        assert!(matches!(
            cfg.resolve(&Overrides::default()),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn invalid_model_values_fail_before_training() {
        let text = MINIMAL.replace("learning_rate = 0.05", "learning_rate = -1.0");
        let cfg = parse(&text).unwrap();
        assert!(matches!(
            cfg.resolve(&Overrides::default()),
            Err(ConfigError::Engine(_))
        ));
    }

    #[test]
    fn overrides_take_precedence() {
        let cfg = parse(MINIMAL).unwrap();
        let resolved = cfg
            .resolve(&Overrides {
                seed: Some(99),
                repeats: Some(7),
                out: Some(PathBuf::from("elsewhere")),
            })
            .unwrap();
        assert_eq!(resolved.base_seed, 99);
        assert_eq!(resolved.repeats, 7);
        assert_eq!(resolved.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn threshold_attack_objective_parses() {
        let text = MINIMAL.replace(
            "kind = \"training\"\n        epochs = 50",
            "kind = \"threshold\"\n        metric = \"cross-entropy\"\n        objective = \"recall-quantile:0.9\"",
        );
        let cfg = parse(&text).unwrap();
        let resolved = cfg.resolve(&Overrides::default()).unwrap();
        match resolved.setting.attack {
            AttackKind::Threshold { metric, objective } => {
                assert_eq!(metric, ConfidenceMetric::CrossEntropy);
                assert_eq!(objective, ThresholdObjective::RecallQuantile(0.9));
            }
            other => panic!("unexpected attack {other:?}"),
        }
    }

    #[test]
    fn arch_transfer_section_builds_sides() {
        let text = format!(
            "{MINIMAL}\n[transfer]\naxis = \"arch\"\nshadow_archs = [\"gcn\", \"gin\"]\ntarget_archs = [\"gcn\", \"gin\"]\n"
        );
        let cfg = parse(&text).unwrap();
        let resolved = cfg.resolve(&Overrides::default()).unwrap();
        let (rows, cols) = resolved.transfer.unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(cols.len(), 2);
        assert_eq!(rows[1].model.arch, Arch::Gin);
    }

    #[test]
    fn empty_transfer_lists_are_config_errors() {
        let text = format!(
            "{MINIMAL}\n[transfer]\naxis = \"arch\"\nshadow_archs = []\ntarget_archs = [\"gcn\"]\n"
        );
        let cfg = parse(&text).unwrap();
        assert!(matches!(
            cfg.resolve(&Overrides::default()),
            Err(ConfigError::Invalid(_))
        ));
    }
}
