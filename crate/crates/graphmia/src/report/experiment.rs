//! End-to-end attack experiments: the split protocol, repeated seeded runs,
//! epoch and depth sweeps, transferability grids, and factor correlations.
//!
//! One run follows the worst-case protocol: the dataset splits into a target
//! side and a shadow side, the target side splits again into training
//! (members) and held-out (non-members) halves, and the attack sees only the
//! shadow side. Evaluation is balanced: all target training members against
//! an equal-size sample of target-side held-out non-members.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{attack_metrics, spearman};
use super::{AttackReport, CorrelationEntry, CorrelationTable, EvalError, Stat, SweepSeries, TransferGrid};
use crate::attack::{
    gather_attack_records, infer_membership, metric_value, select_threshold, split_shadow,
    threshold_attack, train_attack_model, train_shadow, AttackModelConfig, ConfidenceMetric,
    ThresholdObjective,
};
use crate::engine::{evaluate_accuracy, train, Arch, ModelConfig, TrainConfig};
use crate::graph::{split_dataset, Dataset, DatasetStats, Graph, SplitSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which attack the experiment mounts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttackKind {
    Training(AttackModelConfig),
    Threshold {
        metric: ConfidenceMetric,
        objective: ThresholdObjective,
    },
}

impl AttackKind {
    pub fn describe(&self) -> String {
        match self {
            AttackKind::Training(cfg) => match cfg.k {
                Some(k) => format!("training(k={k})"),
                None => "training(k=auto)".to_string(),
            },
            AttackKind::Threshold { metric, .. } => format!("threshold({})", metric.name()),
        }
    }
}

/// Everything one experiment needs besides the data and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetting {
    pub label: String,
    pub target_model: ModelConfig,
    pub target_train: TrainConfig,
    pub shadow_model: ModelConfig,
    pub shadow_train: TrainConfig,
    pub attack: AttackKind,
}

impl ExperimentSetting {
    /// Matched-setting baseline: shadow mirrors the target.
    pub fn matched(
        label: impl Into<String>,
        model: ModelConfig,
        train_cfg: TrainConfig,
        attack: AttackKind,
    ) -> Self {
        Self {
            label: label.into(),
            target_model: model.clone(),
            target_train: train_cfg.clone(),
            shadow_model: model,
            shadow_train: train_cfg,
            attack,
        }
    }

    fn describe(&self, data: &Dataset, shadow_data: Option<&Dataset>) -> String {
        let shadow_domain = shadow_data.map_or_else(|| data.name().to_string(), |d| {
            d.name().to_string()
        });
        format!(
            "{} | data={} shadow_data={} target={}x{} shadow={}x{} attack={}",
            self.label,
            data.name(),
            shadow_domain,
            self.target_model.arch.name(),
            self.target_model.num_layers,
            self.shadow_model.arch.name(),
            self.shadow_model.num_layers,
            self.attack.describe(),
        )
    }
}

/// Metrics of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub gap: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent sub-seed for one role within one run.
fn derive_seed(run_seed: u64, salt: u64) -> u64 {
    splitmix64(run_seed ^ salt.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Sub-seed the first run of an experiment uses for the given role salt
/// (see the `salt` constants). Lets callers rebuild run-0 artifacts, such as
/// the shadow-side metric distribution, outside the pipeline.
pub fn first_run_seed(base_seed: u64, salt: u64) -> u64 {
    derive_seed(base_seed, salt)
}

/// Role salts of the per-run seeding scheme; see [`first_run_seed`].
pub mod salt {
    pub const SIDE_SPLIT: u64 = 1;
    pub const TARGET_SPLIT: u64 = 2;
    pub const TARGET_INIT: u64 = 3;
    pub const SHADOW_SPLIT: u64 = 4;
    pub const SHADOW_INIT: u64 = 5;
    pub const ATTACK_INIT: u64 = 6;
    pub const EVAL_SAMPLE: u64 = 7;
}

/// Balanced evaluation set: all members (the target's training graphs) and
/// an equal-size seeded sample of held-out non-members; if the held-out side
/// is smaller, the member side is down-sampled instead.
fn balanced_eval<'a>(
    members: &'a Dataset,
    holdout: &'a Dataset,
    seed: u64,
) -> Vec<(&'a Graph, bool)> {
    let take = members.len().min(holdout.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |ds: &'a Dataset, take: usize, flag: bool| -> Vec<(&'a Graph, bool)> {
        let mut idx: Vec<usize> = (0..ds.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(take);
        idx.into_iter().map(|i| (&ds.graphs()[i], flag)).collect()
    };
    let mut eval = pick(members, take, true);
    eval.extend(pick(holdout, take, false));
    eval
}

fn resolved_k(cfg: &AttackModelConfig, shadow_classes: usize, target_classes: usize) -> usize {
    cfg.k
        .unwrap_or_else(|| 10.min(shadow_classes).min(target_classes).max(1))
}

fn single_run(
    data: &Dataset,
    shadow_data: Option<&Dataset>,
    setting: &ExperimentSetting,
    run_seed: u64,
) -> Result<RunOutcome, EvalError> {
    // target side vs shadow side: disjoint halves of one dataset, or two
    // explicitly provided domains
    let (target_side, shadow_side) = match shadow_data {
        None => split_dataset(data, SplitSpec::new(0.5, derive_seed(run_seed, salt::SIDE_SPLIT)))?,
        Some(sd) => (data.clone(), sd.clone()),
    };
    let (target_train_set, target_holdout) = split_dataset(
        &target_side,
        SplitSpec::new(0.5, derive_seed(run_seed, salt::TARGET_SPLIT)),
    )?;
    if target_train_set.is_empty() || target_holdout.is_empty() {
        return Err(EvalError::InvalidSetting(format!(
            "dataset {} too small for the split protocol",
            data.name()
        )));
    }

    let mut target_cfg = setting.target_train.clone();
    target_cfg.seed = derive_seed(run_seed, salt::TARGET_INIT);
    let target = train(&setting.target_model, &target_cfg, &target_train_set, None)?;
    let train_acc = evaluate_accuracy(&target, &target_train_set)?;
    let test_acc = evaluate_accuracy(&target, &target_holdout)?;

    let (shadow_member, shadow_non_member) =
        split_shadow(&shadow_side, derive_seed(run_seed, salt::SHADOW_SPLIT))?;
    let mut shadow_cfg = setting.shadow_train.clone();
    shadow_cfg.seed = derive_seed(run_seed, salt::SHADOW_INIT);
    let shadow = train_shadow(&setting.shadow_model, &shadow_cfg, &shadow_member)
        .map_err(EvalError::Engine)?;

    let eval = balanced_eval(
        &target_train_set,
        &target_holdout,
        derive_seed(run_seed, salt::EVAL_SAMPLE),
    );
    let actual: Vec<bool> = eval.iter().map(|&(_, m)| m).collect();

    let predicted: Vec<bool> = match &setting.attack {
        AttackKind::Training(attack_cfg) => {
            let k = resolved_k(attack_cfg, shadow.num_classes, target.num_classes);
            let records =
                gather_attack_records(&shadow, &shadow_member, &shadow_non_member, k)?;
            let mut attack_cfg = attack_cfg.clone();
            attack_cfg.seed = derive_seed(run_seed, salt::ATTACK_INIT);
            let attack = train_attack_model(&records, &attack_cfg)?;
            eval.iter()
                .map(|&(g, _)| infer_membership(&attack, &target, g, k).map(|(flag, _)| flag))
                .collect::<Result<_, _>>()?
        }
        AttackKind::Threshold { metric, objective } => {
            let values = |ds: &Dataset| -> Result<Vec<f64>, EvalError> {
                ds.graphs()
                    .iter()
                    .map(|g| Ok(metric_value(*metric, &shadow.forward(g)?)))
                    .collect()
            };
            let member_values = values(&shadow_member)?;
            let non_member_values = values(&shadow_non_member)?;
            let rule = select_threshold(&member_values, &non_member_values, *metric, *objective)?;
            eval.iter()
                .map(|&(g, _)| threshold_attack(&rule, &target, g))
                .collect::<Result<_, _>>()?
        }
    };

    let (precision, recall, f1) = attack_metrics(&predicted, &actual)?;
    Ok(RunOutcome {
        seed: run_seed,
        precision,
        recall,
        f1,
        train_acc,
        test_acc,
        gap: train_acc - test_acc,
    })
}

/// Run the full pipeline `repeats` times with seeds `base_seed..base_seed +
/// repeats` and aggregate. Reports are reproducible bit-for-bit from
/// `(data, setting, repeats, base_seed)`; runs execute in parallel.
pub fn run_attack_experiment(
    data: &Dataset,
    shadow_data: Option<&Dataset>,
    setting: &ExperimentSetting,
    repeats: usize,
    base_seed: u64,
) -> Result<AttackReport, EvalError> {
    if repeats == 0 {
        return Err(EvalError::InvalidSetting("repeats must be >= 1".into()));
    }
    setting.target_model.validate().map_err(EvalError::Engine)?;
    setting.shadow_model.validate().map_err(EvalError::Engine)?;
    if let AttackKind::Training(cfg) = &setting.attack {
        cfg.validate()?;
    }
    let per_run: Vec<RunOutcome> = (0..repeats)
        .into_par_iter()
        .map(|i| single_run(data, shadow_data, setting, base_seed.wrapping_add(i as u64)))
        .collect::<Result<_, _>>()?;
    Ok(AttackReport {
        setting: setting.describe(data, shadow_data),
        runs: repeats,
        precision: Stat::over(per_run.iter().map(|r| r.precision)),
        recall: Stat::over(per_run.iter().map(|r| r.recall)),
        f1: Stat::over(per_run.iter().map(|r| r.f1)),
        train_test_gap: Stat::over(per_run.iter().map(|r| r.gap)),
        per_run,
    })
}

/// Retrain the target (and shadow) at each epoch budget and record the mean
/// train-test gap and attack F1 per point.
pub fn epoch_sweep(
    data: &Dataset,
    setting: &ExperimentSetting,
    epoch_grid: &[usize],
    repeats: usize,
    base_seed: u64,
) -> Result<SweepSeries, EvalError> {
    if epoch_grid.is_empty() {
        return Err(EvalError::InvalidSetting("epoch grid is empty".into()));
    }
    let mut series = SweepSeries {
        x: Vec::with_capacity(epoch_grid.len()),
        gap: Vec::with_capacity(epoch_grid.len()),
        f1: Vec::with_capacity(epoch_grid.len()),
    };
    for &epochs in epoch_grid {
        let mut point = setting.clone();
        point.target_train.epochs = epochs;
        point.shadow_train.epochs = epochs;
        let report = run_attack_experiment(data, None, &point, repeats, base_seed)?;
        series.x.push(epochs as f64);
        series.gap.push(report.train_test_gap.mean);
        series.f1.push(report.f1.mean);
    }
    Ok(series)
}

/// Like [`epoch_sweep`] but varying the layer count of the residual deep-GCN
/// family; the target architecture must be the deep GCN.
pub fn depth_sweep(
    data: &Dataset,
    setting: &ExperimentSetting,
    layer_grid: &[usize],
    repeats: usize,
    base_seed: u64,
) -> Result<SweepSeries, EvalError> {
    if layer_grid.is_empty() {
        return Err(EvalError::InvalidSetting("layer grid is empty".into()));
    }
    if setting.target_model.arch != Arch::DeepGcn {
        return Err(EvalError::InvalidSetting(
            "depth sweeps require the deep-gcn architecture".into(),
        ));
    }
    let mut series = SweepSeries {
        x: Vec::with_capacity(layer_grid.len()),
        gap: Vec::with_capacity(layer_grid.len()),
        f1: Vec::with_capacity(layer_grid.len()),
    };
    for &layers in layer_grid {
        let mut point = setting.clone();
        point.target_model.num_layers = layers;
        if point.shadow_model.arch == Arch::DeepGcn {
            point.shadow_model.num_layers = layers;
        }
        let report = run_attack_experiment(data, None, &point, repeats, base_seed)?;
        series.x.push(layers as f64);
        series.gap.push(report.train_test_gap.mean);
        series.f1.push(report.f1.mean);
    }
    Ok(series)
}

/// One side of a transferability grid: a labeled model/training recipe with
/// an optional dataset of its own (cross-domain cells).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSide {
    pub label: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: Option<Dataset>,
}

impl TransferSide {
    pub fn new(label: impl Into<String>, model: ModelConfig, train: TrainConfig) -> Self {
        Self {
            label: label.into(),
            model,
            train,
            data: None,
        }
    }

    pub fn with_data(mut self, data: Dataset) -> Self {
        self.data = Some(data);
        self
    }
}

/// Evaluate every (shadow setting, target setting) pair: train both sides,
/// fit the attack on the shadow side, and score it against the target side.
///
/// Sides without data use `base_data` under the usual split protocol. When a
/// cell's shadow and target datasets share a name they are treated as one
/// domain and split; otherwise the shadow trains on its own domain and the
/// attack transfers cross-domain.
pub fn transfer_matrix(
    base_data: &Dataset,
    shadow_sides: &[TransferSide],
    target_sides: &[TransferSide],
    attack: &AttackKind,
    repeats: usize,
    base_seed: u64,
) -> Result<TransferGrid, EvalError> {
    if shadow_sides.is_empty() || target_sides.is_empty() {
        return Err(EvalError::InvalidSetting("transfer settings are empty".into()));
    }
    let cells: Vec<(usize, usize)> = (0..shadow_sides.len())
        .flat_map(|i| (0..target_sides.len()).map(move |j| (i, j)))
        .collect();
    let reports: Vec<AttackReport> = cells
        .par_iter()
        .map(|&(i, j)| {
            let shadow = &shadow_sides[i];
            let target = &target_sides[j];
            let setting = ExperimentSetting {
                label: format!("shadow={} target={}", shadow.label, target.label),
                target_model: target.model.clone(),
                target_train: target.train.clone(),
                shadow_model: shadow.model.clone(),
                shadow_train: shadow.train.clone(),
                attack: attack.clone(),
            };
            let target_data = target.data.as_ref().unwrap_or(base_data);
            let shadow_data = match &shadow.data {
                Some(sd) if sd.name() != target_data.name() => Some(sd),
                _ => None,
            };
            run_attack_experiment(target_data, shadow_data, &setting, repeats, base_seed)
        })
        .collect::<Result<_, _>>()?;
    let cols = target_sides.len();
    let mut rows = Vec::with_capacity(shadow_sides.len());
    let mut it = reports.into_iter();
    for _ in 0..shadow_sides.len() {
        rows.push(it.by_ref().take(cols).collect());
    }
    Ok(TransferGrid {
        row_labels: shadow_sides.iter().map(|s| s.label.clone()).collect(),
        col_labels: target_sides.iter().map(|s| s.label.clone()).collect(),
        cells: rows,
    })
}

/// One experiment's factors paired with the attack F1 it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub avg_density: f64,
    pub class_count: f64,
    pub train_test_gap: f64,
    pub f1: f64,
}

impl FactorRow {
    pub fn new(stats: &DatasetStats, train_test_gap: f64, f1: f64) -> Self {
        Self {
            avg_nodes: stats.avg_nodes,
            avg_edges: stats.avg_edges,
            avg_density: stats.avg_density,
            class_count: stats.class_count as f64,
            train_test_gap,
            f1,
        }
    }
}

/// Spearman rho of each factor column against attack F1. A constant factor
/// column gets a note instead of a coefficient; other errors propagate.
pub fn factor_correlations(rows: &[FactorRow]) -> Result<CorrelationTable, EvalError> {
    if rows.len() < 3 {
        return Err(EvalError::TooFewPoints { len: rows.len() });
    }
    let f1: Vec<f64> = rows.iter().map(|r| r.f1).collect();
    let columns: [(&str, Vec<f64>); 5] = [
        ("avg_nodes", rows.iter().map(|r| r.avg_nodes).collect()),
        ("avg_edges", rows.iter().map(|r| r.avg_edges).collect()),
        ("avg_density", rows.iter().map(|r| r.avg_density).collect()),
        ("class_count", rows.iter().map(|r| r.class_count).collect()),
        (
            "train_test_gap",
            rows.iter().map(|r| r.train_test_gap).collect(),
        ),
    ];
    let mut entries = Vec::with_capacity(columns.len());
    for (factor, column) in columns {
        match spearman(&column, &f1) {
            Ok(rho) => entries.push(CorrelationEntry {
                factor: factor.to_string(),
                rho: Some(rho),
                note: None,
            }),
            Err(EvalError::ConstantSeries) => entries.push(CorrelationEntry {
                factor: factor.to_string(),
                rho: None,
                note: Some("constant series; rank correlation undefined".to_string()),
            }),
            Err(other) => return Err(other),
        }
    }
    Ok(CorrelationTable { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_synthetic, SyntheticSpec};

    fn quick_data(seed: u64) -> Dataset {
        gen_synthetic(&SyntheticSpec::new(48, 2, (4, 7), vec![0.1, 0.45], 3, seed)).unwrap()
    }

    fn quick_setting(attack: AttackKind) -> ExperimentSetting {
        ExperimentSetting::matched(
            "quick",
            ModelConfig::new(Arch::Gcn).with_hidden_dim(8),
            TrainConfig::new(40, 0.05, 0),
            attack,
        )
    }

    fn quick_attack_cfg() -> AttackModelConfig {
        AttackModelConfig {
            hidden_dim: 8,
            epochs: 120,
            learning_rate: 0.3,
            seed: 0,
            k: None,
        }
    }

    #[test]
    fn report_aggregates_and_reproduces() {
        let ds = quick_data(1);
        let setting = quick_setting(AttackKind::Training(quick_attack_cfg()));
        let a = run_attack_experiment(&ds, None, &setting, 3, 7).unwrap();
        let b = run_attack_experiment(&ds, None, &setting, 3, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs, 3);
        assert_eq!(a.per_run.len(), 3);
        for r in &a.per_run {
            assert!((0.0..=1.0).contains(&r.precision));
            assert!((0.0..=1.0).contains(&r.recall));
            assert!((0.0..=1.0).contains(&r.f1));
            let (p, rr, f1) = (r.precision, r.recall, r.f1);
            if p + rr > 0.0 {
                assert!((f1 - 2.0 * p * rr / (p + rr)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_repeat_has_zero_std() {
        let ds = quick_data(2);
        let setting = quick_setting(AttackKind::Threshold {
            metric: ConfidenceMetric::CrossEntropy,
            objective: ThresholdObjective::MaxF1,
        });
        let report = run_attack_experiment(&ds, None, &setting, 1, 3).unwrap();
        assert_eq!(report.f1.std, 0.0);
        assert_eq!(report.precision.std, 0.0);
    }

    #[test]
    fn epoch_sweep_returns_aligned_series() {
        let ds = quick_data(3);
        let setting = quick_setting(AttackKind::Training(quick_attack_cfg()));
        let series = epoch_sweep(&ds, &setting, &[0, 30], 2, 11).unwrap();
        assert_eq!(series.x, vec![0.0, 30.0]);
        assert_eq!(series.gap.len(), 2);
        assert_eq!(series.f1.len(), 2);
        let single = epoch_sweep(&ds, &setting, &[10], 1, 11).unwrap();
        assert_eq!(single.x.len(), 1);
    }

    #[test]
    fn depth_sweep_requires_deep_gcn() {
        let ds = quick_data(4);
        let setting = quick_setting(AttackKind::Training(quick_attack_cfg()));
        assert!(matches!(
            depth_sweep(&ds, &setting, &[2], 1, 1),
            Err(EvalError::InvalidSetting(_))
        ));
        let deep = ExperimentSetting::matched(
            "deep",
            ModelConfig::new(Arch::DeepGcn).with_hidden_dim(8),
            TrainConfig::new(20, 0.05, 0),
            AttackKind::Training(quick_attack_cfg()),
        );
        let series = depth_sweep(&ds, &deep, &[1, 2], 1, 5).unwrap();
        assert_eq!(series.x, vec![1.0, 2.0]);
        assert!(series.gap.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn transfer_grid_is_complete() {
        let ds = quick_data(5);
        let make_side = |label: &str, arch: Arch| {
            TransferSide::new(
                label,
                ModelConfig::new(arch).with_hidden_dim(8),
                TrainConfig::new(30, 0.05, 0),
            )
        };
        let sides = vec![make_side("gcn", Arch::Gcn), make_side("gin", Arch::Gin)];
        let grid = transfer_matrix(
            &ds,
            &sides,
            &sides,
            &AttackKind::Training(quick_attack_cfg()),
            1,
            9,
        )
        .unwrap();
        assert_eq!(grid.cells.len(), 2);
        assert_eq!(grid.cells[0].len(), 2);
        assert_eq!(grid.row_labels, vec!["gcn", "gin"]);
        assert!(matches!(
            transfer_matrix(
                &ds,
                &[],
                &sides,
                &AttackKind::Training(quick_attack_cfg()),
                1,
                9
            ),
            Err(EvalError::InvalidSetting(_))
        ));
    }

    #[test]
    fn factor_correlations_flag_constant_columns() {
        let rows: Vec<FactorRow> = (0..6)
            .map(|i| FactorRow {
                avg_nodes: 8.0, // constant
                avg_edges: 5.0 + i as f64,
                avg_density: 0.3 - 0.01 * i as f64,
                class_count: 2.0, // constant
                train_test_gap: 0.05 * i as f64,
                f1: 0.5 + 0.05 * i as f64,
            })
            .collect();
        let table = factor_correlations(&rows).unwrap();
        assert!(table.rho("avg_nodes").is_none());
        assert!(table.rho("class_count").is_none());
        assert!((table.rho("train_test_gap").unwrap() - 1.0).abs() < 1e-12);
        assert!((table.rho("avg_density").unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(
            factor_correlations(&rows[..2]),
            Err(EvalError::TooFewPoints { len: 2 })
        ));
    }

    #[test]
    fn cross_domain_shadow_data_flows_through_distillation() {
        let two = quick_data(6);
        let six = gen_synthetic(&SyntheticSpec::new(
            48,
            6,
            (4, 7),
            vec![0.05, 0.12, 0.2, 0.3, 0.38, 0.45],
            3,
            7,
        ))
        .unwrap();
        let setting = quick_setting(AttackKind::Training(quick_attack_cfg()));
        let report = run_attack_experiment(&two, Some(&six), &setting, 1, 4).unwrap();
        assert_eq!(report.runs, 1);
        assert!(report.per_run[0].f1.is_finite());
    }
}
