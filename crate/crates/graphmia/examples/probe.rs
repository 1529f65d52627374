// Scratch probe for tuning the overfit setting. Not part of the deliverable docs.

use graphmia::attack::{AttackModelConfig, ConfidenceMetric, ThresholdObjective};
use graphmia::engine::{Arch, ModelConfig, TrainConfig};
use graphmia::graph::{gen_synthetic, graph_stats, Dataset, SyntheticSpec};
use graphmia::report::{
    epoch_sweep, factor_correlations, run_attack_experiment, spearman, transfer_matrix,
    AttackKind, ExperimentSetting, FactorRow, TransferSide,
};

fn overfit_data(nodes: (usize, usize)) -> Dataset {
    gen_synthetic(
        &SyntheticSpec::new(200, 2, nodes, vec![0.1, 0.3], 4, 1234).with_class_mean_shift(0.0),
    )
    .unwrap()
}

fn gcn_setting(epochs: usize, attack: AttackKind) -> ExperimentSetting {
    ExperimentSetting::matched(
        "probe",
        ModelConfig::new(Arch::Gcn).with_hidden_dim(64),
        TrainConfig::new(epochs, 0.3, 0),
        attack,
    )
}

fn attack_cfg() -> AttackModelConfig {
    let env = |k: &str, d: f64| -> f64 {
        std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
    };
    AttackModelConfig {
        k: None,
        hidden_dim: env("AK_HIDDEN", 64.0) as usize,
        epochs: env("AK_EPOCHS", 400.0) as usize,
        learning_rate: env("AK_LR", 0.5),
        seed: 0,
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("attack");
    let t0 = std::time::Instant::now();
    match mode {
        "attack0" => {
            let data = overfit_data((4, 8));
            let setting = gcn_setting(0, AttackKind::Training(attack_cfg()));
            let report = run_attack_experiment(&data, None, &setting, 5, 100).unwrap();
            for r in &report.per_run {
                println!("  seed={} gap={:.3} f1={:.3}", r.seed, r.gap, r.f1);
            }
            println!("0-epoch mean f1={:.3} gap={:.3}", report.f1.mean, report.train_test_gap.mean);
        }
        "sweep" => {
            let data = overfit_data((4, 8));
            let setting = gcn_setting(0, AttackKind::Training(attack_cfg()));
            let grid = [0, 60, 150, 400, 1000];
            let series = epoch_sweep(&data, &setting, &grid, 3, 50).unwrap();
            for i in 0..series.x.len() {
                println!("  epochs={:<5} gap={:.3} f1={:.3}", series.x[i], series.gap[i], series.f1[i]);
            }
            println!("spearman(gap, f1) = {:.3}", spearman(&series.gap, &series.f1).unwrap());
        }
        "metrics" => {
            let data = overfit_data((4, 8));
            for metric in ConfidenceMetric::ALL {
                let setting = gcn_setting(
                    1000,
                    AttackKind::Threshold {
                        metric,
                        objective: ThresholdObjective::MaxF1,
                    },
                );
                let report = run_attack_experiment(&data, None, &setting, 5, 100).unwrap();
                println!("  {:<14} f1={:.3} ({:.3})", metric.name(), report.f1.mean, report.f1.std);
            }
        }
        "transfer" => {
            let data = overfit_data((4, 8));
            let gcn = TransferSide::new(
                "gcn",
                ModelConfig::new(Arch::Gcn).with_hidden_dim(64),
                TrainConfig::new(1000, 0.3, 0),
            );
            let gin = TransferSide::new(
                "gin",
                ModelConfig::new(Arch::Gin).with_hidden_dim(64),
                TrainConfig::new(300, 0.1, 0),
            );
            let sides = vec![gcn, gin];
            let grid = transfer_matrix(
                &data,
                &sides,
                &sides,
                &AttackKind::Training(attack_cfg()),
                5,
                100,
            )
            .unwrap();
            for (label, row) in grid.row_labels.iter().zip(&grid.cells) {
                print!("  shadow={label:<4}");
                for cell in row {
                    print!("  {:.3}", cell.f1.mean);
                }
                println!();
            }
        }
        "xdomain" => {
            let two = overfit_data((4, 8));
            let six = gen_synthetic(
                &SyntheticSpec::new(240, 6, (4, 8), vec![0.05, 0.1, 0.17, 0.25, 0.34, 0.45], 4, 77)
                    .with_class_mean_shift(0.0),
            )
            .unwrap();
            let make = |label: &str, data: &Dataset| {
                TransferSide::new(
                    label,
                    ModelConfig::new(Arch::Gcn).with_hidden_dim(64),
                    TrainConfig::new(1000, 0.3, 0),
                )
                .with_data(data.clone())
            };
            let sides = vec![make("two", &two), make("six", &six)];
            let grid = transfer_matrix(
                &two,
                &sides,
                &sides,
                &AttackKind::Training(attack_cfg()),
                3,
                100,
            )
            .unwrap();
            for (label, row) in grid.row_labels.iter().zip(&grid.cells) {
                print!("  shadow={label:<4}");
                for cell in row {
                    print!("  {:.3}", cell.f1.mean);
                }
                println!();
            }
        }
        "factors" => {
            let variants: Vec<(&str, SyntheticSpec)> = vec![
                ("small", SyntheticSpec::new(200, 2, (4, 8), vec![0.1, 0.3], 4, 11).with_class_mean_shift(0.0)),
                ("mid", SyntheticSpec::new(200, 2, (8, 14), vec![0.15, 0.35], 4, 22).with_class_mean_shift(0.0)),
                ("large", SyntheticSpec::new(200, 2, (12, 20), vec![0.2, 0.4], 4, 33).with_class_mean_shift(0.0)),
                ("sixcls", SyntheticSpec::new(240, 6, (4, 8), vec![0.05, 0.1, 0.17, 0.25, 0.34, 0.45], 4, 44).with_class_mean_shift(0.0)),
            ];
            let mut rows = Vec::new();
            for (name, spec) in &variants {
                let data = gen_synthetic(spec).unwrap();
                let stats = graph_stats(&data).unwrap();
                for &epochs in &[40usize, 200, 1000] {
                    let setting = gcn_setting(epochs, AttackKind::Training(attack_cfg()));
                    let report = run_attack_experiment(&data, None, &setting, 2, 900).unwrap();
                    println!(
                        "  {name:<7} epochs={epochs:<5} gap={:.3} f1={:.3}",
                        report.train_test_gap.mean, report.f1.mean
                    );
                    rows.push(FactorRow::new(&stats, report.train_test_gap.mean, report.f1.mean));
                }
            }
            let table = factor_correlations(&rows).unwrap();
            for e in &table.entries {
                println!("  rho({}) = {:?}", e.factor, e.rho);
            }
        }
        other => eprintln!("unknown probe mode {other:?}"),
    }
    println!("({:.1}s)", t0.elapsed().as_secs_f64());
}
