//! Command-line front end: `train`, `attack`, `sweep`, `transfer`, `stats`.
//!
//! Each command reads a TOML experiment config (except `stats`, which takes
//! a dataset directory), validates it fully before any computation, and
//! writes results under `<out>/<experiment-name>/{checkpoints,reports,series}/`.
//! Exit codes: 0 on success, 2 on config errors, 1 on runtime errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attack::{metric_value, split_shadow, train_shadow, write_metric_distribution_csv};
use crate::config::{ConfigError, ExperimentConfig, Overrides, ResolvedExperiment};
use crate::engine::{save_model, train};
use crate::graph::{graph_stats, parse_tu_dataset, split_dataset, SplitSpec};
use crate::report::{
    depth_sweep, epoch_sweep, first_run_seed, run_attack_experiment, salt, transfer_matrix,
    write_history_csv, write_json, write_runs_csv, write_series_csv, write_stats_csv,
    write_transfer_csv, AttackKind, EvalError, GridStat,
};

#[derive(Parser)]
#[command(
    name = "graphmia",
    about = "Train small graph classifiers and mount membership inference attacks against them",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's repeat count
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SweepAxis {
    Epochs,
    Layers,
}

#[derive(Subcommand)]
enum Command {
    /// Train the target model on a train/test split and save a checkpoint
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the configured attack and report precision/recall/F1 over repeats
    Attack {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-run the attack across an epoch or layer grid
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Quantity the grid varies
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated grid, e.g. `0,50,100,200,400`
        #[arg(long)]
        grid: String,
    },
    /// Evaluate the attack over every (shadow, target) setting pair
    Transfer {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print summary statistics of a benchmark-format dataset directory
    Stats {
        /// Dataset directory containing `<name>_A.txt` and friends
        dir: PathBuf,
        /// Dataset file prefix; defaults to the directory name
        #[arg(long)]
        name: Option<String>,
        /// Also write the statistics as CSV to this path
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

enum CliError {
    Config(ConfigError),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidSetting(msg) => CliError::Config(ConfigError::Invalid(msg)),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// Parse `args` (including the program name) and run the selected command.
/// Returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train { common } => cmd_train(&common),
        Command::Attack { common } => cmd_attack(&common),
        Command::Sweep { common, axis, grid } => cmd_sweep(&common, axis, &grid),
        Command::Transfer { common } => cmd_transfer(&common),
        Command::Stats { dir, name, csv } => cmd_stats(&dir, name.as_deref(), csv.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            2
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load(common: &CommonArgs) -> Result<ResolvedExperiment, CliError> {
    let overrides = Overrides {
        seed: common.seed,
        repeats: common.repeats,
        out: common.out.clone(),
    };
    Ok(ExperimentConfig::load(&common.config)?.resolve(&overrides)?)
}

struct OutputLayout {
    checkpoints: PathBuf,
    reports: PathBuf,
    series: PathBuf,
}

impl OutputLayout {
    fn new(exp: &ResolvedExperiment) -> Self {
        let root = exp.out_dir.join(&exp.name);
        Self {
            checkpoints: root.join("checkpoints"),
            reports: root.join("reports"),
            series: root.join("series"),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn cmd_train(common: &CommonArgs) -> Result<(), CliError> {
    let exp = load(common)?;
    let out = OutputLayout::new(&exp);
    let (train_half, test_half) =
        split_dataset(&exp.data, SplitSpec::new(0.5, exp.base_seed)).map_err(runtime)?;
    let mut cfg = exp.setting.target_train.clone();
    cfg.seed = exp.base_seed;
    let model = train(&exp.setting.target_model, &cfg, &train_half, Some(&test_half))
        .map_err(runtime)?;

    let checkpoint = out.checkpoints.join("target.json");
    save_model(&model, &checkpoint).map_err(runtime)?;
    let history = out.series.join("history.csv");
    write_history_csv(&model.history, &history)?;

    let last = model.history.last();
    println!(
        "trained {} ({} epochs) on {} graphs: train_acc={:.3} test_acc={:.3}",
        exp.setting.target_model.arch.name(),
        cfg.epochs,
        train_half.len(),
        last.map_or(f64::NAN, |e| e.train_acc),
        last.and_then(|e| e.test_acc).unwrap_or(f64::NAN),
    );
    println!("checkpoint: {}", checkpoint.display());
    println!("history:    {}", history.display());
    Ok(())
}

fn cmd_attack(common: &CommonArgs) -> Result<(), CliError> {
    let exp = load(common)?;
    let out = OutputLayout::new(&exp);
    let report = run_attack_experiment(
        &exp.data,
        exp.shadow_data.as_ref(),
        &exp.setting,
        exp.repeats,
        exp.base_seed,
    )?;

    let json_path = out.reports.join("attack_report.json");
    write_json(&report, "attack_report", &json_path)?;
    let runs_path = out.reports.join("runs.csv");
    write_runs_csv(&report, &runs_path)?;

    // threshold attacks additionally export the first run's shadow-side
    // metric value distribution, for histogram plots
    if let AttackKind::Threshold { metric, .. } = &exp.setting.attack {
        let shadow_side = match &exp.shadow_data {
            Some(sd) => sd.clone(),
            None => {
                split_dataset(
                    &exp.data,
                    SplitSpec::new(0.5, first_run_seed(exp.base_seed, salt::SIDE_SPLIT)),
                )
                .map_err(runtime)?
                .1
            }
        };
        let (member, non_member) =
            split_shadow(&shadow_side, first_run_seed(exp.base_seed, salt::SHADOW_SPLIT))
                .map_err(runtime)?;
        let mut scfg = exp.setting.shadow_train.clone();
        scfg.seed = first_run_seed(exp.base_seed, salt::SHADOW_INIT);
        let shadow =
            train_shadow(&exp.setting.shadow_model, &scfg, &member).map_err(runtime)?;
        let values = |ds: &crate::graph::Dataset| -> Result<Vec<f64>, CliError> {
            ds.graphs()
                .iter()
                .map(|g| Ok(metric_value(*metric, &shadow.forward(g).map_err(runtime)?)))
                .collect()
        };
        let dist_path = out.reports.join("metric_distribution.csv");
        write_metric_distribution_csv(
            *metric,
            &values(&member)?,
            &values(&non_member)?,
            &dist_path,
        )
        .map_err(runtime)?;
        println!("metric distribution: {}", dist_path.display());
    }

    println!("{}", report.setting);
    println!(
        "precision {:.3} ({:.3})  recall {:.3} ({:.3})  f1 {:.3} ({:.3})  gap {:.3} over {} runs",
        report.precision.mean,
        report.precision.std,
        report.recall.mean,
        report.recall.std,
        report.f1.mean,
        report.f1.std,
        report.train_test_gap.mean,
        report.runs,
    );
    println!("report: {}", json_path.display());
    println!("runs:   {}", runs_path.display());
    Ok(())
}

fn parse_grid(grid: &str) -> Result<Vec<usize>, CliError> {
    let values: Result<Vec<usize>, _> = grid
        .split(',')
        .map(|tok| tok.trim().parse::<usize>())
        .collect();
    let values =
        values.map_err(|_| CliError::Config(ConfigError::Invalid(format!("bad grid {grid:?}"))))?;
    if values.is_empty() {
        return Err(CliError::Config(ConfigError::Invalid("empty grid".into())));
    }
    Ok(values)
}

fn cmd_sweep(common: &CommonArgs, axis: SweepAxis, grid: &str) -> Result<(), CliError> {
    let exp = load(common)?;
    let grid = parse_grid(grid)?;
    if axis == SweepAxis::Layers && exp.setting.target_model.arch != crate::engine::Arch::DeepGcn {
        return Err(CliError::Config(ConfigError::Invalid(
            "layer sweeps require target arch = \"deep-gcn\"".into(),
        )));
    }
    let out = OutputLayout::new(&exp);
    let (series, stem) = match axis {
        SweepAxis::Epochs => (
            epoch_sweep(&exp.data, &exp.setting, &grid, exp.repeats, exp.base_seed)?,
            "sweep_epochs",
        ),
        SweepAxis::Layers => (
            depth_sweep(&exp.data, &exp.setting, &grid, exp.repeats, exp.base_seed)?,
            "sweep_layers",
        ),
    };
    let csv_path = out.series.join(format!("{stem}.csv"));
    write_series_csv(&series, &csv_path)?;
    let json_path = out.reports.join(format!("{stem}.json"));
    write_json(&series, "sweep_series", &json_path)?;

    for i in 0..series.x.len() {
        println!(
            "x={:<6} gap={:.3} f1={:.3}",
            series.x[i], series.gap[i], series.f1[i]
        );
    }
    println!("series: {}", csv_path.display());
    Ok(())
}

fn cmd_transfer(common: &CommonArgs) -> Result<(), CliError> {
    let exp = load(common)?;
    let (shadow_sides, target_sides) = exp.transfer.clone().ok_or_else(|| {
        CliError::Config(ConfigError::Invalid(
            "the transfer command needs a [transfer] section".into(),
        ))
    })?;
    let out = OutputLayout::new(&exp);
    let grid = transfer_matrix(
        &exp.data,
        &shadow_sides,
        &target_sides,
        &exp.setting.attack,
        exp.repeats,
        exp.base_seed,
    )?;

    let json_path = out.reports.join("transfer_grid.json");
    write_json(&grid, "transfer_grid", &json_path)?;
    for stat in [GridStat::F1, GridStat::Precision, GridStat::Recall] {
        let path = out.reports.join(format!("transfer_{}.csv", stat.name()));
        write_transfer_csv(&grid, stat, &path)?;
    }

    println!("transfer grid (mean f1), rows = shadow, cols = target:");
    print!("{:>12}", "");
    for c in &grid.col_labels {
        print!("{c:>12}");
    }
    println!();
    for (label, row) in grid.row_labels.iter().zip(&grid.cells) {
        print!("{label:>12}");
        for cell in row {
            print!("{:>12.3}", cell.f1.mean);
        }
        println!();
    }
    println!("grid: {}", json_path.display());
    Ok(())
}

fn cmd_stats(dir: &Path, name: Option<&str>, csv: Option<&Path>) -> Result<(), CliError> {
    let name = match name {
        Some(n) => n.to_string(),
        None => dir
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .ok_or_else(|| {
                CliError::Config(ConfigError::Invalid(format!(
                    "cannot infer dataset name from {}",
                    dir.display()
                )))
            })?,
    };
    let ds = parse_tu_dataset(dir, &name).map_err(|e| CliError::Config(ConfigError::Data(e)))?;
    let stats = graph_stats(&ds).map_err(runtime)?;
    println!("dataset     {name}");
    println!("graphs      {}", stats.graph_count);
    println!("classes     {}", stats.class_count);
    println!("avg nodes   {:.2}", stats.avg_nodes);
    println!("avg edges   {:.2} (undirected)", stats.avg_edges);
    println!("avg density {:.4}", stats.avg_density);
    println!("avg degree  {:.2}", stats.avg_degree);
    if let Some(path) = csv {
        write_stats_csv(&stats, path)?;
        println!("csv: {}", path.display());
    }
    Ok(())
}
