//! Membership inference attacks against graph-level classifiers.
//!
//! The crate is organized around five pieces:
//!
//! - [`graph`] — the dataset model: graphs with node features and undirected
//!   edges, benchmark-format ingestion, deterministic splitting, summary
//!   statistics, and a seeded synthetic generator.
//! - [`engine`] — a minimal, fully deterministic graph-classification engine
//!   (GCN, GIN, GAT, mean-aggregator SAGE, residual deep GCN, and an MLP
//!   baseline) trained by full-batch gradient descent with analytic gradients.
//! - [`attack`] — the two membership inference attacks: a training-based
//!   attack that fits a binary classifier on shadow-model confidence vectors,
//!   and a threshold-based attack that compares scalar confidence metrics
//!   against a tuned threshold.
//! - [`report`] — evaluation: precision/recall/F1 over repeated seeded runs,
//!   train-test-gap measurement, Spearman rank correlation, epoch/depth
//!   sweeps, transferability grids, and factor-correlation tables.
//! - [`cli`] — a thin command-line front end driven by TOML experiment
//!   configs. Most workflows are easier to reach through the runnable
//!   programs in `examples/`.
//!
//! Everything downstream of a seed is deterministic: the same configuration
//! and seed always produce byte-identical models, decisions, and reports.

pub mod attack;
pub mod cli;
pub mod config;
pub mod engine;
pub mod graph;
pub mod report;

mod io_util;
