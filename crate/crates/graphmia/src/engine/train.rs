//! Full-batch gradient-descent training and accuracy evaluation.

use super::layers::{backward_trace, forward_trace, trace_loss, GraphContext, Trace};
use super::{EngineError, EpochRecord, ModelConfig, ModelParams, TrainConfig, TrainedModel};
use crate::graph::Dataset;

fn check_dims(ds: &Dataset, feature_dim: usize) -> Result<(), EngineError> {
    if ds.feature_dim() != feature_dim {
        return Err(EngineError::FeatureDimMismatch {
            expected: feature_dim,
            found: ds.feature_dim(),
        });
    }
    Ok(())
}

fn contexts(ds: &Dataset, cfg: &ModelConfig) -> Vec<GraphContext> {
    ds.graphs()
        .iter()
        .map(|g| GraphContext::new(g, cfg.arch))
        .collect()
}

fn argmax(probs: &ndarray::Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn accuracy_over(params: &ModelParams, cfg: &ModelConfig, ctxs: &[GraphContext]) -> f64 {
    if ctxs.is_empty() {
        return 0.0;
    }
    let correct = ctxs
        .iter()
        .filter(|ctx| {
            let trace = forward_trace(params, cfg, ctx);
            argmax(&trace.probs) == ctx.label
        })
        .count();
    correct as f64 / ctxs.len() as f64
}

/// Train a graph classifier by full-batch gradient descent on the mean
/// cross-entropy of the training set.
///
/// With `epochs = 0` the seeded initial model is returned untouched and the
/// history is empty. Each history entry records loss and accuracy at the
/// parameters the epoch started from; `test` adds a per-epoch held-out
/// accuracy. A non-finite loss aborts with the offending epoch index.
pub fn train(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
) -> Result<TrainedModel, EngineError> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    if train_set.is_empty() {
        return Err(EngineError::EmptyDataset);
    }
    let feature_dim = train_set.feature_dim();
    let num_classes = train_set.num_classes();
    check_dims(train_set, feature_dim)?;
    if let Some(test) = test_set {
        if !test.is_empty() {
            check_dims(test, feature_dim)?;
        }
    }

    let mut params = ModelParams::init(model_cfg, feature_dim, num_classes, train_cfg.seed)?;
    let ctxs = contexts(train_set, model_cfg);
    let test_ctxs = test_set
        .filter(|t| !t.is_empty())
        .map(|t| contexts(t, model_cfg));
    let n = ctxs.len() as f64;

    let mut history = Vec::with_capacity(train_cfg.epochs);
    for epoch in 0..train_cfg.epochs {
        let mut grads = params.zeros_like();
        let mut loss = 0.0;
        let mut correct = 0usize;
        for ctx in &ctxs {
            let trace: Trace = forward_trace(&params, model_cfg, ctx);
            loss += trace_loss(&trace, ctx.label);
            if argmax(&trace.probs) == ctx.label {
                correct += 1;
            }
            backward_trace(&params, model_cfg, ctx, &trace, 1.0 / n, &mut grads);
        }
        let train_loss = loss / n;
        if !train_loss.is_finite() {
            return Err(EngineError::Diverged { epoch });
        }
        let test_acc = test_ctxs
            .as_ref()
            .map(|t| accuracy_over(&params, model_cfg, t));
        history.push(EpochRecord {
            train_loss,
            train_acc: correct as f64 / n,
            test_acc,
        });
        params.step(
            &grads,
            train_cfg.learning_rate,
            model_cfg.gin_train_epsilon,
        );
    }

    Ok(TrainedModel {
        config: model_cfg.clone(),
        feature_dim,
        num_classes,
        params,
        history,
    })
}

/// Fraction of graphs whose argmax posterior equals their label; argmax ties
/// break toward the lowest class index.
pub fn evaluate_accuracy(model: &TrainedModel, ds: &Dataset) -> Result<f64, EngineError> {
    if ds.is_empty() {
        return Err(EngineError::EmptyDataset);
    }
    check_dims(ds, model.feature_dim)?;
    let ctxs = contexts(ds, &model.config);
    Ok(accuracy_over(&model.params, &model.config, &ctxs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Activation, Arch};
    use crate::graph::{gen_synthetic, SyntheticSpec};

    fn tiny_dataset(seed: u64) -> Dataset {
        gen_synthetic(&SyntheticSpec::new(24, 2, (4, 7), vec![0.15, 0.5], 3, seed)).unwrap()
    }

    #[test]
    fn zero_epochs_returns_initial_model_with_empty_history() {
        let ds = tiny_dataset(3);
        let cfg = ModelConfig::new(Arch::Gcn).with_hidden_dim(8);
        let model = train(&cfg, &TrainConfig::new(0, 0.1, 5), &ds, None).unwrap();
        assert!(model.history.is_empty());
        // balanced two-class data: an untrained model stays near chance
        let acc = evaluate_accuracy(&model, &ds).unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_dataset(4);
        let cfg = ModelConfig::new(Arch::Gin).with_hidden_dim(8);
        let tcfg = TrainConfig::new(20, 0.05, 11);
        let a = train(&cfg, &tcfg, &ds, None).unwrap();
        let b = train(&cfg, &tcfg, &ds, None).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn loss_is_nonincreasing_for_small_learning_rate() {
        let ds = tiny_dataset(5);
        for arch in Arch::ALL {
            let cfg = ModelConfig::new(arch).with_hidden_dim(8);
            let model = train(&cfg, &TrainConfig::new(40, 1e-3, 2), &ds, None).unwrap();
            for pair in model.history.windows(2) {
                assert!(
                    pair[1].train_loss <= pair[0].train_loss + 1e-6,
                    "{arch:?}: loss rose from {} to {}",
                    pair[0].train_loss,
                    pair[1].train_loss
                );
            }
        }
    }

    #[test]
    fn history_tracks_test_accuracy_when_requested() {
        let ds = tiny_dataset(6);
        let (train_half, test_half) =
            crate::graph::split_dataset(&ds, crate::graph::SplitSpec::new(0.5, 1)).unwrap();
        let cfg = ModelConfig::new(Arch::Mlp).with_hidden_dim(8);
        let model = train(&cfg, &TrainConfig::new(5, 0.05, 3), &train_half, Some(&test_half))
            .unwrap();
        assert_eq!(model.history.len(), 5);
        assert!(model.history.iter().all(|e| e.test_acc.is_some()));
    }

    #[test]
    fn uniform_posterior_accuracy_follows_tie_break() {
        // identity activation and zeroed output leave a uniform posterior;
        // the tie-break picks class 0, so accuracy equals the class-0 share
        let ds = tiny_dataset(7);
        let cfg = ModelConfig::new(Arch::Mlp)
            .with_hidden_dim(4)
            .with_activation(Activation::Identity);
        let mut model = train(&cfg, &TrainConfig::new(0, 0.1, 9), &ds, None).unwrap();
        let zeros = vec![0.0; model.params.flatten().len()];
        model.params.assign_from_flat(&zeros);
        let share0 = ds.graphs().iter().filter(|g| g.label() == 0).count() as f64
            / ds.len() as f64;
        let acc = evaluate_accuracy(&model, &ds).unwrap();
        assert!((acc - share0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ds = tiny_dataset(8);
        let cfg = ModelConfig::new(Arch::Gcn).with_hidden_dim(4);
        let model = train(&cfg, &TrainConfig::new(0, 0.1, 1), &ds, None).unwrap();
        let other = gen_synthetic(&SyntheticSpec::new(4, 2, (3, 4), vec![0.2, 0.2], 5, 1)).unwrap();
        assert!(matches!(
            evaluate_accuracy(&model, &other),
            Err(EngineError::FeatureDimMismatch { .. })
        ));
    }
}
