//! Finite-difference validation of the analytic gradients.

use super::layers::{backward_trace, forward_trace, trace_loss, GraphContext};
use super::{EngineError, ModelConfig, ModelParams};
use crate::graph::Graph;

/// Compare the analytic gradient of one graph's cross-entropy against a
/// central finite difference, parameter by parameter.
///
/// The model is freshly initialized from `seed`. Returns the worst relative
/// error `|ga - gn| / max(1e-6, |ga|, |gn|)` over all parameters (the GIN
/// epsilon included).
pub fn grad_check(
    cfg: &ModelConfig,
    g: &Graph,
    num_classes: usize,
    eps: f64,
    seed: u64,
) -> Result<f64, EngineError> {
    if !(eps > 0.0) {
        return Err(EngineError::InvalidConfig("eps must be positive".into()));
    }
    let mut params = ModelParams::init(cfg, g.feature_dim(), num_classes, seed)?;
    let ctx = GraphContext::new(g, cfg.arch);

    let mut grads = params.zeros_like();
    let trace = forward_trace(&params, cfg, &ctx);
    backward_trace(&params, cfg, &ctx, &trace, 1.0, &mut grads);
    let analytic = grads.flatten();

    let base = params.flatten();
    let mut worst: f64 = 0.0;
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + eps;
        params.assign_from_flat(&probe);
        let up = trace_loss(&forward_trace(&params, cfg, &ctx), ctx.label);

        probe[i] = base[i] - eps;
        params.assign_from_flat(&probe);
        let down = trace_loss(&forward_trace(&params, cfg, &ctx), ctx.label);

        probe[i] = base[i];
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Activation, Arch};
    use crate::graph::{gen_synthetic, SyntheticSpec};

    fn random_graph(seed: u64) -> Graph {
        let ds = gen_synthetic(&SyntheticSpec::new(1, 1, (6, 6), vec![0.45], 3, seed)).unwrap();
        ds.graphs()[0].clone()
    }

    #[test]
    fn gcn_and_mlp_pass_gradient_check() {
        let g = random_graph(21);
        for arch in [Arch::Gcn, Arch::Mlp] {
            let cfg = ModelConfig::new(arch).with_hidden_dim(5);
            let err = grad_check(&cfg, &g, 2, 1e-5, 3).unwrap();
            assert!(err < 1e-4, "{arch:?}: relative error {err}");
        }
    }

    #[test]
    fn linear_single_layer_is_nearly_exact() {
        let g = random_graph(22);
        let cfg = ModelConfig::new(Arch::Mlp)
            .with_hidden_dim(4)
            .with_layers(1)
            .with_activation(Activation::Identity);
        let err = grad_check(&cfg, &g, 2, 1e-5, 4).unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn learnable_gin_epsilon_has_a_correct_gradient() {
        let g = random_graph(23);
        let mut cfg = ModelConfig::new(Arch::Gin).with_hidden_dim(5);
        cfg.gin_train_epsilon = true;
        cfg.gin_epsilon = 0.3;
        let err = grad_check(&cfg, &g, 2, 1e-5, 5).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn multi_head_gat_passes_gradient_check() {
        let g = random_graph(24);
        let mut cfg = ModelConfig::new(Arch::Gat).with_hidden_dim(6);
        cfg.attention_heads = 2;
        let err = grad_check(&cfg, &g, 3, 1e-5, 6).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn rejects_nonpositive_eps() {
        let g = random_graph(25);
        let cfg = ModelConfig::new(Arch::Gcn);
        assert!(grad_check(&cfg, &g, 2, 0.0, 1).is_err());
    }
}
