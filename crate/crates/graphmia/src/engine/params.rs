//! Parameter containers shared by the forward pass, the trainer, and the
//! gradient checker. Gradients reuse the same structure as the parameters.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Arch, EngineError, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct GatHead {
    pub w: Array2<f64>,
    pub a_src: Array1<f64>,
    pub a_dst: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum LayerParams {
    /// One weight matrix: GCN, residual deep GCN, MLP, and SAGE (where the
    /// matrix acts on the concatenation `[h || mean_nbr h]`).
    Dense { w: Array2<f64> },
    /// GIN: a one-hidden-layer MLP with ReLU, plus the aggregation epsilon.
    Gin {
        w1: Array2<f64>,
        b1: Array1<f64>,
        w2: Array2<f64>,
        b2: Array1<f64>,
        eps: f64,
    },
    Gat { heads: Vec<GatHead> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct ModelParams {
    pub layers: Vec<LayerParams>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Array2::zeros((rows, cols));
    for x in m.iter_mut() {
        *x = rng.random_range(-s..s);
    }
    m
}

fn glorot_vec(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    let s = (6.0 / (len + 1) as f64).sqrt();
    let mut v = Array1::zeros(len);
    for x in v.iter_mut() {
        *x = rng.random_range(-s..s);
    }
    v
}

impl ModelParams {
    /// Seeded initialization: weights from uniform(-s, s) with
    /// `s = sqrt(6/(fan_in + fan_out))`, biases zero, epsilon from config.
    pub fn init(
        cfg: &ModelConfig,
        feature_dim: usize,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        if feature_dim == 0 {
            return Err(EngineError::InvalidConfig("feature_dim must be >= 1".into()));
        }
        if num_classes == 0 {
            return Err(EngineError::InvalidConfig("num_classes must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = cfg.hidden_dim;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let in_dim = if l == 0 { feature_dim } else { hidden };
            let layer = match cfg.arch {
                Arch::Gcn | Arch::DeepGcn | Arch::Mlp => LayerParams::Dense {
                    w: glorot(&mut rng, in_dim, hidden),
                },
                Arch::SageMean => LayerParams::Dense {
                    w: glorot(&mut rng, 2 * in_dim, hidden),
                },
                Arch::Gin => LayerParams::Gin {
                    w1: glorot(&mut rng, in_dim, hidden),
                    b1: Array1::zeros(hidden),
                    w2: glorot(&mut rng, hidden, hidden),
                    b2: Array1::zeros(hidden),
                    eps: cfg.gin_epsilon,
                },
                Arch::Gat => {
                    let head_dim = hidden / cfg.attention_heads;
                    let heads = (0..cfg.attention_heads)
                        .map(|_| GatHead {
                            w: glorot(&mut rng, in_dim, head_dim),
                            a_src: glorot_vec(&mut rng, head_dim),
                            a_dst: glorot_vec(&mut rng, head_dim),
                        })
                        .collect();
                    LayerParams::Gat { heads }
                }
            };
            layers.push(layer);
        }
        let out_w = glorot(&mut rng, hidden, num_classes);
        let out_b = Array1::zeros(num_classes);
        Ok(Self {
            layers,
            out_w,
            out_b,
        })
    }

    /// Same structure, all entries zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                LayerParams::Dense { w } => LayerParams::Dense {
                    w: Array2::zeros(w.raw_dim()),
                },
                LayerParams::Gin { w1, b1, w2, b2, .. } => LayerParams::Gin {
                    w1: Array2::zeros(w1.raw_dim()),
                    b1: Array1::zeros(b1.raw_dim()),
                    w2: Array2::zeros(w2.raw_dim()),
                    b2: Array1::zeros(b2.raw_dim()),
                    eps: 0.0,
                },
                LayerParams::Gat { heads } => LayerParams::Gat {
                    heads: heads
                        .iter()
                        .map(|h| GatHead {
                            w: Array2::zeros(h.w.raw_dim()),
                            a_src: Array1::zeros(h.a_src.raw_dim()),
                            a_dst: Array1::zeros(h.a_dst.raw_dim()),
                        })
                        .collect(),
                },
            })
            .collect();
        Self {
            layers,
            out_w: Array2::zeros(self.out_w.raw_dim()),
            out_b: Array1::zeros(self.out_b.raw_dim()),
        }
    }

    /// Gradient-descent step `p <- p - lr * g`. The GIN epsilon moves only
    /// when `update_eps` is set.
    pub fn step(&mut self, grads: &Self, lr: f64, update_eps: bool) {
        for (layer, glayer) in self.layers.iter_mut().zip(&grads.layers) {
            match (layer, glayer) {
                (LayerParams::Dense { w }, LayerParams::Dense { w: gw }) => {
                    w.scaled_add(-lr, gw);
                }
                (
                    LayerParams::Gin { w1, b1, w2, b2, eps },
                    LayerParams::Gin {
                        w1: g1,
                        b1: gb1,
                        w2: g2,
                        b2: gb2,
                        eps: geps,
                    },
                ) => {
                    w1.scaled_add(-lr, g1);
                    b1.scaled_add(-lr, gb1);
                    w2.scaled_add(-lr, g2);
                    b2.scaled_add(-lr, gb2);
                    if update_eps {
                        *eps -= lr * geps;
                    }
                }
                (LayerParams::Gat { heads }, LayerParams::Gat { heads: gheads }) => {
                    for (h, gh) in heads.iter_mut().zip(gheads) {
                        h.w.scaled_add(-lr, &gh.w);
                        h.a_src.scaled_add(-lr, &gh.a_src);
                        h.a_dst.scaled_add(-lr, &gh.a_dst);
                    }
                }
                _ => unreachable!("parameter and gradient structures always match"),
            }
        }
        self.out_w.scaled_add(-lr, &grads.out_w);
        self.out_b.scaled_add(-lr, &grads.out_b);
    }

    /// Canonical flattening: layer order, then field order within a layer
    /// (GIN's epsilon occupies one slot), then the output affine map.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerParams::Dense { w } => out.extend(w.iter()),
                LayerParams::Gin { w1, b1, w2, b2, eps } => {
                    out.extend(w1.iter());
                    out.extend(b1.iter());
                    out.extend(w2.iter());
                    out.extend(b2.iter());
                    out.push(*eps);
                }
                LayerParams::Gat { heads } => {
                    for h in heads {
                        out.extend(h.w.iter());
                        out.extend(h.a_src.iter());
                        out.extend(h.a_dst.iter());
                    }
                }
            }
        }
        out.extend(self.out_w.iter());
        out.extend(self.out_b.iter());
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("flat vector matches parameter count");
        for layer in &mut self.layers {
            match layer {
                LayerParams::Dense { w } => w.iter_mut().for_each(|x| *x = next()),
                LayerParams::Gin { w1, b1, w2, b2, eps } => {
                    w1.iter_mut().for_each(|x| *x = next());
                    b1.iter_mut().for_each(|x| *x = next());
                    w2.iter_mut().for_each(|x| *x = next());
                    b2.iter_mut().for_each(|x| *x = next());
                    *eps = next();
                }
                LayerParams::Gat { heads } => {
                    for h in heads {
                        h.w.iter_mut().for_each(|x| *x = next());
                        h.a_src.iter_mut().for_each(|x| *x = next());
                        h.a_dst.iter_mut().for_each(|x| *x = next());
                    }
                }
            }
        }
        self.out_w.iter_mut().for_each(|x| *x = next());
        self.out_b.iter_mut().for_each(|x| *x = next());
        assert!(it.next().is_none(), "flat vector matches parameter count");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ModelConfig;

    #[test]
    fn init_is_deterministic() {
        let cfg = ModelConfig::new(Arch::Gat).with_hidden_dim(8);
        let a = ModelParams::init(&cfg, 3, 2, 42).unwrap();
        let b = ModelParams::init(&cfg, 3, 2, 42).unwrap();
        assert_eq!(a, b);
        let c = ModelParams::init(&cfg, 3, 2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn flatten_roundtrip_covers_every_arch() {
        for arch in Arch::ALL {
            let cfg = ModelConfig::new(arch).with_hidden_dim(6).with_layers(3);
            let p = ModelParams::init(&cfg, 4, 3, 7).unwrap();
            let flat = p.flatten();
            let mut q = p.zeros_like();
            q.assign_from_flat(&flat);
            assert_eq!(p, q, "{arch:?}");
        }
    }

    #[test]
    fn step_moves_against_gradient() {
        let cfg = ModelConfig::new(Arch::Gcn).with_hidden_dim(4);
        let mut p = ModelParams::init(&cfg, 2, 2, 1).unwrap();
        let before = p.flatten();
        let mut g = p.zeros_like();
        let ones = vec![1.0; before.len()];
        g.assign_from_flat(&ones);
        p.step(&g, 0.5, true);
        let after = p.flatten();
        for (b, a) in before.iter().zip(&after) {
            assert!((a - (b - 0.5)).abs() < 1e-12);
        }
    }
}
