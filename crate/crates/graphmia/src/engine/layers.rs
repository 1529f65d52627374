//! Per-architecture layer math: forward passes with caches, and the matching
//! analytic backward passes. One shared readout follows the layer stack:
//! mean pooling over nodes, an affine map to class scores, and a softmax.

use ndarray::{Array1, Array2, Axis};

use super::params::{LayerParams, ModelParams};
use super::{Activation, Arch, ModelConfig};
use crate::graph::Graph;

/// Slope of the LeakyReLU inside the GAT attention score.
const GAT_LEAKY_SLOPE: f64 = 0.2;

#[inline]
fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        GAT_LEAKY_SLOPE * x
    }
}

#[inline]
fn leaky_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        GAT_LEAKY_SLOPE
    }
}

/// Symmetric normalization with self-loops:
/// `D^(-1/2) (A + I) D^(-1/2)` where `D` is the degree matrix of `A + I`.
pub fn normalize_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.num_nodes();
    let mut a = Array2::<f64>::eye(n);
    for &(u, v) in g.edges() {
        a[[u, v]] = 1.0;
        a[[v, u]] = 1.0;
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| a.row(i).sum().sqrt().recip())
        .collect();
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    a
}

/// Per-graph structures precomputed once per (graph, architecture).
pub(crate) struct GraphContext {
    pub x: Array2<f64>,
    pub label: usize,
    /// GCN family: normalized adjacency with self-loops.
    a_hat: Option<Array2<f64>>,
    /// GIN: plain symmetric adjacency (sum aggregation, no self-loops).
    a_sum: Option<Array2<f64>>,
    /// SAGE: row-normalized adjacency; all-zero row for isolated nodes.
    a_mean: Option<Array2<f64>>,
    /// GAT: adjacency lists.
    neighbors: Option<Vec<Vec<usize>>>,
}

impl GraphContext {
    pub fn new(g: &Graph, arch: Arch) -> Self {
        let n = g.num_nodes();
        let mut ctx = Self {
            x: g.node_features().clone(),
            label: g.label(),
            a_hat: None,
            a_sum: None,
            a_mean: None,
            neighbors: None,
        };
        match arch {
            Arch::Gcn | Arch::DeepGcn => ctx.a_hat = Some(normalize_adjacency(g)),
            Arch::Gin => {
                let mut a = Array2::zeros((n, n));
                for &(u, v) in g.edges() {
                    a[[u, v]] = 1.0;
                    a[[v, u]] = 1.0;
                }
                ctx.a_sum = Some(a);
            }
            Arch::SageMean => {
                let mut a = Array2::zeros((n, n));
                for &(u, v) in g.edges() {
                    a[[u, v]] = 1.0;
                    a[[v, u]] = 1.0;
                }
                for mut row in a.rows_mut() {
                    let deg = row.sum();
                    if deg > 0.0 {
                        row.mapv_inplace(|x| x / deg);
                    }
                }
                ctx.a_mean = Some(a);
            }
            Arch::Gat => ctx.neighbors = Some(g.neighbor_lists()),
            Arch::Mlp => {}
        }
        ctx
    }
}

pub(crate) struct GatHeadCache {
    z: Array2<f64>,
    /// Raw attention scores (before the LeakyReLU), per node per neighbor.
    pre: Vec<Vec<f64>>,
    /// Softmax-normalized attention, aligned with the neighbor lists.
    alpha: Vec<Vec<f64>>,
}

pub(crate) enum LayerCache {
    Dense {
        /// Aggregated layer input: `norm_adj . H` (GCN family), `H` itself
        /// (MLP), or `[H || mean_nbr H]` (SAGE).
        m: Array2<f64>,
        /// Pre-activation `m . W`.
        s: Array2<f64>,
        /// Residual identity skip applied (deep GCN with matching widths).
        skip: bool,
    },
    Gin {
        h_in: Array2<f64>,
        xagg: Array2<f64>,
        u: Array2<f64>,
        r: Array2<f64>,
    },
    Gat {
        h_in: Array2<f64>,
        heads: Vec<GatHeadCache>,
        /// Concatenated pre-activation aggregate.
        agg: Array2<f64>,
    },
}

pub(crate) struct Trace {
    pub caches: Vec<LayerCache>,
    pub num_nodes: usize,
    pub pooled: Array1<f64>,
    pub scores: Array1<f64>,
    pub probs: Array1<f64>,
}

fn apply_act(s: &Array2<f64>, act: Activation) -> Array2<f64> {
    s.mapv(|x| act.apply(x))
}

fn act_prime_mul(dout: &Array2<f64>, s: &Array2<f64>, act: Activation) -> Array2<f64> {
    let mut ds = dout.clone();
    ds.zip_mut_with(s, |d, &pre| *d *= act.prime(pre));
    ds
}

fn layer_forward(
    layer: &LayerParams,
    cfg: &ModelConfig,
    ctx: &GraphContext,
    h: &Array2<f64>,
) -> (Array2<f64>, LayerCache) {
    match layer {
        LayerParams::Dense { w } => match cfg.arch {
            Arch::Gcn | Arch::DeepGcn => {
                let a_hat = ctx.a_hat.as_ref().expect("context built for arch");
                let m = a_hat.dot(h);
                let s = m.dot(w);
                let skip = cfg.arch == Arch::DeepGcn && h.ncols() == s.ncols();
                let mut out = apply_act(&s, cfg.activation);
                if skip {
                    out += h;
                }
                (out, LayerCache::Dense { m, s, skip })
            }
            Arch::Mlp => {
                let m = h.clone();
                let s = m.dot(w);
                (apply_act(&s, cfg.activation), LayerCache::Dense { m, s, skip: false })
            }
            Arch::SageMean => {
                let a_mean = ctx.a_mean.as_ref().expect("context built for arch");
                let nbr = a_mean.dot(h);
                let mut m = Array2::zeros((h.nrows(), 2 * h.ncols()));
                m.slice_mut(ndarray::s![.., ..h.ncols()]).assign(h);
                m.slice_mut(ndarray::s![.., h.ncols()..]).assign(&nbr);
                let s = m.dot(w);
                (apply_act(&s, cfg.activation), LayerCache::Dense { m, s, skip: false })
            }
            _ => unreachable!("dense params only built for dense archs"),
        },
        LayerParams::Gin { w1, b1, w2, b2, eps } => {
            let a_sum = ctx.a_sum.as_ref().expect("context built for arch");
            let mut xagg = a_sum.dot(h);
            xagg.scaled_add(1.0 + eps, h);
            let u = xagg.dot(w1) + b1;
            let r = u.mapv(|x| x.max(0.0));
            let out = r.dot(w2) + b2;
            (
                out,
                LayerCache::Gin {
                    h_in: h.clone(),
                    xagg,
                    u,
                    r,
                },
            )
        }
        LayerParams::Gat { heads } => {
            let neighbors = ctx.neighbors.as_ref().expect("context built for arch");
            let n = h.nrows();
            let head_dim = cfg.hidden_dim / cfg.attention_heads;
            let mut agg = Array2::zeros((n, cfg.hidden_dim));
            let mut head_caches = Vec::with_capacity(heads.len());
            for (hd, head) in heads.iter().enumerate() {
                let z = h.dot(&head.w);
                let s_src: Vec<f64> = (0..n).map(|i| z.row(i).dot(&head.a_src)).collect();
                let s_dst: Vec<f64> = (0..n).map(|i| z.row(i).dot(&head.a_dst)).collect();
                let mut pre = Vec::with_capacity(n);
                let mut alpha = Vec::with_capacity(n);
                for i in 0..n {
                    let nbrs = &neighbors[i];
                    let pre_i: Vec<f64> =
                        nbrs.iter().map(|&j| s_src[i] + s_dst[j]).collect();
                    let e: Vec<f64> = pre_i.iter().map(|&p| leaky(p)).collect();
                    // softmax over the neighbor set; empty set contributes zero
                    let alpha_i = if e.is_empty() {
                        Vec::new()
                    } else {
                        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let ex: Vec<f64> = e.iter().map(|&v| (v - m).exp()).collect();
                        let z_sum: f64 = ex.iter().sum();
                        ex.iter().map(|&v| v / z_sum).collect()
                    };
                    let cols = hd * head_dim..(hd + 1) * head_dim;
                    let mut agg_row = agg.row_mut(i);
                    for (idx, &j) in nbrs.iter().enumerate() {
                        let zj = z.row(j);
                        for (c, col) in cols.clone().enumerate() {
                            agg_row[col] += alpha_i[idx] * zj[c];
                        }
                    }
                    pre.push(pre_i);
                    alpha.push(alpha_i);
                }
                head_caches.push(GatHeadCache { z, pre, alpha });
            }
            let out = apply_act(&agg, cfg.activation);
            (
                out,
                LayerCache::Gat {
                    h_in: h.clone(),
                    heads: head_caches,
                    agg,
                },
            )
        }
    }
}

/// Backward through one layer: accumulates parameter gradients into `glayer`
/// and returns the gradient with respect to the layer input.
fn layer_backward(
    layer: &LayerParams,
    glayer: &mut LayerParams,
    cache: &LayerCache,
    cfg: &ModelConfig,
    ctx: &GraphContext,
    dout: &Array2<f64>,
) -> Array2<f64> {
    match (layer, glayer, cache) {
        (
            LayerParams::Dense { w },
            LayerParams::Dense { w: gw },
            LayerCache::Dense { m, s, skip },
        ) => {
            let ds = act_prime_mul(dout, s, cfg.activation);
            *gw += &m.t().dot(&ds);
            let dm = ds.dot(&w.t());
            let mut dh = match cfg.arch {
                Arch::Gcn | Arch::DeepGcn => {
                    let a_hat = ctx.a_hat.as_ref().expect("context built for arch");
                    // norm_adj is symmetric, so its transpose is itself
                    a_hat.dot(&dm)
                }
                Arch::Mlp => dm,
                Arch::SageMean => {
                    let a_mean = ctx.a_mean.as_ref().expect("context built for arch");
                    let di = dm.ncols() / 2;
                    let left = dm.slice(ndarray::s![.., ..di]);
                    let right = dm.slice(ndarray::s![.., di..]);
                    &left + &a_mean.t().dot(&right)
                }
                _ => unreachable!(),
            };
            if *skip {
                dh += dout;
            }
            dh
        }
        (
            LayerParams::Gin { w1, w2, eps, .. },
            LayerParams::Gin {
                w1: gw1,
                b1: gb1,
                w2: gw2,
                b2: gb2,
                eps: geps,
            },
            LayerCache::Gin { h_in, xagg, u, r },
        ) => {
            let a_sum = ctx.a_sum.as_ref().expect("context built for arch");
            *gw2 += &r.t().dot(dout);
            *gb2 += &dout.sum_axis(Axis(0));
            let dr = dout.dot(&w2.t());
            let mut du = dr;
            du.zip_mut_with(u, |d, &pre| {
                if pre <= 0.0 {
                    *d = 0.0;
                }
            });
            *gw1 += &xagg.t().dot(&du);
            *gb1 += &du.sum_axis(Axis(0));
            let dx = du.dot(&w1.t());
            *geps += dx.iter().zip(h_in.iter()).map(|(a, b)| a * b).sum::<f64>();
            let mut dh = a_sum.dot(&dx);
            dh.scaled_add(1.0 + eps, &dx);
            dh
        }
        (
            LayerParams::Gat { heads },
            LayerParams::Gat { heads: gheads },
            LayerCache::Gat { h_in, heads: hcaches, agg },
        ) => {
            let neighbors = ctx.neighbors.as_ref().expect("context built for arch");
            let n = h_in.nrows();
            let head_dim = cfg.hidden_dim / cfg.attention_heads;
            let dagg = act_prime_mul(dout, agg, cfg.activation);
            let mut dh = Array2::zeros(h_in.raw_dim());
            for (hd, ((head, ghead), hc)) in
                heads.iter().zip(gheads.iter_mut()).zip(hcaches).enumerate()
            {
                let da = dagg.slice(ndarray::s![.., hd * head_dim..(hd + 1) * head_dim]);
                let mut dz = Array2::<f64>::zeros(hc.z.raw_dim());
                for i in 0..n {
                    let nbrs = &neighbors[i];
                    if nbrs.is_empty() {
                        continue;
                    }
                    let da_i = da.row(i);
                    let alpha_i = &hc.alpha[i];
                    let mut dalpha = vec![0.0; nbrs.len()];
                    for (idx, &j) in nbrs.iter().enumerate() {
                        let mut dz_j = dz.row_mut(j);
                        let z_j = hc.z.row(j);
                        let mut dot = 0.0;
                        for c in 0..head_dim {
                            dz_j[c] += alpha_i[idx] * da_i[c];
                            dot += da_i[c] * z_j[c];
                        }
                        dalpha[idx] = dot;
                    }
                    let weighted: f64 = alpha_i
                        .iter()
                        .zip(&dalpha)
                        .map(|(a, d)| a * d)
                        .sum();
                    for (idx, &j) in nbrs.iter().enumerate() {
                        let de = alpha_i[idx] * (dalpha[idx] - weighted);
                        let dpre = de * leaky_prime(hc.pre[i][idx]);
                        let z_i = hc.z.row(i);
                        let z_j = hc.z.row(j);
                        for c in 0..head_dim {
                            ghead.a_src[c] += dpre * z_i[c];
                            ghead.a_dst[c] += dpre * z_j[c];
                        }
                        let mut dz_i = dz.row_mut(i);
                        for c in 0..head_dim {
                            dz_i[c] += dpre * head.a_src[c];
                        }
                        let mut dz_j = dz.row_mut(j);
                        for c in 0..head_dim {
                            dz_j[c] += dpre * head.a_dst[c];
                        }
                    }
                }
                ghead.w += &h_in.t().dot(&dz);
                dh += &dz.dot(&head.w.t());
            }
            dh
        }
        _ => unreachable!("parameter, gradient, and cache structures always match"),
    }
}

fn softmax(scores: &Array1<f64>) -> Array1<f64> {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex = scores.mapv(|s| (s - m).exp());
    let sum = ex.sum();
    ex / sum
}

/// Full forward pass for one graph, keeping every cache backward needs.
pub(crate) fn forward_trace(params: &ModelParams, cfg: &ModelConfig, ctx: &GraphContext) -> Trace {
    let mut h = ctx.x.clone();
    let mut caches = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let (next, cache) = layer_forward(layer, cfg, ctx, &h);
        caches.push(cache);
        h = next;
    }
    let num_nodes = h.nrows();
    let pooled = h.mean_axis(Axis(0)).expect("graphs have at least one node");
    let scores = pooled.dot(&params.out_w) + &params.out_b;
    let probs = softmax(&scores);
    Trace {
        caches,
        num_nodes,
        pooled,
        scores,
        probs,
    }
}

/// Cross-entropy of the trace against the context's label.
pub(crate) fn trace_loss(trace: &Trace, label: usize) -> f64 {
    let m = trace.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = trace.scores.mapv(|s| (s - m).exp()).sum().ln() + m;
    lse - trace.scores[label]
}

/// Backward pass for one graph: accumulates `scale` times the gradient of
/// its cross-entropy into `grads`.
pub(crate) fn backward_trace(
    params: &ModelParams,
    cfg: &ModelConfig,
    ctx: &GraphContext,
    trace: &Trace,
    scale: f64,
    grads: &mut ModelParams,
) {
    let mut dscores = trace.probs.clone();
    dscores[ctx.label] -= 1.0;
    dscores *= scale;

    let pooled_col = trace.pooled.view().insert_axis(Axis(1));
    let dscores_row = dscores.view().insert_axis(Axis(0));
    grads.out_w += &pooled_col.dot(&dscores_row);
    grads.out_b += &dscores;

    let dpooled = params.out_w.dot(&dscores);
    let n = trace.num_nodes;
    let drow = &dpooled / n as f64;
    let mut dh = Array2::zeros((n, dpooled.len()));
    for mut row in dh.rows_mut() {
        row.assign(&drow);
    }

    for ((layer, glayer), cache) in params
        .layers
        .iter()
        .zip(grads.layers.iter_mut())
        .zip(&trace.caches)
        .rev()
    {
        dh = layer_backward(layer, glayer, cache, cfg, ctx, &dh);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn normalize_adjacency_single_node() {
        let g = Graph::new(Array2::ones((1, 1)), vec![], 0).unwrap();
        let a = normalize_adjacency(&g);
        assert_eq!(a, arr2(&[[1.0]]));
    }

    #[test]
    fn normalize_adjacency_two_nodes_one_edge() {
        let g = Graph::new(Array2::ones((2, 1)), vec![(0, 1)], 0).unwrap();
        let a = normalize_adjacency(&g);
        for &v in a.iter() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_adjacency_is_symmetric() {
        let g = Graph::new(
            Array2::ones((5, 2)),
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)],
            0,
        )
        .unwrap();
        let a = normalize_adjacency(&g);
        for i in 0..5 {
            for j in 0..5 {
                assert!((a[[i, j]] - a[[j, i]]).abs() < 1e-15);
            }
        }
    }
}
