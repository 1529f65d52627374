//! Graph and dataset data model.
//!
//! A [`Graph`] is one classification record: a node-feature matrix, an
//! undirected edge list, and a class label. A [`Dataset`] is a named
//! collection of graphs sharing one feature dimension and one label range.
//! Datasets are immutable after construction and safe to share across
//! concurrent experiment runs.

mod synthetic;
mod tu;

pub use synthetic::{gen_synthetic, SyntheticSpec};
pub use tu::{parse_tu_dataset, write_tu_dataset};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("edge ({u}, {v}) references node outside 0..{num_nodes}")]
    EdgeOutOfRange { u: usize, v: usize, num_nodes: usize },
    #[error("self-loop on node {node}; self-loops are added by normalization, not stored")]
    SelfLoop { node: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("graph label {label} outside 0..{num_classes}")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    FeatureDimMismatch { expected: usize, found: usize },
    #[error("split ratio {ratio} outside the open interval (0, 1)")]
    InvalidRatio { ratio: f64 },
    #[error("nodes range ({min}, {max}) is empty or starts at zero")]
    InvalidNodeRange { min: usize, max: usize },
    #[error("edge probability {p} for class {class} outside [0, 1]")]
    EdgeProbOutOfRange { class: usize, p: f64 },
    #[error("expected {expected} edge probabilities (one per class), found {found}")]
    EdgeProbCount { expected: usize, found: usize },
    #[error("synthetic spec invalid: {0}")]
    InvalidSpec(String),
    #[error("missing mandatory file {path}")]
    MissingFile { path: String },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One classification record: node features, undirected edges, class label.
///
/// Edges are stored canonically as `(u, v)` with `u < v`, deduplicated.
/// Self-loops are rejected; normalization adds them where an architecture
/// needs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    node_features: Array2<f64>,
    edges: Vec<(usize, usize)>,
    label: usize,
}

impl Graph {
    pub fn new(
        node_features: Array2<f64>,
        edges: Vec<(usize, usize)>,
        label: usize,
    ) -> Result<Self, GraphError> {
        let num_nodes = node_features.nrows();
        if num_nodes == 0 {
            return Err(GraphError::EmptyGraph);
        }
        let mut canonical: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::EdgeOutOfRange { u, v, num_nodes });
            }
            if u == v {
                return Err(GraphError::SelfLoop { node: u });
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        Ok(Self {
            node_features,
            edges: canonical,
            label,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.ncols()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_features(&self) -> &Array2<f64> {
        &self.node_features
    }

    /// Canonical undirected edge list, `(u, v)` with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// 2|E| / (n(n-1)); zero for a single-node graph by convention.
    pub fn density(&self) -> f64 {
        let n = self.num_nodes();
        if n < 2 {
            return 0.0;
        }
        2.0 * self.num_edges() as f64 / (n as f64 * (n - 1) as f64)
    }

    /// Adjacency lists (no self-loops).
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.num_nodes()];
        for &(u, v) in &self.edges {
            nbrs[u].push(v);
            nbrs[v].push(u);
        }
        nbrs
    }

    /// Relabel nodes by `perm`, where node `i` becomes `perm[i]`.
    ///
    /// Used to check permutation invariance of model outputs.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, GraphError> {
        let n = self.num_nodes();
        if perm.len() != n {
            return Err(GraphError::InvalidSpec(format!(
                "permutation length {} does not match {} nodes",
                perm.len(),
                n
            )));
        }
        let mut features = Array2::zeros((n, self.feature_dim()));
        for i in 0..n {
            features.row_mut(perm[i]).assign(&self.node_features.row(i));
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Self::new(features, edges, self.label)
    }
}

/// A named set of graphs with a shared label range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    graphs: Vec<Graph>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<Graph>,
        num_classes: usize,
    ) -> Result<Self, GraphError> {
        if graphs.is_empty() {
            return Err(GraphError::EmptyDataset);
        }
        let dim = graphs[0].feature_dim();
        for g in &graphs {
            if g.label >= num_classes {
                return Err(GraphError::LabelOutOfRange {
                    label: g.label,
                    num_classes,
                });
            }
            if g.feature_dim() != dim {
                return Err(GraphError::FeatureDimMismatch {
                    expected: dim,
                    found: g.feature_dim(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            graphs,
            num_classes,
        })
    }

    /// Constructor for split halves, which may be empty in degenerate
    /// configurations (tiny datasets or extreme ratios).
    pub(crate) fn from_split(name: String, graphs: Vec<Graph>, num_classes: usize) -> Self {
        Self {
            name,
            graphs,
            num_classes,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    /// Feature dimension shared by every graph; zero only for empty splits.
    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, Graph::feature_dim)
    }
}

/// Summary statistics of a dataset. Edges are counted undirected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub graph_count: usize,
    pub class_count: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub avg_density: f64,
    pub avg_degree: f64,
}

/// Deterministic split: same `(dataset, spec)` always yields the same parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratio: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratio: f64, seed: u64) -> Self {
        Self { ratio, seed }
    }
}

/// Partition `ds` into two disjoint parts whose union is the input.
///
/// The first part receives `round(ratio * n)` graphs; the shuffle is driven
/// solely by `spec.seed`. Parts may be empty when the rounded size hits 0 or
/// `n` (single-graph datasets, extreme ratios).
pub fn split_dataset(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset), GraphError> {
    if ds.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(GraphError::InvalidRatio { ratio: spec.ratio });
    }
    let n = ds.len();
    let first = (spec.ratio * n as f64).round() as usize;
    let first = first.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);
    let pick = |ids: &[usize]| -> Vec<Graph> { ids.iter().map(|&i| ds.graphs[i].clone()).collect() };
    let a = Dataset::from_split(ds.name.clone(), pick(&order[..first]), ds.num_classes);
    let b = Dataset::from_split(ds.name.clone(), pick(&order[first..]), ds.num_classes);
    Ok((a, b))
}

/// Per-graph averages over the dataset. Errors on an empty dataset.
pub fn graph_stats(ds: &Dataset) -> Result<DatasetStats, GraphError> {
    if ds.is_empty() {
        return Err(GraphError::EmptyDataset);
    }
    let n = ds.len() as f64;
    let mut nodes = 0.0;
    let mut edges = 0.0;
    let mut density = 0.0;
    let mut degree = 0.0;
    for g in ds.graphs() {
        nodes += g.num_nodes() as f64;
        edges += g.num_edges() as f64;
        density += g.density();
        degree += 2.0 * g.num_edges() as f64 / g.num_nodes() as f64;
    }
    Ok(DatasetStats {
        graph_count: ds.len(),
        class_count: ds.num_classes,
        avg_nodes: nodes / n,
        avg_edges: edges / n,
        avg_density: density / n,
        avg_degree: degree / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    pub(crate) fn triangle(label: usize) -> Graph {
        let feats = arr2(&[[1.0], [1.0], [1.0]]);
        Graph::new(feats, vec![(0, 1), (1, 2), (0, 2)], label).unwrap()
    }

    fn line(num_nodes: usize, label: usize) -> Graph {
        let feats = Array2::ones((num_nodes, 1));
        let edges = (0..num_nodes - 1).map(|i| (i, i + 1)).collect();
        Graph::new(feats, edges, label).unwrap()
    }

    #[test]
    fn edges_are_canonical_and_deduped() {
        let feats = Array2::ones((3, 2));
        let g = Graph::new(feats, vec![(2, 0), (0, 2), (1, 0)], 0).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
    }

    #[test]
    fn rejects_self_loops_and_bad_endpoints() {
        let feats = Array2::ones((2, 1));
        assert!(matches!(
            Graph::new(feats.clone(), vec![(0, 0)], 0),
            Err(GraphError::SelfLoop { node: 0 })
        ));
        assert!(matches!(
            Graph::new(feats, vec![(0, 5)], 0),
            Err(GraphError::EdgeOutOfRange { .. })
        ));
    }

    #[test]
    fn density_of_triangle_is_one_and_singleton_is_zero() {
        assert_eq!(triangle(0).density(), 1.0);
        let g = Graph::new(Array2::ones((1, 1)), vec![], 0).unwrap();
        assert_eq!(g.density(), 0.0);
    }

    #[test]
    fn dataset_rejects_label_out_of_range_and_dim_mismatch() {
        let err = Dataset::new("d", vec![triangle(2)], 2);
        assert!(matches!(err, Err(GraphError::LabelOutOfRange { .. })));
        let other = Graph::new(Array2::ones((2, 3)), vec![(0, 1)], 0).unwrap();
        let err = Dataset::new("d", vec![triangle(0), other], 1);
        assert!(matches!(err, Err(GraphError::FeatureDimMismatch { .. })));
    }

    #[test]
    fn split_sizes_follow_rounding_rule() {
        let graphs: Vec<Graph> = (0..100).map(|i| triangle(i % 2)).collect();
        let ds = Dataset::new("even", graphs, 2).unwrap();
        let (a, b) = split_dataset(&ds, SplitSpec::new(0.5, 3)).unwrap();
        assert_eq!((a.len(), b.len()), (50, 50));

        // 1113 graphs at ratio 0.5: round(556.5) = 557.
        let graphs: Vec<Graph> = (0..1113).map(|i| triangle(i % 2)).collect();
        let ds = Dataset::new("big", graphs, 2).unwrap();
        let (a, b) = split_dataset(&ds, SplitSpec::new(0.5, 3)).unwrap();
        assert_eq!((a.len(), b.len()), (557, 556));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let graphs: Vec<Graph> = (2..40).map(|i| line(i, i % 3)).collect();
        let ds = Dataset::new("lines", graphs, 3).unwrap();
        let (a1, b1) = split_dataset(&ds, SplitSpec::new(0.3, 17)).unwrap();
        let (a2, b2) = split_dataset(&ds, SplitSpec::new(0.3, 17)).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);

        // node counts are unique here, so they identify graphs
        let mut seen: Vec<usize> = a1
            .graphs()
            .iter()
            .chain(b1.graphs())
            .map(Graph::num_nodes)
            .collect();
        seen.sort_unstable();
        let expected: Vec<usize> = (2..40).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn split_rejects_bad_ratio() {
        let ds = Dataset::new("d", vec![triangle(0)], 1).unwrap();
        for ratio in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                split_dataset(&ds, SplitSpec::new(ratio, 0)),
                Err(GraphError::InvalidRatio { .. })
            ));
        }
    }

    #[test]
    fn stats_of_single_triangle() {
        let ds = Dataset::new("tri", vec![triangle(0)], 1).unwrap();
        let s = graph_stats(&ds).unwrap();
        assert_eq!(s.graph_count, 1);
        assert_eq!(s.avg_nodes, 3.0);
        assert_eq!(s.avg_edges, 3.0);
        assert_eq!(s.avg_density, 1.0);
        assert_eq!(s.avg_degree, 2.0);
    }

    #[test]
    fn stats_of_isolated_node() {
        let g = Graph::new(Array2::ones((1, 1)), vec![], 0).unwrap();
        let ds = Dataset::new("iso", vec![g], 1).unwrap();
        let s = graph_stats(&ds).unwrap();
        assert_eq!(s.avg_edges, 0.0);
        assert_eq!(s.avg_density, 0.0);
    }

    #[test]
    fn permute_preserves_structure() {
        let g = line(4, 1);
        let p = g.permute(&[3, 1, 0, 2]).unwrap();
        assert_eq!(p.num_edges(), g.num_edges());
        assert_eq!(p.label(), 1);
        let mut degrees: Vec<usize> = p.neighbor_lists().iter().map(Vec::len).collect();
        degrees.sort_unstable();
        assert_eq!(degrees, vec![1, 1, 2, 2]);
    }
}
