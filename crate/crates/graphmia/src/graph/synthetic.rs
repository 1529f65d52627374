//! Seeded synthetic datasets: class-balanced random graphs whose edge
//! probability depends on the class, with normal node features and an
//! optional class-dependent mean shift so classes stay learnable.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Graph, GraphError};

/// Recipe for [`gen_synthetic`]. `class_mean_shift * c` is added to feature 0
/// of every node in a class-`c` graph (default 0.5); set it to 0.0 to leave
/// the features uninformative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_graphs: usize,
    pub num_classes: usize,
    pub nodes_range: (usize, usize),
    pub edge_prob_per_class: Vec<f64>,
    pub feature_dim: usize,
    pub seed: u64,
    pub class_mean_shift: f64,
}

impl SyntheticSpec {
    pub fn new(
        num_graphs: usize,
        num_classes: usize,
        nodes_range: (usize, usize),
        edge_prob_per_class: Vec<f64>,
        feature_dim: usize,
        seed: u64,
    ) -> Self {
        Self {
            num_graphs,
            num_classes,
            nodes_range,
            edge_prob_per_class,
            feature_dim,
            seed,
            class_mean_shift: 0.5,
        }
    }

    pub fn with_class_mean_shift(mut self, shift: f64) -> Self {
        self.class_mean_shift = shift;
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.num_graphs == 0 {
            return Err(GraphError::InvalidSpec("num_graphs must be positive".into()));
        }
        if self.num_classes == 0 {
            return Err(GraphError::InvalidSpec("num_classes must be positive".into()));
        }
        if self.feature_dim == 0 {
            return Err(GraphError::InvalidSpec("feature_dim must be positive".into()));
        }
        let (min, max) = self.nodes_range;
        if min == 0 || min > max {
            return Err(GraphError::InvalidNodeRange { min, max });
        }
        if self.edge_prob_per_class.len() != self.num_classes {
            return Err(GraphError::EdgeProbCount {
                expected: self.num_classes,
                found: self.edge_prob_per_class.len(),
            });
        }
        for (class, &p) in self.edge_prob_per_class.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(GraphError::EdgeProbOutOfRange { class, p });
            }
        }
        Ok(())
    }
}

/// Generate a class-balanced random dataset, byte-identical for a fixed seed.
///
/// Graph `i` gets class `i % num_classes`; its node count is uniform over
/// `nodes_range` and each node pair is joined with the class's edge
/// probability. Node features are standard normal, with the class mean shift
/// applied to feature 0.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset, GraphError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (min_nodes, max_nodes) = spec.nodes_range;
    let mut graphs = Vec::with_capacity(spec.num_graphs);
    for i in 0..spec.num_graphs {
        let class = i % spec.num_classes;
        let p = spec.edge_prob_per_class[class];
        let n = rng.random_range(min_nodes..=max_nodes);
        let mut features = Array2::zeros((n, spec.feature_dim));
        for mut row in features.rows_mut() {
            for x in row.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            row[0] += spec.class_mean_shift * class as f64;
        }
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        graphs.push(Graph::new(features, edges, class)?);
    }
    Dataset::new(format!("synthetic-{}", spec.seed), graphs, spec.num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> SyntheticSpec {
        SyntheticSpec::new(200, 2, (6, 12), vec![0.1, 0.3], 4, 11)
    }

    #[test]
    fn classes_are_balanced_and_densities_ordered() {
        let ds = gen_synthetic(&base_spec()).unwrap();
        let count = |c: usize| ds.graphs().iter().filter(|g| g.label() == c).count();
        assert_eq!(count(0), 100);
        assert_eq!(count(1), 100);
        let mean_density = |c: usize| {
            let ds_c: Vec<f64> = ds
                .graphs()
                .iter()
                .filter(|g| g.label() == c)
                .map(Graph::density)
                .collect();
            ds_c.iter().sum::<f64>() / ds_c.len() as f64
        };
        assert!(mean_density(1) > mean_density(0));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = gen_synthetic(&base_spec()).unwrap();
        let b = gen_synthetic(&base_spec()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_edge_probability_yields_edgeless_graphs() {
        let spec = SyntheticSpec::new(10, 1, (3, 5), vec![0.0], 2, 5);
        let ds = gen_synthetic(&spec).unwrap();
        assert!(ds.graphs().iter().all(|g| g.num_edges() == 0));
    }

    #[test]
    fn invalid_specs_are_rejected()  {
        let mut s = base_spec();
        s.nodes_range = (5, 3);
        assert!(matches!(
            gen_synthetic(&s),
            Err(GraphError::InvalidNodeRange { .. })
        ));
        let mut s = base_spec();
        s.edge_prob_per_class = vec![0.1, 1.4];
        assert!(matches!(
            gen_synthetic(&s),
            Err(GraphError::EdgeProbOutOfRange { class: 1, .. })
        ));
        let mut s = base_spec();
        s.edge_prob_per_class = vec![0.1];
        assert!(matches!(gen_synthetic(&s), Err(GraphError::EdgeProbCount { .. })));
    }

    #[test]
    fn mean_shift_moves_feature_zero() {
        let spec = SyntheticSpec::new(100, 2, (8, 8), vec![0.2, 0.2], 3, 9)
            .with_class_mean_shift(2.0);
        let ds = gen_synthetic(&spec).unwrap();
        let mean_f0 = |c: usize| {
            let mut total = 0.0;
            let mut count = 0usize;
            for g in ds.graphs().iter().filter(|g| g.label() == c) {
                total += g.node_features().column(0).sum();
                count += g.num_nodes();
            }
            total / count as f64
        };
        assert!(mean_f0(1) - mean_f0(0) > 1.0);
    }
}
