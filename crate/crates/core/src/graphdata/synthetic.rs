//! Planted-partition graphs with class-dependent Gaussian features.

use rand_distr::{Distribution, StandardNormal};

use super::generators::{sample_sbm_edges, sbm_probabilities};
use super::Graph;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPartition {
    pub nodes: usize,
    pub classes: usize,
    pub features: usize,
    /// Expected mean degree.
    pub avg_degree: f64,
    /// Ratio of intra- to inter-class edge probability.
    pub homophily: f64,
    /// Scale of the class centroids; node features add unit Gaussian noise.
    pub signal: f64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            nodes: 300,
            classes: 3,
            features: 16,
            avg_degree: 4.0,
            homophily: 20.0,
            signal: 0.5,
        }
    }
}

/// Node `i` gets class `i * classes / nodes`, so classes are contiguous and
/// balanced. Edges and features use independent streams derived from `seed`.
pub fn planted_partition(spec: &PlantedPartition, seed: u64) -> Result<Graph> {
    if spec.classes < 2 || spec.nodes < spec.classes || spec.features < 1 {
        return Err(Error::invalid("planted partition needs 2+ classes, a node per class and 1+ features"));
    }
    if !(spec.avg_degree >= 0.0 && spec.homophily > 0.0 && spec.signal.is_finite()) {
        return Err(Error::invalid("planted partition parameters out of range"));
    }
    let blocks: Vec<usize> = (0..spec.nodes).map(|i| i * spec.classes / spec.nodes).collect();
    let mut sizes = vec![0usize; spec.classes];
    for &b in &blocks {
        sizes[b] += 1;
    }
    let target = spec.avg_degree * spec.nodes as f64 / 2.0;
    let (p_in, p_out) = sbm_probabilities(&sizes, target, spec.homophily);
    let edges = sample_sbm_edges(&blocks, p_in, p_out, &mut rng(derive_seed(seed, "edges")));

    let mut frng = rng(derive_seed(seed, "features"));
    let d = spec.features;
    let centroids: Vec<f64> = (0..spec.classes * d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut frng);
            spec.signal * z
        })
        .collect();
    let mut x = Vec::with_capacity(spec.nodes * d);
    for &b in &blocks {
        for j in 0..d {
            let noise: f64 = StandardNormal.sample(&mut frng);
            x.push(centroids[b * d + j] + noise);
        }
    }
    let labels = blocks.iter().map(|&b| b as i32).collect();
    Graph::from_edges(
        "planted-partition",
        &edges,
        DenseMatrix::new(spec.nodes, d, x)?,
        labels,
        spec.classes,
    )
}
