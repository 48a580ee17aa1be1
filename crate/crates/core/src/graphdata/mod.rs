//! Graph container, the native on-disk dataset format, splits and the
//! synthetic OOD benchmark generators.

mod generators;
mod io;
mod splits;
mod synthetic;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, SparseMatrix};

pub use generators::{
    assemble_benchmark, default_leave_out, gen_feature_ood, gen_label_leaveout_ood,
    gen_masked_ood, gen_structure_ood, gen_structure_ood_with, interpolate_features,
    sample_sbm_edges, sbm_probabilities, StructureOodParams, DEFAULT_HOMOPHILY,
};
pub(crate) use io::{read_json, write_json};
pub use io::{load_benchmark, load_graph, load_splits, save_benchmark, save_graph, save_splits};
pub use splits::{make_splits, SplitRatios, DEFAULT_RATIOS};
pub use synthetic::{planted_partition, PlantedPartition};

/// Label value for nodes without a label.
pub const UNLABELED: i32 = -1;

/// Undirected, unweighted node-attributed graph.
///
/// The adjacency is symmetric with unit weights and an empty diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    name: String,
    adjacency: SparseMatrix,
    features: DenseMatrix,
    labels: Vec<i32>,
    num_classes: usize,
}

impl Graph {
    /// Validates and wraps the parts of a graph.
    pub fn new(
        name: impl Into<String>,
        adjacency: SparseMatrix,
        features: DenseMatrix,
        labels: Vec<i32>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if adjacency.rows() != n || adjacency.cols() != n {
            return Err(Error::invalid(format!(
                "adjacency is {}x{} but there are {n} feature rows",
                adjacency.rows(),
                adjacency.cols()
            )));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if let Some(&bad) = labels
            .iter()
            .find(|&&y| y < UNLABELED || (y >= 0 && y as usize >= num_classes))
        {
            return Err(Error::invalid(format!(
                "label {bad} outside -1..{num_classes}"
            )));
        }
        if adjacency.has_diagonal() {
            return Err(Error::invalid("adjacency must not store self-loops"));
        }
        if adjacency.values().iter().any(|&v| v != 1.0) {
            return Err(Error::invalid("adjacency must be unweighted"));
        }
        if !adjacency.is_symmetric() {
            return Err(Error::invalid("adjacency must be symmetric"));
        }
        Ok(Self {
            name: name.into(),
            adjacency,
            features,
            labels,
            num_classes,
        })
    }

    /// Builds a graph from an undirected edge list. Edges are symmetrized,
    /// duplicates merged and self-loops dropped.
    pub fn from_edges(
        name: impl Into<String>,
        edges: &[(usize, usize)],
        features: DenseMatrix,
        labels: Vec<i32>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(Error::invalid(format!(
                "edge ({a}, {b}) references a node >= {n}"
            )));
        }
        let unique: BTreeSet<(usize, usize)> = edges
            .iter()
            .filter(|(a, b)| a != b)
            .flat_map(|&(a, b)| [(a, b), (b, a)])
            .collect();
        let adjacency = SparseMatrix::from_triplets(n, n, unique.into_iter().map(|(a, b)| (a, b, 1.0)))?;
        Self::new(name, adjacency, features, labels, num_classes)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Label of node `i` as a class index, `None` when unlabeled.
    pub fn label(&self, i: usize) -> Option<usize> {
        usize::try_from(self.labels[i]).ok()
    }

    pub fn labeled_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.labels[i] >= 0).collect()
    }

    /// Undirected edges with `a < b`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .triplets()
            .filter(|&(a, b, _)| a < b)
            .map(|(a, b, _)| (a, b))
            .collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency.row_nnz(i)
    }

    /// Same graph with different node features.
    pub fn with_features(&self, name: impl Into<String>, features: DenseMatrix) -> Result<Self> {
        Self::new(
            name,
            self.adjacency.clone(),
            features,
            self.labels.clone(),
            self.num_classes,
        )
    }

    /// Same graph with a different labelling.
    pub fn with_labels(&self, labels: Vec<i32>, num_classes: usize) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.adjacency.clone(),
            self.features.clone(),
            labels,
            num_classes,
        )
    }
}

/// Train / validation / test node sets on the in-distribution graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Checks disjointness, bounds and that training nodes carry labels.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let n = g.num_nodes();
        let mut seen = vec![false; n];
        for (name, set) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            for &i in set {
                if i >= n {
                    return Err(Error::invalid(format!("{name} split: node {i} >= {n}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid(format!(
                        "{name} split: node {i} appears twice across splits"
                    )));
                }
            }
        }
        if let Some(&i) = self.train.iter().find(|&&i| g.label(i).is_none()) {
            return Err(Error::invalid(format!("train split: node {i} is unlabeled")));
        }
        Ok(())
    }
}

/// A graph together with the nodes of it that count as OOD instances.
#[derive(Debug, Clone)]
pub struct OodUnit {
    pub graph: Arc<Graph>,
    pub mask: Vec<usize>,
}

impl OodUnit {
    /// Sorts and validates the mask.
    pub fn new(graph: Arc<Graph>, mut mask: Vec<usize>) -> Result<Self> {
        mask.sort_unstable();
        mask.dedup();
        if mask.is_empty() {
            return Err(Error::invalid("OOD mask is empty"));
        }
        if let Some(&i) = mask.iter().find(|&&i| i >= graph.num_nodes()) {
            return Err(Error::invalid(format!(
                "OOD mask node {i} >= {}",
                graph.num_nodes()
            )));
        }
        Ok(Self { graph, mask })
    }

    /// Every node of `graph` is OOD.
    pub fn full(graph: Arc<Graph>) -> Result<Self> {
        let n = graph.num_nodes();
        Self::new(graph, (0..n).collect())
    }
}

/// Mapping from an original class id to its contiguous replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMapping {
    pub original: usize,
    pub remapped: usize,
}

/// In-distribution graph with splits plus OOD test and exposure units.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub scenario: String,
    pub id_graph: Arc<Graph>,
    pub splits: Splits,
    pub ood_test: Vec<OodUnit>,
    pub ood_exposure: Option<OodUnit>,
    pub class_remap: Option<Vec<ClassMapping>>,
}

impl Benchmark {
    pub fn new(
        scenario: impl Into<String>,
        id_graph: Arc<Graph>,
        splits: Splits,
        ood_test: Vec<OodUnit>,
        ood_exposure: Option<OodUnit>,
    ) -> Result<Self> {
        let b = Self {
            scenario: scenario.into(),
            id_graph,
            splits,
            ood_test,
            ood_exposure,
            class_remap: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        self.splits.validate(&self.id_graph)?;
        if self.ood_test.is_empty() {
            return Err(Error::invalid("benchmark needs at least one OOD test unit"));
        }
        let dim = self.id_graph.num_features();
        let units = self.ood_test.iter().chain(self.ood_exposure.as_ref());
        for u in units {
            if u.graph.num_features() != dim {
                return Err(Error::invalid(format!(
                    "graph '{}' has {} features, in-distribution graph has {dim}",
                    u.graph.name(),
                    u.graph.num_features()
                )));
            }
        }
        if let Some(exp) = &self.ood_exposure {
            for t in &self.ood_test {
                if Arc::ptr_eq(&exp.graph, &t.graph) {
                    let test: BTreeSet<_> = t.mask.iter().collect();
                    if let Some(i) = exp.mask.iter().find(|i| test.contains(i)) {
                        return Err(Error::invalid(format!(
                            "exposure node {i} is also an OOD test node"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether a unit's graph is the in-distribution graph itself.
    pub fn shares_id_graph(&self, unit: &OodUnit) -> bool {
        Arc::ptr_eq(&self.id_graph, &unit.graph)
    }
}
