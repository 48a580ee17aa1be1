//! Synthetic OOD benchmark construction.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{make_splits, Benchmark, ClassMapping, Graph, OodUnit, Splits, DEFAULT_RATIOS, UNLABELED};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::seed::{self, derive_seed};

/// Default ratio between intra- and inter-block edge probabilities.
pub const DEFAULT_HOMOPHILY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureOodParams {
    /// `p_in / p_out`.
    pub homophily: f64,
}

impl Default for StructureOodParams {
    fn default() -> Self {
        Self {
            homophily: DEFAULT_HOMOPHILY,
        }
    }
}

/// Edge probabilities `(p_in, p_out)` whose expected edge count equals
/// `target_edges`, with `p_in = homophily * p_out` unless that would push
/// `p_in` above one.
pub fn sbm_probabilities(block_sizes: &[usize], target_edges: f64, homophily: f64) -> (f64, f64) {
    let n: usize = block_sizes.iter().sum();
    let all_pairs = (n * n.saturating_sub(1) / 2) as f64;
    let intra: f64 = block_sizes
        .iter()
        .map(|&b| (b * b.saturating_sub(1) / 2) as f64)
        .sum();
    let inter = all_pairs - intra;
    if all_pairs == 0.0 {
        return (0.0, 0.0);
    }
    let p_out = target_edges / (homophily * intra + inter);
    let p_in = homophily * p_out;
    if p_in <= 1.0 {
        return (p_in, p_out.min(1.0));
    }
    let p_out = if inter > 0.0 {
        ((target_edges - intra) / inter).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (1.0, p_out)
}

/// Samples an undirected simple graph where nodes `i < j` are joined with
/// probability `p_in` when `blocks[i] == blocks[j]` and `p_out` otherwise.
/// Pairs are visited in row-major order, one uniform draw each.
pub fn sample_sbm_edges<R: Rng>(blocks: &[usize], p_in: f64, p_out: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let n = blocks.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if blocks[i] == blocks[j] { p_in } else { p_out };
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn sbm_graph(g: &Graph, params: &StructureOodParams, seed: u64, name: String) -> Result<Graph> {
    // Unlabeled nodes form one extra block.
    let blocks: Vec<usize> = (0..g.num_nodes())
        .map(|i| g.label(i).unwrap_or(g.num_classes()))
        .collect();
    let mut sizes = vec![0usize; g.num_classes() + 1];
    for &b in &blocks {
        sizes[b] += 1;
    }
    let (p_in, p_out) = sbm_probabilities(&sizes, g.num_edges() as f64, params.homophily);
    let edges = sample_sbm_edges(&blocks, p_in, p_out, &mut seed::rng(seed));
    Graph::from_edges(name, &edges, g.features().clone(), g.labels().to_vec(), g.num_classes())
}

fn default_splits(g: &Graph, seed: u64) -> Result<Splits> {
    make_splits(g, DEFAULT_RATIOS, derive_seed(seed, "splits"))
}

/// Structure shift: the OOD graph keeps every node, feature and label of
/// `g` but its edges are resampled from a stochastic block model with one
/// block per class. An independent exposure graph is drawn with `seed ^ 1`.
pub fn gen_structure_ood(g: &Graph, seed: u64) -> Result<Benchmark> {
    gen_structure_ood_with(g, &StructureOodParams::default(), seed)
}

pub fn gen_structure_ood_with(g: &Graph, params: &StructureOodParams, seed: u64) -> Result<Benchmark> {
    let labeled_classes: BTreeSet<usize> = (0..g.num_nodes()).filter_map(|i| g.label(i)).collect();
    if labeled_classes.len() < 2 {
        return Err(Error::invalid("structure shift needs at least two labeled classes"));
    }
    if !(params.homophily.is_finite() && params.homophily > 0.0) {
        return Err(Error::invalid("homophily must be positive"));
    }
    let test = sbm_graph(g, params, seed, format!("{}-sbm", g.name()))?;
    let exposure = sbm_graph(g, params, seed ^ 1, format!("{}-sbm-exposure", g.name()))?;
    let splits = default_splits(g, seed)?;
    Benchmark::new(
        "structure",
        Arc::new(g.clone()),
        splits,
        vec![OodUnit::full(Arc::new(test))?],
        Some(OodUnit::full(Arc::new(exposure))?),
    )
}

/// Row `i` of the result is `λ_i x_i + (1 - λ_i) x_{π(i)}`.
pub fn interpolate_features(x: &DenseMatrix, lambdas: &[f64], perm: &[usize]) -> Result<DenseMatrix> {
    let n = x.rows();
    if lambdas.len() != n || perm.len() != n {
        return Err(Error::invalid("interpolation needs one weight and one partner per row"));
    }
    let mut out = DenseMatrix::zeros(n, x.cols());
    for i in 0..n {
        let (l, a, b) = (lambdas[i], x.row(i), x.row(perm[i]));
        for (o, (&u, &v)) in out.row_mut(i).iter_mut().zip(a.iter().zip(b)) {
            *o = l * u + (1.0 - l) * v;
        }
    }
    Ok(out)
}

fn interpolated_graph(g: &Graph, seed: u64, name: String) -> Result<Graph> {
    let n = g.num_nodes();
    let mut rng = seed::rng(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let lambdas: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    g.with_features(name, interpolate_features(g.features(), &lambdas, &perm)?)
}

/// Feature shift: same edges and labels, each feature row replaced by a
/// random convex mix of itself and one partner row.
pub fn gen_feature_ood(g: &Graph, seed: u64) -> Result<Benchmark> {
    if g.num_nodes() == 0 {
        return Err(Error::invalid("feature shift needs a non-empty graph"));
    }
    let test = interpolated_graph(g, seed, format!("{}-interp", g.name()))?;
    let exposure = interpolated_graph(g, seed ^ 1, format!("{}-interp-exposure", g.name()))?;
    let splits = default_splits(g, seed)?;
    Benchmark::new(
        "feature",
        Arc::new(g.clone()),
        splits,
        vec![OodUnit::full(Arc::new(test))?],
        Some(OodUnit::full(Arc::new(exposure))?),
    )
}

/// The highest-index `ceil(C / 4)` classes.
pub fn default_leave_out(num_classes: usize) -> Vec<usize> {
    let k = num_classes.div_ceil(4);
    (num_classes - k..num_classes).collect()
}

/// Label leave-out: nodes of the held-out classes become the OOD unit on
/// the same graph; remaining classes are renumbered to `0..C'`.
pub fn gen_label_leaveout_ood(g: &Graph, leave_out: &[usize], seed: u64) -> Result<Benchmark> {
    let c = g.num_classes();
    let held: BTreeSet<usize> = leave_out.iter().copied().collect();
    if held.is_empty() {
        return Err(Error::invalid("leave-out set is empty"));
    }
    if let Some(&bad) = held.iter().find(|&&k| k >= c) {
        return Err(Error::invalid(format!("leave-out class {bad} >= {c}")));
    }
    if held.len() + 2 > c {
        return Err(Error::invalid(format!(
            "leaving out {} of {c} classes leaves fewer than two in-distribution classes",
            held.len()
        )));
    }
    let remap: Vec<ClassMapping> = (0..c)
        .filter(|k| !held.contains(k))
        .enumerate()
        .map(|(new, original)| ClassMapping { original, remapped: new })
        .collect();
    let mut lookup = vec![None; c];
    for m in &remap {
        lookup[m.original] = Some(m.remapped as i32);
    }
    let mut mask = Vec::new();
    let labels: Vec<i32> = (0..g.num_nodes())
        .map(|i| match g.label(i) {
            Some(y) if held.contains(&y) => {
                mask.push(i);
                UNLABELED
            }
            Some(y) => lookup[y].expect("kept class"),
            None => UNLABELED,
        })
        .collect();
    if mask.is_empty() {
        return Err(Error::invalid("no node carries a left-out class"));
    }
    let id_graph = Arc::new(g.with_labels(labels, remap.len())?);
    let splits = default_splits(&id_graph, seed)?;
    let unit = OodUnit::new(id_graph.clone(), mask)?;
    let mut b = Benchmark::new("label_leaveout", id_graph, splits, vec![unit], None)?;
    b.class_remap = Some(remap);
    Ok(b)
}

/// Single-graph benchmark from user-supplied node masks (for example a
/// time-based partition). Masked nodes lose their labels in the
/// in-distribution view, so splits only draw from the remaining nodes.
pub fn gen_masked_ood(g: &Graph, ood_mask: &[usize], exposure_mask: Option<&[usize]>, seed: u64) -> Result<Benchmark> {
    let mut labels = g.labels().to_vec();
    for &i in ood_mask.iter().chain(exposure_mask.unwrap_or(&[])) {
        if i >= g.num_nodes() {
            return Err(Error::invalid(format!("mask node {i} >= {}", g.num_nodes())));
        }
        labels[i] = UNLABELED;
    }
    let id_graph = Arc::new(g.with_labels(labels, g.num_classes())?);
    let splits = default_splits(&id_graph, seed)?;
    let test = OodUnit::new(id_graph.clone(), ood_mask.to_vec())?;
    let exposure = match exposure_mask {
        Some(m) => Some(OodUnit::new(id_graph.clone(), m.to_vec())?),
        None => None,
    };
    Benchmark::new("as_is", id_graph, splits, vec![test], exposure)
}

/// Multi-graph benchmark: every node of each OOD graph is OOD.
pub fn assemble_benchmark(
    id_graph: Graph,
    splits: Splits,
    ood_graphs: Vec<Graph>,
    exposure: Option<Graph>,
) -> Result<Benchmark> {
    let dim = id_graph.num_features();
    for g in ood_graphs.iter().chain(exposure.as_ref()) {
        if g.num_features() != dim {
            return Err(Error::invalid(format!(
                "graph '{}' has {} features, expected {dim}",
                g.name(),
                g.num_features()
            )));
        }
    }
    let units = ood_graphs
        .into_iter()
        .map(|g| OodUnit::full(Arc::new(g)))
        .collect::<Result<Vec<_>>>()?;
    let exposure = exposure.map(|g| OodUnit::full(Arc::new(g))).transpose()?;
    Benchmark::new("multigraph", Arc::new(id_graph), splits, units, exposure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_labeled(seed: u64, n: usize, classes: usize, p: f64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let feats = (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let labels = (0..n).map(|i| (i % classes) as i32).collect();
        Graph::from_edges("r", &edges, DenseMatrix::new(n, 3, feats).unwrap(), labels, classes).unwrap()
    }

    #[test]
    fn deterministic_sbm_corner() {
        let blocks = [0, 0, 0, 1, 1];
        let edges = sample_sbm_edges(&blocks, 1.0, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(edges.len(), 3 + 1);
        assert!(edges.iter().all(|&(a, b)| blocks[a] == blocks[b]));
    }

    #[test]
    fn sbm_probabilities_match_target() {
        let sizes = [100, 150, 250];
        let (p_in, p_out) = sbm_probabilities(&sizes, 2000.0, 5.0);
        assert!((p_in / p_out - 5.0).abs() < 1e-12);
        let intra: f64 = sizes.iter().map(|&b| (b * (b - 1) / 2) as f64).sum();
        let inter = (500 * 499 / 2) as f64 - intra;
        assert!((p_in * intra + p_out * inter - 2000.0).abs() < 1e-9);
        // Saturated intra-block probability.
        let (p_in, p_out) = sbm_probabilities(&[3, 2], 5.0, 100.0);
        assert_eq!(p_in, 1.0);
        assert!((p_out - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn structure_ood_edge_density_within_binomial_ci() {
        let g = random_labeled(11, 500, 4, 0.01);
        let b = gen_structure_ood(&g, 5).unwrap();
        let ood = &b.ood_test[0].graph;
        let mut sizes = [0usize; 5];
        for i in 0..500 {
            sizes[g.label(i).unwrap()] += 1;
        }
        let (p_in, p_out) = sbm_probabilities(&sizes, g.num_edges() as f64, DEFAULT_HOMOPHILY);
        let intra: f64 = sizes.iter().map(|&s| (s * s.saturating_sub(1) / 2) as f64).sum();
        let inter = (500 * 499 / 2) as f64 - intra;
        let mean = p_in * intra + p_out * inter;
        let sd = (intra * p_in * (1.0 - p_in) + inter * p_out * (1.0 - p_out)).sqrt();
        let got = ood.num_edges() as f64;
        assert!((got - mean).abs() <= 3.0 * sd, "edges {got}, expected {mean} ± {}", 3.0 * sd);
    }

    #[test]
    fn structure_ood_preserves_features_and_is_simple() {
        let g = random_labeled(12, 60, 3, 0.1);
        let b = gen_structure_ood(&g, 9).unwrap();
        let ood = &b.ood_test[0].graph;
        assert_eq!(ood.features(), g.features());
        assert_eq!(ood.labels(), g.labels());
        assert!(!ood.adjacency().has_diagonal());
        assert_eq!(b.ood_test[0].mask.len(), 60);
        let exp = b.ood_exposure.as_ref().unwrap();
        assert_ne!(exp.graph.edges(), ood.edges());
        let again = gen_structure_ood(&g, 9).unwrap();
        assert_eq!(again.ood_test[0].graph.edges(), ood.edges());
        assert_eq!(again.splits, b.splits);
    }

    #[test]
    fn structure_ood_needs_two_classes() {
        let g = random_labeled(13, 10, 1, 0.2);
        assert!(gen_structure_ood(&g, 0).is_err());
    }

    #[test]
    fn interpolation_endpoint_and_convexity() {
        let g = random_labeled(14, 40, 3, 0.1);
        let perm: Vec<usize> = (0..40).rev().collect();
        let same = interpolate_features(g.features(), &[1.0; 40], &perm).unwrap();
        assert_eq!(&same, g.features());

        let b = gen_feature_ood(&g, 3).unwrap();
        let x = b.ood_test[0].graph.features();
        // Recover the permutation the generator drew and check every coordinate.
        let mut rng = seed::rng(3);
        let mut p: Vec<usize> = (0..40).collect();
        p.shuffle(&mut rng);
        for i in 0..40 {
            for d in 0..3 {
                let (a, c) = (g.features().get(i, d), g.features().get(p[i], d));
                let v = x.get(i, d);
                assert!(v >= a.min(c) && v <= a.max(c));
            }
        }
        assert_eq!(b.ood_test[0].graph.edges(), g.edges());
        assert_eq!(gen_feature_ood(&g, 3).unwrap().ood_test[0].graph.features(), x);
    }

    #[test]
    fn leave_out_remaps_and_masks() {
        let g = random_labeled(15, 70, 7, 0.05);
        let b = gen_label_leaveout_ood(&g, &[5, 6], 1).unwrap();
        assert_eq!(b.id_graph.num_classes(), 5);
        let remap = b.class_remap.as_ref().unwrap();
        assert_eq!(remap.len(), 5);
        let unit = &b.ood_test[0];
        assert!(b.shares_id_graph(unit));
        for &i in &unit.mask {
            assert!(matches!(g.label(i), Some(5) | Some(6)));
        }
        let id_nodes = b.id_graph.labeled_nodes().len();
        assert_eq!(id_nodes + unit.mask.len(), 70);
        for &i in b.splits.train.iter().chain(&b.splits.valid).chain(&b.splits.test) {
            assert!(g.label(i).unwrap() < 5);
        }
    }

    #[test]
    fn leave_out_guards() {
        let g = random_labeled(16, 30, 7, 0.05);
        assert!(gen_label_leaveout_ood(&g, &[], 0).is_err());
        assert!(gen_label_leaveout_ood(&g, &[0, 1, 2, 3, 4, 5, 6], 0).is_err());
        assert!(gen_label_leaveout_ood(&g, &[0, 1, 2, 3, 4, 5], 0).is_err());
        assert!(gen_label_leaveout_ood(&g, &[9], 0).is_err());
        assert_eq!(default_leave_out(7), vec![5, 6]);
        assert_eq!(default_leave_out(4), vec![3]);
    }

    #[test]
    fn assemble_preserves_order_and_checks_dims() {
        let id = random_labeled(17, 20, 2, 0.1);
        let splits = make_splits(&id, DEFAULT_RATIOS, 0).unwrap();
        let oods: Vec<Graph> = (0..3).map(|s| random_labeled(20 + s, 10 + s as usize, 2, 0.2)).collect();
        let b = assemble_benchmark(id.clone(), splits.clone(), oods.clone(), None).unwrap();
        assert_eq!(b.ood_test.len(), 3);
        for (u, g) in b.ood_test.iter().zip(&oods) {
            assert_eq!(u.graph.num_nodes(), g.num_nodes());
            assert_eq!(u.mask.len(), g.num_nodes());
        }
        let wide = Graph::from_edges("w", &[], DenseMatrix::zeros(3, 9), vec![0; 3], 2).unwrap();
        assert!(assemble_benchmark(id, splits, vec![wide], None).is_err());
    }

    #[test]
    fn masked_benchmark() {
        let g = random_labeled(18, 50, 3, 0.1);
        let ood: Vec<usize> = (40..50).collect();
        let exp: Vec<usize> = (30..40).collect();
        let b = gen_masked_ood(&g, &ood, Some(&exp), 2).unwrap();
        assert_eq!(b.id_graph.labeled_nodes(), (0..30).collect::<Vec<_>>());
        assert!(gen_masked_ood(&g, &ood, Some(&ood), 2).is_err());
    }
}
