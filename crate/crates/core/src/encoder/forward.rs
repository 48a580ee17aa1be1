use super::{EncoderConfig, EncoderKind, EncoderParams, NormStats, NORM_EPS};
use crate::error::{Error, Result};
use crate::graphdata::Graph;
use crate::numerics::{DenseMatrix, SparseMatrix};

/// Where the column statistics of the feature normalization come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Computed from the graph being encoded; gradients flow through them.
    Batch,
    /// Taken from [`EncoderParams::norm_stats`]; constants for backward.
    Stored,
}

#[derive(Debug, Clone)]
struct HiddenCache {
    /// Standardized pre-activations (before scale and shift).
    xhat: DenseMatrix,
    inv_std: Vec<f64>,
    /// Input to the ReLU.
    act_in: DenseMatrix,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: DenseMatrix,
    hidden: Option<HiddenCache>,
}

/// Intermediate values of one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    logits: DenseMatrix,
    stats: Vec<NormStats>,
    mode: NormMode,
}

impl ForwardCache {
    pub fn logits(&self) -> &DenseMatrix {
        &self.logits
    }

    pub fn into_logits(self) -> DenseMatrix {
        self.logits
    }

    /// Column statistics used by each normalized layer.
    pub fn norm_stats(&self) -> &[NormStats] {
        &self.stats
    }

    pub fn mode(&self) -> NormMode {
        self.mode
    }
}

fn column_stats(a: &DenseMatrix) -> NormStats {
    let (n, h) = a.shape();
    let mut mean = vec![0.0; h];
    for row in a.row_iter() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; h];
    for row in a.row_iter() {
        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n as f64);
    NormStats { mean, var }
}

fn column_sums(a: &DenseMatrix) -> Vec<f64> {
    let mut s = vec![0.0; a.cols()];
    for row in a.row_iter() {
        for (acc, &x) in s.iter_mut().zip(row) {
            *acc += x;
        }
    }
    s
}

/// Runs the encoder over every node of `g`.
///
/// `prop` is the propagation matrix from [`EncoderConfig::propagation`];
/// it is not read for an MLP.
pub fn forward(
    params: &EncoderParams,
    cfg: &EncoderConfig,
    g: &Graph,
    prop: &SparseMatrix,
    mode: NormMode,
) -> Result<ForwardCache> {
    cfg.validate()?;
    params.check_shapes(cfg, g.num_features())?;
    let n = g.num_nodes();
    if cfg.kind == EncoderKind::Gcn && (prop.rows() != n || prop.cols() != n) {
        return Err(Error::invalid(format!(
            "propagation matrix is {}x{}, graph has {n} nodes",
            prop.rows(),
            prop.cols()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("cannot encode an empty graph"));
    }

    let mut z = g.features().clone();
    let mut layers = Vec::with_capacity(cfg.layers);
    let mut stats = Vec::new();
    for l in 0..cfg.layers {
        let xw = z.matmul_unchecked(&params.weights[l]);
        let mut a = match cfg.kind {
            EncoderKind::Gcn => prop.spmm_unchecked(&xw),
            EncoderKind::Mlp => xw,
        };
        if let Some(b) = params.biases.get(l) {
            for r in 0..n {
                for (x, &bb) in a.row_mut(r).iter_mut().zip(b) {
                    *x += bb;
                }
            }
        }
        if l + 1 == cfg.layers {
            layers.push(LayerCache { input: z, hidden: None });
            z = a;
            break;
        }
        let hidden = if l < params.norm_scale.len() {
            let st = match mode {
                NormMode::Batch => column_stats(&a),
                NormMode::Stored => params.norm_stats[l].clone(),
            };
            let inv_std: Vec<f64> = st.var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
            let mut xhat = a;
            for r in 0..n {
                for ((x, &m), &s) in xhat.row_mut(r).iter_mut().zip(&st.mean).zip(&inv_std) {
                    *x = (*x - m) * s;
                }
            }
            let mut act_in = xhat.clone();
            for r in 0..n {
                let row = act_in.row_mut(r);
                for ((x, &gamma), &beta) in row.iter_mut().zip(&params.norm_scale[l]).zip(&params.norm_shift[l]) {
                    *x = gamma * *x + beta;
                }
            }
            stats.push(st);
            HiddenCache { xhat, inv_std, act_in }
        } else {
            HiddenCache {
                xhat: DenseMatrix::zeros(0, 0),
                inv_std: Vec::new(),
                act_in: a,
            }
        };
        let mut next = hidden.act_in.clone();
        next.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
        layers.push(LayerCache { input: z, hidden: Some(hidden) });
        z = next;
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("encoder produced non-finite logits".into()));
    }
    Ok(ForwardCache {
        layers,
        logits: z,
        stats,
        mode,
    })
}

/// Reverse-mode gradients of a scalar loss whose gradient with respect to
/// the logits is `grad_logits`. Stored statistics in the result are zero.
pub fn backward(
    cache: &ForwardCache,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    prop: &SparseMatrix,
    grad_logits: &DenseMatrix,
) -> Result<EncoderParams> {
    backward_with_stats(cache, params, cfg, prop, grad_logits, None).map(|b| b.params)
}

/// Output of [`backward_with_stats`].
#[derive(Debug, Clone)]
pub struct Backward {
    pub params: EncoderParams,
    /// For a [`NormMode::Stored`] pass, the gradient with respect to the
    /// statistics that were used (`mean` and `var` fields hold the two
    /// partials). Empty for a batch pass.
    pub stats: Vec<NormStats>,
}

/// Like [`backward`], with the normalization statistics as part of the
/// graph.
///
/// `upstream_stats` only applies to a [`NormMode::Batch`] pass: it is the
/// gradient of the loss with respect to this pass's batch statistics from
/// some other consumer of them (typically a Stored pass on another graph
/// that borrowed them), and is folded into the pre-normalization gradient.
pub fn backward_with_stats(
    cache: &ForwardCache,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    prop: &SparseMatrix,
    grad_logits: &DenseMatrix,
    upstream_stats: Option<&[NormStats]>,
) -> Result<Backward> {
    if cache.layers.len() != cfg.layers {
        return Err(Error::invalid("forward cache does not match the encoder configuration"));
    }
    if grad_logits.shape() != cache.logits.shape() {
        return Err(Error::invalid(format!(
            "gradient shape {:?} does not match logits {:?}",
            grad_logits.shape(),
            cache.logits.shape()
        )));
    }
    if let Some(up) = upstream_stats {
        if cache.mode != NormMode::Batch || up.len() != cache.stats.len() {
            return Err(Error::invalid("statistic gradients need a batch pass with matching layers"));
        }
    }
    let mut grads = params.zeros_like();
    let mut stat_grads = Vec::new();
    let n = grad_logits.rows();
    let mut upstream = grad_logits.clone();

    for l in (0..cfg.layers).rev() {
        let lc = &cache.layers[l];
        // `upstream` is dL/d(layer output); turn it into dL/dA.
        let d_pre = match &lc.hidden {
            None => upstream,
            Some(h) => {
                let mut d_act = upstream;
                for (d, &x) in d_act.as_mut_slice().iter_mut().zip(h.act_in.as_slice()) {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                }
                if l < params.norm_scale.len() {
                    let gamma = &params.norm_scale[l];
                    let hdim = gamma.len();
                    let mut d_gamma = vec![0.0; hdim];
                    let mut d_beta = vec![0.0; hdim];
                    let mut d_xhat = d_act;
                    for r in 0..n {
                        let xr = h.xhat.row(r);
                        for (c, d) in d_xhat.row_mut(r).iter_mut().enumerate() {
                            d_gamma[c] += *d * xr[c];
                            d_beta[c] += *d;
                            *d *= gamma[c];
                        }
                    }
                    grads.norm_scale[l] = d_gamma;
                    grads.norm_shift[l] = d_beta;
                    match cache.mode {
                        NormMode::Stored => {
                            let mut d_mean = vec![0.0; hdim];
                            let mut d_var = vec![0.0; hdim];
                            for r in 0..n {
                                for (c, (&d, &x)) in d_xhat.row(r).iter().zip(h.xhat.row(r)).enumerate() {
                                    d_mean[c] -= d * h.inv_std[c];
                                    d_var[c] -= 0.5 * d * x * h.inv_std[c] * h.inv_std[c];
                                }
                            }
                            stat_grads.push(NormStats { mean: d_mean, var: d_var });
                            for r in 0..n {
                                for (d, &s) in d_xhat.row_mut(r).iter_mut().zip(&h.inv_std) {
                                    *d *= s;
                                }
                            }
                            d_xhat
                        }
                        NormMode::Batch => {
                            let sum_d = column_sums(&d_xhat);
                            let mut sum_dx = vec![0.0; hdim];
                            for r in 0..n {
                                for ((acc, &d), &x) in sum_dx.iter_mut().zip(d_xhat.row(r)).zip(h.xhat.row(r)) {
                                    *acc += d * x;
                                }
                            }
                            let nf = n as f64;
                            let mut d_a = d_xhat;
                            for r in 0..n {
                                let xr = h.xhat.row(r);
                                for (c, d) in d_a.row_mut(r).iter_mut().enumerate() {
                                    *d = h.inv_std[c] / nf * (nf * *d - sum_d[c] - xr[c] * sum_dx[c]);
                                }
                            }
                            if let Some(up) = upstream_stats {
                                // mean = sum(A) / N and var = sum((A - mean)^2) / N.
                                let st = &up[l];
                                for r in 0..n {
                                    let xr = h.xhat.row(r);
                                    for (c, d) in d_a.row_mut(r).iter_mut().enumerate() {
                                        let centered = xr[c] / h.inv_std[c];
                                        *d += st.mean[c] / nf + st.var[c] * 2.0 * centered / nf;
                                    }
                                }
                            }
                            d_a
                        }
                    }
                } else {
                    d_act
                }
            }
        };
        if let Some(b) = grads.biases.get_mut(l) {
            *b = column_sums(&d_pre);
        }
        // P is symmetric, so Pᵀ · dA = P · dA.
        let d_xw = match cfg.kind {
            EncoderKind::Gcn => prop.spmm_unchecked(&d_pre),
            EncoderKind::Mlp => d_pre,
        };
        grads.weights[l] = lc.input.t_matmul_unchecked(&d_xw);
        upstream = if l > 0 {
            d_xw.matmul_t_unchecked(&params.weights[l])
        } else {
            DenseMatrix::zeros(0, 0)
        };
    }
    stat_grads.reverse();
    Ok(Backward { params: grads, stats: stat_grads })
}

#[cfg(test)]
mod tests {
    use super::super::init_params;
    use super::*;
    use crate::numerics::finite_diff_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(seed: u64, n: usize, d: usize, p: f64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let x = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Graph::from_edges("g", &edges, DenseMatrix::new(n, d, x).unwrap(), vec![0; n], 2).unwrap()
    }

    /// Fixed random linear functional of the logits, used as a test loss.
    fn probe(n: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::new(n, c, (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn dot(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
    }

    fn perturb_norm(p: &mut EncoderParams, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in p.norm_scale.iter_mut().flatten() {
            *v = rng.gen_range(0.5..1.5);
        }
        for v in p.norm_shift.iter_mut().flatten().chain(p.biases.iter_mut().flatten()) {
            *v = rng.gen_range(-0.3..0.3);
        }
        for s in &mut p.norm_stats {
            s.mean.iter_mut().for_each(|m| *m = rng.gen_range(-0.2..0.2));
            s.var.iter_mut().for_each(|v| *v = rng.gen_range(0.5..2.0));
        }
    }

    fn grad_check(cfg: &EncoderConfig, g: &Graph, mode: NormMode, seed: u64) -> f64 {
        let prop = cfg.propagation(g).unwrap();
        let mut params = init_params(cfg, g.num_features(), seed).unwrap();
        perturb_norm(&mut params, seed + 100);
        let w = probe(g.num_nodes(), cfg.out_classes, seed + 200);
        let cache = forward(&params, cfg, g, &prop, mode).unwrap();
        let grads = backward(&cache, &params, cfg, &prop, &w).unwrap();
        let x0 = params.trainable_flat();
        let mut scratch = params.clone();
        finite_diff_check(
            |x| {
                scratch.set_trainable_flat(x);
                dot(forward(&scratch, cfg, g, &prop, mode).unwrap().logits(), &w)
            },
            &x0,
            &grads.trainable_flat(),
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn mlp_identity_layer_passes_input_through() {
        let cfg = EncoderConfig { layers: 1, use_bias: false, ..EncoderConfig::mlp(3) };
        let x = DenseMatrix::from_rows(&[vec![0.5, 2.0, 0.0], vec![1.0, 0.0, 3.0]]).unwrap();
        let g = Graph::from_edges("g", &[(0, 1)], x.clone(), vec![0, 1], 3).unwrap();
        let p = EncoderParams::from_weights(&cfg, 3, vec![DenseMatrix::identity(3)]).unwrap();
        let out = forward(&p, &cfg, &g, &cfg.propagation(&g).unwrap(), NormMode::Batch).unwrap();
        assert_eq!(out.logits(), &x);
    }

    #[test]
    fn gcn_on_isolated_node_matches_mlp() {
        let x = DenseMatrix::from_rows(&[vec![0.3, -1.2]]).unwrap();
        let g = Graph::from_edges("g", &[], x, vec![0], 2).unwrap();
        let gcn = EncoderConfig { use_feature_norm: false, ..EncoderConfig::gcn(2) };
        let mlp = EncoderConfig { kind: EncoderKind::Mlp, ..gcn.clone() };
        let p = init_params(&gcn, 2, 5).unwrap();
        let a = forward(&p, &gcn, &g, &gcn.propagation(&g).unwrap(), NormMode::Batch).unwrap();
        let b = forward(&p, &mlp, &g, &mlp.propagation(&g).unwrap(), NormMode::Batch).unwrap();
        assert_eq!(a.logits(), b.logits());
    }

    #[test]
    fn two_layer_gcn_matches_dense_chain() {
        let x = DenseMatrix::from_rows(&[vec![1.0, -0.5], vec![0.25, 2.0]]).unwrap();
        let g = Graph::from_edges("g", &[(0, 1)], x.clone(), vec![0, 1], 2).unwrap();
        let cfg = EncoderConfig { hidden: 3, use_feature_norm: false, use_bias: false, ..EncoderConfig::gcn(2) };
        let w1 = DenseMatrix::from_rows(&[vec![0.5, -1.0, 0.2], vec![0.3, 0.8, -0.4]]).unwrap();
        let w2 = DenseMatrix::from_rows(&[vec![1.0, -0.5], vec![0.25, 0.75], vec![-1.0, 2.0]]).unwrap();
        let p = EncoderParams::from_weights(&cfg, 2, vec![w1.clone(), w2.clone()]).unwrap();
        let got = forward(&p, &cfg, &g, &cfg.propagation(&g).unwrap(), NormMode::Batch).unwrap();
        // Dense oracle: P = [[.5,.5],[.5,.5]] for a single edge with self-loops.
        let pm = DenseMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let mut h = pm.matmul(&x).unwrap().matmul(&w1).unwrap();
        h.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        let want = pm.matmul(&h).unwrap().matmul(&w2).unwrap();
        assert!(got.logits().max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let g = random_graph(1, 8, 3, 0.3);
        let cfg = EncoderConfig { hidden: 5, ..EncoderConfig::gcn(3) };
        let prop = cfg.propagation(&g).unwrap();
        let p = init_params(&cfg, 3, 2).unwrap();
        let cache = forward(&p, &cfg, &g, &prop, NormMode::Batch).unwrap();
        let grads = backward(&cache, &p, &cfg, &prop, &DenseMatrix::zeros(8, 3)).unwrap();
        assert!(grads.all_flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_gradient_closed_form() {
        let g = random_graph(3, 10, 4, 0.3);
        let cfg = EncoderConfig { layers: 1, use_bias: false, use_feature_norm: false, ..EncoderConfig::gcn(3) };
        let prop = cfg.propagation(&g).unwrap();
        let p = init_params(&cfg, 4, 4).unwrap();
        let w = probe(10, 3, 5);
        let cache = forward(&p, &cfg, &g, &prop, NormMode::Batch).unwrap();
        let grads = backward(&cache, &p, &cfg, &prop, &w).unwrap();
        let closed = g.features().transpose().matmul(&prop.transpose().spmm(&w).unwrap()).unwrap();
        assert!(grads.weights[0].max_abs_diff(&closed) < 1e-12);
        assert!(grad_check(&cfg, &g, NormMode::Batch, 4) < 1e-6);
    }

    #[test]
    fn gcn_with_batch_norm_passes_gradient_check() {
        for seed in 0..5 {
            let g = random_graph(10 + seed, 12, 5, 0.25);
            let cfg = EncoderConfig { hidden: 6, ..EncoderConfig::gcn(3) };
            let err = grad_check(&cfg, &g, NormMode::Batch, seed);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn stored_norm_and_mlp_pass_gradient_check() {
        for seed in 0..3 {
            let g = random_graph(20 + seed, 12, 4, 0.25);
            let cfg = EncoderConfig { hidden: 5, layers: 3, ..EncoderConfig::gcn(3) };
            assert!(grad_check(&cfg, &g, NormMode::Stored, seed) < 1e-4);
            let mlp = EncoderConfig { hidden: 5, use_feature_norm: true, ..EncoderConfig::mlp(3) };
            assert!(grad_check(&mlp, &g, NormMode::Batch, seed) < 1e-4);
        }
    }

    #[test]
    fn borrowed_statistics_gradient_check() {
        // Loss touches a batch pass on `g` and a second graph normalized with
        // g's batch statistics.
        for seed in 0..3 {
            let g = random_graph(50 + seed, 10, 4, 0.3);
            let h = random_graph(60 + seed, 7, 4, 0.4);
            let cfg = EncoderConfig { hidden: 5, layers: 3, ..EncoderConfig::gcn(3) };
            let (pg, ph) = (cfg.propagation(&g).unwrap(), cfg.propagation(&h).unwrap());
            let mut params = init_params(&cfg, 4, seed).unwrap();
            perturb_norm(&mut params, seed + 7);
            let (wg, wh) = (probe(10, 3, seed + 1), probe(7, 3, seed + 2));
            let loss = |p: &EncoderParams| {
                let cg = forward(p, &cfg, &g, &pg, NormMode::Batch).unwrap();
                let mut borrowed = p.clone();
                borrowed.norm_stats = cg.norm_stats().to_vec();
                let ch = forward(&borrowed, &cfg, &h, &ph, NormMode::Stored).unwrap();
                (cg, borrowed, ch)
            };
            let (cg, borrowed, ch) = loss(&params);
            let bh = backward_with_stats(&ch, &borrowed, &cfg, &ph, &wh, None).unwrap();
            assert_eq!(bh.stats.len(), 2);
            let mut grads = backward_with_stats(&cg, &params, &cfg, &pg, &wg, Some(&bh.stats)).unwrap().params;
            grads.add_scaled(&bh.params, 1.0);
            let mut scratch = params.clone();
            let err = finite_diff_check(
                |x| {
                    scratch.set_trainable_flat(x);
                    let (cg, _, ch) = loss(&scratch);
                    dot(cg.logits(), &wg) + dot(ch.logits(), &wh)
                },
                &params.trainable_flat(),
                &grads.trainable_flat(),
                1e-6,
            )
            .unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let g = random_graph(30, 15, 4, 0.2);
        let cfg = EncoderConfig::gcn(3);
        let prop = cfg.propagation(&g).unwrap();
        let p = init_params(&cfg, 4, 9).unwrap();
        let a = forward(&p, &cfg, &g, &prop, NormMode::Batch).unwrap();
        let b = forward(&p, &cfg, &g, &prop, NormMode::Batch).unwrap();
        assert_eq!(a.logits(), b.logits());
    }

    #[test]
    fn mlp_rows_depend_only_on_own_features() {
        let g = random_graph(31, 10, 3, 0.3);
        let cfg = EncoderConfig::mlp(2);
        let p = init_params(&cfg, 3, 1).unwrap();
        let prop = cfg.propagation(&g).unwrap();
        let base = forward(&p, &cfg, &g, &prop, NormMode::Stored).unwrap();
        let mut x = g.features().clone();
        x.row_mut(7).iter_mut().for_each(|v| *v += 5.0);
        x.row_mut(2).iter_mut().for_each(|v| *v *= -1.0);
        let g2 = g.with_features("g2", x).unwrap();
        let moved = forward(&p, &cfg, &g2, &prop, NormMode::Stored).unwrap();
        assert_eq!(base.logits().row(0), moved.logits().row(0));
    }

    #[test]
    fn gcn_is_local_to_l_hops() {
        // Path 0-1-2-3-4-5-6; two layers see at most two hops.
        let n = 7;
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = DenseMatrix::new(n, 3, (0..n * 3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let g = Graph::from_edges("p", &edges, x.clone(), vec![0; n], 2).unwrap();
        let cfg = EncoderConfig::gcn(2);
        let p = init_params(&cfg, 3, 3).unwrap();
        let prop = cfg.propagation(&g).unwrap();
        let base = forward(&p, &cfg, &g, &prop, NormMode::Stored).unwrap();
        let mut far = x;
        far.row_mut(6).iter_mut().for_each(|v| *v += 10.0);
        let g2 = g.with_features("p2", far).unwrap();
        let moved = forward(&p, &cfg, &g2, &prop, NormMode::Stored).unwrap();
        assert_eq!(base.logits().row(0), moved.logits().row(0));
        assert_eq!(base.logits().row(3), moved.logits().row(3));
        assert_ne!(base.logits().row(4), moved.logits().row(4));
    }

    #[test]
    fn shape_errors() {
        let g = random_graph(40, 5, 3, 0.3);
        let cfg = EncoderConfig::gcn(2);
        let p = init_params(&cfg, 4, 0).unwrap();
        assert!(forward(&p, &cfg, &g, &cfg.propagation(&g).unwrap(), NormMode::Batch).is_err());
        let p = init_params(&cfg, 3, 0).unwrap();
        let prop = cfg.propagation(&g).unwrap();
        assert!(forward(&p, &cfg, &g, &SparseMatrix::identity(4), NormMode::Batch).is_err());
        let cache = forward(&p, &cfg, &g, &prop, NormMode::Batch).unwrap();
        assert!(backward(&cache, &p, &cfg, &prop, &DenseMatrix::zeros(5, 3)).is_err());
    }
}
