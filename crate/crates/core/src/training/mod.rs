//! Losses, the Adam optimizer, full-batch training with best-epoch
//! selection, and grid search.
//!
//! The objective is the summed cross-entropy over training nodes, plus,
//! when an exposure unit is available and regularization is on,
//! `lambda` times a squared-hinge penalty on *propagated* energies: training
//! nodes are pushed below `t_in`, exposure nodes above `t_out`.

mod adam;
mod grid;
mod loss;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::encoder::{backward_with_stats, forward, init_params, EncoderConfig, EncoderParams, ForwardCache, NormMode, NormStats};
use crate::energy::{energy_grad_to_logits, node_energy, Propagation, DEFAULT_ALPHA, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::eval::accuracy;
use crate::graphdata::{Benchmark, Graph};
use crate::numerics::{DenseMatrix, SparseMatrix};
use crate::seed::derive_seed;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPS};
pub use grid::{grid_search, write_grid_csv, Grid, GRID_HEADER, GridOutcome, GridRow, RunStatus};
pub use loss::{reg_loss, sup_loss, RegLoss, SupLoss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub t_in: f64,
    pub t_out: f64,
    /// Energy propagation mixing weight used by the regularizer.
    pub alpha: f64,
    /// Energy propagation steps used by the regularizer.
    pub k: usize,
    pub optimizer: Optimizer,
    pub weight_decay: f64,
    pub seed: u64,
    pub use_regularization: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            epochs: 200,
            lambda: 1.0,
            t_in: -5.0,
            t_out: -1.0,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_STEPS,
            optimizer: Optimizer::Adam,
            weight_decay: 0.0,
            seed: 0,
            use_regularization: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(format!("weight_decay must be non-negative, got {}", self.weight_decay)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if self.use_regularization && !(self.t_in < self.t_out) {
            return Err(Error::config(format!(
                "t_in ({}) must be below t_out ({})",
                self.t_in, self.t_out
            )));
        }
        Ok(())
    }
}

/// One epoch of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy over training nodes.
    pub train_loss: f64,
    /// Mean cross-entropy over validation nodes.
    pub val_loss: f64,
    pub val_acc: f64,
    /// Regularizer value when regularization is on.
    #[serde(skip)]
    pub reg_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: TrainConfig,
    pub params: EncoderParams,
    pub history: TrainHistory,
}

/// Writes one `{epoch, train_loss, val_loss, val_acc}` object per line.
pub fn write_train_log(history: &TrainHistory, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for r in &history.epochs {
        serde_json::to_writer(&mut out, r).expect("epoch record serializes");
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

struct GraphCtx {
    graph: Arc<Graph>,
    enc_prop: SparseMatrix,
    energy_prop: Propagation,
}

impl GraphCtx {
    fn new(graph: Arc<Graph>, enc_cfg: &EncoderConfig, tc: &TrainConfig) -> Result<Self> {
        Ok(GraphCtx {
            enc_prop: enc_cfg.propagation(&graph)?,
            energy_prop: Propagation::new(graph.adjacency(), tc.alpha, tc.k)?,
            graph,
        })
    }
}

struct ExposureCtx {
    /// `None` when the exposure nodes live on the in-distribution graph.
    ctx: Option<GraphCtx>,
    mask: Vec<usize>,
}

/// Result of evaluating the training objective at one parameter point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub sup: SupLoss,
    pub reg: Option<RegLoss>,
    /// `sup.sum + lambda * reg.loss`.
    pub total: f64,
    pub grads: EncoderParams,
    /// Logits of the in-distribution graph.
    pub logits: DenseMatrix,
    /// Column statistics from the in-distribution forward pass.
    pub norm_stats: Vec<NormStats>,
}

/// The training objective for a benchmark, with everything that does not
/// depend on the parameters precomputed.
pub struct Objective {
    enc_cfg: EncoderConfig,
    tc: TrainConfig,
    id: GraphCtx,
    train: Vec<usize>,
    exposure: Option<ExposureCtx>,
}

impl Objective {
    pub fn new(bench: &Benchmark, enc_cfg: &EncoderConfig, tc: &TrainConfig) -> Result<Self> {
        tc.validate()?;
        enc_cfg.validate()?;
        if enc_cfg.out_classes != bench.id_graph.num_classes() {
            return Err(Error::config(format!(
                "encoder has {} outputs, benchmark has {} classes",
                enc_cfg.out_classes,
                bench.id_graph.num_classes()
            )));
        }
        if bench.splits.train.is_empty() {
            return Err(Error::invalid("training split is empty"));
        }
        let exposure = if tc.use_regularization {
            let unit = bench
                .ood_exposure
                .as_ref()
                .ok_or_else(|| Error::config("regularization requested but the benchmark has no exposure unit"))?;
            let ctx = if bench.shares_id_graph(unit) {
                None
            } else {
                Some(GraphCtx::new(unit.graph.clone(), enc_cfg, tc)?)
            };
            Some(ExposureCtx { ctx, mask: unit.mask.clone() })
        } else {
            None
        };
        Ok(Objective {
            enc_cfg: enc_cfg.clone(),
            tc: tc.clone(),
            id: GraphCtx::new(bench.id_graph.clone(), enc_cfg, tc)?,
            train: bench.splits.train.clone(),
            exposure,
        })
    }

    pub fn id_graph(&self) -> &Graph {
        &self.id.graph
    }

    fn run_forward(&self, params: &EncoderParams, ctx: &GraphCtx) -> Result<ForwardCache> {
        forward(params, &self.enc_cfg, &ctx.graph, &ctx.enc_prop, NormMode::Batch)
    }

    /// Loss and gradients. The in-distribution pass uses batch statistics;
    /// an exposure graph is normalized with those same statistics, as it
    /// will be at evaluation time, and gradients flow through them.
    pub fn eval(&self, params: &EncoderParams) -> Result<ObjectiveEval> {
        let id_cache = self.run_forward(params, &self.id)?;
        let sup = sup_loss(id_cache.logits(), self.id.graph.labels(), &self.train)?;
        let mut grad_id = sup.grad.clone();
        let mut total = sup.sum;
        let mut exposure_grads = None;
        let mut reg = None;

        if let Some(exp) = &self.exposure {
            let separate = match &exp.ctx {
                Some(ctx) => {
                    let mut borrowed = params.clone();
                    borrowed.norm_stats = id_cache.norm_stats().to_vec();
                    let cache = forward(&borrowed, &self.enc_cfg, &ctx.graph, &ctx.enc_prop, NormMode::Stored)?;
                    Some((ctx, borrowed, cache))
                }
                None => None,
            };
            let exp_logits = separate.as_ref().map_or(id_cache.logits(), |(_, _, c)| c.logits());
            let exp_prop = &exp.ctx.as_ref().unwrap_or(&self.id).energy_prop;

            let e_id = self.id.energy_prop.apply(node_energy(id_cache.logits())?.values())?;
            let e_exp = exp_prop.apply(node_energy(exp_logits)?.values())?;
            let id_sel: Vec<f64> = self.train.iter().map(|&i| e_id[i]).collect();
            let exp_sel: Vec<f64> = exp.mask.iter().map(|&i| e_exp[i]).collect();
            let r = reg_loss(&id_sel, &exp_sel, self.tc.t_in, self.tc.t_out)?;
            let lambda = self.tc.lambda;
            if lambda != 0.0 {
                total += lambda * r.loss;
                let mut g = vec![0.0; e_id.len()];
                for (&i, &v) in self.train.iter().zip(&r.grad_id) {
                    g[i] = lambda * v;
                }
                let mut g_exp = vec![0.0; e_exp.len()];
                for (&i, &v) in exp.mask.iter().zip(&r.grad_ood) {
                    g_exp[i] = lambda * v;
                }
                let d_id = energy_grad_to_logits(id_cache.logits(), &self.id.energy_prop.pullback(&g)?)?;
                add_into(&mut grad_id, &d_id);
                let d_exp = energy_grad_to_logits(exp_logits, &exp_prop.pullback(&g_exp)?)?;
                match &separate {
                    Some((ctx, borrowed, cache)) => {
                        exposure_grads = Some(backward_with_stats(cache, borrowed, &self.enc_cfg, &ctx.enc_prop, &d_exp, None)?);
                    }
                    None => add_into(&mut grad_id, &d_exp),
                }
            }
            reg = Some(r);
        }

        let upstream = exposure_grads.as_ref().map(|b| b.stats.as_slice());
        let mut grads = backward_with_stats(&id_cache, params, &self.enc_cfg, &self.id.enc_prop, &grad_id, upstream)?.params;
        if let Some(b) = &exposure_grads {
            grads.add_scaled(&b.params, 1.0);
        }
        let norm_stats = id_cache.norm_stats().to_vec();
        Ok(ObjectiveEval {
            sup,
            reg,
            total,
            grads,
            logits: id_cache.into_logits(),
            norm_stats,
        })
    }
}

fn add_into(a: &mut DenseMatrix, b: &DenseMatrix) {
    for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *x += y;
    }
}

/// Full-batch training for `tc.epochs` epochs. Returns the parameters from
/// the epoch with the lowest validation cross-entropy (earliest on ties),
/// with the column statistics of that epoch's forward pass stored in them.
pub fn train(bench: &Benchmark, enc_cfg: &EncoderConfig, tc: &TrainConfig) -> Result<TrainOutcome> {
    let objective = Objective::new(bench, enc_cfg, tc)?;
    let valid = &bench.splits.valid;
    if valid.is_empty() {
        return Err(Error::invalid("validation split is empty"));
    }
    let g = objective.id_graph();
    let mut params = init_params(enc_cfg, g.num_features(), derive_seed(tc.seed, "init"))?;
    let decay = params.decay_mask();
    let mut flat = params.trainable_flat();
    let mut state = AdamState::new(flat.len());

    let mut records = Vec::with_capacity(tc.epochs);
    let mut best: Option<(f64, usize, EncoderParams)> = None;
    for epoch in 1..=tc.epochs {
        let diverged = |e: Error| match e {
            Error::NonFinite(_) => Error::Diverged { epoch },
            other => other,
        };
        let ev = objective.eval(&params).map_err(diverged)?;
        let val = sup_loss(&ev.logits, g.labels(), valid)?;
        let reg_value = ev.reg.as_ref().map(|r| r.loss);
        if !ev.total.is_finite() || !val.sum.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        records.push(EpochRecord {
            epoch,
            train_loss: ev.sup.mean,
            val_loss: val.mean,
            val_acc: accuracy(&ev.logits, g.labels(), valid)?,
            reg_loss: reg_value,
        });
        if best.as_ref().is_none_or(|(v, _, _)| val.mean < *v) {
            let mut snap = params.clone();
            snap.norm_stats = ev.norm_stats;
            best = Some((val.mean, epoch, snap));
        }
        adam_step(&mut flat, &ev.grads.trainable_flat(), &decay, &mut state, tc.lr, tc.weight_decay);
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        params.set_trainable_flat(&flat);
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        config: tc.clone(),
        params,
        history: TrainHistory { epochs: records, best_epoch },
    })
}
