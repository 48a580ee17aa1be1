use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, TrainConfig, TrainOutcome};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::graphdata::Benchmark;

/// Candidate values for each searched hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lr: Vec<f64>,
    pub lambda: Vec<f64>,
    pub t_in: Vec<f64>,
    pub t_out: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lr: vec![0.1, 0.01, 0.001],
            lambda: vec![0.01, 0.1, 1.0],
            t_in: vec![-9.0, -7.0, -5.0],
            t_out: vec![-1.0, -2.0, -3.0, -4.0],
        }
    }
}

impl Grid {
    /// A grid holding exactly the values of `tc`.
    pub fn single(tc: &TrainConfig) -> Self {
        Grid {
            lr: vec![tc.lr],
            lambda: vec![tc.lambda],
            t_in: vec![tc.t_in],
            t_out: vec![tc.t_out],
        }
    }

    pub fn len(&self) -> usize {
        self.lr.len() * self.lambda.len() * self.t_in.len() * self.t_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination applied to `base`, ordered lr, lambda, t_in, t_out
    /// (the last varying fastest).
    pub fn configs(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &lr in &self.lr {
            for &lambda in &self.lambda {
                for &t_in in &self.t_in {
                    for &t_out in &self.t_out {
                        out.push(TrainConfig { lr, lambda, t_in, t_out, ..base.clone() });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub index: usize,
    pub config: TrainConfig,
    pub status: RunStatus,
    /// Validation cross-entropy at the selected epoch (infinite if diverged).
    pub val_loss: f64,
    pub val_acc: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the winner.
    pub best_index: usize,
    pub best: TrainOutcome,
}

/// Trains every grid point and keeps the one with the lowest validation
/// loss (earliest on ties). Runs on at most `threads` worker threads; the
/// result does not depend on the thread count.
pub fn grid_search(
    bench: &Benchmark,
    enc_cfg: &EncoderConfig,
    base: &TrainConfig,
    grid: &Grid,
    threads: usize,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::config("grid has no points"));
    }
    let configs = grid.configs(base);
    for c in &configs {
        c.validate()?;
    }
    // Inner `Err` carries the epoch of a diverged run.
    let run = |c: &TrainConfig| -> Result<std::result::Result<TrainOutcome, usize>> {
        match train(bench, enc_cfg, c) {
            Ok(o) => Ok(Ok(o)),
            Err(Error::Diverged { epoch }) => Ok(Err(epoch)),
            Err(e) => Err(e),
        }
    };
    let results: Vec<_> = if threads <= 1 {
        configs.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::config(format!("cannot start worker threads: {e}")))?;
        pool.install(|| configs.par_iter().map(run).collect())
    };

    let mut rows = Vec::with_capacity(configs.len());
    let mut best: Option<(usize, TrainOutcome)> = None;
    for (index, (config, r)) in configs.into_iter().zip(results).enumerate() {
        match r? {
            Ok(outcome) => {
                let rec = outcome.history.best();
                rows.push(GridRow {
                    index,
                    config,
                    status: RunStatus::Ok,
                    val_loss: rec.val_loss,
                    val_acc: rec.val_acc,
                    best_epoch: outcome.history.best_epoch,
                });
                let better = best
                    .as_ref()
                    .is_none_or(|(_, b)| rec.val_loss < b.history.best().val_loss);
                if better {
                    best = Some((index, outcome));
                }
            }
            Err(epoch) => rows.push(GridRow {
                index,
                config,
                status: RunStatus::Diverged { epoch },
                val_loss: f64::INFINITY,
                val_acc: 0.0,
                best_epoch: 0,
            }),
        }
    }
    let Some((best_index, best)) = best else {
        let epoch = rows
            .iter()
            .filter_map(|r| match r.status {
                RunStatus::Diverged { epoch } => Some(epoch),
                RunStatus::Ok => None,
            })
            .min()
            .unwrap_or(0);
        return Err(Error::Diverged { epoch });
    };
    Ok(GridOutcome { rows, best_index, best })
}

/// Header of the grid results CSV.
pub const GRID_HEADER: &str = "index,lr,lambda,t_in,t_out,status,best_epoch,val_loss,val_acc,selected";

/// One row per grid point, in grid order.
pub fn write_grid_csv(outcome: &GridOutcome, path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str(GRID_HEADER);
    s.push('\n');
    for r in &outcome.rows {
        let status = match r.status {
            RunStatus::Ok => "ok".to_string(),
            RunStatus::Diverged { epoch } => format!("diverged@{epoch}"),
        };
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.config.lr,
            r.config.lambda,
            r.config.t_in,
            r.config.t_out,
            status,
            r.best_epoch,
            r.val_loss,
            r.val_acc,
            u8::from(r.index == outcome.best_index)
        )
        .expect("writing to a String");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
