//! Energy scores, graph propagation of energies, the MSP baseline and
//! thresholded decisions.
//!
//! The energy of a node is `-logsumexp(logits)`: lower means more
//! in-distribution. Propagation mixes each node's energy with the mean over
//! its neighbours, `e' = alpha * e + (1 - alpha) * D^-1 A e`, on the raw
//! adjacency (no self-loops). Nodes without neighbours keep their value.

use crate::error::{Error, Result};
use crate::numerics::{logsumexp, softmax_into, DenseMatrix, SparseMatrix};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyKind {
    Raw,
    Propagated { alpha: f64, steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyVector {
    values: Vec<f64>,
    kind: EnergyKind,
}

impl EnergyVector {
    /// Raw energies from explicit values. Values must be finite.
    pub fn raw(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("energy values must be finite".into()));
        }
        Ok(EnergyVector { values, kind: EnergyKind::Raw })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> EnergyKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at the given node indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.values[i]).collect()
    }
}

/// Per-node energy `-logsumexp(row)`.
pub fn node_energy(logits: &DenseMatrix) -> Result<EnergyVector> {
    if logits.cols() < 2 {
        return Err(Error::invalid(format!("energy needs at least 2 classes, got {}", logits.cols())));
    }
    EnergyVector::raw(logits.row_iter().map(|r| -logsumexp(r)).collect())
}

/// Turns a gradient with respect to energies into one with respect to the
/// logits: `d(-logsumexp)/dz = -softmax(z)`.
pub fn energy_grad_to_logits(logits: &DenseMatrix, grad_energy: &[f64]) -> Result<DenseMatrix> {
    if grad_energy.len() != logits.rows() {
        return Err(Error::invalid(format!(
            "{} energy gradients for {} logit rows",
            grad_energy.len(),
            logits.rows()
        )));
    }
    let c = logits.cols();
    let mut out = DenseMatrix::zeros(logits.rows(), c);
    let mut p = vec![0.0; c];
    for (i, &g) in grad_energy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        softmax_into(logits.row(i), &mut p);
        for (o, &pc) in out.row_mut(i).iter_mut().zip(&p) {
            *o = -g * pc;
        }
    }
    Ok(out)
}

/// The linear map applied `steps` times by energy propagation, with its
/// transpose for gradient pullback.
#[derive(Debug, Clone)]
pub struct Propagation {
    adj: SparseMatrix,
    degree: Vec<f64>,
    alpha: f64,
    steps: usize,
}

impl Propagation {
    /// `adj` is the raw adjacency of the scored graph: square, non-negative,
    /// and without stored self-loops.
    pub fn new(adj: &SparseMatrix, alpha: f64, steps: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if adj.rows() != adj.cols() {
            return Err(Error::invalid("propagation needs a square adjacency"));
        }
        if adj.values().iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("adjacency has negative weights"));
        }
        if adj.has_diagonal() {
            return Err(Error::invalid("adjacency has self-loops"));
        }
        Ok(Propagation {
            degree: adj.row_sums(),
            adj: adj.clone(),
            alpha,
            steps,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.rows()
    }

    fn step(&self, e: &[f64]) -> Vec<f64> {
        let beta = 1.0 - self.alpha;
        (0..e.len())
            .map(|i| {
                let d = self.degree[i];
                if d == 0.0 {
                    return e[i];
                }
                let (cols, vals) = self.adj.row(i);
                let s: f64 = cols.iter().zip(vals).map(|(&j, &w)| w * e[j]).sum();
                self.alpha * e[i] + beta * (s / d)
            })
            .collect()
    }

    fn step_t(&self, g: &[f64]) -> Vec<f64> {
        let beta = 1.0 - self.alpha;
        let mut out = vec![0.0; g.len()];
        for i in 0..g.len() {
            let d = self.degree[i];
            if d == 0.0 {
                out[i] += g[i];
                continue;
            }
            out[i] += self.alpha * g[i];
            let gi = beta * g[i] / d;
            let (cols, vals) = self.adj.row(i);
            for (&j, &w) in cols.iter().zip(vals) {
                out[j] += w * gi;
            }
        }
        out
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.num_nodes() {
            return Err(Error::invalid(format!(
                "vector of length {n} for a {}-node graph",
                self.num_nodes()
            )));
        }
        Ok(())
    }

    /// Applies the update `steps` times.
    pub fn apply(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.check_len(e.len())?;
        let mut cur = e.to_vec();
        if self.alpha == 1.0 {
            return Ok(cur);
        }
        for _ in 0..self.steps {
            cur = self.step(&cur);
        }
        Ok(cur)
    }

    /// Applies the transpose of the update `steps` times.
    pub fn pullback(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(g.len())?;
        let mut cur = g.to_vec();
        if self.alpha == 1.0 {
            return Ok(cur);
        }
        for _ in 0..self.steps {
            cur = self.step_t(&cur);
        }
        Ok(cur)
    }
}

/// Propagates raw energies over `adj`.
pub fn propagate_energy(e: &EnergyVector, adj: &SparseMatrix, alpha: f64, steps: usize) -> Result<EnergyVector> {
    if e.kind != EnergyKind::Raw {
        return Err(Error::invalid("energies are already propagated"));
    }
    let op = Propagation::new(adj, alpha, steps)?;
    Ok(EnergyVector {
        values: op.apply(&e.values)?,
        kind: EnergyKind::Propagated { alpha, steps },
    })
}

/// Maximum softmax probability per node; higher is more in-distribution.
pub fn msp_score(logits: &DenseMatrix) -> Vec<f64> {
    let mut p = vec![0.0; logits.cols()];
    logits
        .row_iter()
        .map(|r| {
            softmax_into(r, &mut p);
            p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// 1 (in-distribution) where the energy is at most `tau`, else 0.
pub fn detect(e: &EnergyVector, tau: f64) -> Vec<u8> {
    e.values.iter().map(|&v| u8::from(v <= tau)).collect()
}
