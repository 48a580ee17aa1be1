//! Detection metrics and full benchmark evaluation.
//!
//! In-distribution test nodes are the positive class. Every detector is
//! reduced to a per-node *detection value* `d` that is low for
//! in-distribution nodes (energy, propagated energy, or negative MSP); the
//! metrics rank by the score `s = -d`.

mod metrics;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::encoder::{forward, EncoderConfig, EncoderParams, NormMode};
use crate::energy::{msp_score, node_energy, Propagation, DEFAULT_ALPHA, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::graphdata::{Benchmark, Graph};
use crate::numerics::DenseMatrix;

pub use metrics::{accuracy, aupr, auroc, calibrate_tau, fpr_at_tpr};

/// True-positive rate used for FPR and threshold calibration.
pub const TPR_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Propagated energy.
    Gnnsafe,
    /// Raw energy.
    Energy,
    /// Maximum softmax probability.
    Msp,
}

impl std::str::FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gnnsafe" => Ok(ScoreKind::Gnnsafe),
            "energy" => Ok(ScoreKind::Energy),
            "msp" => Ok(ScoreKind::Msp),
            other => Err(format!("unknown score '{other}' (expected gnnsafe, energy or msp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub score: ScoreKind,
    pub alpha: f64,
    pub k: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            score: ScoreKind::Gnnsafe,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitReport {
    pub unit: usize,
    pub graph: String,
    pub auroc: f64,
    pub aupr: f64,
    pub fpr95: f64,
    pub num_id: usize,
    pub num_ood: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub auroc: f64,
    pub aupr: f64,
    pub fpr95: f64,
}

/// Everything `report.json` carries under `results`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub units: Vec<UnitReport>,
    /// Unweighted mean over units.
    pub mean: MeanMetrics,
    pub id_test_accuracy: f64,
    /// Detection threshold on `d` calibrated on validation nodes; reported
    /// only, never used by the metrics.
    pub tau: f64,
    pub num_id_test: usize,
}

/// Per-node values dumped for one OOD unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub node_id: usize,
    pub raw_energy: f64,
    pub propagated_energy: f64,
    pub msp: f64,
    pub is_ood: bool,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: DetectionReport,
    /// One table per OOD unit: in-distribution test nodes, then the unit's
    /// OOD nodes.
    pub scores: Vec<Vec<ScoreRow>>,
}

pub const SCORE_HEADER: &str = "node_id,raw_energy,propagated_energy,msp,is_ood_truth";

pub fn write_score_csv(rows: &[ScoreRow], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(rows.len() * 64);
    s.push_str(SCORE_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.node_id,
            r.raw_energy,
            r.propagated_energy,
            r.msp,
            u8::from(r.is_ood)
        )
        .expect("writing to a String");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_score_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SCORE_HEADER) {
        return Err(Error::format(path, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::format(path, format!("line {}: malformed row", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(ScoreRow {
                node_id: f[0].parse().map_err(|_| bad())?,
                raw_energy: num(f[1])?,
                propagated_energy: num(f[2])?,
                msp: num(f[3])?,
                is_ood: match f[4] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
            })
        })
        .collect()
}

impl ScoreRow {
    /// Ranking score for `kind`; higher is more in-distribution.
    pub fn score(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::Gnnsafe => -self.propagated_energy,
            ScoreKind::Energy => -self.raw_energy,
            ScoreKind::Msp => self.msp,
        }
    }
}

/// Metrics of one unit from its score table.
pub fn unit_metrics(rows: &[ScoreRow], kind: ScoreKind) -> Result<MeanMetrics> {
    let pos: Vec<f64> = rows.iter().filter(|r| !r.is_ood).map(|r| r.score(kind)).collect();
    let neg: Vec<f64> = rows.iter().filter(|r| r.is_ood).map(|r| r.score(kind)).collect();
    Ok(MeanMetrics {
        auroc: auroc(&pos, &neg)?,
        aupr: aupr(&pos, &neg)?,
        fpr95: fpr_at_tpr(&pos, &neg, TPR_LEVEL)?,
    })
}

/// Per-node quantities of one scored graph.
struct GraphScores {
    logits: DenseMatrix,
    raw: Vec<f64>,
    propagated: Vec<f64>,
    msp: Vec<f64>,
}

impl GraphScores {
    fn compute(g: &Graph, params: &EncoderParams, cfg: &EncoderConfig, s: &EvalSettings) -> Result<Self> {
        let prop = cfg.propagation(g)?;
        let logits = forward(params, cfg, g, &prop, NormMode::Stored)?.into_logits();
        let raw = node_energy(&logits)?.into_values();
        let propagated = Propagation::new(g.adjacency(), s.alpha, s.k)?.apply(&raw)?;
        let msp = msp_score(&logits);
        Ok(GraphScores { logits, raw, propagated, msp })
    }

    fn detection_value(&self, i: usize, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::Gnnsafe => self.propagated[i],
            ScoreKind::Energy => self.raw[i],
            ScoreKind::Msp => -self.msp[i],
        }
    }

    fn row(&self, i: usize, is_ood: bool) -> ScoreRow {
        ScoreRow {
            node_id: i,
            raw_energy: self.raw[i],
            propagated_energy: self.propagated[i],
            msp: self.msp[i],
            is_ood,
        }
    }
}

/// Scores every graph of the benchmark once (in Stored normalization mode)
/// and computes the report. Each graph is propagated on its own edges.
pub fn evaluate(bench: &Benchmark, params: &EncoderParams, cfg: &EncoderConfig, settings: &EvalSettings) -> Result<Evaluation> {
    let g = &bench.id_graph;
    params
        .check_shapes(cfg, g.num_features())
        .map_err(|e| Error::config(format!("model does not fit the benchmark: {e}")))?;
    if cfg.out_classes != g.num_classes() {
        return Err(Error::config(format!(
            "model predicts {} classes, benchmark has {}",
            cfg.out_classes,
            g.num_classes()
        )));
    }
    if bench.splits.test.is_empty() || bench.splits.valid.is_empty() {
        return Err(Error::invalid("benchmark needs nonempty test and validation splits"));
    }
    let id = GraphScores::compute(g, params, cfg, settings)?;
    let mut others: Vec<(Arc<Graph>, GraphScores)> = Vec::new();
    for u in &bench.ood_test {
        if !bench.shares_id_graph(u) && !others.iter().any(|(og, _)| Arc::ptr_eq(og, &u.graph)) {
            others.push((u.graph.clone(), GraphScores::compute(&u.graph, params, cfg, settings)?));
        }
    }

    let kind = settings.score;
    let test = &bench.splits.test;
    let id_rows: Vec<ScoreRow> = test.iter().map(|&i| id.row(i, false)).collect();
    let mut units = Vec::new();
    let mut scores = Vec::new();
    for (ui, u) in bench.ood_test.iter().enumerate() {
        let gs = if bench.shares_id_graph(u) {
            &id
        } else {
            &others.iter().find(|(og, _)| Arc::ptr_eq(og, &u.graph)).expect("scored above").1
        };
        let mut rows = id_rows.clone();
        rows.extend(u.mask.iter().map(|&i| gs.row(i, true)));
        let m = unit_metrics(&rows, kind)?;
        units.push(UnitReport {
            unit: ui,
            graph: u.graph.name().to_string(),
            auroc: m.auroc,
            aupr: m.aupr,
            fpr95: m.fpr95,
            num_id: test.len(),
            num_ood: u.mask.len(),
        });
        scores.push(rows);
    }
    let n = units.len() as f64;
    let mean = MeanMetrics {
        auroc: units.iter().map(|u| u.auroc).sum::<f64>() / n,
        aupr: units.iter().map(|u| u.aupr).sum::<f64>() / n,
        fpr95: units.iter().map(|u| u.fpr95).sum::<f64>() / n,
    };
    let labeled_test: Vec<usize> = test.iter().copied().filter(|&i| g.label(i).is_some()).collect();
    let id_test_accuracy = if labeled_test.is_empty() {
        0.0
    } else {
        accuracy(&id.logits, g.labels(), &labeled_test)?
    };
    let val: Vec<f64> = bench.splits.valid.iter().map(|&i| id.detection_value(i, kind)).collect();
    let tau = calibrate_tau(&val, TPR_LEVEL)?;
    Ok(Evaluation {
        report: DetectionReport {
            units,
            mean,
            id_test_accuracy,
            tau,
            num_id_test: test.len(),
        },
        scores,
    })
}

#[cfg(test)]
mod tests;
