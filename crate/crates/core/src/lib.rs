//! Energy-based out-of-distribution detection for node classification.
//!
//! A GCN (or MLP) encoder produces per-node logits; the negative
//! log-partition of those logits is a per-node *energy* that is low for
//! in-distribution nodes. Energies are smoothed over the graph by a few
//! steps of belief propagation before thresholding, and training can add a
//! bounded-energy regularizer when known OOD nodes are available.
//!
//! Module map:
//!
//! - [`numerics`]: dense/sparse algebra, stable reductions, gradient checks
//! - [`graphdata`]: graphs, the on-disk format, splits, benchmark generators
//! - [`encoder`]: GCN/MLP forward and hand-written backward passes
//! - [`energy`]: energy scores, propagation, baselines, thresholding
//! - [`training`]: losses, Adam, the training loop and grid search
//! - [`eval`]: AUROC, AUPR, FPR@95, accuracy and full benchmark reports
//! - [`cli`]: the `gnnsafe` command-line front end

pub mod cli;
pub mod encoder;
pub mod energy;
mod error;
pub mod eval;
pub mod graphdata;
pub mod numerics;
pub mod seed;
pub mod training;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/encoder.md")]
    mod encoder {}
    #[doc = include_str!("../../../book/src/energy.md")]
    mod energy {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
