use rand::seq::SliceRandom;

use super::{Graph, Splits};
use crate::error::{Error, Result};
use crate::seed;

/// `(train, valid, test)` fractions of the labeled nodes.
pub type SplitRatios = (f64, f64, f64);

/// The 1:1:8 convention.
pub const DEFAULT_RATIOS: SplitRatios = (0.1, 0.1, 0.8);

/// Shuffles the labeled nodes with `seed` and cuts them into train, valid
/// and test. Train and valid sizes are floored; test takes the remainder.
/// Each returned set is sorted.
pub fn make_splits(g: &Graph, ratios: SplitRatios, seed: u64) -> Result<Splits> {
    let (tr, va, te) = ratios;
    if [tr, va, te].iter().any(|r| !(0.0..=1.0).contains(r)) || ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios {ratios:?} must be in [0, 1] and sum to 1"
        )));
    }
    let mut labeled = g.labeled_nodes();
    let n = labeled.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 labeled nodes to split, found {n}"
        )));
    }
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    let n_train = (tr * n as f64 + 1e-9).floor() as usize;
    let n_valid = (va * n as f64 + 1e-9).floor() as usize;
    let n_test = n - n_train - n_valid;
    for (name, ratio, size) in [("train", tr, n_train), ("valid", va, n_valid), ("test", te, n_test)] {
        if ratio > 0.0 && size == 0 {
            return Err(Error::invalid(format!(
                "{n} labeled nodes leave the {name} split empty"
            )));
        }
    }
    labeled.shuffle(&mut seed::rng(seed));
    let mut take = |k: usize| {
        let mut part: Vec<usize> = labeled.drain(..k).collect();
        part.sort_unstable();
        part
    };
    let train = take(n_train);
    let valid = take(n_valid);
    let test = take(n_test);
    Ok(Splits { train, valid, test })
}
