use crate::error::{Error, Result};
use crate::numerics::{argmax, DenseMatrix};

fn check(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("metrics need at least one positive and one negative score"));
    }
    if pos.iter().chain(neg).any(|v| v.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    Ok(())
}

/// Scores tagged positive (`true`) or negative, sorted by descending score.
fn sorted_desc(pos: &[f64], neg: &[f64]) -> Vec<(f64, bool)> {
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    all
}

/// Groups of equal scores as `(positives, negatives)` counts, highest first.
fn tie_groups(pos: &[f64], neg: &[f64]) -> Vec<(u64, u64)> {
    let all = sorted_desc(pos, neg);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        let (mut p, mut n) = (0, 0);
        // == rather than total_cmp so that -0.0 and 0.0 tie.
        while i < all.len() && all[i].0 == s {
            if all[i].1 {
                p += 1;
            } else {
                n += 1;
            }
            i += 1;
        }
        groups.push((p, n));
    }
    groups
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auroc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check(pos, neg)?;
    // Twice the Mann-Whitney U, accumulated exactly in integers.
    let mut u2: u128 = 0;
    let mut neg_below = neg.len() as u128;
    for (p, n) in tie_groups(pos, neg) {
        neg_below -= n as u128;
        u2 += p as u128 * (2 * neg_below + n as u128);
    }
    Ok(u2 as f64 / (2 * pos.len() as u128 * neg.len() as u128) as f64)
}

/// Area under the precision-recall curve with positives as the relevant
/// class: `sum (R_k - R_{k-1}) * P_k` over descending tie groups.
pub fn aupr(pos: &[f64], neg: &[f64]) -> Result<f64> {
    check(pos, neg)?;
    let np = pos.len() as f64;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0;
    for (p, n) in tie_groups(pos, neg) {
        tp += p;
        fp += n;
        if p > 0 {
            area += (p as f64 / np) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(area)
}

/// Smallest `k` with `k / n >= level`.
pub(crate) fn rank_count(n: usize, level: f64) -> usize {
    let mut k = ((level * n as f64).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / n as f64 >= level {
        k -= 1;
    }
    while k < n && (k as f64 / n as f64) < level {
        k += 1;
    }
    k
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid(format!("level must lie in (0, 1], got {level}")));
    }
    Ok(())
}

/// Fraction of negatives scoring at least `t`, where `t` is the highest
/// threshold that still admits a `level` fraction of positives.
pub fn fpr_at_tpr(pos: &[f64], neg: &[f64], level: f64) -> Result<f64> {
    check(pos, neg)?;
    check_level(level)?;
    let mut p = pos.to_vec();
    p.sort_by(|a, b| b.total_cmp(a));
    let t = p[rank_count(p.len(), level) - 1];
    let fp = neg.iter().filter(|&&s| s >= t).count();
    Ok(fp as f64 / neg.len() as f64)
}

/// Fraction of `mask` nodes whose arg-max logit equals the label (lowest
/// index wins ties).
pub fn accuracy(logits: &DenseMatrix, labels: &[i32], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::invalid("accuracy over an empty node set"));
    }
    let mut hits = 0usize;
    for &i in mask {
        if i >= logits.rows() || i >= labels.len() {
            return Err(Error::invalid(format!("node {i} out of range")));
        }
        if labels[i] < 0 {
            return Err(Error::invalid(format!("node {i} is unlabeled")));
        }
        if argmax(logits.row(i)) == labels[i] as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / mask.len() as f64)
}

/// Nearest-rank `level` quantile: the smallest value with at least a
/// `level` fraction of `values` at or below it.
pub fn calibrate_tau(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cannot calibrate a threshold on no values"));
    }
    check_level(level)?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("values contain NaN"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[rank_count(v.len(), level) - 1])
}
