use crate::error::{Error, Result};
use crate::numerics::{logsumexp, softmax_into, DenseMatrix};

/// Negative log-likelihood over a node set.
#[derive(Debug, Clone)]
pub struct SupLoss {
    /// Summed over the mask; this is what gets optimized.
    pub sum: f64,
    /// `sum / |mask|`, for logging.
    pub mean: f64,
    /// Gradient of `sum` with respect to the logits; zero off the mask.
    pub grad: DenseMatrix,
}

pub fn sup_loss(logits: &DenseMatrix, labels: &[i32], mask: &[usize]) -> Result<SupLoss> {
    if mask.is_empty() {
        return Err(Error::invalid("supervised loss over an empty node set"));
    }
    if labels.len() != logits.rows() {
        return Err(Error::invalid(format!("{} labels for {} logit rows", labels.len(), logits.rows())));
    }
    let c = logits.cols();
    let mut grad = DenseMatrix::zeros(logits.rows(), c);
    let mut sum = 0.0;
    for &i in mask {
        if i >= logits.rows() {
            return Err(Error::invalid(format!("node {i} out of range")));
        }
        let y = labels[i];
        if y < 0 || y as usize >= c {
            return Err(Error::invalid(format!("node {i} has label {y}, expected 0..{c}")));
        }
        let y = y as usize;
        let row = logits.row(i);
        sum += logsumexp(row) - row[y];
        let g = grad.row_mut(i);
        softmax_into(row, g);
        g[y] -= 1.0;
    }
    Ok(SupLoss { sum, mean: sum / mask.len() as f64, grad })
}

/// Squared hinge penalties keeping in-distribution energies below `t_in`
/// and exposure energies above `t_out`.
#[derive(Debug, Clone)]
pub struct RegLoss {
    pub loss: f64,
    pub grad_id: Vec<f64>,
    pub grad_ood: Vec<f64>,
}

pub fn reg_loss(e_id: &[f64], e_ood: &[f64], t_in: f64, t_out: f64) -> Result<RegLoss> {
    if !(t_in < t_out) {
        return Err(Error::config(format!("t_in ({t_in}) must be below t_out ({t_out})")));
    }
    if e_id.is_empty() || e_ood.is_empty() {
        return Err(Error::invalid("regularizer needs nonempty in- and out-of-distribution sets"));
    }
    let n_id = e_id.len() as f64;
    let n_ood = e_ood.len() as f64;
    let mut loss_id = 0.0;
    let grad_id = e_id
        .iter()
        .map(|&e| {
            let h = (e - t_in).max(0.0);
            loss_id += h * h;
            2.0 * h / n_id
        })
        .collect();
    let mut loss_ood = 0.0;
    let grad_ood = e_ood
        .iter()
        .map(|&e| {
            let h = (t_out - e).max(0.0);
            loss_ood += h * h;
            -2.0 * h / n_ood
        })
        .collect();
    Ok(RegLoss {
        loss: loss_id / n_id + loss_ood / n_ood,
        grad_id,
        grad_ood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_log_c() {
        let l = DenseMatrix::zeros(1, 7);
        let s = sup_loss(&l, &[3], &[0]).unwrap();
        assert!((s.mean - 7f64.ln()).abs() < 1e-15);
        let confident = DenseMatrix::from_rows(&[vec![0.0, 800.0]]).unwrap();
        assert!(sup_loss(&confident, &[1], &[0]).unwrap().sum < 1e-300);
    }

    #[test]
    fn sup_grad_off_mask_is_zero_and_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let l = DenseMatrix::new(6, 4, (0..24).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let labels = [0, 3, -1, 2, 1, 1];
        let mask = [0, 1, 4];
        let s = sup_loss(&l, &labels, &mask).unwrap();
        for r in [2, 3, 5] {
            assert!(s.grad.row(r).iter().all(|&g| g == 0.0));
        }
        let err = finite_diff_check(
            |x| sup_loss(&DenseMatrix::new(6, 4, x.to_vec()).unwrap(), &labels, &mask).unwrap().sum,
            l.as_slice(),
            s.grad.as_slice(),
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
        assert!(sup_loss(&l, &labels, &[2]).is_err());
        assert!(sup_loss(&l, &labels, &[]).is_err());
    }

    #[test]
    fn reg_within_bounds_is_exactly_zero() {
        let r = reg_loss(&[-10.0, -9.0], &[0.5, -1.0], -9.0, -1.0).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grad_id.iter().chain(&r.grad_ood).all(|&g| g == 0.0));
    }

    #[test]
    fn reg_single_violation() {
        let r = reg_loss(&[-6.0, -9.0, -12.0], &[0.0], -7.0, -3.0).unwrap();
        assert_eq!(r.loss, 1.0 / 3.0);
        assert_eq!(r.grad_id, vec![2.0 / 3.0, 0.0, 0.0]);
        assert!(reg_loss(&[0.0], &[0.0], -1.0, -1.0).is_err());
        assert!(reg_loss(&[], &[0.0], -5.0, -1.0).is_err());
    }

    #[test]
    fn reg_grad_matches_fd() {
        let e = [-4.0, -8.2, -6.5, -2.0, -3.3, -0.4];
        let r = reg_loss(&e[..3], &e[3..], -7.0, -3.0).unwrap();
        let grad: Vec<f64> = r.grad_id.iter().chain(&r.grad_ood).copied().collect();
        let err = finite_diff_check(|x| reg_loss(&x[..3], &x[3..], -7.0, -3.0).unwrap().loss, &e, &grad, 1e-6).unwrap();
        assert!(err < 1e-6);
    }
}
