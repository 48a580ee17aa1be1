use crate::error::{Error, Result};

/// Central-difference gradient check.
///
/// Returns `max_i |(f(x + eps e_i) - f(x - eps e_i)) / 2eps - g_i| / max(1, |g_i|)`.
pub fn finite_diff_check<F>(mut f: F, x: &[f64], analytic_grad: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if x.len() != analytic_grad.len() {
        return Err(Error::invalid(format!(
            "gradient length {} does not match parameter length {}",
            analytic_grad.len(),
            x.len()
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("eps must be positive and finite"));
    }
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let plus = f(&probe);
        probe[i] = x[i] - eps;
        let minus = f(&probe);
        probe[i] = x[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective at coordinate {i} (+eps: {plus}, -eps: {minus})"
            )));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let g = analytic_grad[i];
        worst = worst.max((numeric - g).abs() / g.abs().max(1.0));
    }
    Ok(worst)
}
