pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected Adam update in place. Weight decay is decoupled and
/// only touches entries where `decay` is true.
///
/// # Panics
/// If the slices and the state disagree in length.
pub fn adam_step(params: &mut [f64], grads: &[f64], decay: &[bool], state: &mut AdamState, lr: f64, weight_decay: f64) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), decay.len(), "parameter/decay-mask length mismatch");
    assert_eq!(params.len(), state.len(), "parameter/state length mismatch");
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        let mut update = m_hat / (v_hat.sqrt() + EPS);
        if weight_decay != 0.0 && decay[i] {
            update += weight_decay * params[i];
        }
        params[i] -= lr * update;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain scalar re-derivation of the same recurrence.
    fn scalar_oracle(w0: f64, lr: f64, steps: usize) -> f64 {
        let (mut w, mut m, mut v) = (w0, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = 2.0 * w;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32));
            let vh = v / (1.0 - 0.999f64.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + 1e-8);
        }
        w
    }

    #[test]
    fn zero_grad_leaves_params() {
        let mut p = vec![1.5, -2.0, 0.0];
        let mut s = AdamState::new(3);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0; 3], &[true; 3], &mut s, 0.1, 0.0);
        }
        assert_eq!(p, vec![1.5, -2.0, 0.0]);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = vec![0.0, 0.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[3.0, -0.02], &[false; 2], &mut s, 0.01, 0.0);
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn quadratic_trajectory_matches_scalar_oracle() {
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        for k in 1..=200 {
            let g = [2.0 * p[0]];
            adam_step(&mut p, &g, &[true], &mut s, 0.1, 0.0);
            if k == 100 || k == 200 {
                assert!((p[0] - scalar_oracle(1.0, 0.1, k)).abs() < 1e-12);
            }
        }
        // Adam oscillates around the minimum before settling.
        assert!(p[0].abs() < 1e-3, "{}", p[0]);
    }

    #[test]
    fn weight_decay_respects_mask() {
        let mut p = vec![1.0, 1.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &[true, false], &mut s, 0.1, 0.5);
        assert_eq!(p, vec![1.0 - 0.1 * 0.5, 1.0]);
    }
}
