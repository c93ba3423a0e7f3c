//! Adam with bias correction.

use super::{DiffError, ParamGroup};

#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_betas(len, 0.9, 0.999)
    }

    pub fn with_betas(len: usize, beta1: f64, beta2: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1,
            beta2,
            eps: 1e-8,
        }
    }
}

/// One Adam update. Rejects non-finite gradients without touching the
/// parameters or the optimizer state.
pub fn adam_step(
    group: &mut ParamGroup,
    grad: &[f64],
    state: &mut AdamState,
) -> Result<(), DiffError> {
    assert_eq!(group.values.len(), grad.len(), "gradient shape mismatch");
    assert_eq!(group.values.len(), state.first_moment.len());
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(DiffError::NonFiniteGradient(group.kind));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let lr = group.learning_rate;
    for i in 0..grad.len() {
        let m = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * grad[i];
        let v = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        group.values[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::GroupKind;
    use approx::assert_abs_diff_eq;

    fn group(values: Vec<f64>) -> ParamGroup {
        ParamGroup::new(GroupKind::Texels, values, 0.1)
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut g = group(vec![1.0, -2.0, 0.5]);
        let mut st = AdamState::new(3);
        for _ in 0..5 {
            adam_step(&mut g, &[0.0, 0.0, 0.0], &mut st).unwrap();
        }
        assert_eq!(g.values, vec![1.0, -2.0, 0.5]);
        assert_eq!(st.step_count, 5);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        // Hand trace: m_hat = 1, v_hat = 1 after bias correction, so the
        // update is lr / (1 + eps).
        let mut g = group(vec![3.0]);
        let mut st = AdamState::new(1);
        adam_step(&mut g, &[1.0], &mut st).unwrap();
        assert_abs_diff_eq!(g.values[0], 3.0 - 0.1 / (1.0 + 1e-8), epsilon = 1e-12);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn nan_gradient_is_rejected_and_leaves_state() {
        let mut g = group(vec![1.0, 2.0]);
        let mut st = AdamState::new(2);
        let err = adam_step(&mut g, &[0.1, f64::NAN], &mut st).unwrap_err();
        assert!(matches!(err, DiffError::NonFiniteGradient(_)));
        assert_eq!(g.values, vec![1.0, 2.0]);
        assert_eq!(st.step_count, 0);
        assert_eq!(st.first_moment, vec![0.0, 0.0]);
    }
}
