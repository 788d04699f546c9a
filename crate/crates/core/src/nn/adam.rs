use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bias-corrected adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

/// One update of every parameter array. Moment buffers are allocated on the
/// first call and must keep their shapes afterwards.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    state: &mut OptimizerState,
) -> Result<()> {
    if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
        return Err(Error::Shape("gradients do not match parameters".into()));
    }
    if state.step == 0 && state.m.is_empty() {
        state.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len()
        || state
            .m
            .iter()
            .zip(params.iter())
            .any(|(m, p)| m.len() != p.len())
    {
        return Err(Error::Shape(
            "optimizer state does not match parameters".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = OptimizerState::new(0.1);
        adam_step(&mut [&mut p[..]], &[vec![0.0, 0.0]], &mut s).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [1.0];
        let mut s = OptimizerState::new(0.1);
        adam_step(&mut [&mut p[..]], &[vec![1.0]], &mut s).unwrap();
        // m̂ = 1, v̂ = 1 at t = 1.
        assert!((p[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn state_dependence() {
        // With a constant gradient bias-corrected steps all equal lr, so the
        // history only shows once the gradient changes.
        let mut stateful = vec![1.0];
        let mut s = OptimizerState::new(0.1);
        adam_step(&mut [&mut stateful[..]], &[vec![1.0]], &mut s).unwrap();
        let after_first = stateful[0];
        adam_step(&mut [&mut stateful[..]], &[vec![0.01]], &mut s).unwrap();

        let mut fresh = vec![after_first];
        let mut s2 = OptimizerState::new(0.1);
        adam_step(&mut [&mut fresh[..]], &[vec![0.01]], &mut s2).unwrap();
        assert_ne!(stateful, fresh);
        assert_eq!(s.step, 2);
        assert!(s.m[0][0] > 0.0 && s.v[0][0] > 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = [1.0, 2.0];
        let mut s = OptimizerState::new(0.1);
        assert!(adam_step(&mut [&mut p[..]], &[vec![0.0]], &mut s).is_err());
        adam_step(&mut [&mut p[..]], &[vec![0.0, 1.0]], &mut s).unwrap();
        let mut q = [1.0];
        assert!(adam_step(&mut [&mut q[..]], &[vec![0.0]], &mut s).is_err());
    }
}
