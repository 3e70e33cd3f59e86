//! Adaptive-moment optimizer and the linear-decay learning-rate rule.

use crate::error::{Error, Result};

pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment buffers, one per parameter tensor.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One update over parallel lists of parameter and gradient tensors.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameter tensors, {} gradients",
            params.len(),
            grads.len()
        )));
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.v = state.m.clone();
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || state.m.get(i).map(Vec::len) != Some(p.len()) {
            return Err(Error::ShapeMismatch(format!(
                "tensor {i}: parameter/gradient/state lengths differ"
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..p.len() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            p[j] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

/// Constant `base_lr` for the first `epochs` epochs, then linear decay to zero
/// over `decay_epochs`.
pub fn lr_lambda(epoch: usize, base_lr: f64, epochs: usize, decay_epochs: usize) -> f64 {
    if epoch < epochs {
        return base_lr;
    }
    if decay_epochs == 0 {
        return 0.0;
    }
    let into_decay = (epoch - epochs) as f64 / decay_epochs as f64;
    base_lr * (1.0 - into_decay).max(0.0)
}
