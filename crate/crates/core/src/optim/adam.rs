use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update. `step_index` counts from 1.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut AdamMoments,
    cfg: &AdamConfig,
    step_index: u32,
) -> Result<()> {
    if params.len() != grads.len() || moments.first.len() != params.len() || moments.second.len() != params.len() {
        return Err(Error::InvalidArgument("parameter, gradient and moment lengths differ".into()));
    }
    if step_index == 0 {
        return Err(Error::InvalidArgument("Adam step index starts at 1".into()));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(format!("#{i}")));
    }
    let bc1 = 1.0 - cfg.beta1.powi(step_index as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step_index as i32);
    for i in 0..params.len() {
        let g = grads[i];
        let m = cfg.beta1 * moments.first[i] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * moments.second[i] + (1.0 - cfg.beta2) * g * g;
        moments.first[i] = m;
        moments.second[i] = v;
        params[i] -= cfg.learning_rate * (m / bc1) / ((v / bc2).sqrt() + cfg.epsilon);
    }
    Ok(())
}
