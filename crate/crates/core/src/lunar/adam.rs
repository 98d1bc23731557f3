//! Adam with L2 weight decay folded into the gradient
//! (`g <- grad + weight_decay * theta`), applied to weights and biases alike.

use ndarray::{Array1, Array2, Zip};

use super::mlp::{Gradients, MlpModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.1,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        let zw: Vec<_> = model.weights().iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        let zb: Vec<_> = model.biases().iter().map(|b| Array1::zeros(b.raw_dim())).collect();
        Self {
            m_w: zw.clone(),
            v_w: zw,
            m_b: zb.clone(),
            v_b: zb,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam update of `model` in place.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    let shapes_match = grads.weights.len() == model.n_layers()
        && state.m_w.len() == model.n_layers()
        && grads.weights.iter().zip(model.weights()).all(|(g, w)| g.dim() == w.dim())
        && grads.biases.iter().zip(model.biases()).all(|(g, b)| g.dim() == b.dim());
    if !shapes_match {
        return Err(Error::StaleCache);
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let update = |theta: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        let g = g + cfg.weight_decay * *theta;
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    };
    let (weights, biases) = model.params_mut();
    for l in 0..weights.len() {
        Zip::from(&mut weights[l])
            .and(&grads.weights[l])
            .and(&mut state.m_w[l])
            .and(&mut state.v_w[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
        Zip::from(&mut biases[l])
            .and(&grads.biases[l])
            .and(&mut state.m_b[l])
            .and(&mut state.v_b[l])
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}
