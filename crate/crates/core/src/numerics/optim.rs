//! Nesterov-accelerated Adam with the warming momentum schedule
//! `mu_t = beta1 * (1 - 0.5 * 0.96^(t * schedule_decay))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ParamSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule_decay: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        NadamConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            schedule_decay: 0.004,
        }
    }
}

impl NadamConfig {
    fn momentum(&self, step: u64) -> f64 {
        self.beta1 * (1.0 - 0.5 * 0.96f64.powf(step as f64 * self.schedule_decay))
    }
}

/// Per-parameter moment estimates plus the running momentum product.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub hyper: NadamConfig,
    step: u64,
    momentum_product: f64,
    first_moment: Vec<Tensor>,
    second_moment: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(params: &ParamSet, hyper: NadamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        OptimizerState {
            hyper,
            step: 0,
            momentum_product: 1.0,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Tensor] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Tensor] {
        &self.second_moment
    }
}

/// Applies one Nadam update from the accumulated gradients, then zeroes them.
///
/// Nothing is modified when any gradient is non-finite.
pub fn nadam_step(params: &mut ParamSet, state: &mut OptimizerState) -> Result<()> {
    if state.first_moment.len() != params.len() {
        return Err(Error::usage(format!(
            "optimizer state tracks {} parameters, set has {}",
            state.first_moment.len(),
            params.len()
        )));
    }
    for p in params.iter() {
        if !p.grad.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite gradient in parameter {:?}",
                p.name
            )));
        }
    }

    let h = state.hyper;
    let t = state.step + 1;
    let mu_t = h.momentum(t);
    let mu_next = h.momentum(t + 1);
    let prod_t = state.momentum_product * mu_t;
    let prod_next = prod_t * mu_next;
    let nu_correction = 1.0 - h.beta2.powf(t as f64);

    for ((p, m), v) in params
        .iter_mut()
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        let grads = p.grad.values();
        let values = p.value.values_mut();
        for (((theta, &g), m), v) in values
            .iter_mut()
            .zip(grads)
            .zip(m.values_mut())
            .zip(v.values_mut())
        {
            *m = mu_t * *m + (1.0 - mu_t) * g;
            *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
            let m_hat = mu_next * *m / (1.0 - prod_next) + (1.0 - mu_t) * g / (1.0 - prod_t);
            let v_hat = *v / nu_correction;
            *theta -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
        }
        p.grad.fill(0.0);
    }

    state.step = t;
    state.momentum_product = prod_t;
    Ok(())
}
