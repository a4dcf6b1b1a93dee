//! Bias-corrected Adam over the parameter walk of a model.

use crate::error::{Error, Result};
use crate::nn::{Param, Parameterized};

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment slots aligned with the parameter walk order. The
/// walk must present the same parameters in the same order on every step.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    t: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamState {
    pub fn new() -> Self {
        AdamState::default()
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, cfg: &AdamConfig, params: &mut [(String, &mut Param)]) -> Result<()> {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|(_, p)| (vec![0.0; p.value.len()], vec![0.0; p.value.len()]))
                .collect();
        }
        if self.moments.len() != params.len() {
            return Err(Error::invalid(
                "adam_step",
                format!(
                    "parameter walk changed: {} slots, {} params",
                    self.moments.len(),
                    params.len()
                ),
            ));
        }
        for ((name, p), _) in params.iter().zip(&self.moments) {
            if let Some(i) = p.grad.data().iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    name: format!("{name}[{i}]"),
                });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for ((_, p), (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            update_slot(cfg, bc1, bc2, p, m, v);
        }
        Ok(())
    }

    /// `step` over a model's parameter walk: gradients are validated
    /// before any value moves, then each parameter updates in walk order.
    pub fn step_params(&mut self, cfg: &AdamConfig, model: &mut dyn Parameterized) -> Result<()> {
        let mut finite_err = None;
        let mut sizes = Vec::new();
        model.visit_params("", &mut |name, p| {
            if finite_err.is_none() {
                if let Some(i) = p.grad.data().iter().position(|g| !g.is_finite()) {
                    finite_err = Some(Error::NonFiniteGradient {
                        name: format!("{name}[{i}]"),
                    });
                }
            }
            sizes.push(p.value.len());
        });
        if let Some(e) = finite_err {
            return Err(e);
        }
        if self.moments.is_empty() {
            self.moments = sizes.iter().map(|&l| (vec![0.0; l], vec![0.0; l])).collect();
        }
        if self.moments.len() != sizes.len() {
            return Err(Error::invalid(
                "adam_step",
                format!(
                    "parameter walk changed: {} slots, {} params",
                    self.moments.len(),
                    sizes.len()
                ),
            ));
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let moments = &mut self.moments;
        let mut slot = 0usize;
        model.visit_params("", &mut |_, p| {
            let (m, v) = &mut moments[slot];
            update_slot(cfg, bc1, bc2, p, m, v);
            slot += 1;
        });
        Ok(())
    }
}

fn update_slot(cfg: &AdamConfig, bc1: f64, bc2: f64, p: &mut Param, m: &mut [f64], v: &mut [f64]) {
    let grads = p.grad.data();
    for i in 0..grads.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    }
    let values = p.value.data_mut();
    for i in 0..values.len() {
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        values[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}
