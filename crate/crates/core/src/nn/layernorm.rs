//! Layer normalization over the last axis.

use crate::error::{Error, Result};
use crate::nn::{Param, Parameterized};
use crate::tensor::Tensor;

pub const LAYERNORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Param,
    pub beta: Param,
    dim: usize,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Param::new(Tensor::filled(vec![dim], 1.0)),
            beta: Param::new(Tensor::zeros(vec![dim])),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, x: &Tensor, op: &'static str) -> Result<()> {
        if x.shape().last() != Some(&self.dim) || x.rank() < 1 {
            return Err(Error::ShapeMismatch {
                op,
                expected: vec![self.dim],
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// `(x - mean) / sqrt(var + eps) * gamma + beta` per last-axis row.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check(x, "layernorm_forward")?;
        x.check_finite("layernorm_forward input")?;
        let d = self.dim;
        let g = self.gamma.value.data();
        let b = self.beta.value.data();
        let mut y = vec![0.0; x.len()];
        for (row, out) in x.data().chunks(d).zip(y.chunks_mut(d)) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LAYERNORM_EPS).sqrt();
            for i in 0..d {
                out[i] = (row[i] - mean) * inv * g[i] + b[i];
            }
        }
        Tensor::new(x.shape().to_vec(), y)
    }

    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        self.check(x, "layernorm_backward")?;
        if x.shape() != dy.shape() {
            return Err(Error::ShapeMismatch {
                op: "layernorm_backward",
                expected: x.shape().to_vec(),
                actual: dy.shape().to_vec(),
            });
        }
        let d = self.dim;
        let g = self.gamma.value.data();
        let dg = self.gamma.grad.data_mut();
        let db = self.beta.grad.data_mut();
        let mut dx = vec![0.0; x.len()];
        for ((row, dyrow), dxrow) in x
            .data()
            .chunks(d)
            .zip(dy.data().chunks(d))
            .zip(dx.chunks_mut(d))
        {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LAYERNORM_EPS).sqrt();

            // xhat = (x - mean) * inv; dxhat = dy * gamma
            let mut mean_dxhat = 0.0;
            let mut mean_dxhat_xhat = 0.0;
            for i in 0..d {
                let xhat = (row[i] - mean) * inv;
                let dxhat = dyrow[i] * g[i];
                dg[i] += dyrow[i] * xhat;
                db[i] += dyrow[i];
                mean_dxhat += dxhat;
                mean_dxhat_xhat += dxhat * xhat;
            }
            mean_dxhat /= d as f64;
            mean_dxhat_xhat /= d as f64;
            for i in 0..d {
                let xhat = (row[i] - mean) * inv;
                let dxhat = dyrow[i] * g[i];
                dxrow[i] = inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
            }
        }
        Tensor::new(x.shape().to_vec(), dx)
    }
}

impl Parameterized for LayerNorm {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        f(format!("{prefix}.gamma"), &mut self.gamma);
        f(format!("{prefix}.beta"), &mut self.beta);
    }
}
