//! Dense affine layer `y = W x + b` over rows of a `[batch, d_in]` tensor.

use crate::error::{Error, Result};
use crate::nn::{Param, Parameterized};
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Weight layout is row-major `[d_out, d_in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    d_in: usize,
    d_out: usize,
}

impl Linear {
    /// Weights uniform in `(-1/sqrt(d_in), +1/sqrt(d_in))`, zero bias.
    pub fn new(d_in: usize, d_out: usize, rng: &mut RngState) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        Linear {
            weight: Param::new(Tensor::uniform(vec![d_out, d_in], -bound, bound, rng)),
            bias: Param::new(Tensor::zeros(vec![d_out])),
            d_in,
            d_out,
        }
    }

    /// All-zero weights and bias; with `d_in == d_out` and the weight set to
    /// the identity this layer is a no-op, which tests rely on.
    pub fn zeroed(d_in: usize, d_out: usize) -> Self {
        Linear {
            weight: Param::new(Tensor::zeros(vec![d_out, d_in])),
            bias: Param::new(Tensor::zeros(vec![d_out])),
            d_in,
            d_out,
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut l = Linear::zeroed(d, d);
        for i in 0..d {
            l.weight.value.data_mut()[i * d + i] = 1.0;
        }
        l
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (batch, d_in) = x.dims2("linear_forward")?;
        if d_in != self.d_in {
            return Err(Error::ShapeMismatch {
                op: "linear_forward",
                expected: vec![batch, self.d_in],
                actual: x.shape().to_vec(),
            });
        }
        x.check_finite("linear_forward input")?;
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let xs = x.data();
        let mut y = vec![0.0; batch * self.d_out];
        for r in 0..batch {
            let xrow = &xs[r * d_in..(r + 1) * d_in];
            let yrow = &mut y[r * self.d_out..(r + 1) * self.d_out];
            for (o, yo) in yrow.iter_mut().enumerate() {
                let wrow = &w[o * d_in..(o + 1) * d_in];
                let mut acc = b[o];
                for (wi, xi) in wrow.iter().zip(xrow) {
                    acc += wi * xi;
                }
                *yo = acc;
            }
        }
        Tensor::new(vec![batch, self.d_out], y)
    }

    /// Adjoint: returns `dx = W^T dy`, accumulates `dW += dy ⊗ x` and
    /// `db += dy` summed over the batch.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let (batch, d_in) = x.dims2("linear_backward")?;
        let (by, d_out) = dy.dims2("linear_backward")?;
        if d_in != self.d_in || d_out != self.d_out || by != batch {
            return Err(Error::ShapeMismatch {
                op: "linear_backward",
                expected: vec![batch, self.d_in, self.d_out],
                actual: vec![by, d_in, d_out],
            });
        }
        let w = self.weight.value.data();
        let dw = self.weight.grad.data_mut();
        let db = self.bias.grad.data_mut();
        let xs = x.data();
        let dys = dy.data();
        let mut dx = vec![0.0; batch * d_in];
        for r in 0..batch {
            let xrow = &xs[r * d_in..(r + 1) * d_in];
            let dyrow = &dys[r * d_out..(r + 1) * d_out];
            let dxrow = &mut dx[r * d_in..(r + 1) * d_in];
            for (o, &g) in dyrow.iter().enumerate() {
                db[o] += g;
                let wrow = &w[o * d_in..(o + 1) * d_in];
                let dwrow = &mut dw[o * d_in..(o + 1) * d_in];
                for i in 0..d_in {
                    dwrow[i] += g * xrow[i];
                    dxrow[i] += g * wrow[i];
                }
            }
        }
        Tensor::new(vec![batch, d_in], dx)
    }
}

impl Parameterized for Linear {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        f(format!("{prefix}.weight"), &mut self.weight);
        f(format!("{prefix}.bias"), &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_difference, max_relative_error, FD_STEP};

    fn linear_from(w: Vec<f64>, b: Vec<f64>, d_in: usize, d_out: usize) -> Linear {
        let mut l = Linear::zeroed(d_in, d_out);
        l.weight.value = Tensor::new(vec![d_out, d_in], w).unwrap();
        l.bias.value = Tensor::new(vec![d_out], b).unwrap();
        l
    }

    #[test]
    fn identity_passes_input_through() {
        let l = Linear::identity(2);
        let x = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let y = l.forward(&x).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn hand_case_single_output() {
        // x=[1,1], W=[[2,3]], b=[1] -> 2+3+1 = 6
        let l = linear_from(vec![2.0, 3.0], vec![1.0], 2, 1);
        let x = Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(l.forward(&x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn zero_input_returns_bias() {
        let l = linear_from(vec![4.0, -7.0, 0.5, 2.0], vec![5.0, -1.0], 2, 2);
        let x = Tensor::zeros(vec![1, 2]);
        assert_eq!(l.forward(&x).unwrap().data(), &[5.0, -1.0]);
    }

    #[test]
    fn forward_rejects_dim_mismatch() {
        let l = Linear::new(3, 2, &mut RngState::new(0));
        let x = Tensor::zeros(vec![1, 4]);
        match l.forward(&x) {
            Err(Error::ShapeMismatch { .. }) => {}
            other => panic!("expected ShapeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn backward_zero_cotangent_is_inert() {
        let mut l = Linear::new(3, 2, &mut RngState::new(1));
        let before = l.weight.grad.clone();
        let x = Tensor::uniform(vec![2, 3], -1.0, 1.0, &mut RngState::new(2));
        let dy = Tensor::zeros(vec![2, 2]);
        let dx = l.backward(&x, &dy).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert_eq!(l.weight.grad.data(), before.data());
    }

    #[test]
    fn backward_scalar_hand_case() {
        // x=[2], W=[[3]], dy=[1] -> dx=[3], dW += [2], db += [1]
        let mut l = linear_from(vec![3.0], vec![0.0], 1, 1);
        let x = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
        let dy = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let dx = l.backward(&x, &dy).unwrap();
        assert_eq!(dx.data(), &[3.0]);
        assert_eq!(l.weight.grad.data(), &[2.0]);
        assert_eq!(l.bias.grad.data(), &[1.0]);
    }

    #[test]
    fn batch_backward_equals_sum_of_rows() {
        let mut rng = RngState::new(5);
        let mut full = Linear::new(3, 2, &mut rng);
        let mut split = full.clone();
        let x = Tensor::uniform(vec![2, 3], -1.0, 1.0, &mut rng);
        let dy = Tensor::uniform(vec![2, 2], -1.0, 1.0, &mut rng);

        full.backward(&x, &dy).unwrap();

        for r in 0..2 {
            let xr = Tensor::new(vec![1, 3], x.data()[r * 3..(r + 1) * 3].to_vec()).unwrap();
            let dyr = Tensor::new(vec![1, 2], dy.data()[r * 2..(r + 1) * 2].to_vec()).unwrap();
            split.backward(&xr, &dyr).unwrap();
        }
        for (a, b) in full.weight.grad.data().iter().zip(split.weight.grad.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_forward_equals_per_row() {
        let mut rng = RngState::new(6);
        let l = Linear::new(4, 3, &mut rng);
        let x = Tensor::uniform(vec![5, 4], -1.0, 1.0, &mut rng);
        let y = l.forward(&x).unwrap();
        for r in 0..5 {
            let xr = Tensor::new(vec![1, 4], x.data()[r * 4..(r + 1) * 4].to_vec()).unwrap();
            let yr = l.forward(&xr).unwrap();
            assert_eq!(&y.data()[r * 3..(r + 1) * 3], yr.data());
        }
    }

    /// Finite-difference check of dW, db and dx on random 3x4 instances.
    #[test]
    fn gradient_check_random_instances() {
        for seed in 0..10 {
            let mut rng = RngState::new(seed);
            let l = Linear::new(4, 3, &mut rng);
            let x = Tensor::uniform(vec![3, 4], -1.0, 1.0, &mut rng);
            let cot = Tensor::uniform(vec![3, 3], -1.0, 1.0, &mut rng);
            let objective = |layer: &Linear, xt: &Tensor| -> f64 {
                layer
                    .forward(xt)
                    .unwrap()
                    .data()
                    .iter()
                    .zip(cot.data())
                    .map(|(y, c)| y * c)
                    .sum()
            };

            let mut layer = l.clone();
            layer.zero_grads();
            let dx = layer.backward(&x, &cot).unwrap();

            // parameters
            let theta: Vec<f64> = l
                .weight
                .value
                .data()
                .iter()
                .chain(l.bias.value.data())
                .copied()
                .collect();
            let numeric = central_difference(
                &mut |t: &[f64]| {
                    let mut probe = l.clone();
                    let wlen = probe.weight.value.len();
                    probe.weight.value.data_mut().copy_from_slice(&t[..wlen]);
                    probe.bias.value.data_mut().copy_from_slice(&t[wlen..]);
                    objective(&probe, &x)
                },
                &theta,
                FD_STEP,
            );
            let analytic: Vec<f64> = layer
                .weight
                .grad
                .data()
                .iter()
                .chain(layer.bias.grad.data())
                .copied()
                .collect();
            assert!(max_relative_error(&analytic, &numeric) < 1e-4);

            // input
            let numeric_dx = central_difference(
                &mut |t: &[f64]| {
                    let xt = Tensor::new(vec![3, 4], t.to_vec()).unwrap();
                    objective(&l, &xt)
                },
                x.data(),
                FD_STEP,
            );
            assert!(max_relative_error(dx.data(), &numeric_dx) < 1e-4);
        }
    }
}
