//! 1-D convolution (cross-correlation) over the sequence axis with same
//! zero padding, so output length equals input length.

use crate::error::{Error, Result};
use crate::nn::{Param, Parameterized};
use crate::rng::RngState;
use crate::tensor::Tensor;

/// Weight layout `[c_out, c_in, kernel_width]`; kernel width must be odd.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Param,
    c_in: usize,
    c_out: usize,
    width: usize,
}

impl Conv1d {
    pub fn new(c_in: usize, c_out: usize, width: usize, rng: &mut RngState) -> Result<Self> {
        if width.is_multiple_of(2) || width == 0 {
            return Err(Error::invalid(
                "conv1d",
                format!("kernel width {width} must be odd"),
            ));
        }
        let bound = 1.0 / ((c_in * width) as f64).sqrt();
        Ok(Conv1d {
            weight: Param::new(Tensor::uniform(
                vec![c_out, c_in, width],
                -bound,
                bound,
                rng,
            )),
            bias: Param::new(Tensor::zeros(vec![c_out])),
            c_in,
            c_out,
            width,
        })
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `x` is `[batch, len, c_in]`, output `[batch, len, c_out]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (batch, len, c_in) = x.dims3("conv1d_forward")?;
        if c_in != self.c_in {
            return Err(Error::ShapeMismatch {
                op: "conv1d_forward",
                expected: vec![batch, len, self.c_in],
                actual: x.shape().to_vec(),
            });
        }
        x.check_finite("conv1d_forward input")?;
        let pad = (self.width / 2) as isize;
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let xs = x.data();
        let mut y = vec![0.0; batch * len * self.c_out];
        for r in 0..batch {
            for t in 0..len {
                for o in 0..self.c_out {
                    let mut acc = b[o];
                    for k in 0..self.width {
                        let src = t as isize + k as isize - pad;
                        if src < 0 || src >= len as isize {
                            continue;
                        }
                        let xoff = (r * len + src as usize) * c_in;
                        let woff = (o * c_in) * self.width + k;
                        for i in 0..c_in {
                            acc += w[woff + i * self.width] * xs[xoff + i];
                        }
                    }
                    y[(r * len + t) * self.c_out + o] = acc;
                }
            }
        }
        Tensor::new(vec![batch, len, self.c_out], y)
    }

    /// Adjoint of `forward`; accumulates dW and db, returns dx.
    pub fn backward(&mut self, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        let (batch, len, c_in) = x.dims3("conv1d_backward")?;
        let (by, ly, c_out) = dy.dims3("conv1d_backward")?;
        if c_in != self.c_in || c_out != self.c_out || by != batch || ly != len {
            return Err(Error::ShapeMismatch {
                op: "conv1d_backward",
                expected: vec![batch, len, self.c_out],
                actual: dy.shape().to_vec(),
            });
        }
        let pad = (self.width / 2) as isize;
        let w = self.weight.value.data();
        let dw = self.weight.grad.data_mut();
        let db = self.bias.grad.data_mut();
        let xs = x.data();
        let dys = dy.data();
        let mut dx = vec![0.0; batch * len * c_in];
        for r in 0..batch {
            for t in 0..len {
                for o in 0..c_out {
                    let g = dys[(r * len + t) * c_out + o];
                    db[o] += g;
                    for k in 0..self.width {
                        let src = t as isize + k as isize - pad;
                        if src < 0 || src >= len as isize {
                            continue;
                        }
                        let xoff = (r * len + src as usize) * c_in;
                        let woff = (o * c_in) * self.width + k;
                        for i in 0..c_in {
                            dw[woff + i * self.width] += g * xs[xoff + i];
                            dx[xoff + i] += g * w[woff + i * self.width];
                        }
                    }
                }
            }
        }
        Tensor::new(vec![batch, len, c_in], dx)
    }
}

impl Parameterized for Conv1d {
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Param)) {
        f(format!("{prefix}.weight"), &mut self.weight);
        f(format!("{prefix}.bias"), &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_difference, max_relative_error, FD_STEP};
    use crate::nn::Linear;

    #[test]
    fn even_kernel_width_rejected() {
        assert!(Conv1d::new(1, 1, 2, &mut RngState::new(0)).is_err());
        assert!(Conv1d::new(1, 1, 0, &mut RngState::new(0)).is_err());
        assert!(Conv1d::new(1, 1, 3, &mut RngState::new(0)).is_ok());
    }

    #[test]
    fn channel_mismatch_rejected() {
        let c = Conv1d::new(2, 2, 3, &mut RngState::new(0)).unwrap();
        let x = Tensor::zeros(vec![1, 4, 3]);
        assert!(c.forward(&x).is_err());
    }

    #[test]
    fn width_one_identity_channel_map() {
        let mut c = Conv1d::new(2, 2, 1, &mut RngState::new(0)).unwrap();
        c.weight.value = Tensor::new(vec![2, 2, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        c.bias.value = Tensor::zeros(vec![2]);
        let x = Tensor::uniform(vec![1, 3, 2], -1.0, 1.0, &mut RngState::new(1));
        let y = c.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn box_kernel_hand_case() {
        // kernel [1,1,1] over [1,2,3] with zero padding -> [3,6,5]
        let mut c = Conv1d::new(1, 1, 3, &mut RngState::new(0)).unwrap();
        c.weight.value = Tensor::new(vec![1, 1, 3], vec![1.0, 1.0, 1.0]).unwrap();
        c.bias.value = Tensor::zeros(vec![1]);
        let x = Tensor::new(vec![1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.forward(&x).unwrap().data(), &[3.0, 6.0, 5.0]);
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let mut c = Conv1d::new(2, 2, 3, &mut RngState::new(3)).unwrap();
        c.bias.value = Tensor::new(vec![2], vec![0.5, -0.25]).unwrap();
        let y = c.forward(&Tensor::zeros(vec![2, 4, 2])).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row, &[0.5, -0.25]);
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_dx() {
        let mut c = Conv1d::new(2, 3, 3, &mut RngState::new(4)).unwrap();
        let x = Tensor::uniform(vec![1, 5, 2], -1.0, 1.0, &mut RngState::new(5));
        let dx = c.backward(&x, &Tensor::zeros(vec![1, 5, 3])).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    /// A width-1 conv is a per-position linear layer; backward must agree.
    #[test]
    fn width_one_backward_matches_linear() {
        let mut rng = RngState::new(6);
        let mut conv = Conv1d::new(3, 2, 1, &mut rng).unwrap();
        let mut lin = Linear::zeroed(3, 2);
        // same weights: conv [o][i][0] -> linear [o][i]
        lin.weight.value = Tensor::new(vec![2, 3], conv.weight.value.data().to_vec()).unwrap();
        lin.bias.value = conv.bias.value.clone();

        let x = Tensor::uniform(vec![2, 4, 3], -1.0, 1.0, &mut rng);
        let dy = Tensor::uniform(vec![2, 4, 2], -1.0, 1.0, &mut rng);

        let dx_conv = conv.backward(&x, &dy).unwrap();
        let xf = x.clone().with_shape(vec![8, 3]).unwrap();
        let dyf = dy.clone().with_shape(vec![8, 2]).unwrap();
        let dx_lin = lin.backward(&xf, &dyf).unwrap();

        for (a, b) in dx_conv.data().iter().zip(dx_lin.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in conv.weight.grad.data().iter().zip(lin.weight.grad.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_check_random_instances() {
        for seed in 0..10 {
            let mut rng = RngState::new(seed + 40);
            let conv = Conv1d::new(2, 2, 3, &mut rng).unwrap();
            let x = Tensor::uniform(vec![2, 4, 2], -1.0, 1.0, &mut rng);
            let cot = Tensor::uniform(vec![2, 4, 2], -1.0, 1.0, &mut rng);
            let objective = |c: &Conv1d, xt: &Tensor| -> f64 {
                c.forward(xt)
                    .unwrap()
                    .data()
                    .iter()
                    .zip(cot.data())
                    .map(|(y, g)| y * g)
                    .sum()
            };

            let mut probe = conv.clone();
            probe.zero_grads();
            let dx = probe.backward(&x, &cot).unwrap();

            let theta: Vec<f64> = conv
                .weight
                .value
                .data()
                .iter()
                .chain(conv.bias.value.data())
                .copied()
                .collect();
            let numeric = central_difference(
                &mut |t: &[f64]| {
                    let mut c = conv.clone();
                    let wlen = c.weight.value.len();
                    c.weight.value.data_mut().copy_from_slice(&t[..wlen]);
                    c.bias.value.data_mut().copy_from_slice(&t[wlen..]);
                    objective(&c, &x)
                },
                &theta,
                FD_STEP,
            );
            let analytic: Vec<f64> = probe
                .weight
                .grad
                .data()
                .iter()
                .chain(probe.bias.grad.data())
                .copied()
                .collect();
            assert!(max_relative_error(&analytic, &numeric) < 1e-4);

            let numeric_dx = central_difference(
                &mut |t: &[f64]| {
                    let xt = Tensor::new(vec![2, 4, 2], t.to_vec()).unwrap();
                    objective(&conv, &xt)
                },
                x.data(),
                FD_STEP,
            );
            assert!(max_relative_error(dx.data(), &numeric_dx) < 1e-4);
        }
    }
}
