//! Elementwise activations and the scalar helpers used by the SSM block.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation input.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(
                "activation",
                format!("unknown kind `{other}`, expected relu or tanh"),
            )),
        }
    }
}

pub fn activation_forward(x: &Tensor, kind: Activation) -> Tensor {
    x.map(|v| kind.apply(v))
}

pub fn activation_backward(x: &Tensor, dy: &Tensor, kind: Activation) -> Result<Tensor> {
    if x.shape() != dy.shape() {
        return Err(Error::ShapeMismatch {
            op: "activation_backward",
            expected: x.shape().to_vec(),
            actual: dy.shape().to_vec(),
        });
    }
    let data = x
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&v, &g)| g * kind.derivative(v))
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

pub fn silu_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s + x * s * (1.0 - s)
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// d/dx softplus(x) = sigmoid(x).
pub fn softplus_derivative(x: f64) -> f64 {
    sigmoid(x)
}

/// Inverse of softplus, `ln(e^y - 1)`, used to seed the step-size bias.
pub fn softplus_inverse(y: f64) -> f64 {
    y.exp_m1().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{central_difference, max_relative_error, FD_STEP};
    use crate::rng::RngState;

    #[test]
    fn fixed_points() {
        assert_eq!(Activation::Tanh.apply(0.0), 0.0);
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.5), 2.5);
    }

    #[test]
    fn tanh_saturates() {
        for x in [20.0, 35.0, 1e6] {
            assert!((Activation::Tanh.apply(x) - 1.0).abs() < 1e-9);
            assert!((Activation::Tanh.apply(-x) + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!("gelu".parse::<Activation>().is_err());
        assert_eq!("relu".parse::<Activation>().unwrap(), Activation::Relu);
    }

    #[test]
    fn gradient_check_both_kinds() {
        for kind in [Activation::Relu, Activation::Tanh] {
            for seed in 0..10 {
                let mut rng = RngState::new(seed + 100);
                let x = Tensor::uniform(vec![6], -2.0, 2.0, &mut rng);
                let cot = Tensor::uniform(vec![6], -1.0, 1.0, &mut rng);
                let dx = activation_backward(&x, &cot, kind).unwrap();
                let numeric = central_difference(
                    &mut |t: &[f64]| {
                        let xt = Tensor::new(vec![6], t.to_vec()).unwrap();
                        activation_forward(&xt, kind)
                            .data()
                            .iter()
                            .zip(cot.data())
                            .map(|(y, c)| y * c)
                            .sum()
                    },
                    x.data(),
                    FD_STEP,
                );
                assert!(max_relative_error(dx.data(), &numeric) < 1e-4);
            }
        }
    }

    #[test]
    fn softplus_inverse_round_trips() {
        for y in [0.01, 0.05, 0.1, 1.0] {
            assert!((softplus(softplus_inverse(y)) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn silu_derivative_matches_fd() {
        for x in [-3.0, -0.4, 0.0, 0.7, 2.5] {
            let h = 1e-6;
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((silu_derivative(x) - fd).abs() < 1e-8);
        }
    }
}
