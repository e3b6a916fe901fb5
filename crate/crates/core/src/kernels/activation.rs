use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::kernels::DenseMatrix;

/// Numerically stable logistic function.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of the logistic function expressed through its output.
#[inline]
pub fn logistic_grad(y: f64) -> f64 {
    y * (1.0 - y)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Embedding nonlinearity applied to transformed and aggregated features.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Relu,
    Elu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative at pre-activation `x`.
    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu_grad(x),
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn forward(self, x: &DenseMatrix) -> DenseMatrix {
        x.map(|v| self.eval(v))
    }

    /// `upstream ⊙ act'(pre)`.
    pub fn backward(self, pre: &DenseMatrix, upstream: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(pre.shape(), upstream.shape());
        let data = pre
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(&x, &g)| g * self.grad(x))
            .collect();
        DenseMatrix::from_vec(pre.rows(), pre.cols(), data).unwrap()
    }

    /// Whether `x` sits where the derivative is discontinuous.
    pub fn has_kink_between(self, a: f64, b: f64) -> bool {
        match self {
            Activation::Relu | Activation::Elu => (a > 0.0) != (b > 0.0),
            Activation::Identity => false,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Elu => "elu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "relu" => Ok(Activation::Relu),
            "elu" => Ok(Activation::Elu),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::Config(format!(
                "activation must be relu|elu|identity, got {s:?}"
            ))),
        }
    }
}
