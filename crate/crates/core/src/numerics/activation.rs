use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn activation(x: &Tensor, kind: Activation) -> Tensor {
    match kind {
        Activation::Relu => x.map(|v| v.max(0.0)),
        Activation::Sigmoid => x.map(sigmoid),
    }
}

/// Gradient w.r.t. the activation input. Relu takes subgradient 0 at `x = 0`.
pub fn activation_backward(x: &Tensor, dy: &Tensor, kind: Activation) -> Result<Tensor> {
    match kind {
        Activation::Relu => x.zip_map(dy, |v, g| if v > 0.0 { g } else { 0.0 }),
        Activation::Sigmoid => x.zip_map(dy, |v, g| {
            let s = sigmoid(v);
            g * s * (1.0 - s)
        }),
    }
}
