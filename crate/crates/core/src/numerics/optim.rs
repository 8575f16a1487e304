use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A trainable tensor with its gradient and Adam moment estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub m: Tensor,
    pub v: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Param {
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `p` at step `t` (1-based).
pub fn adam_step(p: &mut Param, lr: f64, cfg: Adam, t: u64) -> Result<()> {
    if t < 1 {
        return Err(Error::invalid("adam_step", "step counter must be >= 1"));
    }
    let Adam { beta1, beta2, eps } = cfg;
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    let g = p.grad.data();
    let m = p.m.data_mut();
    for (mi, &gi) in m.iter_mut().zip(g) {
        *mi = beta1 * *mi + (1.0 - beta1) * gi;
    }
    let v = p.v.data_mut();
    for (vi, &gi) in v.iter_mut().zip(g) {
        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
    }
    let (m, v) = (p.m.data(), p.v.data());
    for ((x, &mi), &vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        *x -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Linear warmup followed by cosine annealing, evaluated per epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_init: f64,
    pub lr_peak: f64,
    pub lr_final: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            lr_init: 1e-7,
            lr_peak: 1e-4,
            lr_final: 1e-7,
            warmup_epochs: 10,
            total_epochs: 100,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0 && self.lr_init <= self.lr_peak) {
            return Err(Error::invalid("LrSchedule", "need 0 < lr_init <= lr_peak"));
        }
        if self.warmup_epochs >= self.total_epochs {
            return Err(Error::invalid("LrSchedule", "warmup_epochs must be < total_epochs"));
        }
        Ok(())
    }
}

pub fn lr_at(s: &LrSchedule, epoch: usize) -> Result<f64> {
    if epoch > s.total_epochs {
        return Err(Error::invalid(
            "lr_at",
            format!("epoch {epoch} beyond total {}", s.total_epochs),
        ));
    }
    if epoch <= s.warmup_epochs {
        let t = if s.warmup_epochs == 0 {
            1.0
        } else {
            epoch as f64 / s.warmup_epochs as f64
        };
        return Ok(s.lr_init + (s.lr_peak - s.lr_init) * t);
    }
    let t = (epoch - s.warmup_epochs) as f64 / (s.total_epochs - s.warmup_epochs) as f64;
    Ok(s.lr_final + (s.lr_peak - s.lr_final) * (1.0 + (std::f64::consts::PI * t).cos()) / 2.0)
}
