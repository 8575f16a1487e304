//! Noise-correction loss: `Σ|p - g|^q / (Σ(p + g) - Σ p·g)` for `q ∈ [1, 2]`.
//!
//! At `q = 2` it behaves like a soft-IoU loss; at `q = 1` every mismatched pixel
//! contributes the same gradient magnitude once the denominator is held fixed.

use super::GradMode;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

struct Terms {
    numerator: f64,
    denominator: f64,
}

fn terms(p: &Tensor, g: &Tensor, q: f64) -> Result<Terms> {
    p.same_shape(g, "nc_loss")?;
    let mut numerator = 0.0;
    let mut sum_pg = 0.0;
    let mut inter = 0.0;
    for (&pi, &gi) in p.data().iter().zip(g.data()) {
        numerator += (pi - gi).abs().powf(q);
        sum_pg += pi + gi;
        inter += pi * gi;
    }
    let denominator = sum_pg - inter;
    if denominator <= 0.0 {
        return Err(Error::ZeroDenominator { op: "nc_loss" });
    }
    Ok(Terms {
        numerator,
        denominator,
    })
}

pub fn nc_loss(p: &Tensor, g: &Tensor, q: f64) -> Result<f64> {
    let t = terms(p, g, q)?;
    Ok(t.numerator / t.denominator)
}

/// `d|d|^q / dd`, with subgradient 0 at `d = 0`.
#[inline]
fn pow_abs_grad(d: f64, q: f64) -> f64 {
    if d == 0.0 {
        0.0
    } else {
        q * d.abs().powf(q - 1.0) * d.signum()
    }
}

pub fn nc_grad(p: &Tensor, g: &Tensor, q: f64, mode: GradMode) -> Result<Tensor> {
    let Terms {
        numerator,
        denominator,
    } = terms(p, g, q)?;
    match mode {
        GradMode::DetachedDenominator => p.zip_map(g, |pi, gi| pow_abs_grad(pi - gi, q) / denominator),
        GradMode::Exact => {
            // split so that foreground pixels reproduce the detached value bit for bit
            let den2 = denominator * denominator;
            p.zip_map(g, |pi, gi| {
                pow_abs_grad(pi - gi, q) / denominator - numerator * (1.0 - gi) / den2
            })
        }
    }
}
