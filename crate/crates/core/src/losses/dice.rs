//! Boundary DICE: soft morphological gradients (3×3 max minus 3×3 min) of the
//! prediction and target, compared with a smoothed DICE coefficient.

use super::LossResult;
use crate::error::Result;
use crate::tensor::Tensor;

pub const DICE_SMOOTH: f64 = 1.0;

/// Boundary map with, per pixel, the flat indices of the window max and min.
struct Boundary {
    values: Vec<f64>,
    arg_max: Vec<usize>,
    arg_min: Vec<usize>,
}

fn morph_gradient(x: &Tensor) -> Result<Boundary> {
    let (c, h, w) = x.dims3()?;
    let n = c * h * w;
    let mut b = Boundary {
        values: vec![0.0; n],
        arg_max: vec![0; n],
        arg_min: vec![0; n],
    };
    let d = x.data();
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..h {
            for xx in 0..w {
                let o = base + y * w + xx;
                let (mut imax, mut imin) = (o, o);
                for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                    for nx in xx.saturating_sub(1)..=(xx + 1).min(w - 1) {
                        let i = base + ny * w + nx;
                        if d[i] > d[imax] {
                            imax = i;
                        }
                        if d[i] < d[imin] {
                            imin = i;
                        }
                    }
                }
                b.values[o] = d[imax] - d[imin];
                b.arg_max[o] = imax;
                b.arg_min[o] = imin;
            }
        }
    }
    Ok(b)
}

/// Boundary map of a `[C, H, W]` tensor.
pub fn boundary_map(x: &Tensor) -> Result<Tensor> {
    Tensor::new(x.shape().to_vec(), morph_gradient(x)?.values)
}

pub fn dice_boundary_loss(p: &Tensor, g: &Tensor) -> Result<LossResult> {
    p.same_shape(g, "dice_boundary_loss")?;
    let bp = morph_gradient(p)?;
    let bg = morph_gradient(g)?.values;
    let inter: f64 = bp.values.iter().zip(&bg).map(|(a, b)| a * b).sum();
    let total: f64 = bp.values.iter().sum::<f64>() + bg.iter().sum::<f64>();
    let den = total + DICE_SMOOTH;
    let num = 2.0 * inter + DICE_SMOOTH;
    let value = 1.0 - num / den;

    let mut grad = vec![0.0; p.len()];
    let den2 = den * den;
    for (o, &bgo) in bg.iter().enumerate() {
        // dL/d b_p[o]
        let gb = -(2.0 * bgo * den - num) / den2;
        grad[bp.arg_max[o]] += gb;
        grad[bp.arg_min[o]] -= gb;
    }
    Ok(LossResult {
        value,
        grad: Tensor::new(p.shape().to_vec(), grad)?,
        clamped: 0,
    })
}
