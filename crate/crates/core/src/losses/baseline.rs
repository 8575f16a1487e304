//! Reference losses for ablations. Each returns its value and exact gradient w.r.t. `p`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::Tensor;

pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Ce,
    Iou,
    Mae,
    Gce,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Tensor,
    /// Pixels whose probability was clamped into `[1e-7, 1 - 1e-7]`.
    pub clamped: usize,
}

fn clamp_prob(p: f64, clamped: &mut usize) -> f64 {
    if p < PROB_CLAMP {
        *clamped += 1;
        PROB_CLAMP
    } else if p > 1.0 - PROB_CLAMP {
        *clamped += 1;
        1.0 - PROB_CLAMP
    } else {
        p
    }
}

pub fn baseline_loss(p: &Tensor, g: &Tensor, kind: BaselineKind, gce_q: f64) -> Result<LossResult> {
    p.same_shape(g, "baseline_loss")?;
    let n = p.len() as f64;
    let mut clamped = 0;
    let (value, grad) = match kind {
        BaselineKind::Ce => {
            let mut value = 0.0;
            let mut grad = Vec::with_capacity(p.len());
            for (&pi, &gi) in p.data().iter().zip(g.data()) {
                let pc = clamp_prob(pi, &mut clamped);
                value -= gi * pc.ln() + (1.0 - gi) * (1.0 - pc).ln();
                grad.push((-gi / pc + (1.0 - gi) / (1.0 - pc)) / n);
            }
            (value / n, grad)
        }
        BaselineKind::Gce => {
            let mut value = 0.0;
            let mut grad = Vec::with_capacity(p.len());
            for (&pi, &gi) in p.data().iter().zip(g.data()) {
                let pc = clamp_prob(pi, &mut clamped);
                // probability assigned to the labelled class
                let pt = gi * pc + (1.0 - gi) * (1.0 - pc);
                value += (1.0 - pt.powf(gce_q)) / gce_q;
                grad.push(-pt.powf(gce_q - 1.0) * (2.0 * gi - 1.0) / n);
            }
            (value / n, grad)
        }
        BaselineKind::Mae => {
            let mut value = 0.0;
            let mut grad = Vec::with_capacity(p.len());
            for (&pi, &gi) in p.data().iter().zip(g.data()) {
                let d = pi - gi;
                value += d.abs();
                grad.push(if d == 0.0 { 0.0 } else { d.signum() / n });
            }
            (value / n, grad)
        }
        BaselineKind::Iou => {
            let (mut inter, mut total) = (0.0, 0.0);
            for (&pi, &gi) in p.data().iter().zip(g.data()) {
                inter += pi * gi;
                total += pi + gi;
            }
            let union = total - inter;
            if union <= 0.0 {
                (0.0, vec![0.0; p.len()])
            } else {
                let u2 = union * union;
                let grad = g
                    .data()
                    .iter()
                    .map(|&gi| -(gi * union - inter * (1.0 - gi)) / u2)
                    .collect();
                (1.0 - inter / union, grad)
            }
        }
    };
    Ok(LossResult {
        value,
        grad: Tensor::new(p.shape().to_vec(), grad)?,
        clamped,
    })
}
