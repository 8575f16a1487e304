use super::{baseline_loss, dice_boundary_loss, nc_grad, nc_loss, q_at, BaselineKind, LossKind, LossSpec};
use crate::error::{Error, Result};
use crate::numerics::{resize_to, resize_to_backward, sigmoid};
use crate::tensor::Tensor;

/// Value of the deep-supervision loss and its gradient w.r.t. every logit map.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeResult {
    pub value: f64,
    pub grads: Vec<Tensor>,
}

/// Region term and its gradient w.r.t. probabilities.
fn region_term(p: &Tensor, g: &Tensor, spec: &LossSpec, epoch: usize) -> Result<(f64, Tensor)> {
    let baseline = |kind| baseline_loss(p, g, kind, spec.gce_q).map(|r| (r.value, r.grad));
    match spec.kind {
        LossKind::Nc => {
            let q = q_at(spec, epoch);
            Ok((nc_loss(p, g, q)?, nc_grad(p, g, q, spec.grad_mode)?))
        }
        LossKind::Ce => baseline(BaselineKind::Ce),
        LossKind::Iou => baseline(BaselineKind::Iou),
        LossKind::Mae => baseline(BaselineKind::Mae),
        LossKind::Gce => baseline(BaselineKind::Gce),
        LossKind::CeIou => {
            let (a, mut ga) = baseline(BaselineKind::Ce)?;
            let (b, gb) = baseline(BaselineKind::Iou)?;
            ga.add_assign(&gb)?;
            Ok((a + b, ga))
        }
    }
}

/// Mean over supervised logit maps of `region(σ(z), g) + λ·dice_boundary(σ(z), g)`.
///
/// Maps smaller than `g` are upsampled to its size first.
pub fn composite_loss(logits: &[&Tensor], g: &Tensor, spec: &LossSpec, epoch: usize) -> Result<CompositeResult> {
    if logits.is_empty() {
        return Err(Error::invalid("composite_loss", "no outputs to supervise"));
    }
    let (_, gh, gw) = g.dims3()?;
    let k = logits.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(logits.len());
    for z in logits {
        let (_, zh, zw) = z.dims3()?;
        let z_full = resize_to(z, gh, gw)?;
        let p = z_full.map(sigmoid);
        let (region, mut dp) = region_term(&p, g, spec, epoch)?;
        value += region;
        if spec.dice_weight > 0.0 {
            let dice = dice_boundary_loss(&p, g)?;
            value += spec.dice_weight * dice.value;
            for (a, b) in dp.data_mut().iter_mut().zip(dice.grad.data()) {
                *a += spec.dice_weight * b;
            }
        }
        let dz = dp.zip_map(&p, |d, s| d * s * (1.0 - s) / k)?;
        grads.push(resize_to_backward(&dz, zh, zw)?);
    }
    Ok(CompositeResult {
        value: value / k,
        grads,
    })
}
