use rand_chacha::ChaCha8Rng;

use super::layers::{relu, relu_backward_from_output, Conv};
use super::params::{Grads, ParamSet};
use crate::error::Result;
use crate::numerics::{concat_channels, resize_to, resize_to_backward, split_channels, ConvGeom};
use crate::tensor::Tensor;

const DILATIONS: [usize; 3] = [1, 2, 4];

/// Three dilated 3×3 branches, a 1×1 projection to the deep representation,
/// and a 3×3 head producing the coarse mask logits.
#[derive(Clone, Debug)]
pub struct Aspp {
    branches: Vec<Conv>,
    proj: Conv,
    head: Conv,
    width: usize,
}

#[derive(Clone, Debug)]
pub struct AsppTape {
    input: Tensor,
    branch_out: Vec<Tensor>,
    cat: Tensor,
    deep: Tensor,
    mask_hw: (usize, usize),
}

impl Aspp {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, c_in: usize, width: usize) -> Self {
        let branches = DILATIONS
            .iter()
            .map(|&d| Conv::new(ps, rng, &format!("aspp.d{d}"), c_in, width, 3, ConvGeom::same(3, d)))
            .collect();
        Aspp {
            branches,
            proj: Conv::new(ps, rng, "aspp.proj", 3 * width, width, 1, ConvGeom::same(1, 1)),
            head: Conv::new(ps, rng, "aspp.head", width, 1, 3, ConvGeom::same(3, 1)),
            width,
        }
    }

    /// Returns the deep representation and the mask logits upsampled to `out_h × out_w`.
    pub fn forward(&self, ps: &ParamSet, x: &Tensor, out_h: usize, out_w: usize) -> Result<(Tensor, Tensor, AsppTape)> {
        let branch_out = self
            .branches
            .iter()
            .map(|b| b.forward(ps, x).map(|y| relu(&y)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = branch_out.iter().collect();
        let cat = concat_channels(&refs)?;
        let deep = relu(&self.proj.forward(ps, &cat)?);
        let small = self.head.forward(ps, &deep)?;
        let (_, sh, sw) = small.dims3()?;
        let m4 = resize_to(&small, out_h, out_w)?;
        Ok((
            deep.clone(),
            m4,
            AsppTape {
                input: x.clone(),
                branch_out,
                cat,
                deep,
                mask_hw: (sh, sw),
            },
        ))
    }

    /// Backpropagates the mask-logit gradient; returns the gradient w.r.t. the input.
    pub fn backward(&self, ps: &ParamSet, t: &AsppTape, d_m4: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let d_small = resize_to_backward(d_m4, t.mask_hw.0, t.mask_hw.1)?;
        let d_deep = self.head.backward(ps, &t.deep, &d_small, grads)?;
        let d_deep = relu_backward_from_output(&t.deep, &d_deep)?;
        let d_cat = self.proj.backward(ps, &t.cat, &d_deep, grads)?;
        let parts = split_channels(&d_cat, &[self.width; 3])?;
        let mut dx: Option<Tensor> = None;
        for ((branch, out), dp) in self.branches.iter().zip(&t.branch_out).zip(&parts) {
            let dpre = relu_backward_from_output(out, dp)?;
            let d = branch.backward(ps, &t.input, &dpre, grads)?;
            match dx.as_mut() {
                Some(acc) => acc.add_assign(&d)?,
                None => dx = Some(d),
            }
        }
        Ok(dx.expect("three branches"))
    }
}
