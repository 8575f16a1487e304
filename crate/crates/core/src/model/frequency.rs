//! Frequency transformer: all four levels are brought to level-1 size, stacked,
//! and Haar-decomposed. Shallow levels fuse with the HH subband, deep levels with LL.

use rand_chacha::ChaCha8Rng;

use super::encoder::FeaturePyramid;
use super::layers::{Gate, GateTape};
use super::params::{Grads, ParamSet};
use crate::error::Result;
use crate::numerics::{concat_channels, resize_to, resize_to_backward, split_channels};
use crate::tensor::Tensor;
use crate::wavelet::{dwt_haar, dwt_haar_backward, Subbands};

#[derive(Clone, Debug)]
pub struct FreqTransformer {
    gates: Vec<Gate>,
    width: usize,
}

#[derive(Clone, Debug)]
pub struct FreqTape {
    level_hw: Vec<(usize, usize)>,
    sub_shape: (usize, usize, usize),
    gates: Vec<GateTape>,
}

impl FreqTransformer {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, width: usize) -> Self {
        let gates = (1..=4)
            .map(|k| Gate::new(ps, rng, &format!("{name}.gate{k}"), width, 4 * width, width))
            .collect();
        FreqTransformer { gates, width }
    }

    pub fn forward(&self, ps: &ParamSet, pyr: &FeaturePyramid) -> Result<(FeaturePyramid, FreqTape)> {
        let (_, h1, w1) = pyr.levels[0].dims3()?;
        let ups = pyr
            .levels
            .iter()
            .map(|f| resize_to(f, h1, w1))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor> = ups.iter().collect();
        let sub = dwt_haar(&concat_channels(&refs)?)?;
        let mut out = Vec::with_capacity(4);
        let mut tapes = Vec::with_capacity(4);
        let mut level_hw = Vec::with_capacity(4);
        for (k, (gate, f)) in self.gates.iter().zip(&pyr.levels).enumerate() {
            let band = if k < 2 { &sub.hh } else { &sub.ll };
            let (y, t) = gate.forward(ps, f, band)?;
            let (_, h, w) = f.dims3()?;
            level_hw.push((h, w));
            out.push(y);
            tapes.push(t);
        }
        Ok((
            FeaturePyramid {
                levels: out.try_into().expect("four levels"),
            },
            FreqTape {
                level_hw,
                sub_shape: sub.ll.dims3()?,
                gates: tapes,
            },
        ))
    }

    pub fn backward(&self, ps: &ParamSet, t: &FreqTape, d_out: &[Tensor; 4], grads: &mut Grads) -> Result<[Tensor; 4]> {
        let (c, sh, sw) = t.sub_shape;
        let mut d_sub = Subbands::zeros(c, sh, sw);
        let mut d_levels = Vec::with_capacity(4);
        for (k, (gate, gt)) in self.gates.iter().zip(&t.gates).enumerate() {
            let (da, dband) = gate.backward(ps, gt, &d_out[k], grads)?;
            if k < 2 {
                d_sub.hh.add_assign(&dband)?;
            } else {
                d_sub.ll.add_assign(&dband)?;
            }
            d_levels.push(da);
        }
        let d_cat = dwt_haar_backward(&d_sub)?;
        let parts = split_channels(&d_cat, &[self.width; 4])?;
        for ((d, part), &(h, w)) in d_levels.iter_mut().zip(&parts).zip(&t.level_hw) {
            d.add_assign(&resize_to_backward(part, h, w)?)?;
        }
        Ok(d_levels.try_into().expect("four levels"))
    }
}

/// Per-level fusion of the image and box branches.
#[derive(Clone, Debug)]
pub struct BranchFusion {
    gates: Vec<Gate>,
}

#[derive(Clone, Debug)]
pub struct FusionTape {
    gates: Vec<GateTape>,
}

impl BranchFusion {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, width: usize) -> Self {
        let gates = (1..=4)
            .map(|k| Gate::new(ps, rng, &format!("fuse.gate{k}"), width, width, width))
            .collect();
        BranchFusion { gates }
    }

    pub fn forward(&self, ps: &ParamSet, px: &FeaturePyramid, pb: &FeaturePyramid) -> Result<(FeaturePyramid, FusionTape)> {
        let mut out = Vec::with_capacity(4);
        let mut tapes = Vec::with_capacity(4);
        for ((gate, a), b) in self.gates.iter().zip(&px.levels).zip(&pb.levels) {
            a.same_shape(b, "fuse_branches")?;
            let (y, t) = gate.forward(ps, a, b)?;
            out.push(y);
            tapes.push(t);
        }
        Ok((
            FeaturePyramid {
                levels: out.try_into().expect("four levels"),
            },
            FusionTape { gates: tapes },
        ))
    }

    pub fn backward(
        &self,
        ps: &ParamSet,
        t: &FusionTape,
        d_out: &[Tensor; 4],
        grads: &mut Grads,
    ) -> Result<([Tensor; 4], [Tensor; 4])> {
        let mut dx = Vec::with_capacity(4);
        let mut db = Vec::with_capacity(4);
        for ((gate, gt), d) in self.gates.iter().zip(&t.gates).zip(d_out) {
            let (a, b) = gate.backward(ps, gt, d, grads)?;
            dx.push(a);
            db.push(b);
        }
        Ok((dx.try_into().expect("four"), db.try_into().expect("four")))
    }
}
