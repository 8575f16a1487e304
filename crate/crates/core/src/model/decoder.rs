//! Reverse fusion decoder. Each level refines the next-coarser logit map:
//! `p_k = up(proj(Υ(Υ(F_k, prev), Rev(prev)))) + prev`, with `prev = m4` at level 4.

use rand_chacha::ChaCha8Rng;

use super::encoder::FeaturePyramid;
use super::layers::{Conv, Gate, GateTape};
use super::params::{Grads, ParamSet};
use crate::error::Result;
use crate::numerics::{resize_to, resize_to_backward, sigmoid, ConvGeom};
use crate::tensor::Tensor;

/// `1 − σ(p)`.
pub fn rev(p: &Tensor) -> Tensor {
    p.map(|v| 1.0 - sigmoid(v))
}

#[derive(Clone, Debug)]
struct Level {
    g1: Gate,
    g2: Gate,
    proj: Conv,
}

#[derive(Clone, Debug)]
pub struct Decoder {
    levels: Vec<Level>,
}

#[derive(Clone, Debug)]
struct LevelTape {
    prev: Tensor,
    g1: GateTape,
    g2: GateTape,
    b: Tensor,
    s_hw: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct DecoderTape {
    levels: Vec<LevelTape>,
}

impl Decoder {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, width: usize) -> Self {
        let levels = (1..=4)
            .map(|k| Level {
                g1: Gate::new(ps, rng, &format!("dec{k}.g1"), width, 1, width),
                g2: Gate::new(ps, rng, &format!("dec{k}.g2"), width, 1, width),
                proj: Conv::new(ps, rng, &format!("dec{k}.proj"), width, 1, 3, ConvGeom::same(3, 1)),
            })
            .collect();
        Decoder { levels }
    }

    /// Returns `[p1, p2, p3, p4]` at the resolution of `m4`.
    pub fn forward(&self, ps: &ParamSet, fc: &FeaturePyramid, m4: &Tensor) -> Result<([Tensor; 4], DecoderTape)> {
        let (_, h, w) = m4.dims3()?;
        let mut outs: Vec<Option<Tensor>> = vec![None; 4];
        let mut tapes: Vec<Option<LevelTape>> = vec![None; 4];
        let mut prev = m4.clone();
        for k in (0..4).rev() {
            let lv = &self.levels[k];
            let (a, g1) = lv.g1.forward(ps, &fc.levels[k], &prev)?;
            let (b, g2) = lv.g2.forward(ps, &a, &rev(&prev))?;
            let s = lv.proj.forward(ps, &b)?;
            let (_, sh, sw) = s.dims3()?;
            let mut p = resize_to(&s, h, w)?;
            p.add_assign(&prev)?;
            tapes[k] = Some(LevelTape {
                prev: std::mem::replace(&mut prev, p.clone()),
                g1,
                g2,
                b,
                s_hw: (sh, sw),
            });
            outs[k] = Some(p);
        }
        let outs: Vec<Tensor> = outs.into_iter().map(|o| o.expect("filled")).collect();
        let levels = tapes.into_iter().map(|t| t.expect("filled")).collect();
        Ok((outs.try_into().expect("four"), DecoderTape { levels }))
    }

    /// Given gradients for `p1..p4`, returns feature gradients and the gradient reaching `m4`.
    pub fn backward(
        &self,
        ps: &ParamSet,
        t: &DecoderTape,
        d_p: &[Tensor; 4],
        grads: &mut Grads,
    ) -> Result<([Tensor; 4], Tensor)> {
        let mut d_fc: Vec<Option<Tensor>> = vec![None; 4];
        let mut carry: Option<Tensor> = None;
        for k in 0..4 {
            let lv = &self.levels[k];
            let lt = &t.levels[k];
            let mut d_out = d_p[k].clone();
            if let Some(c) = carry.take() {
                d_out.add_assign(&c)?;
            }
            let ds = resize_to_backward(&d_out, lt.s_hw.0, lt.s_hw.1)?;
            let db = lv.proj.backward(ps, &lt.b, &ds, grads)?;
            let (da, d_rev) = lv.g2.backward(ps, &lt.g2, &db, grads)?;
            let (df, d_prev_gate) = lv.g1.backward(ps, &lt.g1, &da, grads)?;
            // residual path + gate input + reverse path
            let mut d_prev = d_out;
            d_prev.add_assign(&d_prev_gate)?;
            let d_rev_pre = lt.prev.zip_map(&d_rev, |z, g| {
                let s = sigmoid(z);
                -g * s * (1.0 - s)
            })?;
            d_prev.add_assign(&d_rev_pre)?;
            carry = Some(d_prev);
            d_fc[k] = Some(df);
        }
        let d_fc: Vec<Tensor> = d_fc.into_iter().map(|o| o.expect("filled")).collect();
        Ok((d_fc.try_into().expect("four"), carry.expect("four levels")))
    }
}
