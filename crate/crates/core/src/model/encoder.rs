use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu, relu_backward_from_output, Conv, ResBlock, ResTape};
use super::params::{Grads, ParamSet};
use crate::error::{Error, Result};
use crate::numerics::ConvGeom;
use crate::tensor::Tensor;

/// Width and depth of the four-stage residual encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub stage_channels: [usize; 4],
    pub unified_channels: usize,
    pub blocks_per_stage: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            stage_channels: [16, 32, 64, 128],
            unified_channels: 64,
            blocks_per_stage: 2,
        }
    }
}

impl EncoderConfig {
    /// Narrow variant used for fast experiments on a single core.
    pub fn desk() -> Self {
        EncoderConfig {
            stage_channels: [8, 16, 16, 32],
            unified_channels: 16,
            blocks_per_stage: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_channels.contains(&0) || self.unified_channels == 0 {
            return Err(Error::invalid("EncoderConfig", "channel counts must be positive"));
        }
        Ok(())
    }
}

/// Four feature levels at `H/4 … H/32`, all with the unified channel count.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    pub levels: [Tensor; 4],
}

impl FeaturePyramid {
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.levels.iter().map(|t| t.shape().to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().all(Tensor::is_finite)
    }
}

#[derive(Clone, Debug)]
struct Stage {
    down: Conv,
    blocks: Vec<ResBlock>,
    unify: Conv,
}

#[derive(Clone, Debug)]
struct StageTape {
    input: Tensor,
    down_out: Tensor,
    blocks: Vec<ResTape>,
    feat: Tensor,
}

/// Stride-2 stem followed by four stride-2 residual stages, each projected to the unified width.
#[derive(Clone, Debug)]
pub struct Encoder {
    stem: Conv,
    stages: Vec<Stage>,
}

#[derive(Clone, Debug)]
pub struct EncoderTape {
    x: Tensor,
    stem_out: Tensor,
    stages: Vec<StageTape>,
}

pub(crate) fn check_input_size(x: &Tensor) -> Result<(usize, usize, usize)> {
    let (c, h, w) = x.dims3()?;
    if h % 32 != 0 || w % 32 != 0 || h == 0 || w == 0 {
        return Err(Error::invalid(
            "encode",
            format!("spatial size {h}x{w} must be a positive multiple of 32"),
        ));
    }
    Ok((c, h, w))
}

impl Encoder {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, c_in: usize, cfg: &EncoderConfig) -> Self {
        let same = ConvGeom::same(3, 1);
        let c0 = cfg.stage_channels[0];
        let stem = Conv::new(ps, rng, &format!("{name}.stem"), c_in, c0, 3, ConvGeom::down(3));
        let mut prev = c0;
        let stages = cfg
            .stage_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let sname = format!("{name}.stage{}", i + 1);
                let down = Conv::new(ps, rng, &format!("{sname}.down"), prev, c, 3, ConvGeom::down(3));
                let blocks = (0..cfg.blocks_per_stage)
                    .map(|b| ResBlock::new(ps, rng, &format!("{sname}.block{b}"), c))
                    .collect();
                let unify = Conv::new(ps, rng, &format!("{sname}.unify"), c, cfg.unified_channels, 3, same);
                prev = c;
                Stage { down, blocks, unify }
            })
            .collect();
        Encoder { stem, stages }
    }

    pub fn forward(&self, ps: &ParamSet, x: &Tensor) -> Result<(FeaturePyramid, EncoderTape)> {
        check_input_size(x)?;
        let stem_out = relu(&self.stem.forward(ps, x)?);
        let mut carry = stem_out.clone();
        let mut levels = Vec::with_capacity(4);
        let mut tapes = Vec::with_capacity(4);
        for stage in &self.stages {
            let input = carry;
            let down_out = relu(&stage.down.forward(ps, &input)?);
            let mut feat = down_out.clone();
            let mut blocks = Vec::with_capacity(stage.blocks.len());
            for block in &stage.blocks {
                let (y, t) = block.forward(ps, &feat)?;
                blocks.push(t);
                feat = y;
            }
            levels.push(stage.unify.forward(ps, &feat)?);
            carry = feat.clone();
            tapes.push(StageTape {
                input,
                down_out,
                blocks,
                feat,
            });
        }
        let levels: [Tensor; 4] = levels.try_into().expect("four stages");
        Ok((
            FeaturePyramid { levels },
            EncoderTape {
                x: x.clone(),
                stem_out,
                stages: tapes,
            },
        ))
    }

    /// Backpropagates pyramid gradients; returns the gradient w.r.t. the input image.
    pub fn backward(&self, ps: &ParamSet, tape: &EncoderTape, d_levels: &[Tensor; 4], grads: &mut Grads) -> Result<Tensor> {
        let mut d_carry: Option<Tensor> = None;
        for (i, (stage, t)) in self.stages.iter().zip(&tape.stages).enumerate().rev() {
            let mut d_feat = stage.unify.backward(ps, &t.feat, &d_levels[i], grads)?;
            if let Some(d) = d_carry.take() {
                d_feat.add_assign(&d)?;
            }
            for (block, bt) in stage.blocks.iter().zip(&t.blocks).rev() {
                d_feat = block.backward(ps, bt, &d_feat, grads)?;
            }
            let d_down = relu_backward_from_output(&t.down_out, &d_feat)?;
            d_carry = Some(stage.down.backward(ps, &t.input, &d_down, grads)?);
        }
        let d_stem = relu_backward_from_output(&tape.stem_out, &d_carry.expect("four stages"))?;
        self.stem.backward(ps, &tape.x, &d_stem, grads)
    }
}
