use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::aspp::{Aspp, AsppTape};
use super::decoder::{Decoder, DecoderTape};
use super::encoder::{check_input_size, Encoder, EncoderConfig, EncoderTape, FeaturePyramid};
use super::frequency::{BranchFusion, FreqTape, FreqTransformer, FusionTape};
use super::params::{Grads, ParamSet};
use crate::data::BBox;
use crate::error::{Error, Result};
use crate::numerics::{concat_channels, split_channels};
use crate::tensor::Tensor;

pub const IMAGE_CHANNELS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetKind {
    Anet,
    Pnet,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Anet => "anet",
            NetKind::Pnet => "pnet",
        }
    }
}

/// Five full-resolution logit maps. `p1` is the main output.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    pub p1: Tensor,
    pub p2: Tensor,
    pub p3: Tensor,
    pub p4: Tensor,
    pub m4: Tensor,
}

impl Predictions {
    /// `[p1, p2, p3, p4, m4]`.
    pub fn as_list(&self) -> [&Tensor; 5] {
        [&self.p1, &self.p2, &self.p3, &self.p4, &self.m4]
    }

    pub fn is_finite(&self) -> bool {
        self.as_list().iter().all(|t| t.is_finite())
    }

    /// Sigmoid of the main output.
    pub fn main_prob(&self) -> Tensor {
        self.p1.map(crate::numerics::sigmoid)
    }
}

/// Image masked by the box indicator; pixels outside the box become zero.
pub fn make_proposal(x: &Tensor, bbox: &BBox) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    bbox.check_within(h, w)?;
    let mut out = x.clone();
    for ch in 0..c {
        let plane = out.channel_mut(ch);
        for y in 0..h {
            for xx in 0..w {
                if !bbox.contains(y, xx) {
                    plane[y * w + xx] = 0.0;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct BoxBranch {
    enc: Encoder,
    ft: FreqTransformer,
    fuse: BranchFusion,
}

#[derive(Clone, Debug)]
pub struct Network {
    kind: NetKind,
    config: EncoderConfig,
    seed: u64,
    params: ParamSet,
    enc: Encoder,
    ft: FreqTransformer,
    box_branch: Option<BoxBranch>,
    aspp: Aspp,
    decoder: Decoder,
}

/// Everything needed to backpropagate one forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    enc: EncoderTape,
    ft: FreqTape,
    box_side: Option<(EncoderTape, FreqTape, FusionTape)>,
    aspp: AsppTape,
    dec: DecoderTape,
}

impl Network {
    pub fn new(kind: NetKind, config: EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::default();
        let c = config.unified_channels;
        let enc = Encoder::new(&mut ps, &mut rng, "enc_x", IMAGE_CHANNELS, &config);
        let ft = FreqTransformer::new(&mut ps, &mut rng, "ft_x", c);
        let box_branch = match kind {
            NetKind::Anet => Some(BoxBranch {
                enc: Encoder::new(&mut ps, &mut rng, "enc_b", IMAGE_CHANNELS, &config),
                ft: FreqTransformer::new(&mut ps, &mut rng, "ft_b", c),
                fuse: BranchFusion::new(&mut ps, &mut rng, c),
            }),
            NetKind::Pnet => None,
        };
        let aspp_in = if box_branch.is_some() { 2 * c } else { c };
        let aspp = Aspp::new(&mut ps, &mut rng, aspp_in, c);
        let decoder = Decoder::new(&mut ps, &mut rng, c);
        Ok(Network {
            kind,
            config,
            seed,
            params: ps,
            enc,
            ft,
            box_branch,
            aspp,
            decoder,
        })
    }

    pub fn kind(&self) -> NetKind {
        self.kind
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Forward pass. ANet requires a box; PNet rejects one.
    pub fn forward(&self, x: &Tensor, bbox: Option<&BBox>) -> Result<(Predictions, Tape)> {
        let (c, h, w) = check_input_size(x)?;
        if c != IMAGE_CHANNELS {
            return Err(Error::Shape {
                op: "Network::forward",
                dim: "channels",
                got: c,
                expected: IMAGE_CHANNELS,
            });
        }
        let ps = &self.params;
        let (px, enc_t) = self.enc.forward(ps, x)?;
        let (fx, ft_t) = self.ft.forward(ps, &px)?;
        let (fc, deep_in, box_side) = match (&self.box_branch, bbox) {
            (Some(bb), Some(bx)) => {
                let prop = make_proposal(x, bx)?;
                let (pb, enc_bt) = bb.enc.forward(ps, &prop)?;
                let (fb, ft_bt) = bb.ft.forward(ps, &pb)?;
                let (fc, fuse_t) = bb.fuse.forward(ps, &fx, &fb)?;
                let deep_in = concat_channels(&[&px.levels[3], &pb.levels[3]])?;
                (fc, deep_in, Some((enc_bt, ft_bt, fuse_t)))
            }
            (None, None) => (fx, px.levels[3].clone(), None),
            (Some(_), None) => return Err(Error::invalid("anet_forward", "a box prompt is required")),
            (None, Some(_)) => return Err(Error::invalid("pnet_forward", "PNet takes only the image")),
        };
        let (_deep, m4, aspp_t) = self.aspp.forward(ps, &deep_in, h, w)?;
        let ([p1, p2, p3, p4], dec_t) = self.decoder.forward(ps, &fc, &m4)?;
        Ok((
            Predictions { p1, p2, p3, p4, m4 },
            Tape {
                enc: enc_t,
                ft: ft_t,
                box_side,
                aspp: aspp_t,
                dec: dec_t,
            },
        ))
    }

    pub fn predict(&self, x: &Tensor, bbox: Option<&BBox>) -> Result<Predictions> {
        self.forward(x, bbox).map(|(p, _)| p)
    }

    /// Accumulates parameter gradients for logit gradients `[p1, p2, p3, p4, m4]`.
    pub fn backward(&self, tape: &Tape, d: &[Tensor; 5], grads: &mut Grads) -> Result<()> {
        let ps = &self.params;
        let [d1, d2, d3, d4, dm] = d;
        let (d_fc, d_m4_dec) = self
            .decoder
            .backward(ps, &tape.dec, &[d1.clone(), d2.clone(), d3.clone(), d4.clone()], grads)?;
        let mut d_m4 = dm.clone();
        d_m4.add_assign(&d_m4_dec)?;
        let d_deep_in = self.aspp.backward(ps, &tape.aspp, &d_m4, grads)?;
        let c = self.config.unified_channels;
        match (&self.box_branch, &tape.box_side) {
            (Some(bb), Some((enc_bt, ft_bt, fuse_t))) => {
                let mut parts = split_channels(&d_deep_in, &[c, c])?;
                let d_f4b = parts.pop().expect("two");
                let d_f4x = parts.pop().expect("two");
                let (d_fx, d_fb) = bb.fuse.backward(ps, fuse_t, &d_fc, grads)?;
                let mut d_pb = bb.ft.backward(ps, ft_bt, &d_fb, grads)?;
                d_pb[3].add_assign(&d_f4b)?;
                bb.enc.backward(ps, enc_bt, &d_pb, grads)?;
                let mut d_px = self.ft.backward(ps, &tape.ft, &d_fx, grads)?;
                d_px[3].add_assign(&d_f4x)?;
                self.enc.backward(ps, &tape.enc, &d_px, grads)?;
            }
            (None, None) => {
                let mut d_px = self.ft.backward(ps, &tape.ft, &d_fc, grads)?;
                d_px[3].add_assign(&d_deep_in)?;
                self.enc.backward(ps, &tape.enc, &d_px, grads)?;
            }
            _ => return Err(Error::invalid("Network::backward", "tape does not match network kind")),
        }
        Ok(())
    }
}

/// Feature-level entry points, exposed for inspection and gradient checks.
impl Network {
    pub fn encode(&self, x: &Tensor) -> Result<FeaturePyramid> {
        self.enc.forward(&self.params, x).map(|(p, _)| p)
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::losses::{composite_loss, LossSpec};

    fn image(seed: u64, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(&[3, h, w], |_| rng.gen::<f64>())
    }

    fn mask(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(&[1, h, w], |i| {
            let (y, x) = ((i / w) as f64, (i % w) as f64);
            if (y - 13.0).powi(2) + (x - 17.0).powi(2) < 60.0 { 1.0 } else { 0.0 }
        })
    }

    fn tiny() -> EncoderConfig {
        EncoderConfig {
            stage_channels: [4, 4, 6, 6],
            unified_channels: 4,
            blocks_per_stage: 1,
        }
    }

    fn loss_of(net: &Network, x: &Tensor, bbox: Option<&BBox>, g: &Tensor, spec: &LossSpec) -> (f64, Grads) {
        let (pred, tape) = net.forward(x, bbox).unwrap();
        let r = composite_loss(&pred.as_list(), g, spec, 0).unwrap();
        let mut grads = net.params().zero_grads();
        let d: [Tensor; 5] = r.grads.try_into().unwrap();
        net.backward(&tape, &d, &mut grads).unwrap();
        (r.value, grads)
    }

    fn gradient_check(kind: NetKind) {
        let (h, w) = (32, 32);
        let mut net = Network::new(kind, tiny(), 7).unwrap();
        // zero biases put masked-out pixels exactly on the relu kink
        let mut rng = ChaCha8Rng::seed_from_u64(98);
        for id in 0..net.params().len() {
            if net.params().names()[id].ends_with(".b") {
                let b = net.params_mut().value_mut(ParamId(id));
                b.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
            }
        }
        let x = image(1, h, w);
        let g = mask(h, w);
        let bx = BBox::new(6, 4, 27, 23).unwrap();
        let bbox = (kind == NetKind::Anet).then_some(&bx);
        let spec = LossSpec::nc(20);
        let (_, grads) = loss_of(&net, &x, bbox, &g, &spec);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let eps = 1e-5;
        let mut worst = 0.0f64;
        // one entry from every parameter tensor
        for id in 0..net.params().len() {
            let id = ParamId(id);
            let n = net.params().value(id).len();
            let j = rng.gen_range(0..n);
            let orig = net.params().value(id).data()[j];
            net.params_mut().value_mut(id).data_mut()[j] = orig + eps;
            let lp = loss_of(&net, &x, bbox, &g, &spec).0;
            net.params_mut().value_mut(id).data_mut()[j] = orig - eps;
            let lm = loss_of(&net, &x, bbox, &g, &spec).0;
            net.params_mut().value_mut(id).data_mut()[j] = orig;
            let num = (lp - lm) / (2.0 * eps);
            let ana = grads.get(id).data()[j];
            let rel = (num - ana).abs() / num.abs().max(ana.abs()).max(1e-6);
            worst = worst.max(rel);
            assert!(rel < 1e-3, "{}[{j}]: analytic {ana:e} numeric {num:e}", net.params().names()[id.0]);
        }
        assert!(worst < 1e-3);
    }

    use super::super::params::ParamId;

    #[test]
    fn pnet_gradient_matches_finite_differences() {
        gradient_check(NetKind::Pnet);
    }

    #[test]
    fn anet_gradient_matches_finite_differences() {
        gradient_check(NetKind::Anet);
    }

    #[test]
    fn pnet_output_shapes() {
        let net = Network::new(NetKind::Pnet, tiny(), 0).unwrap();
        let p = net.predict(&image(0, 64, 64), None).unwrap();
        for t in p.as_list() {
            assert_eq!(t.shape(), &[1, 64, 64]);
        }
        assert!(p.is_finite());
    }

    #[test]
    fn anet_requires_box_and_pnet_rejects_one() {
        let x = image(0, 32, 32);
        let a = Network::new(NetKind::Anet, tiny(), 0).unwrap();
        let p = Network::new(NetKind::Pnet, tiny(), 0).unwrap();
        assert!(a.predict(&x, None).is_err());
        assert!(p.predict(&x, Some(&BBox::full(32, 32))).is_err());
        assert!(a.predict(&x, Some(&BBox::full(32, 32))).unwrap().is_finite());
    }

    #[test]
    fn indivisible_input_rejected() {
        let net = Network::new(NetKind::Pnet, tiny(), 0).unwrap();
        assert!(net.predict(&image(0, 48, 32), None).is_err());
    }

    #[test]
    fn same_seed_same_predictions() {
        let x = image(3, 32, 32);
        let a = Network::new(NetKind::Pnet, tiny(), 11).unwrap().predict(&x, None).unwrap();
        let b = Network::new(NetKind::Pnet, tiny(), 11).unwrap().predict(&x, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn proposal_masks_outside_box() {
        let x = image(5, 8, 8);
        let full = make_proposal(&x, &BBox::full(8, 8)).unwrap();
        assert_eq!(full, x);
        let one = make_proposal(&x, &BBox::new(5, 5, 5, 5).unwrap()).unwrap();
        for c in 0..3 {
            for i in 0..64 {
                let expect = if i == 5 * 8 + 5 { x.channel(c)[i] } else { 0.0 };
                assert_eq!(one.channel(c)[i], expect);
            }
        }
        assert!(make_proposal(&x, &BBox::new(0, 0, 8, 3).unwrap()).is_err());
    }
}
