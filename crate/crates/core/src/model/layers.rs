//! Building blocks shared by the encoder, frequency transformer and decoder.

use rand_chacha::ChaCha8Rng;

use super::params::{kaiming_uniform, Grads, ParamId, ParamSet};
use crate::error::Result;
use crate::numerics::{concat_channels, conv2d, conv2d_backward, resize_to, resize_to_backward, split_channels, ConvGeom};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Conv {
    pub(crate) w: ParamId,
    pub(crate) b: ParamId,
    geom: ConvGeom,
}

impl Conv {
    pub fn new(
        ps: &mut ParamSet,
        rng: &mut ChaCha8Rng,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        geom: ConvGeom,
    ) -> Self {
        let w = ps.add(format!("{name}.w"), kaiming_uniform(&[c_out, c_in, k, k], rng));
        let b = ps.add(format!("{name}.b"), Tensor::zeros(&[c_out]));
        Conv { w, b, geom }
    }

    pub fn forward(&self, ps: &ParamSet, x: &Tensor) -> Result<Tensor> {
        conv2d(x, ps.value(self.w), ps.value(self.b), self.geom)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&self, ps: &ParamSet, x: &Tensor, dy: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let g = conv2d_backward(x, ps.value(self.w), dy, self.geom)?;
        grads.accumulate(self.w, &g.dw)?;
        grads.accumulate(self.b, &g.db)?;
        Ok(g.dx)
    }
}

pub(crate) fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Relu gradient recovered from the activation output (`y > 0` iff `x > 0`).
pub(crate) fn relu_backward_from_output(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    y.zip_map(dy, |v, g| if v > 0.0 { g } else { 0.0 })
}

/// Adaptive fusion: `conv3x3(relu(conv3x3(cat(a, resize(b)))))`, output `width` channels.
#[derive(Clone, Debug)]
pub struct Gate {
    c1: Conv,
    c2: Conv,
}

#[derive(Clone, Debug)]
pub struct GateTape {
    cat: Tensor,
    r1: Tensor,
    a_channels: usize,
    b_channels: usize,
    b_hw: (usize, usize),
}

impl Gate {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, c_a: usize, c_b: usize, width: usize) -> Self {
        let same = ConvGeom::same(3, 1);
        Gate {
            c1: Conv::new(ps, rng, &format!("{name}.c1"), c_a + c_b, width, 3, same),
            c2: Conv::new(ps, rng, &format!("{name}.c2"), width, width, 3, same),
        }
    }

    pub fn forward(&self, ps: &ParamSet, a: &Tensor, b: &Tensor) -> Result<(Tensor, GateTape)> {
        let (ca, h, w) = a.dims3()?;
        let (cb, bh, bw) = b.dims3()?;
        let b_r = resize_to(b, h, w)?;
        let cat = concat_channels(&[a, &b_r])?;
        let r1 = relu(&self.c1.forward(ps, &cat)?);
        let out = self.c2.forward(ps, &r1)?;
        Ok((
            out,
            GateTape {
                cat,
                r1,
                a_channels: ca,
                b_channels: cb,
                b_hw: (bh, bw),
            },
        ))
    }

    /// Returns gradients w.r.t. `a` and `b` (at `b`'s original size).
    pub fn backward(&self, ps: &ParamSet, t: &GateTape, dout: &Tensor, grads: &mut Grads) -> Result<(Tensor, Tensor)> {
        let dr1 = self.c2.backward(ps, &t.r1, dout, grads)?;
        let dh1 = relu_backward_from_output(&t.r1, &dr1)?;
        let dcat = self.c1.backward(ps, &t.cat, &dh1, grads)?;
        let mut parts = split_channels(&dcat, &[t.a_channels, t.b_channels])?;
        let db_r = parts.pop().expect("two parts");
        let da = parts.pop().expect("two parts");
        let db = resize_to_backward(&db_r, t.b_hw.0, t.b_hw.1)?;
        Ok((da, db))
    }
}

/// `relu(x + conv(relu(conv(x))))`.
#[derive(Clone, Debug)]
pub struct ResBlock {
    c1: Conv,
    c2: Conv,
}

#[derive(Clone, Debug)]
pub struct ResTape {
    x: Tensor,
    r1: Tensor,
    y: Tensor,
}

impl ResBlock {
    pub fn new(ps: &mut ParamSet, rng: &mut ChaCha8Rng, name: &str, c: usize) -> Self {
        let same = ConvGeom::same(3, 1);
        ResBlock {
            c1: Conv::new(ps, rng, &format!("{name}.c1"), c, c, 3, same),
            c2: Conv::new(ps, rng, &format!("{name}.c2"), c, c, 3, same),
        }
    }

    pub fn forward(&self, ps: &ParamSet, x: &Tensor) -> Result<(Tensor, ResTape)> {
        let r1 = relu(&self.c1.forward(ps, x)?);
        let mut s = self.c2.forward(ps, &r1)?;
        s.add_assign(x)?;
        let y = relu(&s);
        Ok((
            y.clone(),
            ResTape {
                x: x.clone(),
                r1,
                y,
            },
        ))
    }

    pub fn backward(&self, ps: &ParamSet, t: &ResTape, dy: &Tensor, grads: &mut Grads) -> Result<Tensor> {
        let ds = relu_backward_from_output(&t.y, dy)?;
        let dr1 = self.c2.backward(ps, &t.r1, &ds, grads)?;
        let dh1 = relu_backward_from_output(&t.r1, &dr1)?;
        let mut dx = self.c1.backward(ps, &t.x, &dh1, grads)?;
        dx.add_assign(&ds)?;
        Ok(dx)
    }
}
