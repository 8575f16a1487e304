//! Single-level orthonormal 2-D Haar transform.
//!
//! Each non-overlapping 2×2 block `[[a, b], [c, d]]` maps to
//!
//! ```text
//! ll = (a + b + c + d) / 2      hl = (a - b + c - d) / 2
//! lh = (a + b - c - d) / 2      hh = (a - b - c + d) / 2
//! ```
//!
//! The map is orthonormal, so its adjoint is its inverse and [`dwt_haar_backward`]
//! is [`idwt_haar`] applied to the subband gradients.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// The four half-resolution subbands of one decomposition level.
#[derive(Clone, Debug, PartialEq)]
pub struct Subbands {
    pub ll: Tensor,
    pub lh: Tensor,
    pub hl: Tensor,
    pub hh: Tensor,
}

impl Subbands {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        let z = Tensor::zeros(&[c, h, w]);
        Subbands {
            ll: z.clone(),
            lh: z.clone(),
            hl: z.clone(),
            hh: z,
        }
    }

    pub fn energy(&self) -> f64 {
        [&self.ll, &self.lh, &self.hl, &self.hh]
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum()
    }
}

pub fn dwt_haar(x: &Tensor) -> Result<Subbands> {
    let (c, h, w) = x.dims3()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid(
            "dwt_haar",
            format!("extents must be even, got {h}x{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut s = Subbands::zeros(c, oh, ow);
    for ch in 0..c {
        let src = x.channel(ch);
        for oy in 0..oh {
            for ox in 0..ow {
                let i = (2 * oy) * w + 2 * ox;
                let (a, b, cc, d) = (src[i], src[i + 1], src[i + w], src[i + w + 1]);
                let o = (ch * oh + oy) * ow + ox;
                s.ll.data_mut()[o] = (a + b + cc + d) * 0.5;
                s.hl.data_mut()[o] = (a - b + cc - d) * 0.5;
                s.lh.data_mut()[o] = (a + b - cc - d) * 0.5;
                s.hh.data_mut()[o] = (a - b - cc + d) * 0.5;
            }
        }
    }
    Ok(s)
}

pub fn idwt_haar(s: &Subbands) -> Result<Tensor> {
    let (c, oh, ow) = s.ll.dims3()?;
    for band in [&s.lh, &s.hl, &s.hh] {
        s.ll.same_shape(band, "idwt_haar")?;
    }
    let (h, w) = (2 * oh, 2 * ow);
    let mut x = vec![0.0; c * h * w];
    let (ll, lh, hl, hh) = (s.ll.data(), s.lh.data(), s.hl.data(), s.hh.data());
    for ch in 0..c {
        let dst = &mut x[ch * h * w..(ch + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let o = (ch * oh + oy) * ow + ox;
                let i = (2 * oy) * w + 2 * ox;
                dst[i] = (ll[o] + hl[o] + lh[o] + hh[o]) * 0.5;
                dst[i + 1] = (ll[o] - hl[o] + lh[o] - hh[o]) * 0.5;
                dst[i + w] = (ll[o] + hl[o] - lh[o] - hh[o]) * 0.5;
                dst[i + w + 1] = (ll[o] - hl[o] - lh[o] + hh[o]) * 0.5;
            }
        }
    }
    Tensor::new(vec![c, h, w], x)
}

/// Gradient of a scalar w.r.t. the input of [`dwt_haar`], given subband gradients.
pub fn dwt_haar_backward(grads: &Subbands) -> Result<Tensor> {
    idwt_haar(grads)
}
