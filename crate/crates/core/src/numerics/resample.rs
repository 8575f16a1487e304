//! Dyadic resampling: bilinear ×2 upsampling (half-pixel centres, edge clamped)
//! and 2×2 average pooling, each with its exact adjoint.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resample {
    Up2,
    Down2,
}

/// Source taps `(i0, i1, frac)` for each output index of a 1-D ×2 bilinear upsample.
fn up2_taps(n: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * n)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

fn up2(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    let (ty, tx) = (up2_taps(h), up2_taps(w));
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        let src = x.channel(ch);
        let dst = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
                let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
                dst[oy * ow + ox] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

fn up2_backward(dy: &Tensor) -> Result<Tensor> {
    let (c, oh, ow) = dy.dims3()?;
    let (h, w) = (oh / 2, ow / 2);
    let (ty, tx) = (up2_taps(h), up2_taps(w));
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        let g = dy.channel(ch);
        let dst = &mut dx[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let v = g[oy * ow + ox];
                dst[y0 * w + x0] += v * (1.0 - fy) * (1.0 - fx);
                dst[y0 * w + x1] += v * (1.0 - fy) * fx;
                dst[y1 * w + x0] += v * fy * (1.0 - fx);
                dst[y1 * w + x1] += v * fy * fx;
            }
        }
    }
    Tensor::new(vec![c, h, w], dx)
}

fn check_even(h: usize, w: usize) -> Result<()> {
    if !h.is_multiple_of(2) {
        return Err(Error::invalid("down2", format!("height {h} is odd")));
    }
    if !w.is_multiple_of(2) {
        return Err(Error::invalid("down2", format!("width {w} is odd")));
    }
    Ok(())
}

fn down2(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    check_even(h, w)?;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        let src = x.channel(ch);
        for oy in 0..oh {
            for ox in 0..ow {
                let (y, xx) = (2 * oy, 2 * ox);
                out[(ch * oh + oy) * ow + ox] = 0.25
                    * (src[y * w + xx] + src[y * w + xx + 1] + src[(y + 1) * w + xx] + src[(y + 1) * w + xx + 1]);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

fn down2_backward(dy: &Tensor) -> Result<Tensor> {
    let (c, oh, ow) = dy.dims3()?;
    let (h, w) = (2 * oh, 2 * ow);
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        let g = dy.channel(ch);
        let dst = &mut dx[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for xx in 0..w {
                dst[y * w + xx] = 0.25 * g[(y / 2) * ow + xx / 2];
            }
        }
    }
    Tensor::new(vec![c, h, w], dx)
}

pub fn resample(x: &Tensor, factor: Resample) -> Result<Tensor> {
    match factor {
        Resample::Up2 => up2(x),
        Resample::Down2 => down2(x),
    }
}

/// Adjoint of [`resample`]; `dy` has the resampled shape.
pub fn resample_backward(dy: &Tensor, factor: Resample) -> Result<Tensor> {
    match factor {
        Resample::Up2 => up2_backward(dy),
        Resample::Down2 => {
            let (_, h, w) = dy.dims3()?;
            if h == 0 || w == 0 {
                return Err(Error::invalid("down2", "empty gradient"));
            }
            down2_backward(dy)
        }
    }
}

/// Sequence of ×2 steps taking extent `from` to `to`; both must differ by a power of two.
fn dyadic_steps(from: usize, to: usize, axis: &'static str) -> Result<(Resample, u32)> {
    let (big, small, step) = if to >= from {
        (to, from, Resample::Up2)
    } else {
        (from, to, Resample::Down2)
    };
    let ratio = big / small;
    if big % small != 0 || !ratio.is_power_of_two() {
        return Err(Error::invalid(
            "resize_to",
            format!("{axis} {from} -> {to} is not a power-of-two ratio"),
        ));
    }
    Ok((step, ratio.trailing_zeros()))
}

fn plan(h: usize, w: usize, th: usize, tw: usize) -> Result<(Resample, u32)> {
    let (sy, ny) = dyadic_steps(h, th, "height")?;
    let (sx, nx) = dyadic_steps(w, tw, "width")?;
    if ny != nx || (ny > 0 && sy != sx) {
        return Err(Error::invalid(
            "resize_to",
            format!("anisotropic resize {h}x{w} -> {th}x{tw}"),
        ));
    }
    Ok((sy, ny))
}

/// Resizes `[C, H, W]` to `[C, th, tw]` through repeated [`Resample`] steps.
pub fn resize_to(x: &Tensor, th: usize, tw: usize) -> Result<Tensor> {
    let (_, h, w) = x.dims3()?;
    let (step, n) = plan(h, w, th, tw)?;
    let mut y = x.clone();
    for _ in 0..n {
        y = resample(&y, step)?;
    }
    Ok(y)
}

/// Adjoint of [`resize_to`] for an input of spatial size `h × w`.
pub fn resize_to_backward(dy: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (_, th, tw) = dy.dims3()?;
    let (step, n) = plan(h, w, th, tw)?;
    let mut g = dy.clone();
    for _ in 0..n {
        g = resample_backward(&g, step)?;
    }
    Ok(g)
}
