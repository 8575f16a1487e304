//! Horizontal flip and random crop-and-resize, applied identically to image, target and box.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::Augment;
use crate::data::BBox;
use crate::tensor::Tensor;

pub const MIN_CROP_SCALE: f64 = 0.75;

pub(crate) fn flip_h(t: &Tensor) -> Tensor {
    let (c, h, w) = t.dims3().expect("rank 3");
    Tensor::from_fn(&[c, h, w], |i| {
        let x = i % w;
        t.data()[i - x + (w - 1 - x)]
    })
}

/// Bilinear resample of the window `[y0, y0+ch) × [x0, x0+cw)` to `h × w`.
pub(crate) fn crop_resize(t: &Tensor, y0: usize, x0: usize, ch: usize, cw: usize) -> Tensor {
    let (c, h, w) = t.dims3().expect("rank 3");
    let taps = |o: usize, off: usize, len: usize, out: usize, lim: usize| {
        let s = off as f64 + (o as f64 + 0.5) * len as f64 / out as f64 - 0.5;
        let s = s.clamp(0.0, (lim - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(lim - 1), s - i0 as f64)
    };
    let ys: Vec<_> = (0..h).map(|o| taps(o, y0, ch, h, h)).collect();
    let xs: Vec<_> = (0..w).map(|o| taps(o, x0, cw, w, w)).collect();
    let mut out = Tensor::zeros(&[c, h, w]);
    for k in 0..c {
        let src = t.channel(k);
        let dst = out.channel_mut(k);
        for (oy, &(a0, a1, fy)) in ys.iter().enumerate() {
            for (ox, &(b0, b1, fx)) in xs.iter().enumerate() {
                let top = src[a0 * w + b0] * (1.0 - fx) + src[a0 * w + b1] * fx;
                let bot = src[a1 * w + b0] * (1.0 - fx) + src[a1 * w + b1] * fx;
                dst[oy * w + ox] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    out
}

fn crop_box(b: &BBox, y0: usize, x0: usize, ch: usize, cw: usize, h: usize, w: usize) -> Option<BBox> {
    let map = |v: usize, off: usize, len: usize, out: usize| -> Option<usize> {
        let r = (v as f64 + 0.5 - off as f64) * out as f64 / len as f64 - 0.5;
        (r > -0.5 && r < out as f64 - 0.5).then(|| r.round().clamp(0.0, (out - 1) as f64) as usize)
    };
    let cx0 = b.x0.max(x0);
    let cy0 = b.y0.max(y0);
    let cx1 = b.x1.min(x0 + cw - 1);
    let cy1 = b.y1.min(y0 + ch - 1);
    if cx0 > cx1 || cy0 > cy1 {
        return None;
    }
    Some(BBox {
        x0: map(cx0, x0, cw, w)?,
        y0: map(cy0, y0, ch, h)?,
        x1: map(cx1, x0, cw, w)?,
        y1: map(cy1, y0, ch, h)?,
    })
}

/// One augmented view. Tensors in `masks` share the image geometry.
pub struct View {
    pub image: Tensor,
    pub masks: Vec<Tensor>,
    pub bbox: Option<BBox>,
}

pub fn augment(
    rng: &mut ChaCha8Rng,
    aug: Augment,
    image: &Tensor,
    masks: &[&Tensor],
    bbox: Option<&BBox>,
) -> View {
    let (_, h, w) = image.dims3().expect("rank 3");
    let mut view = View {
        image: image.clone(),
        masks: masks.iter().map(|m| (*m).clone()).collect(),
        bbox: bbox.copied(),
    };
    // draws happen unconditionally so the random stream does not depend on the data
    let do_flip = rng.gen_bool(0.5);
    let scale = rng.gen_range(MIN_CROP_SCALE..=1.0);
    let (uy, ux): (f64, f64) = (rng.gen(), rng.gen());
    if aug.crop {
        let ch = ((scale * h as f64).round() as usize).clamp(1, h);
        let cw = ((scale * w as f64).round() as usize).clamp(1, w);
        let y0 = (uy * (h - ch + 1) as f64) as usize;
        let x0 = (ux * (w - cw + 1) as f64) as usize;
        let y0 = y0.min(h - ch);
        let x0 = x0.min(w - cw);
        let nb = match view.bbox {
            Some(b) => crop_box(&b, y0, x0, ch, cw, h, w).map(Some),
            None => Some(None),
        };
        if let Some(nb) = nb {
            view.image = crop_resize(&view.image, y0, x0, ch, cw);
            view.masks = view.masks.iter().map(|m| crop_resize(m, y0, x0, ch, cw)).collect();
            view.bbox = nb;
        }
    }
    if aug.flip && do_flip {
        view.image = flip_h(&view.image);
        view.masks = view.masks.iter().map(flip_h).collect();
        view.bbox = view.bbox.map(|b| b.flip_h(w));
    }
    view
}
