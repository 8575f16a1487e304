use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bbox::BBox;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bounding box of the foreground (`> 0.5`) of a `[1, H, W]` mask.
///
/// With `jitter > 0` each side moves independently by up to `⌊jitter · side⌋` pixels,
/// clipped to the image and never crossing the mask centroid.
pub fn derive_box(gt: &Tensor, jitter: f64, seed: u64) -> Result<BBox> {
    let (_, h, w) = gt.dims3()?;
    if !(0.0..=1.0).contains(&jitter) {
        return Err(Error::invalid("derive_box", format!("jitter must be in [0, 1], got {jitter}")));
    }
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let (mut sx, mut sy, mut cnt) = (0.0, 0.0, 0usize);
    for (i, &v) in gt.channel(0).iter().enumerate() {
        if v > 0.5 {
            let (y, x) = (i / w, i % w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            sx += x as f64;
            sy += y as f64;
            cnt += 1;
        }
    }
    if cnt == 0 {
        return Err(Error::invalid("derive_box", "mask has no foreground"));
    }
    let tight = BBox { x0, y0, x1, y1 };
    if jitter == 0.0 {
        return Ok(tight);
    }
    let (cx, cy) = (sx / cnt as f64, sy / cnt as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = (jitter * tight.width() as f64).floor() as i64;
    let dy = (jitter * tight.height() as f64).floor() as i64;
    let mut side = |v: usize, d: i64| -> i64 { v as i64 + if d > 0 { rng.gen_range(-d..=d) } else { 0 } };
    let nx0 = side(x0, dx).clamp(0, cx.floor() as i64);
    let ny0 = side(y0, dy).clamp(0, cy.floor() as i64);
    let nx1 = side(x1, dx).clamp(cx.ceil() as i64, w as i64 - 1);
    let ny1 = side(y1, dy).clamp(cy.ceil() as i64, h as i64 - 1);
    BBox::new(nx0 as usize, ny0 as usize, nx1 as usize, ny1 as usize)
}
