use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bbox::BBox;
use super::box_ops::derive_box;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One labelled image: RGB in `[0, 1]`, binary mask, box prompt.
#[derive(Clone, Debug, PartialEq)]
pub struct SegSample {
    pub id: String,
    pub image: Tensor,
    pub gt: Tensor,
    pub bbox: BBox,
    /// True when `bbox` is a jittered superset rather than the tight box.
    pub jittered: bool,
}

pub const MIN_AREA: f64 = 0.02;
pub const MAX_AREA: f64 = 0.4;
const BLOB_ATTEMPTS: usize = 10;

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear value noise on a `cells × cells` lattice with smoothstep easing.
pub(crate) fn value_noise(rng: &mut ChaCha8Rng, h: usize, w: usize, cells: usize) -> Vec<f64> {
    let n = cells + 1;
    let lattice: Vec<f64> = (0..n * n).map(|_| rng.gen()).collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = y as f64 / h as f64 * cells as f64;
        let (iy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
        for x in 0..w {
            let fx = x as f64 / w as f64 * cells as f64;
            let (ix, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
            let v00 = lattice[iy * n + ix];
            let v01 = lattice[iy * n + ix + 1];
            let v10 = lattice[(iy + 1) * n + ix];
            let v11 = lattice[(iy + 1) * n + ix + 1];
            let top = v00 + (v01 - v00) * tx;
            let bot = v10 + (v11 - v10) * tx;
            out.push(top + (bot - top) * ty);
        }
    }
    out
}

/// Multi-octave value noise, min-max normalised to `[0, 1]`.
pub(crate) fn fractal_noise(rng: &mut ChaCha8Rng, h: usize, w: usize, base_cells: usize, octaves: usize) -> Vec<f64> {
    let mut acc = vec![0.0; h * w];
    let mut amp = 1.0;
    let mut cells = base_cells;
    for _ in 0..octaves {
        let layer = value_noise(rng, h, w, cells.min(w.max(1)));
        for (a, l) in acc.iter_mut().zip(&layer) {
            *a += amp * l;
        }
        amp *= 0.5;
        cells *= 2;
    }
    let lo = acc.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    acc.iter().map(|v| (v - lo) / span).collect()
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn blob(rng: &mut ChaCha8Rng, size: usize) -> Option<Vec<bool>> {
    let n = size * size;
    let coarse = value_noise(rng, size, size, 3);
    let s = size as f64;
    let (cy, cx) = (rng.gen_range(0.25..0.75) * s, rng.gen_range(0.25..0.75) * s);
    let sigma = rng.gen_range(0.12..0.25) * s;
    let score: Vec<f64> = (0..n)
        .map(|i| {
            let (y, x) = ((i / size) as f64 + 0.5, (i % size) as f64 + 0.5);
            let r2 = (y - cy).powi(2) + (x - cx).powi(2);
            0.8 * coarse[i] + 1.5 * (-r2 / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let frac = rng.gen_range(0.04..0.3);
    let k = ((frac * n as f64).round() as usize).max(1);
    let mut sorted = score.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let thr = sorted[k - 1];
    let mask: Vec<bool> = score.iter().map(|&v| v >= thr).collect();
    let area = mask.iter().filter(|&&m| m).count() as f64 / n as f64;
    (MIN_AREA..=MAX_AREA).contains(&area).then_some(mask)
}

/// Procedural camouflage scene: value-noise background, smooth blob foreground whose
/// texture shares the background palette and departs from it by `1 − difficulty`.
pub fn synth_camo(seed: u64, size: usize, difficulty: f64) -> Result<SegSample> {
    synth_camo_with_id(seed, size, difficulty, format!("s{seed}"))
}

pub fn synth_camo_with_id(seed: u64, size: usize, difficulty: f64, id: String) -> Result<SegSample> {
    if size < 32 || !size.is_power_of_two() {
        return Err(Error::invalid("synth_camo", format!("size must be a power of two >= 32, got {size}")));
    }
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::invalid("synth_camo", format!("difficulty must be in [0, 1], got {difficulty}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size * size;
    let ca: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.25..0.75));
    let cb: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.25..0.75));
    let base = rng.gen_range(3..6);
    let t_bg = fractal_noise(&mut rng, size, size, base, 3);
    let t_fg = fractal_noise(&mut rng, size, size, base, 3);
    let mean_lum = (ca.iter().sum::<f64>() + cb.iter().sum::<f64>()) / 6.0;
    let shift = if mean_lum < 0.5 { 0.45 } else { -0.45 } * (1.0 - difficulty);
    let mask = (0..BLOB_ATTEMPTS)
        .find_map(|_| blob(&mut rng, size))
        .ok_or_else(|| Error::invalid("synth_camo", "could not place a non-degenerate object"))?;
    let mut image = Tensor::zeros(&[3, size, size]);
    for c in 0..3 {
        let plane = image.channel_mut(c);
        for i in 0..n {
            let v = if mask[i] {
                ca[c] * t_fg[i] + cb[c] * (1.0 - t_fg[i]) + shift
            } else {
                ca[c] * t_bg[i] + cb[c] * (1.0 - t_bg[i])
            };
            plane[i] = quantize(v);
        }
    }
    let gt = Tensor::from_fn(&[1, size, size], |i| if mask[i] { 1.0 } else { 0.0 });
    let bbox = derive_box(&gt, 0.0, 0)?;
    Ok(SegSample {
        id,
        image,
        gt,
        bbox,
        jittered: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(synth_camo(0, 48, 0.5).is_err());
        assert!(synth_camo(0, 16, 0.5).is_err());
        assert!(synth_camo(0, 32, 1.5).is_err());
    }

    #[test]
    fn deterministic() {
        assert_eq!(synth_camo(5, 32, 0.3).unwrap(), synth_camo(5, 32, 0.3).unwrap());
        assert_ne!(synth_camo(5, 32, 0.3).unwrap().image, synth_camo(6, 32, 0.3).unwrap().image);
    }

    #[test]
    fn pixels_are_8bit_levels() {
        let s = synth_camo(1, 32, 0.2).unwrap();
        for &v in s.image.data() {
            assert_eq!((v * 255.0).round() / 255.0, v);
        }
    }
}
