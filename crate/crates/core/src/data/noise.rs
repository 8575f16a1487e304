//! Structured, spatially correlated label corruption.
//!
//! Every pixel gets a flip priority. Foreground priorities grow with depth into the
//! object (erosion, boundary-band removal); background priorities grow with distance
//! to the object or to a few false-blob seeds (dilation, spurious blobs). Both fields
//! are perturbed by smooth noise. Pixels below a threshold flip, and the threshold is
//! bisected until the disagreement rate reaches the target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synth::value_noise;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Anet,
    Injected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabel {
    pub sample_id: String,
    pub mask: Tensor,
    pub source: LabelSource,
    pub fp_rate: f64,
    pub fn_rate: f64,
}

pub const MAX_RHO: f64 = 0.5;
const BISECT_STEPS: usize = 60;

/// Soft false-positive and false-negative rates of `p` against binary `gt`:
/// `Σ p(1−g) / Σ(1−g)` and `Σ (1−p)g / Σ g`, each 0 when its denominator is empty.
pub fn fp_fn_rates(p: &Tensor, gt: &Tensor) -> Result<(f64, f64)> {
    p.same_shape(gt, "fp_fn_rates")?;
    let (mut fp, mut fnn, mut pos, mut neg) = (0.0, 0.0, 0.0, 0.0);
    for (&pi, &gi) in p.data().iter().zip(gt.data()) {
        fp += pi * (1.0 - gi);
        fnn += (1.0 - pi) * gi;
        pos += gi;
        neg += 1.0 - gi;
    }
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok((ratio(fp, neg), ratio(fnn, pos)))
}

/// Disagreement over the union of both foregrounds plus an equal-area background band.
pub fn disagreement_rate(noisy: &Tensor, gt: &Tensor) -> Result<f64> {
    noisy.same_shape(gt, "disagreement_rate")?;
    let n = gt.len();
    let (mut xor, mut union) = (0usize, 0usize);
    for (&a, &b) in noisy.data().iter().zip(gt.data()) {
        let (a, b) = (a > 0.5, b > 0.5);
        xor += (a != b) as usize;
        union += (a || b) as usize;
    }
    let denom = union + union.min(n - union);
    Ok(if denom == 0 { 0.0 } else { xor as f64 / denom as f64 })
}

/// Two-pass 3-4 chamfer distance (in pixels) to the nearest `true` cell.
pub(crate) fn chamfer_distance(set: &[bool], h: usize, w: usize) -> Vec<f64> {
    const BIG: u32 = u32::MAX / 4;
    let mut d: Vec<u32> = set.iter().map(|&s| if s { 0 } else { BIG }).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut v = d[i];
            if x > 0 {
                v = v.min(d[i - 1] + 3);
            }
            if y > 0 {
                v = v.min(d[i - w] + 3);
                if x > 0 {
                    v = v.min(d[i - w - 1] + 4);
                }
                if x + 1 < w {
                    v = v.min(d[i - w + 1] + 4);
                }
            }
            d[i] = v;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut v = d[i];
            if x + 1 < w {
                v = v.min(d[i + 1] + 3);
            }
            if y + 1 < h {
                v = v.min(d[i + w] + 3);
                if x + 1 < w {
                    v = v.min(d[i + w + 1] + 4);
                }
                if x > 0 {
                    v = v.min(d[i + w - 1] + 4);
                }
            }
            d[i] = v;
        }
    }
    d.into_iter()
        .map(|v| if v >= BIG { f64::INFINITY } else { v as f64 / 3.0 })
        .collect()
}

fn flip_set(gt: &[bool], priority: &[f64], tau: f64, h: usize, w: usize) -> Tensor {
    let data = (0..h * w)
        .map(|i| {
            let flip = priority[i] < tau;
            if gt[i] != flip { 1.0 } else { 0.0 }
        })
        .collect();
    Tensor::new(vec![1, h, w], data).expect("mask size")
}

/// Corrupts a binary mask so that its disagreement rate with `gt` is about `rho`.
pub fn inject_noise(gt: &Tensor, rho: f64, seed: u64) -> Result<PseudoLabel> {
    inject_noise_for(gt, rho, seed, String::new())
}

pub fn inject_noise_for(gt: &Tensor, rho: f64, seed: u64, sample_id: String) -> Result<PseudoLabel> {
    let (_, h, w) = gt.dims3()?;
    if !(0.0..=MAX_RHO).contains(&rho) {
        return Err(Error::invalid("inject_noise", format!("rho must be in [0, 0.5], got {rho}")));
    }
    let fg: Vec<bool> = gt.data().iter().map(|&v| v > 0.5).collect();
    if !fg.iter().any(|&f| f) {
        return Err(Error::invalid("inject_noise", "mask has no foreground"));
    }
    let binary = Tensor::new(vec![1, h, w], fg.iter().map(|&f| f as u8 as f64).collect())?;
    if rho == 0.0 {
        return Ok(PseudoLabel {
            sample_id,
            mask: binary,
            source: LabelSource::Injected,
            fp_rate: 0.0,
            fn_rate: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = h * w;
    let bg: Vec<bool> = fg.iter().map(|&f| !f).collect();
    let depth = chamfer_distance(&bg, h, w);
    let reach = chamfer_distance(&fg, h, w);
    // false blob seeds in the background
    let blobs = rng.gen_range(0..=3);
    let mut seeds = vec![false; n];
    let bg_idx: Vec<usize> = (0..n).filter(|&i| bg[i] && reach[i] > 3.0).collect();
    for _ in 0..blobs {
        if !bg_idx.is_empty() {
            seeds[bg_idx[rng.gen_range(0..bg_idx.len())]] = true;
        }
    }
    let blob_dist = chamfer_distance(&seeds, h, w);
    let blob_scale = rng.gen_range(0.6..1.4);
    // per-sample balance between shrinking (FN) and growing (FP)
    let fn_weight = rng.gen_range(0.4..2.5);
    let fp_weight = rng.gen_range(0.4..2.5);
    let wobble_amp = 0.15 * (h.min(w) as f64);
    let wobble = value_noise(&mut rng, h, w, 4);
    let priority: Vec<f64> = (0..n)
        .map(|i| {
            let base = if fg[i] {
                depth[i] * fn_weight
            } else {
                reach[i].min(blob_dist[i] * blob_scale) * fp_weight
            };
            base + wobble[i] * wobble_amp
        })
        .collect();
    let rate = |tau: f64| disagreement_rate(&flip_set(&fg, &priority, tau, h, w), &binary).expect("same shape");
    let (mut lo, mut hi) = (0.0, priority.iter().cloned().fold(0.0, f64::max) + 1.0);
    let mut best = (f64::INFINITY, lo);
    for _ in 0..BISECT_STEPS {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid);
        if (r - rho).abs() < best.0 {
            best = ((r - rho).abs(), mid);
        }
        if r < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mask = flip_set(&fg, &priority, best.1, h, w);
    let (fp_rate, fn_rate) = fp_fn_rates(&mask, &binary)?;
    Ok(PseudoLabel {
        sample_id,
        mask,
        source: LabelSource::Injected,
        fp_rate,
        fn_rate,
    })
}
