//! Evaluation measures between a soft prediction in `[0, 1]` and a binary mask.
//!
//! Conventions: F and E binarise the prediction at the adaptive threshold
//! `min(2 · mean(p), 1)` with `>=`; IoU binarises at 0.5 with `>=`; S follows the
//! object + region structure measure with quadrant SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BETA2: f64 = 0.3;
const EPS: f64 = f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Threshold {
    Adaptive,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub e_phi: f64,
    pub f_beta: f64,
    pub s_alpha: f64,
    pub iou: f64,
    pub n_samples: usize,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "mae,e_phi,f_beta,s_alpha,iou,n_samples";

    /// All five measures for one prediction.
    pub fn single(p: &Tensor, g: &Tensor) -> Result<Self> {
        Ok(MetricReport {
            mae: mae_metric(p, g)?,
            e_phi: e_measure(p, g)?,
            f_beta: f_measure(p, g, BETA2, Threshold::Adaptive)?,
            s_alpha: s_measure(p, g, 0.5)?,
            iou: iou_score(p, g, 0.5)?,
            n_samples: 1,
        })
    }

    /// Fixed-order mean of per-sample reports.
    pub fn mean(reports: &[MetricReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::invalid("MetricReport::mean", "no samples"));
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Ok(MetricReport {
            mae: avg(|r| r.mae),
            e_phi: avg(|r| r.e_phi),
            f_beta: avg(|r| r.f_beta),
            s_alpha: avg(|r| r.s_alpha),
            iou: avg(|r| r.iou),
            n_samples: reports.len(),
        })
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.mae, self.e_phi, self.f_beta, self.s_alpha, self.iou, self.n_samples
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct")
    }

    pub fn in_range(&self) -> bool {
        [self.mae, self.e_phi, self.f_beta, self.s_alpha, self.iou]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

fn check(p: &Tensor, g: &Tensor, op: &'static str) -> Result<(usize, usize)> {
    p.same_shape(g, op)?;
    let (_, h, w) = p.dims3()?;
    Ok((h, w))
}

fn is_fg(v: f64) -> bool {
    v > 0.5
}

pub fn mae_metric(p: &Tensor, g: &Tensor) -> Result<f64> {
    p.same_shape(g, "mae_metric")?;
    Ok(p.data().iter().zip(g.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64)
}

pub fn adaptive_threshold(p: &Tensor) -> f64 {
    (2.0 * p.mean()).min(1.0)
}

fn resolve(p: &Tensor, t: Threshold) -> f64 {
    match t {
        Threshold::Adaptive => adaptive_threshold(p),
        Threshold::Fixed(t) => t,
    }
}

pub fn f_measure(p: &Tensor, g: &Tensor, beta2: f64, threshold: Threshold) -> Result<f64> {
    p.same_shape(g, "f_measure")?;
    let t = resolve(p, threshold);
    let (mut tp, mut fp, mut fnn) = (0.0, 0.0, 0.0);
    for (&pi, &gi) in p.data().iter().zip(g.data()) {
        match (pi >= t, is_fg(gi)) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fnn += 1.0,
            _ => {}
        }
    }
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
    let den = beta2 * precision + recall;
    Ok(if den > 0.0 { (1.0 + beta2) * precision * recall / den } else { 0.0 })
}

/// Enhanced alignment of the adaptively binarised prediction with `g`.
pub fn e_measure(p: &Tensor, g: &Tensor) -> Result<f64> {
    p.same_shape(g, "e_measure")?;
    let t = adaptive_threshold(p);
    let n = p.len() as f64;
    let bin: Vec<bool> = p.data().iter().map(|&v| v >= t).collect();
    let gt: Vec<bool> = g.data().iter().map(|&v| is_fg(v)).collect();
    let pred_fg = bin.iter().filter(|&&b| b).count() as f64;
    let gt_fg = gt.iter().filter(|&&b| b).count() as f64;
    let score = if gt_fg == 0.0 {
        1.0 - pred_fg / n
    } else if gt_fg == n {
        pred_fg / n
    } else {
        let (mp, mg) = (pred_fg / n, gt_fg / n);
        let mut sum = 0.0;
        for (&b, &f) in bin.iter().zip(&gt) {
            let a = b as u8 as f64 - mp;
            let c = f as u8 as f64 - mg;
            let align = 2.0 * a * c / (a * a + c * c + EPS);
            sum += (align + 1.0).powi(2) / 4.0;
        }
        sum / n
    };
    Ok(score.clamp(0.0, 1.0))
}

fn s_object(vals: &[f64]) -> f64 {
    let n = vals.len() as f64;
    if vals.is_empty() {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / n;
    let sd = if vals.len() > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    2.0 * mean / (mean * mean + 1.0 + sd + EPS)
}

fn object_score(p: &[f64], g: &[bool]) -> f64 {
    let u = g.iter().filter(|&&b| b).count() as f64 / g.len() as f64;
    let fg: Vec<f64> = p.iter().zip(g).filter(|(_, &b)| b).map(|(&v, _)| v).collect();
    let bg: Vec<f64> = p.iter().zip(g).filter(|(_, &b)| !b).map(|(&v, _)| 1.0 - v).collect();
    u * s_object(&fg) + (1.0 - u) * s_object(&bg)
}

fn ssim(p: &[f64], g: &[f64]) -> f64 {
    let n = p.len() as f64;
    let x = p.iter().sum::<f64>() / n;
    let y = g.iter().sum::<f64>() / n;
    let (mut sx, mut sy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in p.iter().zip(g) {
        sx += (a - x) * (a - x);
        sy += (b - y) * (b - y);
        sxy += (a - x) * (b - y);
    }
    let d = n - 1.0 + EPS;
    let (sx, sy, sxy) = (sx / d, sy / d, sxy / d);
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Round half to even.
fn round_even(v: f64) -> f64 {
    let r = v.round();
    if (v - v.trunc()).abs() == 0.5 && r % 2.0 != 0.0 {
        r - v.signum()
    } else {
        r
    }
}

fn region_score(p: &[f64], g: &[bool], h: usize, w: usize) -> f64 {
    let (mut sx, mut sy, mut cnt) = (0.0, 0.0, 0.0);
    for (i, &b) in g.iter().enumerate() {
        if b {
            sy += (i / w) as f64;
            sx += (i % w) as f64;
            cnt += 1.0;
        }
    }
    let cx = (round_even(sx / cnt) as usize + 1).min(w);
    let cy = (round_even(sy / cnt) as usize + 1).min(h);
    let area = (h * w) as f64;
    let quads = [(0, cy, 0, cx), (0, cy, cx, w), (cy, h, 0, cx), (cy, h, cx, w)];
    let mut total = 0.0;
    let mut wsum = 0.0;
    for (k, &(y0, y1, x0, x1)) in quads.iter().enumerate() {
        let weight = if k < 3 {
            ((y1 - y0) * (x1 - x0)) as f64 / area
        } else {
            1.0 - wsum
        };
        wsum += weight;
        if y1 == y0 || x1 == x0 {
            continue;
        }
        let mut pq = Vec::with_capacity((y1 - y0) * (x1 - x0));
        let mut gq = Vec::with_capacity(pq.capacity());
        for y in y0..y1 {
            for x in x0..x1 {
                pq.push(p[y * w + x]);
                gq.push(g[y * w + x] as u8 as f64);
            }
        }
        total += weight * ssim(&pq, &gq);
    }
    total
}

/// Structure measure `α · object + (1 − α) · region`.
pub fn s_measure(p: &Tensor, g: &Tensor, alpha: f64) -> Result<f64> {
    let (h, w) = check(p, g, "s_measure")?;
    let gt: Vec<bool> = g.data().iter().map(|&v| is_fg(v)).collect();
    let y = gt.iter().filter(|&&b| b).count() as f64 / gt.len() as f64;
    let score = if y == 0.0 {
        1.0 - p.mean()
    } else if y == 1.0 {
        p.mean()
    } else {
        alpha * object_score(p.data(), &gt) + (1.0 - alpha) * region_score(p.data(), &gt, h, w)
    };
    Ok(score.clamp(0.0, 1.0))
}

/// Intersection over union after binarising `p` at `threshold`; 1 when both are empty.
pub fn iou_score(p: &Tensor, g: &Tensor, threshold: f64) -> Result<f64> {
    p.same_shape(g, "iou_score")?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&pi, &gi) in p.data().iter().zip(g.data()) {
        let (a, b) = (pi >= threshold, is_fg(gi));
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(h: usize, w: usize, f: impl Fn(usize, usize) -> f64) -> Tensor {
        Tensor::from_fn(&[1, h, w], |i| f(i / w, i % w))
    }

    fn square() -> Tensor {
        m(8, 8, |y, x| ((2..6).contains(&y) && (1..5).contains(&x)) as u8 as f64)
    }

    #[test]
    fn perfect_prediction() {
        let g = square();
        let r = MetricReport::single(&g, &g).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.iou, 1.0);
        assert_eq!(r.f_beta, 1.0);
        assert!((r.e_phi - 1.0).abs() < 1e-6);
        assert!((r.s_alpha - 1.0).abs() < 1e-6);
    }

    #[test]
    fn complement() {
        let g = square();
        let c = g.map(|v| 1.0 - v);
        assert_eq!(mae_metric(&c, &g).unwrap(), 1.0);
        assert_eq!(f_measure(&c, &g, BETA2, Threshold::Adaptive).unwrap(), 0.0);
        assert_eq!(iou_score(&c, &g, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn iou_both_empty_is_one() {
        let z = Tensor::zeros(&[1, 4, 4]);
        assert_eq!(iou_score(&z, &z, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_ground_truths() {
        let z = Tensor::zeros(&[1, 4, 4]);
        let one = Tensor::full(&[1, 4, 4], 1.0);
        let p = Tensor::full(&[1, 4, 4], 0.25);
        assert_eq!(s_measure(&p, &z, 0.5).unwrap(), 0.75);
        assert_eq!(s_measure(&p, &one, 0.5).unwrap(), 0.25);
        assert_eq!(e_measure(&z, &z).unwrap(), 0.0);
        assert_eq!(e_measure(&one, &one).unwrap(), 1.0);
    }

    #[test]
    fn round_half_even() {
        assert_eq!(round_even(2.5), 2.0);
        assert_eq!(round_even(3.5), 4.0);
        assert_eq!(round_even(2.4), 2.0);
        assert_eq!(round_even(2.6), 3.0);
    }

    #[test]
    fn report_rows() {
        let r = MetricReport {
            mae: 0.5,
            e_phi: 0.25,
            f_beta: 1.0,
            s_alpha: 0.0,
            iou: 0.125,
            n_samples: 3,
        };
        assert_eq!(r.to_csv_row(), "0.5,0.25,1,0,0.125,3");
        let back: MetricReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(MetricReport::mean(&[]).is_err());
    }
}
