#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsscod::Tensor;

pub const H: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

pub fn binary(rng: &mut ChaCha8Rng, shape: &[usize], p_one: f64) -> Tensor {
    Tensor::from_fn(shape, |_| if rng.gen_bool(p_one) { 1.0 } else { 0.0 })
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central difference of `f` along every entry of `x`.
pub fn numeric_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Tensor {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + H;
        let lp = f(&probe);
        probe.data_mut()[i] = orig - H;
        let lm = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (lp - lm) / (2.0 * H);
    }
    out
}

/// Worst entrywise relative error between two gradients.
pub fn max_rel(analytic: &Tensor, numeric: &Tensor) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Fixed random projection so vector-valued ops reduce to a scalar.
pub fn probe_weights(seed: u64, shape: &[usize]) -> Tensor {
    uniform(&mut rng(seed), shape, -1.0, 1.0)
}

pub fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

pub fn square_mask(n: usize, y0: usize, x0: usize, side: usize) -> Tensor {
    Tensor::from_fn(&[1, n, n], |i| {
        let (y, x) = (i / n, i % n);
        if (y0..y0 + side).contains(&y) && (x0..x0 + side).contains(&x) {
            1.0
        } else {
            0.0
        }
    })
}

/// Sign of dL/db for a constant prediction `σ(b)` against a mask with `n_ones` of `n` pixels set,
/// after flipping exactly `flip_ones` ones and `flip_zeros` zeros (positions drawn from `seed`).
pub fn constant_prediction_grad_sign(n: usize, n_ones: usize, flip_ones: usize, flip_zeros: usize, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    use wsscod::losses::{nc_grad, GradMode};
    use wsscod::numerics::sigmoid;

    let mut r = rng(seed);
    let mut ones: Vec<usize> = (0..n).collect();
    ones.shuffle(&mut r);
    let mut g = vec![0.0; n];
    for &i in &ones[..n_ones] {
        g[i] = 1.0;
    }
    let mut flip: Vec<usize> = ones[..n_ones].choose_multiple(&mut r, flip_ones).copied().collect();
    flip.extend(ones[n_ones..].choose_multiple(&mut r, flip_zeros).copied());
    for i in flip {
        g[i] = 1.0 - g[i];
    }
    let b = 0.3;
    let s = sigmoid(b);
    let p = Tensor::full(&[1, 1, n], s);
    let g = Tensor::new(vec![1, 1, n], g).unwrap();
    let dp = nc_grad(&p, &g, 1.0, GradMode::DetachedDenominator).unwrap();
    let db: f64 = dp.data().iter().map(|d| d * s * (1.0 - s)).sum();
    db.signum()
}

/// Pixel disagreement over the union of foregrounds plus an equal-area background band.
pub fn object_centric_disagreement(noisy: &Tensor, gt: &Tensor) -> f64 {
    let n = gt.len();
    let mut xor = 0usize;
    let mut union = 0usize;
    for (&a, &b) in noisy.data().iter().zip(gt.data()) {
        let (a, b) = (a >= 0.5, b >= 0.5);
        xor += (a != b) as usize;
        union += (a || b) as usize;
    }
    let denom = union + union.min(n - union);
    xor as f64 / denom as f64
}

/// Moran's I of a binary map under rook (4-neighbour) adjacency.
pub fn morans_i(e: &[bool], h: usize, w: usize) -> f64 {
    let n = e.len() as f64;
    let mean = e.iter().filter(|&&v| v).count() as f64 / n;
    let z: Vec<f64> = e.iter().map(|&v| v as u8 as f64 - mean).collect();
    let (mut num, mut weight) = (0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                num += 2.0 * z[i] * z[i + 1];
                weight += 2.0;
            }
            if y + 1 < h {
                num += 2.0 * z[i] * z[i + w];
                weight += 2.0;
            }
        }
    }
    let var: f64 = z.iter().map(|v| v * v).sum();
    (n / weight) * num / var
}

pub fn randomize_biases(ps: &mut wsscod::model::ParamSet, seed: u64) {
    let mut r = rng(seed);
    for name in ps.names().to_vec() {
        if name.ends_with(".b") {
            let id = ps.find(&name).unwrap();
            ps.value_mut(id).data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.1..0.1));
        }
    }
}

pub fn pyramid(r: &mut ChaCha8Rng, c: usize, top: usize) -> wsscod::model::FeaturePyramid {
    wsscod::model::FeaturePyramid {
        levels: [0, 1, 2, 3].map(|k| uniform(r, &[c, top >> k, top >> k], -1.0, 1.0)),
    }
}

pub fn pyramid_dot(p: &wsscod::model::FeaturePyramid, w: &[Tensor; 4]) -> f64 {
    p.levels.iter().zip(w).map(|(a, b)| dot(a, b)).sum()
}

/// Worst relative error over random parameter entries, probed by central differences of `loss`.
///
/// `samples` of `None` takes one entry from every parameter tensor. Returns the offending entry too.
pub fn param_fd_worst(
    ps: &mut wsscod::model::ParamSet,
    grads: &wsscod::model::Grads,
    samples: Option<usize>,
    seed: u64,
    loss: impl Fn(&wsscod::model::ParamSet) -> f64,
) -> (f64, String) {
    use rand::seq::SliceRandom;
    let mut r = rng(seed);
    let mut names = ps.names().to_vec();
    if let Some(k) = samples {
        names = (0..k).map(|_| names.choose(&mut r).unwrap().clone()).collect();
    }
    let mut worst = (0.0f64, String::new());
    for name in &names {
        let id = ps.find(name).unwrap();
        let j = r.gen_range(0..ps.value(id).len());
        let orig = ps.value(id).data()[j];
        ps.value_mut(id).data_mut()[j] = orig + H;
        let lp = loss(ps);
        ps.value_mut(id).data_mut()[j] = orig - H;
        let lm = loss(ps);
        ps.value_mut(id).data_mut()[j] = orig;
        let e = rel_err(grads.get(id).data()[j], (lp - lm) / (2.0 * H));
        if e >= worst.0 {
            worst = (e, format!("{name}[{j}]"));
        }
    }
    worst
}

/// Worst relative error over `samples` random entries of an input tensor.
pub fn input_fd_worst(x: &Tensor, dx: &Tensor, samples: usize, seed: u64, loss: impl Fn(&Tensor) -> f64) -> f64 {
    let mut r = rng(seed);
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let j = r.gen_range(0..x.len());
        let orig = x.data()[j];
        probe.data_mut()[j] = orig + H;
        let lp = loss(&probe);
        probe.data_mut()[j] = orig - H;
        let lm = loss(&probe);
        probe.data_mut()[j] = orig;
        worst = worst.max(rel_err(dx.data()[j], (lp - lm) / (2.0 * H)));
    }
    worst
}

pub fn textured(g: &Tensor, n: usize) -> Tensor {
    Tensor::from_fn(&[3, n, n], |i| {
        let p = i % (n * n);
        0.3 + 0.4 * g.data()[p] + 0.05 * ((i * 7919) % 13) as f64 / 13.0
    })
}

/// Square object on a lightly textured background.
pub fn blob_sample(n: usize) -> (Tensor, Tensor) {
    let g = square_mask(n, n / 4, n / 3, n / 2);
    (textured(&g, n), g)
}

/// Mean over 4-adjacent pixel pairs straddling the mask edge of the per-channel absolute difference.
pub fn boundary_contrast(s: &wsscod::data::SegSample) -> f64 {
    let (_, h, w) = s.gt.dims3().unwrap();
    let g = s.gt.data();
    let (mut total, mut pairs) = (0.0, 0usize);
    let mut visit = |a: usize, b: usize| {
        if g[a] != g[b] {
            for c in 0..3 {
                total += (s.image.channel(c)[a] - s.image.channel(c)[b]).abs() / 3.0;
            }
            pairs += 1;
        }
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                visit(i, i + 1);
            }
            if y + 1 < h {
                visit(i, i + w);
            }
        }
    }
    total / pairs as f64
}

/// Boundary of a binary map: pixels whose 3×3 window (clipped) holds both values.
pub fn brute_boundary(m: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let mut vals = vec![];
            for yy in y.saturating_sub(1)..=(y + 1).min(n - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(n - 1) {
                    vals.push(m[yy * n + xx]);
                }
            }
            if vals.contains(&0.0) && vals.contains(&1.0) {
                out[y * n + x] = 1.0;
            }
        }
    }
    out
}
