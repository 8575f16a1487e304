//! 2-D cross-correlation over `[C, H, W]` tensors, lowered to a matrix product.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Stride, zero padding and dilation of a square-kernel convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub pad: usize,
    pub dilation: usize,
}

impl ConvGeom {
    /// Stride 1 with the padding that preserves spatial size for an odd kernel.
    pub fn same(kernel: usize, dilation: usize) -> Self {
        ConvGeom {
            stride: 1,
            pad: dilation * (kernel - 1) / 2,
            dilation,
        }
    }

    /// Stride 2, "same" padding: halves even extents.
    pub fn down(kernel: usize) -> Self {
        ConvGeom {
            stride: 2,
            pad: (kernel - 1) / 2,
            dilation: 1,
        }
    }

    fn out_extent(&self, n: usize, k: usize) -> Option<usize> {
        let span = self.dilation * (k - 1) + 1;
        let padded = n + 2 * self.pad;
        (padded >= span).then(|| (padded - span) / self.stride + 1)
    }
}

pub struct ConvGrads {
    pub dx: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
}

struct Layout {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    ho: usize,
    wo: usize,
}

impl Layout {
    fn rows(&self) -> usize {
        self.c_in * self.k * self.k
    }
    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

fn layout(x: &Tensor, w: &Tensor, geom: ConvGeom) -> Result<Layout> {
    let (c_in, h, wd) = x.dims3()?;
    let [c_out, wc_in, k, k2] = w.shape()[..] else {
        return Err(Error::invalid(
            "conv2d",
            format!("weight must be rank 4, got {:?}", w.shape()),
        ));
    };
    if wc_in != c_in {
        return Err(Error::Shape {
            op: "conv2d",
            dim: "input channels",
            got: c_in,
            expected: wc_in,
        });
    }
    if k != k2 {
        return Err(Error::Shape {
            op: "conv2d",
            dim: "kernel width",
            got: k2,
            expected: k,
        });
    }
    if k % 2 == 0 {
        return Err(Error::invalid("conv2d", format!("kernel size {k} is even")));
    }
    if geom.stride == 0 || geom.dilation == 0 {
        return Err(Error::invalid("conv2d", "stride and dilation must be positive"));
    }
    let ho = geom
        .out_extent(h, k)
        .ok_or_else(|| Error::invalid("conv2d", "kernel larger than padded height"))?;
    let wo = geom
        .out_extent(wd, k)
        .ok_or_else(|| Error::invalid("conv2d", "kernel larger than padded width"))?;
    Ok(Layout {
        c_in,
        h,
        w: wd,
        c_out,
        k,
        ho,
        wo,
    })
}

/// Tap offset for output index `o` and kernel index `t`; `None` when it lands in padding.
#[inline]
fn src_index(o: usize, t: usize, geom: ConvGeom, n: usize) -> Option<usize> {
    let pos = (o * geom.stride + t * geom.dilation) as isize - geom.pad as isize;
    (pos >= 0 && (pos as usize) < n).then_some(pos as usize)
}

fn im2col(x: &[f64], l: &Layout, geom: ConvGeom) -> Vec<f64> {
    let cols = l.cols();
    let mut col = vec![0.0; l.rows() * cols];
    for ci in 0..l.c_in {
        let plane = &x[ci * l.h * l.w..(ci + 1) * l.h * l.w];
        for ki in 0..l.k {
            for kj in 0..l.k {
                let row = (ci * l.k + ki) * l.k + kj;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..l.ho {
                    let Some(iy) = src_index(oy, ki, geom, l.h) else {
                        continue;
                    };
                    let src_row = &plane[iy * l.w..(iy + 1) * l.w];
                    let dst_row = &mut dst[oy * l.wo..(oy + 1) * l.wo];
                    for (ox, d) in dst_row.iter_mut().enumerate() {
                        if let Some(ix) = src_index(ox, kj, geom, l.w) {
                            *d = src_row[ix];
                        }
                    }
                }
            }
        }
    }
    col
}

fn col2im(col: &[f64], l: &Layout, geom: ConvGeom) -> Vec<f64> {
    let cols = l.cols();
    let mut x = vec![0.0; l.c_in * l.h * l.w];
    for ci in 0..l.c_in {
        let plane = &mut x[ci * l.h * l.w..(ci + 1) * l.h * l.w];
        for ki in 0..l.k {
            for kj in 0..l.k {
                let row = (ci * l.k + ki) * l.k + kj;
                let src = &col[row * cols..(row + 1) * cols];
                for oy in 0..l.ho {
                    let Some(iy) = src_index(oy, ki, geom, l.h) else {
                        continue;
                    };
                    for ox in 0..l.wo {
                        if let Some(ix) = src_index(ox, kj, geom, l.w) {
                            plane[iy * l.w + ix] += src[oy * l.wo + ox];
                        }
                    }
                }
            }
        }
    }
    x
}

/// `c (m×n) = alpha·a·b + beta·c` with arbitrary strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: every index touched lies inside the slices given the caller's
    // dimensions and strides, which are checked by `layout`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Cross-correlation of `x: [C_in, H, W]` with `w: [C_out, C_in, k, k]` plus bias `b: [C_out]`.
pub fn conv2d(x: &Tensor, w: &Tensor, b: &Tensor, geom: ConvGeom) -> Result<Tensor> {
    let l = layout(x, w, geom)?;
    if b.len() != l.c_out {
        return Err(Error::Shape {
            op: "conv2d",
            dim: "bias length",
            got: b.len(),
            expected: l.c_out,
        });
    }
    let (rows, cols) = (l.rows(), l.cols());
    let col = im2col(x.data(), &l, geom);
    let mut out = vec![0.0; l.c_out * cols];
    for (co, chunk) in out.chunks_mut(cols).enumerate() {
        chunk.fill(b.data()[co]);
    }
    gemm(
        l.c_out,
        rows,
        cols,
        w.data(),
        (rows as isize, 1),
        &col,
        (cols as isize, 1),
        1.0,
        &mut out,
    );
    Tensor::new(vec![l.c_out, l.ho, l.wo], out)
}

/// Exact partials of `conv2d` given the upstream gradient `dy`.
pub fn conv2d_backward(x: &Tensor, w: &Tensor, dy: &Tensor, geom: ConvGeom) -> Result<ConvGrads> {
    let l = layout(x, w, geom)?;
    let (rows, cols) = (l.rows(), l.cols());
    let expect = Tensor::zeros(&[l.c_out, l.ho, l.wo]);
    expect.same_shape(dy, "conv2d_backward")?;

    let col = im2col(x.data(), &l, geom);
    let dyd = dy.data();

    // dW = dY · colᵀ
    let mut dw = vec![0.0; l.c_out * rows];
    gemm(
        l.c_out,
        cols,
        rows,
        dyd,
        (cols as isize, 1),
        &col,
        (1, cols as isize),
        0.0,
        &mut dw,
    );

    // dcol = Wᵀ · dY
    let mut dcol = vec![0.0; rows * cols];
    gemm(
        rows,
        l.c_out,
        cols,
        w.data(),
        (1, rows as isize),
        dyd,
        (cols as isize, 1),
        0.0,
        &mut dcol,
    );
    let dx = col2im(&dcol, &l, geom);

    let db: Vec<f64> = dyd.chunks(cols).map(|c| c.iter().sum()).collect();

    Ok(ConvGrads {
        dx: Tensor::new(vec![l.c_in, l.h, l.w], dx)?,
        dw: Tensor::new(w.shape().to_vec(), dw)?,
        db: Tensor::new(vec![l.c_out], db)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// Direct nested-loop cross-correlation, independent of the im2col path.
    fn naive(x: &Tensor, w: &Tensor, b: &Tensor, g: ConvGeom) -> Tensor {
        let (ci, h, wd) = x.dims3().unwrap();
        let (co, k) = (w.shape()[0], w.shape()[2]);
        let ho = (h + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
        let wo = (wd + 2 * g.pad - g.dilation * (k - 1) - 1) / g.stride + 1;
        let mut out = Tensor::zeros(&[co, ho, wo]);
        for o in 0..co {
            for y in 0..ho {
                for xx in 0..wo {
                    let mut s = b.data()[o];
                    for c in 0..ci {
                        for i in 0..k {
                            for j in 0..k {
                                let iy = (y * g.stride + i * g.dilation) as isize - g.pad as isize;
                                let ix = (xx * g.stride + j * g.dilation) as isize - g.pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    s += w.data()[((o * ci + c) * k + i) * k + j]
                                        * x.at3(c, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    out.set3(o, y, xx, s);
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&[1, 5, 5], &mut rng);
        let w = Tensor::full(&[1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &w, &b, ConvGeom::same(1, 1)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::zeros(&[2, 6, 6]);
        let w = random(&[3, 2, 3, 3], &mut rng);
        let y = conv2d(&x, &w, &Tensor::zeros(&[3]), ConvGeom::same(3, 1)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(y.shape(), &[3, 6, 6]);
    }

    #[test]
    fn matches_naive_loops_across_geometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for geom in [
            ConvGeom::same(3, 1),
            ConvGeom::same(3, 2),
            ConvGeom::same(3, 4),
            ConvGeom::down(3),
            ConvGeom::same(1, 1),
        ] {
            let k = if geom.pad == 0 && geom.stride == 1 { 1 } else { 3 };
            let x = random(&[3, 8, 8], &mut rng);
            let w = random(&[4, 3, k, k], &mut rng);
            let b = random(&[4], &mut rng);
            let fast = conv2d(&x, &w, &b, geom).unwrap();
            let slow = naive(&x, &w, &b, geom);
            for (a, e) in fast.data().iter().zip(slow.data()) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_mismatch_names_dimension() {
        let x = Tensor::zeros(&[2, 4, 4]);
        let w = Tensor::zeros(&[1, 3, 3, 3]);
        let err = conv2d(&x, &w, &Tensor::zeros(&[1]), ConvGeom::same(3, 1)).unwrap_err();
        assert!(err.to_string().contains("input channels"), "{err}");
    }

    #[test]
    fn linear_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random(&[2, 2, 3, 3], &mut rng);
        let b = random(&[2], &mut rng);
        let zero_b = Tensor::zeros(&[2]);
        for _ in 0..10 {
            let x1 = random(&[2, 6, 6], &mut rng);
            let x2 = random(&[2, 6, 6], &mut rng);
            let (alpha, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix = x1.zip_map(&x2, |a, c| alpha * a + beta * c).unwrap();
            let lhs = conv2d(&mix, &w, &b, ConvGeom::same(3, 1)).unwrap();
            let y1 = conv2d(&x1, &w, &zero_b, ConvGeom::same(3, 1)).unwrap();
            let y2 = conv2d(&x2, &w, &zero_b, ConvGeom::same(3, 1)).unwrap();
            for (i, &l) in lhs.data().iter().enumerate() {
                let c = i / 36;
                let r = alpha * y1.data()[i] + beta * y2.data()[i] + b.data()[c];
                assert!((l - r).abs() < 1e-10);
            }
        }
    }
}
