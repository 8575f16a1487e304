use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Stacks `[C_i, H, W]` tensors along the channel axis in argument order.
pub fn concat_channels(xs: &[&Tensor]) -> Result<Tensor> {
    let first = xs
        .first()
        .ok_or_else(|| Error::invalid("concat_channels", "empty input list"))?;
    let (_, h, w) = first.dims3()?;
    let mut channels = 0;
    for x in xs {
        let (c, xh, xw) = x.dims3()?;
        if xh != h {
            return Err(Error::Shape {
                op: "concat_channels",
                dim: "height",
                got: xh,
                expected: h,
            });
        }
        if xw != w {
            return Err(Error::Shape {
                op: "concat_channels",
                dim: "width",
                got: xw,
                expected: w,
            });
        }
        channels += c;
    }
    let mut data = Vec::with_capacity(channels * h * w);
    for x in xs {
        data.extend_from_slice(x.data());
    }
    Tensor::new(vec![channels, h, w], data)
}

/// Inverse of [`concat_channels`]: splits into pieces with the given channel counts.
pub fn split_channels(x: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    let (c, h, w) = x.dims3()?;
    let total: usize = sizes.iter().sum();
    if total != c {
        return Err(Error::Shape {
            op: "split_channels",
            dim: "channels",
            got: c,
            expected: total,
        });
    }
    let plane = h * w;
    let mut offset = 0;
    sizes
        .iter()
        .map(|&n| {
            let part = x.data()[offset * plane..(offset + n) * plane].to_vec();
            offset += n;
            Tensor::new(vec![n, h, w], part)
        })
        .collect()
}
