use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Axis-aligned box with inclusive corners `(x0, y0)`–`(x1, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Result<Self> {
        if x0 > x1 || y0 > y1 {
            return Err(Error::invalid("BBox::new", format!("inverted corners ({x0},{y0})-({x1},{y1})")));
        }
        Ok(BBox { x0, y0, x1, y1 })
    }

    pub fn full(h: usize, w: usize) -> Self {
        BBox {
            x0: 0,
            y0: 0,
            x1: w - 1,
            y1: h - 1,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        (self.y0..=self.y1).contains(&y) && (self.x0..=self.x1).contains(&x)
    }

    pub fn check_within(&self, h: usize, w: usize) -> Result<()> {
        if self.x0 > self.x1 || self.y0 > self.y1 || self.x1 >= w || self.y1 >= h {
            return Err(Error::invalid(
                "BBox",
                format!(
                    "box ({},{})-({},{}) outside a {h}x{w} image",
                    self.x0, self.y0, self.x1, self.y1
                ),
            ));
        }
        Ok(())
    }

    /// Horizontal mirror inside an image of width `w`.
    pub fn flip_h(&self, w: usize) -> Self {
        BBox {
            x0: w - 1 - self.x1,
            y0: self.y0,
            x1: w - 1 - self.x0,
            y1: self.y1,
        }
    }

    /// Binary indicator of the box.
    pub fn indicator(&self, h: usize, w: usize) -> Tensor {
        Tensor::from_fn(&[1, h, w], |i| if self.contains(i / w, i % w) { 1.0 } else { 0.0 })
    }
}
