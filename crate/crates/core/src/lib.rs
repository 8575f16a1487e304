//! Weakly semi-supervised camouflaged-object segmentation at desk scale.

pub mod cli;
pub mod curves;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod tensor;
pub mod wavelet;

pub use error::{Error, Result};
pub use tensor::Tensor;
