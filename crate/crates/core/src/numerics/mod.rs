//! Dense kernels with hand-written backward passes, Adam, and the learning-rate schedule.

mod activation;
mod concat;
mod conv;
mod optim;
mod resample;

pub use activation::{activation, activation_backward, sigmoid, Activation};
pub use concat::{concat_channels, split_channels};
pub use conv::{conv2d, conv2d_backward, ConvGeom, ConvGrads};
pub use optim::{adam_step, lr_at, Adam, LrSchedule, Param};
pub use resample::{resample, resample_backward, resize_to, resize_to_backward, Resample};
