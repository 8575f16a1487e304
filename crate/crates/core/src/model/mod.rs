//! ANet / PNet assemblies with hand-written backward passes.

mod aspp;
mod checkpoint;
mod decoder;
mod encoder;
mod frequency;
mod layers;
mod net;
mod params;

pub use aspp::{Aspp, AsppTape};
pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use decoder::{rev, Decoder, DecoderTape};
pub use encoder::{Encoder, EncoderConfig, EncoderTape, FeaturePyramid};
pub use frequency::{BranchFusion, FreqTape, FreqTransformer, FusionTape};
pub use layers::{Conv, Gate, GateTape, ResBlock};
pub use net::{make_proposal, NetKind, Network, Predictions, Tape, IMAGE_CHANNELS};
pub use params::{Grads, ParamId, ParamSet};
