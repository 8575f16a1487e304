//! Segmentation losses: the noise-correction loss with its q-phase schedule,
//! baselines for ablation, the boundary DICE term, and the deep-supervision composite.

mod baseline;
mod composite;
mod dice;
mod nc;
mod spec;

pub use baseline::{baseline_loss, BaselineKind, LossResult, PROB_CLAMP};
pub use composite::{composite_loss, CompositeResult};
pub use dice::{boundary_map, dice_boundary_loss, DICE_SMOOTH};
pub use nc::{nc_grad, nc_loss};
pub use spec::{q_at, GradMode, LossKind, LossSpec};
