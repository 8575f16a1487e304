//! The end-to-end protocol: auxiliary training, pseudo labels, primary training, evaluation.

mod augment;
mod config;
mod run;
mod train;

pub use augment::{augment, View, MIN_CROP_SCALE};
pub use config::{Augment, ExperimentConfig, Preset, Prompt};
pub use run::{
    assemble_training_set, evaluate, generate_pseudo_labels, pseudo_stats, run_wsscod, train_anet, train_pnet, Log,
    PseudoStats, RunBundle, Summary,
};
pub use train::{evaluate_items, train_network, EpochRow, EvalItem, RunRecord, TrainItem, TrainSettings, EPOCH_CSV_HEADER};
