//! Synthetic camouflage data, box prompts, structured label noise and on-disk storage.

mod bbox;
mod box_ops;
mod noise;
mod pnm;
mod store;
mod synth;

pub use bbox::BBox;
pub use box_ops::derive_box;
pub use noise::{disagreement_rate, fp_fn_rates, inject_noise, inject_noise_for, LabelSource, PseudoLabel, MAX_RHO};
pub use pnm::{read_pgm, read_ppm, write_pgm, write_ppm};
pub use store::{
    derive_seed, generate_dataset, load_dataset, load_pseudo_mask, pseudo_path, read_manifest, sample_id,
    save_dataset, save_pseudo_labels, split_dataset, write_manifest, DatasetManifest, GeneratorParams,
    ManifestEntry, Split, MANIFEST_FILE, MANIFEST_SCHEMA,
};
pub use synth::{synth_camo, synth_camo_with_id, SegSample, MAX_AREA, MIN_AREA};
