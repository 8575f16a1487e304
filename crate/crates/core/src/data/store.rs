use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bbox::BBox;
use super::noise::PseudoLabel;
use super::pnm::{read_pgm, read_ppm, write_pgm, write_ppm};
use super::synth::{synth_camo_with_id, SegSample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MANIFEST_SCHEMA: &str = "nsl-manifest-v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Training pool not yet assigned.
    Train,
    /// Fully labelled subset.
    DM,
    /// Box-only subset.
    DN,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub size: usize,
    pub count: usize,
    pub test_count: usize,
    pub difficulty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub image: String,
    pub mask: String,
    pub bbox: BBox,
    pub split: Split,
    #[serde(default)]
    pub jittered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema: String,
    pub seed: u64,
    pub generator: GeneratorParams,
    #[serde(default)]
    pub frac_m: Option<f64>,
    #[serde(default)]
    pub split_seed: Option<u64>,
    pub samples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn ids_in(&self, split: Split) -> Vec<&str> {
        self.samples
            .iter()
            .filter(|e| e.split == split)
            .map(|e| e.id.as_str())
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.samples.iter().filter(|e| e.split == split).count()
    }

    /// Samples eligible for the labelled / box-only split.
    fn is_training(split: Split) -> bool {
        matches!(split, Split::Train | Split::DM | Split::DN)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable per-item seed from a base seed and a string key.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in key.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(splitmix64(base) ^ h)
}

pub fn sample_id(split: Split, i: usize) -> String {
    match split {
        Split::Test => format!("test-{i:04}"),
        _ => format!("train-{i:04}"),
    }
}

/// Generates `count` training and `test_count` test samples.
pub fn generate_dataset(seed: u64, params: &GeneratorParams) -> Result<(DatasetManifest, Vec<SegSample>)> {
    if params.count == 0 {
        return Err(Error::invalid("generate_dataset", "count must be positive"));
    }
    let plan: Vec<(String, Split)> = (0..params.count)
        .map(|i| (sample_id(Split::Train, i), Split::Train))
        .chain((0..params.test_count).map(|i| (sample_id(Split::Test, i), Split::Test)))
        .collect();
    let samples = plan
        .par_iter()
        .map(|(id, _)| synth_camo_with_id(derive_seed(seed, id), params.size, params.difficulty, id.clone()))
        .collect::<Result<Vec<_>>>()?;
    let entries = samples
        .iter()
        .zip(&plan)
        .map(|(s, (_, split))| ManifestEntry {
            id: s.id.clone(),
            image: format!("images/{}.ppm", s.id),
            mask: format!("masks/{}.pgm", s.id),
            bbox: s.bbox,
            split: *split,
            jittered: s.jittered,
        })
        .collect();
    Ok((
        DatasetManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            seed,
            generator: params.clone(),
            frac_m: None,
            split_seed: None,
            samples: entries,
        },
        samples,
    ))
}

/// Seeded uniform split of the training pool into `D_m` (`round(frac_m · N)`) and `D_n`.
pub fn split_dataset(manifest: &DatasetManifest, frac_m: f64, seed: u64) -> Result<DatasetManifest> {
    if !(frac_m > 0.0 && frac_m < 1.0) {
        return Err(Error::invalid("split_dataset", format!("frac_m must be in (0, 1), got {frac_m}")));
    }
    let pool: Vec<usize> = (0..manifest.samples.len())
        .filter(|&i| DatasetManifest::is_training(manifest.samples[i].split))
        .collect();
    let n = pool.len();
    let n_m = (frac_m * n as f64).round() as usize;
    if n_m < 1 || n_m >= n {
        return Err(Error::invalid(
            "split_dataset",
            format!("frac_m {frac_m} on {n} samples leaves an empty split ({n_m} labelled)"),
        ));
    }
    let mut order = pool.clone();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = manifest.clone();
    for &i in &pool {
        out.samples[i].split = Split::DN;
    }
    for &i in &order[..n_m] {
        out.samples[i].split = Split::DM;
    }
    out.frac_m = Some(frac_m);
    out.split_seed = Some(seed);
    Ok(out)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

pub fn write_manifest(manifest: &DatasetManifest, dir: &Path) -> Result<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes images, masks and the manifest. Returns the manifest path.
pub fn save_dataset(manifest: &DatasetManifest, samples: &[SegSample], dir: &Path) -> Result<PathBuf> {
    if manifest.samples.len() != samples.len() {
        return Err(Error::ManifestMismatch(format!(
            "{} manifest entries for {} samples",
            manifest.samples.len(),
            samples.len()
        )));
    }
    create_dir(&dir.join("images"))?;
    create_dir(&dir.join("masks"))?;
    for (e, s) in manifest.samples.iter().zip(samples) {
        if e.id != s.id {
            return Err(Error::ManifestMismatch(format!("entry `{}` paired with sample `{}`", e.id, s.id)));
        }
        write_ppm(&dir.join(&e.image), &s.image)?;
        write_pgm(&dir.join(&e.mask), &s.gt)?;
    }
    write_manifest(manifest, dir)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::MissingFile {
            id: "manifest".to_string(),
            path,
        });
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        what: "manifest",
        path: path.clone(),
        msg: e.to_string(),
    })?;
    if m.schema != MANIFEST_SCHEMA {
        return Err(Error::Malformed {
            what: "manifest",
            path,
            msg: format!("schema `{}`, expected `{MANIFEST_SCHEMA}`", m.schema),
        });
    }
    Ok(m)
}

fn load_entry(dir: &Path, e: &ManifestEntry, size: usize) -> Result<SegSample> {
    let need = |rel: &str| -> Result<PathBuf> {
        let p = dir.join(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingFile {
                id: e.id.clone(),
                path: p,
            })
        }
    };
    let image = read_ppm(&need(&e.image)?)?;
    let gt = read_pgm(&need(&e.mask)?)?;
    let (_, h, w) = image.dims3()?;
    if (h, w) != (size, size) || gt.shape() != [1, size, size] {
        return Err(Error::ManifestMismatch(format!(
            "sample `{}` is {h}x{w}, manifest says {size}x{size}",
            e.id
        )));
    }
    e.bbox
        .check_within(h, w)
        .map_err(|_| Error::ManifestMismatch(format!("box of `{}` lies outside the image", e.id)))?;
    Ok(SegSample {
        id: e.id.clone(),
        image,
        gt,
        bbox: e.bbox,
        jittered: e.jittered,
    })
}

/// Loads the manifest and every sample it lists, in manifest order.
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<SegSample>)> {
    let m = read_manifest(dir)?;
    let samples = m
        .samples
        .iter()
        .map(|e| load_entry(dir, e, m.generator.size))
        .collect::<Result<Vec<_>>>()?;
    Ok((m, samples))
}

pub fn pseudo_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("pseudo").join(format!("{id}.pgm"))
}

/// Stores soft pseudo labels as 8-bit PGM under `dir/pseudo/`.
pub fn save_pseudo_labels(dir: &Path, labels: &[PseudoLabel]) -> Result<()> {
    create_dir(&dir.join("pseudo"))?;
    for l in labels {
        write_pgm(&pseudo_path(dir, &l.sample_id), &l.mask)?;
    }
    Ok(())
}

pub fn load_pseudo_mask(dir: &Path, id: &str) -> Result<Tensor> {
    let p = pseudo_path(dir, id);
    if !p.exists() {
        return Err(Error::MissingFile {
            id: id.to_string(),
            path: p,
        });
    }
    read_pgm(&p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorParams {
        GeneratorParams {
            size: 32,
            count: 12,
            test_count: 3,
            difficulty: 0.4,
        }
    }

    #[test]
    fn seeds_differ_per_key() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(7, "train-0001"), derive_seed(7, "train-0001"));
    }

    #[test]
    fn split_sizes() {
        let (m, _) = generate_dataset(1, &small()).unwrap();
        let s = split_dataset(&m, 0.25, 3).unwrap();
        assert_eq!(s.count(Split::DM), 3);
        assert_eq!(s.count(Split::DN), 9);
        assert_eq!(s.count(Split::Test), 3);
        assert_eq!(split_dataset(&m, 0.25, 3).unwrap(), s);
        assert!(split_dataset(&m, 0.01, 3).is_err());
        assert!(split_dataset(&m, 1.0, 3).is_err());
    }
}
