use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossKind, LossSpec};
use crate::model::EncoderConfig;
use crate::numerics::LrSchedule;

/// Named labelled-fraction presets with their noise-correction switch epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    F1,
    F5,
    F10,
    F20,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::F1, Preset::F5, Preset::F10, Preset::F20];

    pub fn frac_m(self) -> f64 {
        match self {
            Preset::F1 => 0.01,
            Preset::F5 => 0.05,
            Preset::F10 => 0.10,
            Preset::F20 => 0.20,
        }
    }

    pub fn switch_epoch(self) -> usize {
        match self {
            Preset::F1 | Preset::F5 => 20,
            Preset::F10 => 40,
            Preset::F20 => 60,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::F1 => "F1",
            Preset::F5 => "F5",
            Preset::F10 => "F10",
            Preset::F20 => "F20",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(Preset::F1),
            "F5" => Ok(Preset::F5),
            "F10" => Ok(Preset::F10),
            "F20" => Ok(Preset::F20),
            _ => Err(Error::invalid("preset", format!("unknown preset `{s}` (expected F1, F5, F10, F20)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augment {
    pub flip: bool,
    pub crop: bool,
}

impl Default for Augment {
    fn default() -> Self {
        Augment { flip: true, crop: true }
    }
}

/// How the auxiliary network sees its prompt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prompt {
    #[default]
    Box,
    /// Ablation: the box covers the whole frame, so only the image informs the prediction.
    ImageOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data_dir: PathBuf,
    pub preset: Option<Preset>,
    pub frac_m: f64,
    pub epochs: usize,
    pub anet_epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub anet_lr: LrSchedule,
    /// PNet loss; its `switch_epoch` is the q-switch epoch.
    pub loss: LossSpec,
    pub seed: u64,
    pub noise_override: Option<f64>,
    pub augment: Augment,
    pub encoder: EncoderConfig,
    pub prompt: Prompt,
}

impl ExperimentConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self::from_preset(data_dir, Preset::F20)
    }

    pub fn from_preset(data_dir: impl Into<PathBuf>, preset: Preset) -> Self {
        let epochs = 100;
        ExperimentConfig {
            data_dir: data_dir.into(),
            preset: Some(preset),
            frac_m: preset.frac_m(),
            epochs,
            anet_epochs: epochs,
            batch_size: 8,
            lr: LrSchedule::default(),
            anet_lr: LrSchedule::default(),
            loss: LossSpec::nc(preset.switch_epoch()),
            seed: 2024,
            noise_override: None,
            augment: Augment::default(),
            encoder: EncoderConfig::default(),
            prompt: Prompt::Box,
        }
    }

    pub fn switch_epoch(&self) -> usize {
        self.loss.switch_epoch
    }

    /// Sets both training lengths; schedules keep a warmup of one tenth of the run.
    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self.anet_epochs = epochs;
        for s in [&mut self.lr, &mut self.anet_lr] {
            s.total_epochs = epochs;
            s.warmup_epochs = (epochs / 10).min(epochs.saturating_sub(1));
        }
        self
    }

    /// Loss used for the auxiliary network: same family, no switch.
    pub fn anet_loss(&self) -> LossSpec {
        LossSpec {
            kind: LossKind::Nc,
            switch_epoch: self.anet_epochs,
            ..self.loss
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frac_m > 0.0 && self.frac_m < 1.0) {
            return Err(Error::invalid("config", format!("frac_m must be in (0, 1), got {}", self.frac_m)));
        }
        if self.epochs == 0 || self.anet_epochs == 0 {
            return Err(Error::invalid("config", "epochs must be positive"));
        }
        if self.switch_epoch() > self.epochs {
            return Err(Error::invalid(
                "config",
                format!("switch epoch {} exceeds epochs {}", self.switch_epoch(), self.epochs),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("config", "batch size must be positive"));
        }
        if self.lr.total_epochs < self.epochs || self.anet_lr.total_epochs < self.anet_epochs {
            return Err(Error::invalid("config", "learning-rate schedule is shorter than training"));
        }
        if let Some(rho) = self.noise_override {
            if !(0.0..=crate::data::MAX_RHO).contains(&rho) {
                return Err(Error::invalid("config", format!("noise rho must be in [0, 0.5], got {rho}")));
            }
        }
        self.lr.validate()?;
        self.anet_lr.validate()?;
        self.loss.validate()?;
        self.encoder.validate()
    }
}
