use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-output region term used by [`composite_loss`](super::composite_loss).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// Noise-correction loss with the q-phase schedule.
    Nc,
    Ce,
    Iou,
    Mae,
    Gce,
    /// Cross-entropy plus soft IoU, the usual segmentation baseline.
    CeIou,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Nc => "nc",
            LossKind::Ce => "ce",
            LossKind::Iou => "iou",
            LossKind::Mae => "mae",
            LossKind::Gce => "gce",
            LossKind::CeIou => "ce-iou",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "nc" => LossKind::Nc,
            "ce" => LossKind::Ce,
            "iou" => LossKind::Iou,
            "mae" => LossKind::Mae,
            "gce" => LossKind::Gce,
            "ce-iou" => LossKind::CeIou,
            other => return Err(Error::invalid("LossKind", format!("unknown loss `{other}`"))),
        })
    }
}

/// How the noise-correction gradient treats its denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradMode {
    /// Full quotient rule.
    #[default]
    Exact,
    /// Denominator held constant; at `q = 1` every mismatched pixel gets `±1/den`.
    DetachedDenominator,
}

impl std::str::FromStr for GradMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(GradMode::Exact),
            "detached" | "detached-denominator" => Ok(GradMode::DetachedDenominator),
            other => Err(Error::invalid("GradMode", format!("unknown mode `{other}`"))),
        }
    }
}

fn default_q_early() -> f64 {
    2.0
}
fn default_q_late() -> f64 {
    1.0
}
fn default_gce_q() -> f64 {
    0.7
}
fn default_dice_weight() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default = "default_q_early")]
    pub q_early: f64,
    #[serde(default = "default_q_late")]
    pub q_late: f64,
    pub switch_epoch: usize,
    #[serde(default = "default_gce_q")]
    pub gce_q: f64,
    #[serde(default)]
    pub grad_mode: GradMode,
    /// Weight of the boundary DICE term added to every supervised output.
    #[serde(default = "default_dice_weight")]
    pub dice_weight: f64,
}

impl LossSpec {
    pub fn nc(switch_epoch: usize) -> Self {
        LossSpec {
            kind: LossKind::Nc,
            q_early: 2.0,
            q_late: 1.0,
            switch_epoch,
            gce_q: 0.7,
            grad_mode: GradMode::Exact,
            dice_weight: 0.5,
        }
    }

    pub fn with_kind(kind: LossKind) -> Self {
        LossSpec {
            kind,
            ..Self::nc(0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |q: f64| (1.0..=2.0).contains(&q);
        if !in_range(self.q_early) || !in_range(self.q_late) {
            return Err(Error::invalid("LossSpec", "q values must lie in [1, 2]"));
        }
        if self.q_late > self.q_early {
            return Err(Error::invalid("LossSpec", "q_late must not exceed q_early"));
        }
        if !(self.gce_q > 0.0 && self.gce_q <= 1.0) {
            return Err(Error::invalid("LossSpec", "gce_q must lie in (0, 1]"));
        }
        if !(self.dice_weight >= 0.0 && self.dice_weight.is_finite()) {
            return Err(Error::invalid("LossSpec", "dice_weight must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Exponent in effect at `epoch`: `q_early` strictly before the switch, `q_late` from it on.
pub fn q_at(spec: &LossSpec, epoch: usize) -> f64 {
    if epoch < spec.switch_epoch {
        spec.q_early
    } else {
        spec.q_late
    }
}
