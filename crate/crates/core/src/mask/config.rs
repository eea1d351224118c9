use serde::{Deserialize, Serialize};

use super::MaskError;
use crate::tensor::ClipDims;

/// Which frame seeds the masking volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum BaseFrame {
    First,
    Middle,
    Random,
}

/// How the base-frame map is initialised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MaskInit {
    /// Sum of Gaussians centred on randomly picked tokens.
    Gmm,
    TokenRandom,
    PixelRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum WarpMode {
    Backward,
    Forward,
}

/// Value written into warp holes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum HoleFill {
    /// The base-frame map at the same position.
    Tube,
    Random,
    Visible,
    Invisible,
    /// The map the current step was warped from.
    PreviousMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SampleLevel {
    /// Top-k per temporal slice.
    FrameLevel,
    /// Top-k over the whole token volume.
    ClipLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Strategy {
    MotionGuided,
    Tube,
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::MotionGuided => "motion_guided",
            Strategy::Tube => "tube",
            Strategy::Random => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    /// Fraction of tokens hidden from the encoder.
    pub ratio: f64,
    pub base_frame: BaseFrame,
    pub init: MaskInit,
    /// Gaussian standard deviation `(x, y)` in pixels.
    pub sigma: (f64, f64),
    pub warp: WarpMode,
    pub fill: HoleFill,
    pub sample: SampleLevel,
    pub strategy: Strategy,
    /// Std of the optional noise added to one random frame's map after the
    /// volume is built. `None` disables it.
    pub exposure_noise: Option<f64>,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            ratio: 0.9,
            base_frame: BaseFrame::Middle,
            init: MaskInit::Gmm,
            sigma: (16.0, 16.0),
            warp: WarpMode::Backward,
            fill: HoleFill::Tube,
            sample: SampleLevel::FrameLevel,
            strategy: Strategy::MotionGuided,
            exposure_noise: None,
        }
    }
}

impl MaskConfig {
    pub fn with_strategy(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), MaskError> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(MaskError::InvalidConfig(format!(
                "masking ratio must lie in (0, 1), got {}",
                self.ratio
            )));
        }
        let (sx, sy) = self.sigma;
        if !(sx.is_finite() && sy.is_finite() && sx > 0.0 && sy > 0.0) {
            return Err(MaskError::InvalidConfig(format!(
                "sigma components must be positive, got ({sx}, {sy})"
            )));
        }
        if let Some(std) = self.exposure_noise {
            if !(std.is_finite() && std >= 0.0) {
                return Err(MaskError::InvalidConfig(format!(
                    "exposure noise std must be >= 0, got {std}"
                )));
            }
        }
        Ok(())
    }
}

/// Visible tokens per temporal slice: `floor((1 - ratio) * rows * cols)`.
pub fn visible_per_slice(ratio: f64, dims: ClipDims) -> usize {
    visible_count(ratio, dims.tokens_per_slice())
}

/// `floor((1 - ratio) * n)`, guarding against `0.1 * 196 = 19.6000000000002`
/// style round-off just below an integer.
pub(crate) fn visible_count(ratio: f64, n: usize) -> usize {
    let exact = (1.0 - ratio) * n as f64;
    (exact + 1e-9).floor() as usize
}
