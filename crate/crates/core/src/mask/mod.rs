//! Motion-guided masking.
//!
//! A visibility-score map is drawn for the base frame, carried to every other
//! frame by warping it along optical flow (filling the holes that warping
//! leaves), pooled to the cube-token grid and reduced to a boolean token mask
//! by top-k selection. Tube and random masking are provided as baselines.

mod config;
mod fill;
mod generate;
mod init;
mod render;
mod tokens;
mod volume;
mod warp;

pub use config::{
    visible_per_slice, BaseFrame, HoleFill, MaskConfig, MaskInit, SampleLevel, Strategy, WarpMode,
};
pub use fill::{fill_holes, FillContext};
pub use generate::{choose_base_frame, generate, generate_with_volume, resolve_base_frame};
pub use init::{init_mask_binary, init_mask_gmm, BinaryLevel, GaussianMixture};
pub use render::render_overlays;
pub use tokens::{pool_tokens, sample_tokens, top_k_indices, TokenMask};
pub use volume::{add_exposure_noise, build_mask_volume, build_mask_volume_from};
pub use warp::{backward_warp, forward_warp};

use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

/// Floor written into every initial map so that exact zeros after warping
/// can only come from out-of-bounds samples.
pub const EPS_MARKER: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("invalid mask config: {0}")]
    InvalidConfig(String),
    #[error("masking ratio {ratio} leaves no visible token on a {tokens}-token grid")]
    NoVisibleTokens { ratio: f64, tokens: usize },
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    DimMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("motion-guided masking needs a flow set")]
    MissingFlows,
    #[error("flow set is based on frame {flows}, config resolves to frame {expected}")]
    BaseMismatch { flows: usize, expected: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pixel-level visibility scores `[H, W]` of a single frame.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMap {
    inner: Tensor,
}

impl MaskMap {
    pub fn new(t: Tensor) -> Result<Self, MaskError> {
        if t.ndim() != 2 {
            return Err(MaskError::DimMismatch {
                expected: vec![0, 0],
                actual: t.dims().to_vec(),
            });
        }
        if t.data().iter().any(|&v| v < 0.0) {
            return Err(MaskError::InvalidConfig("mask scores must be >= 0".into()));
        }
        Ok(Self { inner: t })
    }

    pub(crate) fn from_vec(h: usize, w: usize, data: Vec<f64>) -> Self {
        Self {
            inner: Tensor::from_parts(vec![h, w], data),
        }
    }

    pub fn height(&self) -> usize {
        self.inner.dims()[0]
    }

    pub fn width(&self) -> usize {
        self.inner.dims()[1]
    }

    pub fn data(&self) -> &[f64] {
        self.inner.data()
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.inner.data()[y * self.width() + x]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.inner
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.inner.into_data()
    }
}

/// Per-frame visibility scores `[T, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskVolume {
    inner: Tensor,
}

impl MaskVolume {
    pub fn new(t: Tensor) -> Result<Self, MaskError> {
        if t.ndim() != 3 {
            return Err(MaskError::DimMismatch {
                expected: vec![0, 0, 0],
                actual: t.dims().to_vec(),
            });
        }
        Ok(Self { inner: t })
    }

    pub fn from_maps(maps: Vec<MaskMap>) -> Result<Self, MaskError> {
        let parts: Vec<Tensor> = maps.into_iter().map(|m| m.inner).collect();
        Ok(Self {
            inner: Tensor::stack(&parts)?,
        })
    }

    pub fn frames(&self) -> usize {
        self.inner.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.inner.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.inner.dims()[2]
    }

    /// Map of frame `t` (0-based).
    pub fn frame(&self, t: usize) -> MaskMap {
        MaskMap {
            inner: self.inner.slice0(t),
        }
    }

    pub fn frame_data(&self, t: usize) -> &[f64] {
        let n = self.height() * self.width();
        &self.inner.data()[t * n..(t + 1) * n]
    }

    pub(crate) fn frame_data_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.height() * self.width();
        &mut self.inner.data_mut()[t * n..(t + 1) * n]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.inner
    }
}
