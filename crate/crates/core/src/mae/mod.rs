//! Toy masked video autoencoder: cube embedding, a joint space-time
//! transformer encoder over visible tokens, a narrow decoder over all
//! positions, and normalized masked MSE. Gradients are hand-derived.

mod cubes;
mod model;
mod train;

pub use cubes::{cubify, decubify, Cubes, CUBE_LEN};
pub use model::{masked_loss, sinusoid_table, Forward, ToyMae};
pub use train::{read_checkpoint, train, write_checkpoint, write_loss_csv, TrainSample, MANIFEST_NAME};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::MaskError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum MaeError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("mask {mask:?} does not match the clip token grid {grid:?}")]
    MaskMismatch { mask: [usize; 3], grid: [usize; 3] },
    #[error("mask must hide at least one token and keep at least one visible")]
    DegenerateMask,
    #[error("loss diverged at step {step}; last finite loss {last_finite:?}")]
    Diverged {
        step: usize,
        last_finite: Option<(usize, f64)>,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaeConfig {
    pub embed_dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub decoder_dim: usize,
    pub decoder_depth: usize,
    /// Epsilon inside the square root of the per-cube target normalization.
    pub norm_eps: f64,
    pub lr: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MaeConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            depth: 3,
            heads: 4,
            decoder_dim: 32,
            decoder_depth: 1,
            norm_eps: 1e-6,
            lr: 0.05,
            steps: 100,
            batch_size: 2,
            seed: 0,
        }
    }
}

impl MaeConfig {
    pub fn validate(&self) -> Result<(), MaeError> {
        let bad = |m: &str| Err(MaeError::InvalidConfig(m.into()));
        if self.embed_dim == 0 || self.decoder_dim == 0 || self.heads == 0 {
            return bad("dimensions and heads must be positive");
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return bad("embed_dim must be divisible by heads");
        }
        if !self.decoder_dim.is_multiple_of(self.heads) {
            return bad("decoder_dim must be divisible by heads");
        }
        if !(self.norm_eps > 0.0 && self.norm_eps.is_finite()) {
            return bad("norm_eps must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        Ok(())
    }
}
