//! Dense optical flow: the field type, the Middlebury `.flo` codec, a
//! pyramidal Horn-Schunck estimator, and assembly of the per-clip flow set
//! that radiates out from the base frame.

mod estimate;
mod flo;
mod set;

pub use estimate::{estimate_flow, FlowConfig};
pub use flo::{read_flo, write_flo, FLO_MAGIC};
pub use set::{build_flow_set, flow_file_name, FlowSet, FlowSource};

use thiserror::Error;

use crate::sample::bilinear_clamp;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("frame shapes differ: {0:?} vs {1:?}")]
    DimMismatch(Vec<usize>, Vec<usize>),
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    #[error("bad .flo magic {0}")]
    BadMagic(f32),
    #[error(".flo size mismatch: header needs {expected} bytes, file has {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("invalid .flo extents {width}x{height}")]
    BadExtent { width: i32, height: i32 },
    #[error("missing flow file for pair {from}->{to}: {path}")]
    MissingPair {
        from: usize,
        to: usize,
        path: String,
    },
    #[error("base index {base} out of range for {frames} frames")]
    BadBase { base: usize, frames: usize },
    #[error("flow set: {0}")]
    InvalidSet(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-pixel displacement `[2, H, W]`: channel 0 is `u` (columns), channel 1
/// is `v` (rows). The flow from frame i to frame j at pixel `p` points to
/// `p + flow(p)` in frame j.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    inner: Tensor,
}

impl FlowField {
    pub fn new(t: Tensor) -> Result<Self, FlowError> {
        if t.ndim() != 3 || t.dims()[0] != 2 {
            return Err(FlowError::DimMismatch(vec![2, 0, 0], t.dims().to_vec()));
        }
        Ok(Self { inner: t })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self::constant(h, w, 0.0, 0.0)
    }

    pub fn constant(h: usize, w: usize, u: f64, v: f64) -> Self {
        let mut data = vec![u; h * w];
        data.extend(std::iter::repeat_n(v, h * w));
        Self {
            inner: Tensor::from_parts(vec![2, h, w], data),
        }
    }

    pub(crate) fn from_uv(h: usize, w: usize, mut u: Vec<f64>, v: Vec<f64>) -> Self {
        u.extend(v);
        Self {
            inner: Tensor::from_parts(vec![2, h, w], u),
        }
    }

    pub fn height(&self) -> usize {
        self.inner.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.inner.dims()[2]
    }

    pub fn u(&self) -> &[f64] {
        &self.inner.data()[..self.height() * self.width()]
    }

    pub fn v(&self) -> &[f64] {
        &self.inner.data()[self.height() * self.width()..]
    }

    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width() + x;
        (self.u()[i], self.v()[i])
    }

    /// Flow at a sub-pixel location, replicate-edge bilinear.
    pub fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let (h, w) = (self.height(), self.width());
        (
            bilinear_clamp(self.u(), h, w, x, y),
            bilinear_clamp(self.v(), h, w, x, y),
        )
    }

    pub fn tensor(&self) -> &Tensor {
        &self.inner
    }

    pub fn into_tensor(self) -> Tensor {
        self.inner
    }

    /// Mean vector magnitude.
    pub fn mean_magnitude(&self) -> f64 {
        let n = self.u().len() as f64;
        self.u()
            .iter()
            .zip(self.v())
            .map(|(u, v)| u.hypot(*v))
            .sum::<f64>()
            / n
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.data().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Mean endpoint error against `other` over pixels at least `margin`
    /// from every border.
    pub fn mean_epe(&self, other: &FlowField, margin: usize) -> f64 {
        assert_eq!(self.tensor().dims(), other.tensor().dims());
        let (h, w) = (self.height(), self.width());
        assert!(2 * margin < h && 2 * margin < w, "margin leaves no interior");
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in margin..h - margin {
            for x in margin..w - margin {
                let (a, b) = (self.at(x, y), other.at(x, y));
                sum += (a.0 - b.0).hypot(a.1 - b.1);
                n += 1;
            }
        }
        sum / n as f64
    }
}
