//! Dense row-major tensors, video clips, and the VTEN binary format.
//!
//! Arithmetic is carried out in `f64`; on disk every value is stored as a
//! little-endian `f32`.
//!
//! ```text
//! bytes 0..4   "VTEN"
//! u32 LE       version (= 1)
//! u32 LE       ndim
//! ndim x u32   extents
//! prod x f32   payload, row-major, last index fastest
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

pub const VTEN_MAGIC: &[u8; 4] = b"VTEN";
pub const VTEN_VERSION: u32 = 1;

/// Spatial edge of a cube token in pixels.
pub const TOKEN_SIZE: usize = 16;
/// Number of frames folded into one cube token.
pub const TUBELET: usize = 2;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("invalid dims {0:?}: every extent must be positive")]
    InvalidDims(Vec<usize>),
    #[error("dims {dims:?} describe {expected} values but {actual} were supplied")]
    LengthMismatch {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value {value} at flat index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("bad VTEN magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported VTEN version {0}")]
    UnsupportedVersion(u32),
    #[error("VTEN size mismatch: header needs {expected} bytes, file has {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("invalid clip shape {0:?}: need [T, 3, H, W] with even T >= 2 and H, W multiples of 16")]
    InvalidClip(Vec<usize>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

/// A dense, finite, row-major array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(TensorError::InvalidDims(dims));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(TensorError::LengthMismatch {
                dims,
                expected,
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TensorError::NonFinite { index, value });
        }
        Ok(Self { dims, data })
    }

    /// Panics if any extent is zero.
    pub fn zeros(dims: &[usize]) -> Self {
        Self::filled(dims, 0.0)
    }

    pub fn filled(dims: &[usize], value: f64) -> Self {
        assert!(
            !dims.is_empty() && dims.iter().all(|&d| d > 0),
            "invalid dims {dims:?}"
        );
        assert!(value.is_finite());
        let n = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![value; n],
        }
    }

    /// Constructor for callers that already guarantee finite data of the
    /// right length; checked in debug builds only.
    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Row-major strides in elements.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for i in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.dims[i + 1];
        }
        strides
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.dims.len(), "index rank mismatch");
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| {
                assert!(i < d, "index {index:?} out of bounds for {:?}", self.dims);
                acc * d + i
            })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    /// Sub-tensor obtained by fixing the leading index.
    pub fn slice0(&self, i: usize) -> Tensor {
        assert!(self.dims.len() >= 2 && i < self.dims[0]);
        let inner: usize = self.dims[1..].iter().product();
        Tensor::from_parts(
            self.dims[1..].to_vec(),
            self.data[i * inner..(i + 1) * inner].to_vec(),
        )
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or(TensorError::InvalidDims(vec![0]))?;
        let mut data = Vec::with_capacity(first.len() * parts.len());
        for p in parts {
            if p.dims != first.dims {
                return Err(TensorError::LengthMismatch {
                    dims: first.dims.clone(),
                    expected: first.len(),
                    actual: p.len(),
                });
            }
            data.extend_from_slice(&p.data);
        }
        let mut dims = vec![parts.len()];
        dims.extend_from_slice(&first.dims);
        Ok(Tensor::from_parts(dims, data))
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Tensor> {
        Tensor::new(dims, self.data)
    }

    /// Encodes to VTEN bytes. Values outside the `f32` range are rejected.
    pub fn to_vten_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(VTEN_MAGIC);
        out.extend_from_slice(&VTEN_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for (index, &v) in self.data.iter().enumerate() {
            let f = v as f32;
            if !f.is_finite() {
                return Err(TensorError::NonFinite { index, value: v });
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_vten_bytes(bytes: &[u8]) -> Result<Tensor> {
        let header_err = |expected| TensorError::SizeMismatch {
            expected,
            actual: bytes.len(),
        };
        if bytes.len() < 4 {
            return Err(header_err(12));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if &magic != VTEN_MAGIC {
            return Err(TensorError::BadMagic(magic));
        }
        if bytes.len() < 12 {
            return Err(header_err(12));
        }
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VTEN_VERSION {
            return Err(TensorError::UnsupportedVersion(version));
        }
        let ndim = u32_at(8) as usize;
        let header = 12 + 4 * ndim;
        if bytes.len() < header {
            return Err(header_err(header));
        }
        let dims: Vec<usize> = (0..ndim).map(|i| u32_at(12 + 4 * i) as usize).collect();
        if dims.is_empty() || dims.contains(&0) {
            return Err(TensorError::InvalidDims(dims));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| TensorError::InvalidDims(dims.clone()))?;
        let expected = count
            .checked_mul(4)
            .and_then(|p| p.checked_add(header))
            .ok_or_else(|| TensorError::InvalidDims(dims.clone()))?;
        if bytes.len() != expected {
            return Err(TensorError::SizeMismatch {
                expected,
                actual: bytes.len(),
            });
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Tensor::new(dims, data)
    }
}

pub fn read_vten(path: impl AsRef<Path>) -> Result<Tensor> {
    Tensor::from_vten_bytes(&fs::read(path)?)
}

pub fn write_vten(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, t.to_vten_bytes()?)?;
    Ok(())
}

/// A `[T, 3, H, W]` clip with pixel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoClip {
    frames: Tensor,
}

/// Spatio-temporal extent of a clip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClipDims {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl ClipDims {
    pub fn new(t: usize, h: usize, w: usize) -> Result<Self> {
        let dims = Self { t, h, w };
        if t < 2 || !t.is_multiple_of(TUBELET) || h == 0 || w == 0 || !h.is_multiple_of(TOKEN_SIZE) || !w.is_multiple_of(TOKEN_SIZE) {
            return Err(TensorError::InvalidClip(vec![t, 3, h, w]));
        }
        Ok(dims)
    }

    /// Temporal slices of the token grid.
    pub fn slices(&self) -> usize {
        self.t / TUBELET
    }

    pub fn token_rows(&self) -> usize {
        self.h / TOKEN_SIZE
    }

    pub fn token_cols(&self) -> usize {
        self.w / TOKEN_SIZE
    }

    pub fn tokens_per_slice(&self) -> usize {
        self.token_rows() * self.token_cols()
    }

    pub fn num_tokens(&self) -> usize {
        self.slices() * self.tokens_per_slice()
    }
}

impl VideoClip {
    pub fn new(frames: Tensor) -> Result<Self> {
        let d = frames.dims();
        if d.len() != 4 || d[1] != 3 {
            return Err(TensorError::InvalidClip(d.to_vec()));
        }
        ClipDims::new(d[0], d[2], d[3])?;
        Ok(Self { frames })
    }

    pub fn dims(&self) -> ClipDims {
        let d = self.frames.dims();
        ClipDims {
            t: d[0],
            h: d[2],
            w: d[3],
        }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.frames
    }

    pub fn into_tensor(self) -> Tensor {
        self.frames
    }

    /// Frame `t` (0-based) as a `[3, H, W]` tensor.
    pub fn frame(&self, t: usize) -> Tensor {
        self.frames.slice0(t)
    }

    /// Channel-mean intensity of frame `t` (0-based), row-major `H * W`.
    pub fn gray(&self, t: usize) -> Vec<f64> {
        gray_of(&self.frame(t))
    }
}

/// Channel mean of a `[3, H, W]` frame.
pub fn gray_of(frame: &Tensor) -> Vec<f64> {
    let d = frame.dims();
    assert_eq!(d.len(), 3, "expected [C, H, W]");
    let plane = d[1] * d[2];
    let c = d[0] as f64;
    (0..plane)
        .map(|i| (0..d[0]).map(|ch| frame.data()[ch * plane + i]).sum::<f64>() / c)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_round_trip() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = t.to_vten_bytes().unwrap();
        assert_eq!(&bytes[0..4], b"VTEN");
        let back = Tensor::from_vten_bytes(&bytes).unwrap();
        assert_eq!(back.dims(), &[2, 2]);
        assert_eq!(back.data(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(back.to_vten_bytes().unwrap(), bytes);
    }

    #[test]
    fn scalar_file_is_twenty_bytes() {
        let t = Tensor::new(vec![1], vec![0.0]).unwrap();
        assert_eq!(t.to_vten_bytes().unwrap().len(), 20);
    }

    #[test]
    fn token_grid_payload_length() {
        let t = Tensor::zeros(&[8, 14, 14]);
        let bytes = t.to_vten_bytes().unwrap();
        assert_eq!(bytes.len() - (12 + 3 * 4), 1568 * 4);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"VTEN");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        for i in 0..8 {
            bytes.extend_from_slice(&(i as f32).to_le_bytes());
        }
        assert!(matches!(
            Tensor::from_vten_bytes(&bytes),
            Err(TensorError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn bad_magic_and_non_finite() {
        let mut bytes = Tensor::new(vec![1], vec![1.0]).unwrap().to_vten_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Tensor::from_vten_bytes(&bad), Err(TensorError::BadMagic(_))));
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            Tensor::from_vten_bytes(&bytes),
            Err(TensorError::NonFinite { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = Tensor::new(vec![1], vec![1.0]).unwrap().to_vten_bytes().unwrap();
        bytes.push(0);
        assert!(matches!(
            Tensor::from_vten_bytes(&bytes),
            Err(TensorError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn constructor_checks() {
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        assert!(Tensor::new(vec![3], vec![1.0, 2.0]).is_err());
        assert!(Tensor::new(vec![1], vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn clip_shape_validation() {
        assert!(VideoClip::new(Tensor::zeros(&[2, 3, 16, 16])).is_ok());
        assert!(VideoClip::new(Tensor::zeros(&[3, 3, 16, 16])).is_err());
        assert!(VideoClip::new(Tensor::zeros(&[2, 3, 24, 16])).is_err());
        assert!(VideoClip::new(Tensor::zeros(&[2, 1, 16, 16])).is_err());
        let d = ClipDims::new(16, 224, 224).unwrap();
        assert_eq!(d.num_tokens(), 1568);
    }

    #[test]
    fn offsets_are_row_major() {
        let t = Tensor::new(vec![2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.get(&[1, 2]), 5.0);
        assert_eq!(t.strides(), vec![3, 1]);
        assert_eq!(t.slice0(1).data(), &[3.0, 4.0, 5.0]);
    }
}
