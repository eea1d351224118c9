use std::cmp::Ordering;

use super::config::visible_count;
use super::{MaskError, MaskVolume, SampleLevel};
use crate::tensor::{Tensor, TOKEN_SIZE, TUBELET};

/// Boolean visibility per cube token, `[T/2, H/16, W/16]`, `true` = visible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenMask {
    slices: usize,
    rows: usize,
    cols: usize,
    visible: Vec<bool>,
}

impl TokenMask {
    pub fn new(slices: usize, rows: usize, cols: usize, visible: Vec<bool>) -> Result<Self, MaskError> {
        if visible.len() != slices * rows * cols {
            return Err(MaskError::DimMismatch {
                expected: vec![slices, rows, cols],
                actual: vec![visible.len()],
            });
        }
        Ok(Self {
            slices,
            rows,
            cols,
            visible,
        })
    }

    pub fn from_visible_indices(slices: usize, rows: usize, cols: usize, indices: &[usize]) -> Result<Self, MaskError> {
        let mut visible = vec![false; slices * rows * cols];
        for &i in indices {
            *visible.get_mut(i).ok_or(MaskError::DimMismatch {
                expected: vec![slices, rows, cols],
                actual: vec![i],
            })? = true;
        }
        Self::new(slices, rows, cols, visible)
    }

    /// Same spatial visible set replicated over every slice.
    pub fn replicated(slices: usize, rows: usize, cols: usize, spatial: &[usize]) -> Result<Self, MaskError> {
        let per = rows * cols;
        let indices: Vec<usize> = (0..slices)
            .flat_map(|s| spatial.iter().map(move |&i| s * per + i))
            .collect();
        Self::from_visible_indices(slices, rows, cols, &indices)
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.slices, self.rows, self.cols]
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_tokens(&self) -> usize {
        self.visible.len()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.visible
    }

    pub fn is_visible(&self, s: usize, r: usize, c: usize) -> bool {
        self.visible[(s * self.rows + r) * self.cols + c]
    }

    /// Flat visible indices in row-major token order.
    pub fn visible_indices(&self) -> Vec<usize> {
        self.visible
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
            .collect()
    }

    pub fn masked_indices(&self) -> Vec<usize> {
        self.visible
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| (!v).then_some(i))
            .collect()
    }

    /// Spatial indices `r * cols + c` visible in slice `s`.
    pub fn slice_visible(&self, s: usize) -> Vec<usize> {
        let per = self.rows * self.cols;
        (0..per).filter(|&i| self.visible[s * per + i]).collect()
    }

    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|&&v| v).count()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(
            vec![self.slices, self.rows, self.cols],
            self.visible.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// Accepts only exact 0/1 values.
    pub fn from_tensor(t: &Tensor) -> Result<Self, MaskError> {
        let d = t.dims();
        if d.len() != 3 {
            return Err(MaskError::DimMismatch {
                expected: vec![0, 0, 0],
                actual: d.to_vec(),
            });
        }
        let visible = t
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| match v {
                1.0 => Ok(true),
                0.0 => Ok(false),
                _ => Err(MaskError::InvalidConfig(format!(
                    "token mask value {v} at index {i} is neither 0 nor 1"
                ))),
            })
            .collect::<Result<_, _>>()?;
        Self::new(d[0], d[1], d[2], visible)
    }
}

/// Average-pools a `[T, H, W]` volume with a `2 x 16 x 16` kernel.
pub fn pool_tokens(vol: &MaskVolume) -> Result<Tensor, MaskError> {
    let (t, h, w) = (vol.frames(), vol.height(), vol.width());
    if t % TUBELET != 0 || h % TOKEN_SIZE != 0 || w % TOKEN_SIZE != 0 {
        return Err(MaskError::DimMismatch {
            expected: vec![TUBELET, TOKEN_SIZE, TOKEN_SIZE],
            actual: vec![t, h, w],
        });
    }
    let (slices, rows, cols) = (t / TUBELET, h / TOKEN_SIZE, w / TOKEN_SIZE);
    let norm = (TUBELET * TOKEN_SIZE * TOKEN_SIZE) as f64;
    let mut out = vec![0.0; slices * rows * cols];
    for s in 0..slices {
        for r in 0..rows {
            for c in 0..cols {
                let mut acc = 0.0;
                for f in s * TUBELET..(s + 1) * TUBELET {
                    let plane = vol.frame_data(f);
                    for y in r * TOKEN_SIZE..(r + 1) * TOKEN_SIZE {
                        acc += plane[y * w + c * TOKEN_SIZE..y * w + (c + 1) * TOKEN_SIZE]
                            .iter()
                            .sum::<f64>();
                    }
                }
                out[(s * rows + r) * cols + c] = acc / norm;
            }
        }
    }
    Ok(Tensor::from_parts(vec![slices, rows, cols], out))
}

/// Indices of the `k` largest scores, highest first; equal scores are
/// ordered by lower index.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx.truncate(k);
    idx
}

/// Pools the volume to token scores and keeps the top
/// `floor((1 - ratio) * rows * cols)` per slice (frame level) or the top
/// `slices` times that over the whole clip (clip level).
pub fn sample_tokens(vol: &MaskVolume, ratio: f64, level: SampleLevel) -> Result<TokenMask, MaskError> {
    let scores = pool_tokens(vol)?;
    let [slices, rows, cols]: [usize; 3] = scores.dims().try_into().unwrap();
    let per = rows * cols;
    let k = visible_count(ratio, per);
    if k == 0 {
        return Err(MaskError::NoVisibleTokens { ratio, tokens: per });
    }
    let indices: Vec<usize> = match level {
        SampleLevel::FrameLevel => (0..slices)
            .flat_map(|s| {
                top_k_indices(&scores.data()[s * per..(s + 1) * per], k)
                    .into_iter()
                    .map(move |i| s * per + i)
            })
            .collect(),
        SampleLevel::ClipLevel => top_k_indices(scores.data(), slices * k),
    };
    TokenMask::from_visible_indices(slices, rows, cols, &indices)
}
