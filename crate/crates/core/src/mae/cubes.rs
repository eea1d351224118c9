use super::MaeError;
use crate::tensor::{ClipDims, Tensor, VideoClip, TOKEN_SIZE, TUBELET};

/// Values per cube: `2 x 16 x 16 x 3`.
pub const CUBE_LEN: usize = TUBELET * TOKEN_SIZE * TOKEN_SIZE * 3;

/// Flattened non-overlapping cubes `[N, 1536]`, rows ordered by
/// `(slice, row, col)`; each row is laid out `(dt, dy, dx, channel)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cubes {
    n: usize,
    data: Vec<f64>,
}

impl Cubes {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self, MaeError> {
        if data.len() != n * CUBE_LEN {
            return Err(MaeError::InvalidConfig(format!(
                "{} values do not form {n} cubes",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * CUBE_LEN..(i + 1) * CUBE_LEN]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * CUBE_LEN..(i + 1) * CUBE_LEN]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_parts(vec![self.n, CUBE_LEN], self.data.clone())
    }

    /// Per-cube `(c - mean) / sqrt(var + eps)`, population variance.
    pub fn normalized(&self, eps: f64) -> Cubes {
        let mut out = self.clone();
        for i in 0..self.n {
            let row = out.row_mut(i);
            let rough = row.iter().sum::<f64>() / CUBE_LEN as f64;
            // one correction pass so constant cubes get their exact value
            let mean = rough + row.iter().map(|v| v - rough).sum::<f64>() / CUBE_LEN as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / CUBE_LEN as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
        }
        out
    }
}

pub fn cubify(clip: &VideoClip) -> Cubes {
    let d = clip.dims();
    let (rows, cols) = (d.token_rows(), d.token_cols());
    let n = d.num_tokens();
    let src = clip.tensor().data();
    let plane = d.h * d.w;
    let mut data = vec![0.0; n * CUBE_LEN];
    for s in 0..d.slices() {
        for r in 0..rows {
            for c in 0..cols {
                let base = ((s * rows + r) * cols + c) * CUBE_LEN;
                let mut k = base;
                for dt in 0..TUBELET {
                    let t = s * TUBELET + dt;
                    for dy in 0..TOKEN_SIZE {
                        let y = r * TOKEN_SIZE + dy;
                        for dx in 0..TOKEN_SIZE {
                            let x = c * TOKEN_SIZE + dx;
                            for ch in 0..3 {
                                data[k] = src[(t * 3 + ch) * plane + y * d.w + x];
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Cubes { n, data }
}

pub fn decubify(cubes: &Cubes, dims: ClipDims) -> Result<VideoClip, MaeError> {
    if cubes.len() != dims.num_tokens() {
        return Err(MaeError::InvalidConfig(format!(
            "{} cubes do not tile a {}x{}x{} clip",
            cubes.len(),
            dims.t,
            dims.h,
            dims.w
        )));
    }
    let (rows, cols) = (dims.token_rows(), dims.token_cols());
    let plane = dims.h * dims.w;
    let mut out = vec![0.0; dims.t * 3 * plane];
    for s in 0..dims.slices() {
        for r in 0..rows {
            for c in 0..cols {
                let mut k = ((s * rows + r) * cols + c) * CUBE_LEN;
                for dt in 0..TUBELET {
                    let t = s * TUBELET + dt;
                    for dy in 0..TOKEN_SIZE {
                        let y = r * TOKEN_SIZE + dy;
                        for dx in 0..TOKEN_SIZE {
                            let x = c * TOKEN_SIZE + dx;
                            for ch in 0..3 {
                                out[(t * 3 + ch) * plane + y * dims.w + x] = cubes.data[k];
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(VideoClip::new(Tensor::new(vec![dims.t, 3, dims.h, dims.w], out)?)?)
}
