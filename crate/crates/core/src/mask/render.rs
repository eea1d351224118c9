use super::{MaskError, TokenMask};
use crate::tensor::{Tensor, VideoClip, TOKEN_SIZE, TUBELET};

/// Fraction of brightness kept inside masked tokens.
const MASKED_GAIN: f64 = 0.3;

/// One `[3, H, W]` frame per clip frame with masked tokens darkened by 70%.
pub fn render_overlays(clip: &VideoClip, mask: &TokenMask) -> Result<Vec<Tensor>, MaskError> {
    let d = clip.dims();
    if mask.dims() != [d.slices(), d.token_rows(), d.token_cols()] {
        return Err(MaskError::DimMismatch {
            expected: vec![d.slices(), d.token_rows(), d.token_cols()],
            actual: mask.dims().to_vec(),
        });
    }
    let plane = d.h * d.w;
    Ok((0..d.t)
        .map(|t| {
            let mut data = clip.frame(t).into_data();
            for y in 0..d.h {
                for x in 0..d.w {
                    if !mask.is_visible(t / TUBELET, y / TOKEN_SIZE, x / TOKEN_SIZE) {
                        for c in 0..3 {
                            data[c * plane + y * d.w + x] *= MASKED_GAIN;
                        }
                    }
                }
            }
            Tensor::from_parts(vec![3, d.h, d.w], data)
        })
        .collect())
}
