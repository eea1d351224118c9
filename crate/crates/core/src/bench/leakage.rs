use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::flow::FlowSet;
use crate::mask::TokenMask;
use crate::tensor::{ClipDims, TOKEN_SIZE, TUBELET};

/// Leakage of one mask against one flow set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageEntry {
    /// `leaked / masked`, in `[0, 1]`.
    pub rate: f64,
    pub leaked: usize,
    pub masked: usize,
    /// Rate restricted to the masked tokens of each slice.
    pub per_slice: Vec<f64>,
}

/// Counts masked tokens whose content is still visible nearby in time.
///
/// The centre of a masked token in slice `s` is carried along the flow chain
/// from each of its two frames to the frame at the same position within
/// slices `s - d` and `s + d`, for `d = 1..=horizon`. The token leaks if any
/// carried centre lands on the canvas inside a visible token of that slice.
/// This is a token-centre proxy, so it undercounts partial-cube overlap.
pub fn leakage_rate(mask: &TokenMask, flows: &FlowSet, dims: ClipDims, horizon: usize) -> Result<LeakageEntry, BenchError> {
    if mask.dims() != [dims.slices(), dims.token_rows(), dims.token_cols()] {
        return Err(BenchError::DimMismatch(format!(
            "mask {:?} vs clip {}x{}x{}",
            mask.dims(),
            dims.t,
            dims.h,
            dims.w
        )));
    }
    if (flows.frames(), flows.height(), flows.width()) != (dims.t, dims.h, dims.w) {
        return Err(BenchError::DimMismatch(format!(
            "flows {}x{}x{} vs clip {}x{}x{}",
            flows.frames(),
            flows.height(),
            flows.width(),
            dims.t,
            dims.h,
            dims.w
        )));
    }
    let (slices, rows, cols) = (mask.slices(), mask.rows(), mask.cols());
    let ts = TOKEN_SIZE as f64;
    let (w, h) = (dims.w as f64, dims.h as f64);
    let mut per_slice = vec![0.0; slices];
    let (mut leaked, mut masked) = (0usize, 0usize);
    for s in 0..slices {
        let (mut slice_leaked, mut slice_masked) = (0usize, 0usize);
        for r in 0..rows {
            for c in 0..cols {
                if mask.is_visible(s, r, c) {
                    continue;
                }
                slice_masked += 1;
                let (x, y) = (ts * c as f64 + 0.5 * (ts - 1.0), ts * r as f64 + 0.5 * (ts - 1.0));
                let leaks = (1..=horizon).any(|d| {
                    [s.checked_sub(d), Some(s + d).filter(|&t| t < slices)]
                        .into_iter()
                        .flatten()
                        .any(|target| {
                            (0..TUBELET).any(|j| {
                                // 1-based frame numbers
                                let from = TUBELET * s + j + 1;
                                let to = TUBELET * target + j + 1;
                                let (px, py) = flows.transport(from, to, x, y);
                                if !(px >= 0.0 && py >= 0.0 && px < w && py < h) {
                                    return false;
                                }
                                let (tr, tc) = ((py / ts) as usize, (px / ts) as usize);
                                mask.is_visible(target, tr, tc)
                            })
                        })
                });
                if leaks {
                    slice_leaked += 1;
                }
            }
        }
        per_slice[s] = if slice_masked == 0 {
            0.0
        } else {
            slice_leaked as f64 / slice_masked as f64
        };
        leaked += slice_leaked;
        masked += slice_masked;
    }
    Ok(LeakageEntry {
        rate: if masked == 0 { 0.0 } else { leaked as f64 / masked as f64 },
        leaked,
        masked,
        per_slice,
    })
}
