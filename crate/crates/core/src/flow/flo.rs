use std::fs;
use std::path::Path;

use super::{FlowError, FlowField};
use crate::tensor::Tensor;

/// Sanity tag at the start of every Middlebury `.flo` file ("PIEH").
pub const FLO_MAGIC: f32 = 202021.25;

impl FlowField {
    pub fn to_flo_bytes(&self) -> Vec<u8> {
        let (h, w) = (self.height(), self.width());
        let mut out = Vec::with_capacity(12 + 8 * h * w);
        out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
        out.extend_from_slice(&(w as i32).to_le_bytes());
        out.extend_from_slice(&(h as i32).to_le_bytes());
        for (u, v) in self.u().iter().zip(self.v()) {
            out.extend_from_slice(&(*u as f32).to_le_bytes());
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_flo_bytes(bytes: &[u8]) -> Result<FlowField, FlowError> {
        if bytes.len() < 12 {
            return Err(FlowError::SizeMismatch {
                expected: 12,
                actual: bytes.len(),
            });
        }
        let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let i32_at = |o: usize| i32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let magic = f32_at(0);
        if magic != FLO_MAGIC {
            return Err(FlowError::BadMagic(magic));
        }
        let (width, height) = (i32_at(4), i32_at(8));
        if width <= 0 || height <= 0 {
            return Err(FlowError::BadExtent { width, height });
        }
        let (w, h) = (width as usize, height as usize);
        let expected = 12 + 8 * w * h;
        if bytes.len() != expected {
            return Err(FlowError::SizeMismatch {
                expected,
                actual: bytes.len(),
            });
        }
        let mut u = Vec::with_capacity(w * h);
        let mut v = Vec::with_capacity(w * h);
        for pair in bytes[12..].chunks_exact(8) {
            u.push(f32::from_le_bytes(pair[0..4].try_into().unwrap()) as f64);
            v.push(f32::from_le_bytes(pair[4..8].try_into().unwrap()) as f64);
        }
        u.extend(v);
        FlowField::new(Tensor::new(vec![2, h, w], u)?)
    }
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField, FlowError> {
    FlowField::from_flo_bytes(&fs::read(path)?)
}

pub fn write_flo(f: &FlowField, path: impl AsRef<Path>) -> Result<(), FlowError> {
    fs::write(path, f.to_flo_bytes())?;
    Ok(())
}
