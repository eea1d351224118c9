//! Binary PPM (P6) frames, 8 bits per channel.

use std::path::Path;

use crate::tensor::{Tensor, TensorError};

/// Encodes a `[3, H, W]` frame with values in `[0, 1]` (clamped).
pub fn encode_ppm(frame: &Tensor) -> Vec<u8> {
    let d = frame.dims();
    assert!(d.len() == 3 && d[0] == 3, "expected [3, H, W], got {d:?}");
    let (h, w) = (d[1], d[2]);
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * h * w);
    let plane = h * w;
    for i in 0..plane {
        for c in 0..3 {
            let v = frame.data()[c * plane + i].clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

fn bad(msg: &str) -> TensorError {
    TensorError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string()))
}

/// Decodes a P6 image into a `[3, H, W]` frame scaled to `[0, 1]`.
pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor, TensorError> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PPM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII PPM header"))?);
    }
    if fields[0] != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad PPM header number"));
    let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(bad("only 8-bit PPM is supported"));
    }
    pos += 1;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != 3 * w * h {
        return Err(TensorError::SizeMismatch {
            expected: pos + 3 * w * h,
            actual: bytes.len(),
        });
    }
    let plane = w * h;
    let mut data = vec![0.0; 3 * plane];
    for (i, px) in payload.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = px[c] as f64 / 255.0;
        }
    }
    Tensor::new(vec![3, h, w], data)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Tensor, TensorError> {
    decode_ppm(&std::fs::read(path)?)
}

pub fn write_ppm(frame: &Tensor, path: impl AsRef<Path>) -> Result<(), TensorError> {
    std::fs::write(path, encode_ppm(frame))?;
    Ok(())
}
