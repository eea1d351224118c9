//! Coarse-to-fine Horn-Schunck.
//!
//! Each pyramid level warps `dst` towards `src` with the current estimate,
//! linearises brightness constancy around it and runs Jacobi sweeps of the
//! Horn-Schunck fixed point. Intensities are scaled to `[0, 255]` so the
//! smoothness weight has its customary magnitude.

use super::{FlowError, FlowField};
use crate::sample::{bilinear_clamp, blur5, downsample2, resize};
use crate::tensor::{gray_of, Tensor};

const INTENSITY_SCALE: f64 = 255.0;
const MIN_COARSE_EXTENT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FlowConfig {
    pub levels: usize,
    pub iterations: usize,
    /// Horn-Schunck smoothness weight (alpha, not alpha squared).
    pub alpha: f64,
    /// Re-linearisations per level.
    pub warps: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            iterations: 100,
            alpha: 15.0,
            warps: 2,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self, h: usize, w: usize) -> Result<(), FlowError> {
        if self.levels == 0 {
            return Err(FlowError::InvalidConfig("pyramid levels must be >= 1".into()));
        }
        if self.iterations == 0 || self.warps == 0 {
            return Err(FlowError::InvalidConfig(
                "iterations and warps must be >= 1".into(),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(FlowError::InvalidConfig(format!(
                "smoothness weight must be positive, got {}",
                self.alpha
            )));
        }
        let (mut ch, mut cw) = (h, w);
        for _ in 1..self.levels {
            ch = ch.div_ceil(2);
            cw = cw.div_ceil(2);
        }
        if ch < MIN_COARSE_EXTENT || cw < MIN_COARSE_EXTENT {
            return Err(FlowError::InvalidConfig(format!(
                "{} levels on {h}x{w} leave a {ch}x{cw} coarsest level (< 8x8)",
                self.levels
            )));
        }
        Ok(())
    }
}

struct Level {
    h: usize,
    w: usize,
    src: Vec<f64>,
    dst: Vec<f64>,
}

/// Estimates the flow from `src` to `dst`, i.e. the field with
/// `src(p) ~ dst(p + flow(p))`. Both frames are `[C, H, W]`.
pub fn estimate_flow(src: &Tensor, dst: &Tensor, cfg: &FlowConfig) -> Result<FlowField, FlowError> {
    if src.dims() != dst.dims() || src.ndim() != 3 {
        return Err(FlowError::DimMismatch(src.dims().to_vec(), dst.dims().to_vec()));
    }
    let (h, w) = (src.dims()[1], src.dims()[2]);
    cfg.validate(h, w)?;

    let scale = |v: Vec<f64>| v.into_iter().map(|x| x * INTENSITY_SCALE).collect::<Vec<_>>();
    let mut pyramid = vec![Level {
        h,
        w,
        src: blur5(&scale(gray_of(src)), h, w),
        dst: blur5(&scale(gray_of(dst)), h, w),
    }];
    for _ in 1..cfg.levels {
        let top = pyramid.last().unwrap();
        let (s, nh, nw) = downsample2(&top.src, top.h, top.w);
        let (d, _, _) = downsample2(&top.dst, top.h, top.w);
        pyramid.push(Level {
            h: nh,
            w: nw,
            src: s,
            dst: d,
        });
    }

    let coarse = pyramid.last().unwrap();
    let mut u = vec![0.0; coarse.h * coarse.w];
    let mut v = vec![0.0; coarse.h * coarse.w];
    let (mut ph, mut pw) = (coarse.h, coarse.w);

    for level in pyramid.iter().rev() {
        if (level.h, level.w) != (ph, pw) {
            let sx = level.w as f64 / pw as f64;
            let sy = level.h as f64 / ph as f64;
            u = resize(&u, ph, pw, level.h, level.w).into_iter().map(|x| x * sx).collect();
            v = resize(&v, ph, pw, level.h, level.w).into_iter().map(|x| x * sy).collect();
            ph = level.h;
            pw = level.w;
        }
        for _ in 0..cfg.warps {
            refine(level, &mut u, &mut v, cfg);
        }
    }
    Ok(FlowField::from_uv(h, w, u, v))
}

fn refine(level: &Level, u: &mut Vec<f64>, v: &mut Vec<f64>, cfg: &FlowConfig) {
    let (h, w) = (level.h, level.w);
    let n = h * w;
    let mut warped = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            warped[i] = bilinear_clamp(&level.dst, h, w, x as f64 + u[i], y as f64 + v[i]);
        }
    }
    let mean: Vec<f64> = level.src.iter().zip(&warped).map(|(a, b)| 0.5 * (a + b)).collect();
    let (ix, iy) = gradients(&mean, h, w);
    let it: Vec<f64> = warped.iter().zip(&level.src).map(|(a, b)| a - b).collect();

    let (u0, v0) = (u.clone(), v.clone());
    let alpha2 = cfg.alpha * cfg.alpha;
    let denom: Vec<f64> = (0..n).map(|i| alpha2 + ix[i] * ix[i] + iy[i] * iy[i]).collect();
    let mut nu = vec![0.0; n];
    let mut nv = vec![0.0; n];
    for _ in 0..cfg.iterations {
        let ubar = neighbour_mean(u, h, w);
        let vbar = neighbour_mean(v, h, w);
        for i in 0..n {
            let r = ix[i] * (ubar[i] - u0[i]) + iy[i] * (vbar[i] - v0[i]) + it[i];
            nu[i] = ubar[i] - ix[i] * r / denom[i];
            nv[i] = vbar[i] - iy[i] * r / denom[i];
        }
        std::mem::swap(u, &mut nu);
        std::mem::swap(v, &mut nv);
    }
}

/// Central differences, one-sided at the borders.
fn gradients(img: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let l = x.saturating_sub(1);
            let r = (x + 1).min(w - 1);
            let t = y.saturating_sub(1);
            let b = (y + 1).min(h - 1);
            gx[y * w + x] = (img[y * w + r] - img[y * w + l]) / (r - l).max(1) as f64;
            gy[y * w + x] = (img[b * w + x] - img[t * w + x]) / (b - t).max(1) as f64;
        }
    }
    (gx, gy)
}

/// Horn-Schunck neighbourhood average: 1/6 for edge neighbours, 1/12 for
/// diagonals, replicated borders.
fn neighbour_mean(f: &[f64], h: usize, w: usize) -> Vec<f64> {
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        f[yc * w + xc]
    };
    let mut out = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let edge = at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1);
            let diag = at(x - 1, y - 1) + at(x + 1, y - 1) + at(x - 1, y + 1) + at(x + 1, y + 1);
            out[y as usize * w + x as usize] = edge / 6.0 + diag / 12.0;
        }
    }
    out
}
