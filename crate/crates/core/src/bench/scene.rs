use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::flow::{FlowField, FlowSet};
use crate::rng::Rng;
use crate::tensor::{ClipDims, Tensor, VideoClip};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Pattern {
    /// The whole frame is a texture sliding at `velocity`.
    TranslatingTexture,
    /// One textured square sliding over the background.
    TranslatingSquare,
    /// Two squares, the second moving at `second_velocity`.
    TwoObjects,
    Static,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Background {
    Constant,
    Noise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub pattern: Pattern,
    /// Pixels per frame `(vx, vy)`.
    pub velocity: (f64, f64),
    /// Velocity of the second object; defaults to `-velocity`.
    pub second_velocity: Option<(f64, f64)>,
    pub texture_seed: u64,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub background: Background,
    /// Edge of the square objects in pixels.
    pub object_size: usize,
    /// Lattice spacing of the value-noise texture in pixels.
    pub texture_scale: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            pattern: Pattern::TranslatingTexture,
            velocity: (0.0, 0.0),
            second_velocity: None,
            texture_seed: 0,
            frames: 16,
            height: 224,
            width: 224,
            background: Background::Constant,
            object_size: 48,
            texture_scale: 6.0,
        }
    }
}

impl SceneSpec {
    pub fn dims(&self) -> Result<ClipDims, BenchError> {
        Ok(ClipDims::new(self.frames, self.height, self.width)?)
    }
}

/// Ground-truth motion of a generated scene.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    h: usize,
    w: usize,
    /// Per object: top-left corner at frame 0, velocity, edge length.
    objects: Vec<Square>,
    /// Whole-frame motion for texture patterns.
    global: Option<(f64, f64)>,
    frames: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Square {
    x0: f64,
    y0: f64,
    v: (f64, f64),
    size: f64,
}

impl Square {
    fn corner(&self, k: usize) -> (f64, f64) {
        (self.x0 + self.v.0 * k as f64, self.y0 + self.v.1 * k as f64)
    }

    fn contains(&self, k: usize, x: f64, y: f64) -> bool {
        let (cx, cy) = self.corner(k);
        x >= cx && x < cx + self.size && y >= cy && y < cy + self.size
    }
}

impl GroundTruth {
    /// Exact flow from frame `from` to the adjacent frame `to` (0-based).
    pub fn flow(&self, from: usize, to: usize) -> FlowField {
        assert!(from.abs_diff(to) == 1 && from.max(to) < self.frames);
        let sign = if to > from { 1.0 } else { -1.0 };
        if let Some((vx, vy)) = self.global {
            return FlowField::constant(self.h, self.w, sign * vx, sign * vy);
        }
        let mut u = vec![0.0; self.h * self.w];
        let mut v = vec![0.0; self.h * self.w];
        for y in 0..self.h {
            for x in 0..self.w {
                // later objects are drawn on top
                if let Some(o) = self.objects.iter().rev().find(|o| o.contains(from, x as f64, y as f64)) {
                    u[y * self.w + x] = sign * o.v.0;
                    v[y * self.w + x] = sign * o.v.1;
                }
            }
        }
        FlowField::from_uv(self.h, self.w, u, v)
    }

    /// Flow set around `base` (1-based).
    pub fn flow_set(&self, base: usize) -> FlowSet {
        let fields = (1..=self.frames)
            .map(|i| match i.cmp(&base) {
                std::cmp::Ordering::Less => Some(self.flow(i - 1, i)),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(self.flow(i - 1, i - 2)),
            })
            .collect();
        FlowSet::new(base, fields).expect("well-formed ground truth")
    }
}

pub struct Scene {
    pub clip: VideoClip,
    pub truth: GroundTruth,
}

/// Smooth value noise on an unbounded plane: bilinear-smoothstep
/// interpolation of hashed lattice values, two octaves.
#[derive(Clone, Copy, Debug)]
pub struct ValueNoise {
    seed: u64,
    scale: f64,
}

impl ValueNoise {
    pub fn new(seed: u64, scale: f64) -> Self {
        Self { seed, scale }
    }

    fn lattice(&self, i: i64, j: i64, octave: u64) -> f64 {
        let mut z = self.seed ^ octave.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z ^= (i as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = z.rotate_left(29) ^ (j as u64).wrapping_mul(0x94d0_49bb_1331_11eb);
        z = (z ^ (z >> 31)).wrapping_mul(0xd6e8_feb8_6659_fd93);
        z ^= z >> 32;
        (z >> 11) as f64 / (1u64 << 53) as f64
    }

    fn octave(&self, x: f64, y: f64, scale: f64, octave: u64) -> f64 {
        let (gx, gy) = (x / scale, y / scale);
        let (i, j) = (gx.floor(), gy.floor());
        let (fx, fy) = (gx - i, gy - j);
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (sx, sy) = (s(fx), s(fy));
        let (i, j) = (i as i64, j as i64);
        let a = self.lattice(i, j, octave);
        let b = self.lattice(i + 1, j, octave);
        let c = self.lattice(i, j + 1, octave);
        let d = self.lattice(i + 1, j + 1, octave);
        let top = a + (b - a) * sx;
        let bot = c + (d - c) * sx;
        top + (bot - top) * sy
    }

    /// Value in `[0, 1]`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (0.65 * self.octave(x, y, self.scale, 0) + 0.35 * self.octave(x, y, self.scale * 0.5, 1)).clamp(0.0, 1.0)
    }
}

fn check_velocity(v: (f64, f64)) -> Result<(), BenchError> {
    if !(v.0.is_finite() && v.1.is_finite()) {
        return Err(BenchError::InvalidSpec(format!("non-finite velocity {v:?}")));
    }
    Ok(())
}

/// Renders the scene and its exact motion.
pub fn generate_scene(spec: &SceneSpec, rng: &mut Rng) -> Result<Scene, BenchError> {
    let dims = spec.dims()?;
    check_velocity(spec.velocity)?;
    if !(spec.texture_scale > 0.0) {
        return Err(BenchError::InvalidSpec("texture scale must be positive".into()));
    }
    let (t, h, w) = (dims.t, dims.h, dims.w);
    let tints: Vec<[f64; 3]> = (0..3)
        .map(|_| [0.6 + 0.4 * rng.uniform(), 0.6 + 0.4 * rng.uniform(), 0.6 + 0.4 * rng.uniform()])
        .collect();
    let fg = ValueNoise::new(spec.texture_seed, spec.texture_scale);
    let fg2 = ValueNoise::new(spec.texture_seed ^ 0xabcdef, spec.texture_scale);
    let bg = ValueNoise::new(spec.texture_seed ^ 0x1234_5678, spec.texture_scale * 1.5);

    let size = spec.object_size as f64;
    let place = |v: (f64, f64), rng: &mut Rng| -> Result<Square, BenchError> {
        let span = (t - 1) as f64;
        let (lo_x, hi_x) = ((-v.0 * span).max(0.0), (w as f64 - size - v.0 * span).min(w as f64 - size));
        let (lo_y, hi_y) = ((-v.1 * span).max(0.0), (h as f64 - size - v.1 * span).min(h as f64 - size));
        if spec.object_size == 0 || lo_x > hi_x || lo_y > hi_y {
            return Err(BenchError::ObjectExitsCanvas {
                velocity: v,
                frames: t,
            });
        }
        let x0 = (lo_x + (hi_x - lo_x) * rng.uniform()).floor().max(lo_x.ceil());
        let y0 = (lo_y + (hi_y - lo_y) * rng.uniform()).floor().max(lo_y.ceil());
        Ok(Square { x0, y0, v, size })
    };

    let (objects, global) = match spec.pattern {
        Pattern::TranslatingTexture => (vec![], Some(spec.velocity)),
        Pattern::Static => (vec![], Some((0.0, 0.0))),
        Pattern::TranslatingSquare => (vec![place(spec.velocity, rng)?], None),
        Pattern::TwoObjects => {
            let v2 = spec.second_velocity.unwrap_or((-spec.velocity.0, -spec.velocity.1));
            check_velocity(v2)?;
            (vec![place(spec.velocity, rng)?, place(v2, rng)?], None)
        }
    };

    let mut data = vec![0.0; t * 3 * h * w];
    let plane = h * w;
    for k in 0..t {
        for y in 0..h {
            for x in 0..w {
                let (xf, yf) = (x as f64, y as f64);
                let rgb: [f64; 3] = if let Some((vx, vy)) = global {
                    let n = fg.eval(xf - vx * k as f64, yf - vy * k as f64);
                    let m = fg2.eval(xf - vx * k as f64, yf - vy * k as f64);
                    [n * tints[0][0], (0.5 * n + 0.5 * m) * tints[0][1], m * tints[0][2]]
                } else if let Some((idx, o)) = objects.iter().enumerate().rev().find(|(_, o)| o.contains(k, xf, yf)) {
                    let (cx, cy) = o.corner(k);
                    let (lx, ly) = (xf - cx + 1000.0 * idx as f64, yf - cy);
                    let n = fg.eval(lx, ly);
                    let tint = tints[1 + idx.min(1)];
                    [n * tint[0], n * tint[1], n * tint[2]]
                } else {
                    match spec.background {
                        Background::Constant => [0.5; 3],
                        Background::Noise => {
                            let n = 0.3 + 0.4 * bg.eval(xf, yf);
                            [n; 3]
                        }
                    }
                };
                for c in 0..3 {
                    data[((k * 3 + c) * plane) + y * w + x] = rgb[c];
                }
            }
        }
    }
    let clip = VideoClip::new(Tensor::new(vec![t, 3, h, w], data)?)?;
    Ok(Scene {
        clip,
        truth: GroundTruth {
            h,
            w,
            objects,
            global,
            frames: t,
        },
    })
}
