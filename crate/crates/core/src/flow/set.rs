use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{estimate_flow, read_flo, FlowConfig, FlowError, FlowField};
use crate::tensor::VideoClip;

/// Flows radiating out of the base frame `b` (1-based): for `i < b` the
/// field `i -> i+1`, for `i > b` the field `i -> i-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSet {
    base: usize,
    h: usize,
    w: usize,
    fields: Vec<Option<FlowField>>,
}

/// Where the flows come from.
#[derive(Clone, Debug)]
pub enum FlowSource {
    Estimate(FlowConfig),
    Directory(PathBuf),
}

/// `flow_{i}_{j}.flo`, 1-based.
pub fn flow_file_name(from: usize, to: usize) -> String {
    format!("flow_{from}_{to}.flo")
}

impl FlowSet {
    /// `fields[i - 1]` must be `Some` for every frame `i != base` and `None`
    /// for the base frame.
    pub fn new(base: usize, fields: Vec<Option<FlowField>>) -> Result<Self, FlowError> {
        let frames = fields.len();
        if base == 0 || base > frames || frames < 2 {
            return Err(FlowError::BadBase { base, frames });
        }
        let mut shape = None;
        for (k, f) in fields.iter().enumerate() {
            let i = k + 1;
            match (f, i == base) {
                (Some(_), true) => {
                    return Err(FlowError::InvalidSet("base frame must not carry a field".into()))
                }
                (None, false) => {
                    return Err(FlowError::InvalidSet(format!("missing field for frame {i}")))
                }
                (Some(f), false) => {
                    let s = (f.height(), f.width());
                    if *shape.get_or_insert(s) != s {
                        return Err(FlowError::InvalidSet("fields differ in shape".into()));
                    }
                }
                (None, true) => {}
            }
        }
        let (h, w) = shape.expect("at least one non-base frame");
        Ok(Self {
            base,
            h,
            w,
            fields,
        })
    }

    /// Every step gets the same field. `toward_base` is used for frames
    /// before the base (`i -> i+1`), `away` for frames after it (`i -> i-1`).
    pub fn uniform(frames: usize, base: usize, toward_base: FlowField, away: FlowField) -> Result<Self, FlowError> {
        let fields = (1..=frames)
            .map(|i| match i.cmp(&base) {
                std::cmp::Ordering::Less => Some(toward_base.clone()),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(away.clone()),
            })
            .collect();
        Self::new(base, fields)
    }

    pub fn zeros(frames: usize, base: usize, h: usize, w: usize) -> Result<Self, FlowError> {
        Self::uniform(frames, base, FlowField::zeros(h, w), FlowField::zeros(h, w))
    }

    pub fn base_index(&self) -> usize {
        self.base
    }

    pub fn frames(&self) -> usize {
        self.fields.len()
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    /// Frame index the field of frame `i` points to.
    pub fn target_of(&self, i: usize) -> Option<usize> {
        match i.cmp(&self.base) {
            std::cmp::Ordering::Less => Some(i + 1),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        }
    }

    /// Field leaving frame `i` (1-based); `None` for the base frame.
    pub fn field(&self, i: usize) -> Option<&FlowField> {
        self.fields.get(i.checked_sub(1)?)?.as_ref()
    }

    /// `(from, to, field)` for every pair, in frame order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, &FlowField)> {
        self.fields.iter().enumerate().filter_map(|(k, f)| {
            let i = k + 1;
            f.as_ref().map(|f| (i, self.target_of(i).unwrap(), f))
        })
    }

    /// Moves a point from frame `from` to the adjacent frame `to` (1-based).
    /// Uses the stored field when it points that way, otherwise inverts the
    /// opposite field by fixed-point iteration.
    pub fn step_point(&self, from: usize, to: usize, x: f64, y: f64) -> (f64, f64) {
        assert!(from.abs_diff(to) == 1, "frames must be adjacent");
        if self.target_of(from) == Some(to) {
            let (u, v) = self.field(from).unwrap().sample(x, y);
            return (x + u, y + v);
        }
        // stored field goes to -> from: find q with q + flow(q) = p
        let f = self.field(to).expect("adjacent field exists");
        let (mut qx, mut qy) = (x, y);
        for _ in 0..20 {
            let (u, v) = f.sample(qx, qy);
            let (nx, ny) = (x - u, y - v);
            let done = (nx - qx).abs() < 1e-9 && (ny - qy).abs() < 1e-9;
            qx = nx;
            qy = ny;
            if done {
                break;
            }
        }
        (qx, qy)
    }

    /// Transports a point along adjacent steps from `from` to `to`.
    pub fn transport(&self, from: usize, to: usize, x: f64, y: f64) -> (f64, f64) {
        let (mut px, mut py) = (x, y);
        let mut cur = from;
        while cur != to {
            let next = if to > cur { cur + 1 } else { cur - 1 };
            (px, py) = self.step_point(cur, next, px, py);
            cur = next;
        }
        (px, py)
    }
}

/// Estimates or loads the flow set of `clip` around base frame `base`
/// (1-based). Estimated pairs run in parallel; the result does not depend
/// on scheduling.
pub fn build_flow_set(clip: &VideoClip, base: usize, source: &FlowSource) -> Result<FlowSet, FlowError> {
    let d = clip.dims();
    if base == 0 || base > d.t {
        return Err(FlowError::BadBase {
            base,
            frames: d.t,
        });
    }
    let indices: Vec<usize> = (1..=d.t).collect();
    let fields: Vec<Option<FlowField>> = match source {
        FlowSource::Estimate(cfg) => {
            cfg.validate(d.h, d.w)?;
            indices
                .par_iter()
                .map(|&i| {
                    let Some(j) = target(i, base) else {
                        return Ok(None);
                    };
                    estimate_flow(&clip.frame(i - 1), &clip.frame(j - 1), cfg).map(Some)
                })
                .collect::<Result<_, _>>()?
        }
        FlowSource::Directory(dir) => indices
            .iter()
            .map(|&i| {
                let Some(j) = target(i, base) else {
                    return Ok(None);
                };
                let f = load_pair(dir, i, j)?;
                if (f.height(), f.width()) != (d.h, d.w) {
                    return Err(FlowError::DimMismatch(
                        vec![2, d.h, d.w],
                        f.tensor().dims().to_vec(),
                    ));
                }
                Ok(Some(f))
            })
            .collect::<Result<_, _>>()?,
    };
    FlowSet::new(base, fields)
}

fn target(i: usize, base: usize) -> Option<usize> {
    match i.cmp(&base) {
        std::cmp::Ordering::Less => Some(i + 1),
        std::cmp::Ordering::Equal => None,
        std::cmp::Ordering::Greater => Some(i - 1),
    }
}

fn load_pair(dir: &Path, from: usize, to: usize) -> Result<FlowField, FlowError> {
    let path = dir.join(flow_file_name(from, to));
    if !path.is_file() {
        return Err(FlowError::MissingPair {
            from,
            to,
            path: path.display().to_string(),
        });
    }
    read_flo(&path)
}
