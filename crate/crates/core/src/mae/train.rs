use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{MaeConfig, MaeError, ToyMae};
use crate::flow::FlowSet;
use crate::mask::{generate, BaseFrame, MaskConfig, Strategy};
use crate::rng::Rng;
use crate::tensor::{read_vten, write_vten, Tensor, VideoClip};

pub const MANIFEST_NAME: &str = "manifest.txt";
const CONFIG_NAME: &str = "config.json";

/// One training clip. Motion-guided masking needs `flows` built around the
/// configured base frame.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub clip: VideoClip,
    pub flows: Option<FlowSet>,
}

/// Plain SGD for `cfg.steps` steps. Each step draws `cfg.batch_size` clips
/// and a fresh mask per clip, averages the gradients and applies one fixed
/// learning-rate update. `on_step` sees `(step, mean batch loss)` with
/// 1-based steps. Returns the loss curve.
pub fn train(
    model: &mut ToyMae,
    data: &[TrainSample],
    mask_cfg: &MaskConfig,
    cfg: &MaeConfig,
    mut on_step: impl FnMut(usize, f64),
) -> Result<Vec<f64>, MaeError> {
    cfg.validate()?;
    mask_cfg.validate()?;
    if data.is_empty() {
        return Err(MaeError::InvalidConfig("empty dataset".into()));
    }
    if mask_cfg.strategy == Strategy::MotionGuided && mask_cfg.base_frame == BaseFrame::Random {
        return Err(MaeError::InvalidConfig(
            "motion-guided training needs a fixed base frame so precomputed flows match".into(),
        ));
    }
    let root = Rng::new(cfg.seed).fork(0x74_72_61_69_6e);
    let mut curve = Vec::with_capacity(cfg.steps);
    let mut last_finite = None;
    for step in 1..=cfg.steps {
        let step_rng = root.fork(step as u64);
        let mut pick = step_rng.fork(0);
        let batch: Vec<usize> = (0..cfg.batch_size).map(|_| pick.below(data.len())).collect();
        let results: Vec<Result<(f64, ToyMae), MaeError>> = batch
            .par_iter()
            .enumerate()
            .map(|(j, &i)| {
                let sample = &data[i];
                let mask = generate(sample.clip.dims(), sample.flows.as_ref(), mask_cfg, &step_rng.fork(1 + j as u64))?;
                model.backward(&sample.clip, &mask)
            })
            .collect();
        let mut total = model.zeros_like();
        let mut loss = 0.0;
        for r in results {
            let (l, g) = r?;
            loss += l;
            for (acc, (_, _, gv)) in total.params_mut().into_iter().zip(g.params()) {
                for (a, b) in acc.iter_mut().zip(gv) {
                    *a += b;
                }
            }
        }
        loss /= cfg.batch_size as f64;
        if !loss.is_finite() {
            return Err(MaeError::Diverged { step, last_finite });
        }
        last_finite = Some((step, loss));
        model.sgd_step(&total, cfg.lr / cfg.batch_size as f64);
        curve.push(loss);
        on_step(step, loss);
    }
    Ok(curve)
}

/// `step,loss` with 1-based steps and shortest round-trip decimals.
pub fn write_loss_csv(curve: &[f64], path: impl AsRef<Path>) -> Result<(), MaeError> {
    let mut s = String::from("step,loss\n");
    for (i, l) in curve.iter().enumerate() {
        writeln!(s, "{},{}", i + 1, l).unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

/// One VTEN per parameter plus a manifest of `name dims file` lines.
pub fn write_checkpoint(model: &ToyMae, cfg: &MaeConfig, dir: impl AsRef<Path>) -> Result<(), MaeError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (name, dims, values) in model.params() {
        let file = format!("{name}.vten");
        write_vten(&Tensor::new(dims.clone(), values.to_vec())?, dir.join(&file))?;
        let dims: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
        writeln!(manifest, "{name} {} {file}", dims.join("x")).unwrap();
    }
    fs::write(dir.join(MANIFEST_NAME), manifest)?;
    let json = serde_json::to_string_pretty(cfg).map_err(|e| MaeError::Checkpoint(e.to_string()))?;
    fs::write(dir.join(CONFIG_NAME), json)?;
    Ok(())
}

/// Loads a checkpoint written by [`write_checkpoint`]. Values pass through
/// f32 on disk.
pub fn read_checkpoint(dir: impl AsRef<Path>) -> Result<(MaeConfig, ToyMae), MaeError> {
    let dir = dir.as_ref();
    let cfg: MaeConfig = serde_json::from_str(&fs::read_to_string(dir.join(CONFIG_NAME))?)
        .map_err(|e| MaeError::Checkpoint(e.to_string()))?;
    let mut entries: HashMap<String, (Vec<usize>, String)> = HashMap::new();
    for (lineno, line) in fs::read_to_string(dir.join(MANIFEST_NAME))?.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [name, dims, file] = parts[..] else {
            return Err(MaeError::Checkpoint(format!("manifest line {}: expected 3 fields", lineno + 1)));
        };
        let dims = dims
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| MaeError::Checkpoint(format!("manifest line {}: {e}", lineno + 1)))?;
        entries.insert(name.to_string(), (dims, file.to_string()));
    }
    let mut err = None;
    let model = ToyMae::from_params(&cfg, |name, dims| {
        let (mdims, file) = entries.get(name)?;
        if mdims != dims {
            err = Some(MaeError::Checkpoint(format!("parameter {name}: dims {mdims:?}, expected {dims:?}")));
            return None;
        }
        match read_vten(dir.join(file)) {
            Ok(t) if t.dims() == dims => Some(t.into_data()),
            Ok(t) => {
                err = Some(MaeError::Checkpoint(format!("{file}: dims {:?}, expected {dims:?}", t.dims())));
                None
            }
            Err(e) => {
                err = Some(e.into());
                None
            }
        }
    });
    match (model, err) {
        (_, Some(e)) => Err(e),
        (m, None) => Ok((cfg, m?)),
    }
}
