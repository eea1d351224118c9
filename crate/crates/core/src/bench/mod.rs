//! Synthetic scenes with exact motion, a temporal leakage metric, and a
//! harness that compares masking strategies on identical clips and seeds.

mod leakage;
mod scene;

pub use leakage::{leakage_rate, LeakageEntry};
pub use scene::{generate_scene, Background, GroundTruth, Pattern, Scene, SceneSpec, ValueNoise};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{build_flow_set, flow_file_name, write_flo, FlowConfig, FlowError, FlowSource};
use crate::mae::{train, MaeConfig, MaeError, ToyMae, TrainSample};
use crate::mask::{generate, resolve_base_frame, MaskConfig, MaskError, Strategy};
use crate::rng::Rng;
use crate::tensor::{write_vten, TensorError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("object moving at {velocity:?} px/frame leaves the canvas within {frames} frames")]
    ObjectExitsCanvas { velocity: (f64, f64), frames: usize },
    #[error("shape mismatch: {0}")]
    DimMismatch(String),
    #[error("need at least one seed and one mask config")]
    Empty,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Mae(#[from] MaeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where masks get their flows from. Leakage is always measured against
/// ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MaskFlows {
    GroundTruth,
    Estimate(FlowConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub mae: MaeConfig,
    /// Scenes per training set; each is drawn like the benchmark scene with
    /// its own texture.
    pub clips: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    /// Slices on each side checked for leaks.
    pub horizon: usize,
    pub flows: MaskFlows,
    pub train: Option<TrainOptions>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            horizon: 1,
            flows: MaskFlows::GroundTruth,
            train: None,
        }
    }
}

/// Aggregate over seeds for one mask config. Serializes to the report JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub median_rate: f64,
    pub iqr: f64,
    pub n_seeds: usize,
    pub spec: SceneSpec,
    pub mask: MaskConfig,
    /// Masked tokens per run.
    pub masked_tokens: usize,
    /// Median over seeds of each slice's rate.
    pub per_slice: Vec<f64>,
    pub median_final_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub strategy: String,
    pub seed: u64,
    pub leakage: LeakageEntry,
    /// Mean loss over the final 20% of training steps.
    pub final_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub summaries: Vec<StrategySummary>,
    pub runs: Vec<RunRecord>,
}

/// Median with midpoint interpolation for even counts.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolated quantile of the sorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Mean of the last `ceil(len / 5)` entries.
pub fn tail_mean(curve: &[f64]) -> f64 {
    let k = curve.len().div_ceil(5).max(1).min(curve.len());
    curve[curve.len() - k..].iter().sum::<f64>() / k as f64
}

fn scene_for(spec: &SceneSpec, seed: u64, index: u64) -> Result<Scene, BenchError> {
    let root = Rng::new(seed).fork(0x73_63_65_6e_65).fork(index);
    let spec = SceneSpec {
        texture_seed: spec.texture_seed ^ root.fork(0).next_u64(),
        ..spec.clone()
    };
    generate_scene(&spec, &mut root.fork(1))
}

/// Runs every mask config on the same scene and mask generator per seed.
/// Results are ordered by config then seed, independent of scheduling.
pub fn compare_strategies(
    spec: &SceneSpec,
    cfgs: &[MaskConfig],
    seeds: &[u64],
    opts: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    if seeds.is_empty() || cfgs.is_empty() {
        return Err(BenchError::Empty);
    }
    for c in cfgs {
        c.validate()?;
    }
    let dims = spec.dims()?;
    let per_seed: Vec<Vec<RunRecord>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<RunRecord>, BenchError> {
            let scene = scene_for(spec, seed, 0)?;
            let mask_rng = Rng::new(seed).fork(0x6d61_736b);
            let train_set = match &opts.train {
                Some(t) => (0..t.clips as u64)
                    .map(|k| scene_for(spec, seed, 1 + k))
                    .collect::<Result<Vec<_>, _>>()?,
                None => Vec::new(),
            };
            cfgs.iter()
                .map(|cfg| {
                    let base = resolve_base_frame(dims.t, cfg, &mask_rng);
                    let truth = scene.truth.flow_set(base);
                    let mask_flows = match &opts.flows {
                        MaskFlows::GroundTruth => truth.clone(),
                        MaskFlows::Estimate(fc) if cfg.strategy == Strategy::MotionGuided => {
                            build_flow_set(&scene.clip, base, &FlowSource::Estimate(*fc))?
                        }
                        MaskFlows::Estimate(_) => truth.clone(),
                    };
                    let mask = generate(dims, Some(&mask_flows), cfg, &mask_rng)?;
                    let leakage = leakage_rate(&mask, &truth, dims, opts.horizon)?;
                    let final_loss = match &opts.train {
                        Some(t) => {
                            let mae = MaeConfig {
                                seed,
                                ..t.mae.clone()
                            };
                            let samples: Vec<TrainSample> = train_set
                                .iter()
                                .map(|s| TrainSample {
                                    clip: s.clip.clone(),
                                    flows: (cfg.strategy == Strategy::MotionGuided).then(|| s.truth.flow_set(base)),
                                })
                                .collect();
                            let mut model = ToyMae::new(&mae)?;
                            let curve = train(&mut model, &samples, cfg, &mae, |_, _| {})?;
                            Some(tail_mean(&curve))
                        }
                        None => None,
                    };
                    Ok(RunRecord {
                        strategy: cfg.strategy.name().to_string(),
                        seed,
                        leakage,
                        final_loss,
                    })
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut runs = Vec::with_capacity(cfgs.len() * seeds.len());
    let mut summaries = Vec::with_capacity(cfgs.len());
    for (ci, cfg) in cfgs.iter().enumerate() {
        let rows: Vec<RunRecord> = per_seed.iter().map(|r| r[ci].clone()).collect();
        let rates: Vec<f64> = rows.iter().map(|r| r.leakage.rate).collect();
        let slices = rows[0].leakage.per_slice.len();
        let per_slice = (0..slices)
            .map(|s| median(&rows.iter().map(|r| r.leakage.per_slice[s]).collect::<Vec<_>>()))
            .collect();
        let losses: Vec<f64> = rows.iter().filter_map(|r| r.final_loss).collect();
        summaries.push(StrategySummary {
            strategy: cfg.strategy.name().to_string(),
            median_rate: median(&rates),
            iqr: quantile(&rates, 0.75) - quantile(&rates, 0.25),
            n_seeds: seeds.len(),
            spec: spec.clone(),
            mask: cfg.clone(),
            masked_tokens: rows[0].leakage.masked,
            per_slice,
            median_final_loss: (!losses.is_empty()).then(|| median(&losses)),
        });
        runs.extend(rows);
    }
    Ok(BenchReport { summaries, runs })
}

impl BenchReport {
    /// JSON array with one object per strategy.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summaries).expect("plain data serializes")
    }

    /// `strategy,seed,leakage,final_loss`, one row per run.
    pub fn loss_table_csv(&self) -> String {
        let mut s = String::from("strategy,seed,leakage,final_loss\n");
        for r in &self.runs {
            let loss = r.final_loss.map(|l| l.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{},{}", r.strategy, r.seed, r.leakage.rate, loss).unwrap();
        }
        s
    }
}

/// Writes `clip.vten` and `flows/flow_{i}_{j}.flo` for the ground truth
/// around `base`.
pub fn export_scene(scene: &Scene, base: usize, dir: impl AsRef<Path>) -> Result<(), BenchError> {
    let dir = dir.as_ref();
    let flows_dir = dir.join("flows");
    fs::create_dir_all(&flows_dir)?;
    write_vten(scene.clip.tensor(), dir.join("clip.vten"))?;
    for (i, j, f) in scene.truth.flow_set(base).pairs() {
        write_flo(f, flows_dir.join(flow_file_name(i, j)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowSet;

    fn spec(speed: f64) -> SceneSpec {
        SceneSpec {
            velocity: (speed, 0.0),
            frames: 8,
            height: 96,
            width: 96,
            ..SceneSpec::default()
        }
    }

    fn cfgs() -> Vec<MaskConfig> {
        [Strategy::MotionGuided, Strategy::Tube, Strategy::Random]
            .map(|s| MaskConfig {
                ratio: 0.75,
                ..MaskConfig::with_strategy(s)
            })
            .to_vec()
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert_eq!(tail_mean(&[9.0, 9.0, 9.0, 9.0, 1.0, 3.0, 9.0, 9.0, 1.0, 3.0]), 2.0);
    }

    #[test]
    fn static_collapses_and_is_deterministic() {
        let seeds: Vec<u64> = (0..6).collect();
        let r = compare_strategies(&spec(0.0), &cfgs(), &seeds, &BenchOptions::default()).unwrap();
        assert_eq!(r.summaries[0].median_rate, 0.0);
        assert_eq!(r.summaries[0].median_rate, r.summaries[1].median_rate);
        assert!(r.runs.iter().all(|x| (0.0..=1.0).contains(&x.leakage.rate)));
        let again = compare_strategies(&spec(0.0), &cfgs(), &seeds, &BenchOptions::default()).unwrap();
        assert_eq!(r, again);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["strategy", "median_rate", "iqr", "n_seeds", "spec"] {
            assert!(json[0].get(key).is_some(), "{key}");
        }
        assert_eq!(r.loss_table_csv().lines().count(), 1 + 18);
    }

    #[test]
    fn export_layout() {
        let dir = tempfile::tempdir().unwrap();
        let scene = scene_for(&spec(2.0), 0, 0).unwrap();
        export_scene(&scene, 4, dir.path()).unwrap();
        assert!(dir.path().join("clip.vten").exists());
        let back = build_flow_set(&scene.clip, 4, &FlowSource::Directory(dir.path().join("flows"))).unwrap();
        let truth: FlowSet = scene.truth.flow_set(4);
        assert_eq!(back, truth);
    }
}
