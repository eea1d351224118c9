//! Compares masking strategies by temporal leakage on translating
//! textures and prints the JSON report.
//!
//! cargo run --release --example leakage_bench

use mgmask::bench::{compare_strategies, BenchOptions, SceneSpec};
use mgmask::mask::{MaskConfig, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfgs: Vec<MaskConfig> = [Strategy::MotionGuided, Strategy::Tube, Strategy::Random]
        .map(MaskConfig::with_strategy)
        .to_vec();
    let seeds: Vec<u64> = (0..20).collect();
    for speed in [0.0, 4.0, 16.0] {
        let spec = SceneSpec {
            velocity: (speed, 0.0),
            ..SceneSpec::default()
        };
        let report = compare_strategies(&spec, &cfgs, &seeds, &BenchOptions::default())?;
        println!("speed {speed} px/frame");
        for s in &report.summaries {
            println!("  {:>13}: median {:.4}, iqr {:.4}", s.strategy, s.median_rate, s.iqr);
        }
        if speed == 16.0 {
            println!("{}", report.to_json());
        }
    }
    Ok(())
}
