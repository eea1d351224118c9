//! Pre-trains the toy autoencoder on a few synthetic clips with tube and
//! motion-guided masks and writes loss curves and checkpoints.
//!
//! cargo run --release --example pretrain -- out_dir

use mgmask::bench::{generate_scene, SceneSpec};
use mgmask::mae::{train, write_checkpoint, write_loss_csv, MaeConfig, ToyMae, TrainSample};
use mgmask::mask::{MaskConfig, Strategy};
use mgmask::rng::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pretrain".into()));
    let cfg = MaeConfig {
        embed_dim: 32,
        depth: 1,
        heads: 2,
        decoder_dim: 16,
        lr: 0.3,
        steps: 200,
        batch_size: 1,
        ..MaeConfig::default()
    };
    let mut data = Vec::new();
    for k in 0..4 {
        let spec = SceneSpec {
            velocity: (16.0, 0.0),
            texture_seed: k,
            frames: 4,
            height: 128,
            width: 128,
            texture_scale: 48.0,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec, &mut Rng::new(k))?;
        // motion-guided masks are built around the middle frame
        let flows = scene.truth.flow_set(spec.frames / 2);
        data.push(TrainSample {
            clip: scene.clip,
            flows: Some(flows),
        });
    }
    for strategy in [Strategy::Tube, Strategy::MotionGuided] {
        let mask_cfg = MaskConfig::with_strategy(strategy);
        let mut model = ToyMae::new(&cfg)?;
        let curve = train(&mut model, &data, &mask_cfg, &cfg, |step, loss| {
            if step % 50 == 0 {
                println!("{} step {step}: {loss:.4}", strategy.name());
            }
        })?;
        let dir = out.join(strategy.name());
        std::fs::create_dir_all(&dir)?;
        write_loss_csv(&curve, dir.join("loss.csv"))?;
        write_checkpoint(&model, &cfg, dir.join("checkpoint"))?;
    }
    Ok(())
}
