//! Renders motion-guided and tube masks over a moving square as PPM
//! frames with masked tokens darkened.
//!
//! cargo run --release --example overlays -- out_dir

use mgmask::bench::{generate_scene, Pattern, SceneSpec};
use mgmask::mask::{generate, render_overlays, resolve_base_frame, MaskConfig, Strategy};
use mgmask::ppm::write_ppm;
use mgmask::rng::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "overlays".into()));
    let spec = SceneSpec {
        pattern: Pattern::TranslatingSquare,
        velocity: (8.0, 0.0),
        background: mgmask::bench::Background::Noise,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec, &mut Rng::new(0))?;
    let dims = scene.clip.dims();
    for strategy in [Strategy::MotionGuided, Strategy::Tube] {
        let cfg = MaskConfig {
            ratio: 0.75,
            ..MaskConfig::with_strategy(strategy)
        };
        let rng = Rng::new(1);
        let flows = scene.truth.flow_set(resolve_base_frame(dims.t, &cfg, &rng));
        let mask = generate(dims, Some(&flows), &cfg, &rng)?;
        let dir = out.join(strategy.name());
        std::fs::create_dir_all(&dir)?;
        for (t, frame) in render_overlays(&scene.clip, &mask)?.iter().enumerate() {
            write_ppm(frame, dir.join(format!("overlay_{:03}.ppm", t + 1)))?;
        }
        println!("{} frames in {}", dims.t, dir.display());
    }
    Ok(())
}
