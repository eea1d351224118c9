//! Estimates flow on a translating texture and compares it with the
//! exact motion of the synthetic scene.
//!
//! cargo run --release --example flow_estimation

use mgmask::bench::{generate_scene, SceneSpec};
use mgmask::flow::{estimate_flow, FlowConfig};
use mgmask::rng::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = FlowConfig::default();
    for (vx, vy) in [(0.0, 0.0), (2.5, -1.0), (6.0, 3.0), (-8.0, 0.0)] {
        let spec = SceneSpec {
            velocity: (vx, vy),
            frames: 2,
            height: 128,
            width: 128,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec, &mut Rng::new(1))?;
        let est = estimate_flow(&scene.clip.frame(0), &scene.clip.frame(1), &cfg)?;
        let (u, v) = est.at(64, 64);
        println!(
            "true ({vx:+.1}, {vy:+.1})  centre ({u:+.2}, {v:+.2})  interior EPE {:.3} px",
            est.mean_epe(&scene.truth.flow(0, 1), 16)
        );
    }
    Ok(())
}
