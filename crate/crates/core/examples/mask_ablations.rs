//! Generates one mask per ablation setting on a translating texture and
//! reports how often masked content reappears in neighbouring visible
//! tokens.
//!
//! cargo run --release --example mask_ablations

use mgmask::bench::{generate_scene, leakage_rate, Pattern, SceneSpec};
use mgmask::flow::{build_flow_set, FlowConfig, FlowSource};
use mgmask::mask::{generate, resolve_base_frame, BaseFrame, HoleFill, MaskConfig, MaskInit, SampleLevel, Strategy, WarpMode};
use mgmask::rng::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SceneSpec {
        pattern: Pattern::TranslatingTexture,
        velocity: (12.0, 4.0),
        frames: 8,
        height: 112,
        width: 112,
        ..SceneSpec::default()
    };
    let scene = generate_scene(&spec, &mut Rng::new(3))?;
    let dims = scene.clip.dims();
    let base = MaskConfig::default();
    let settings: Vec<(&str, MaskConfig)> = vec![
        ("default", base.clone()),
        ("tube", MaskConfig::with_strategy(Strategy::Tube)),
        ("random", MaskConfig::with_strategy(Strategy::Random)),
        ("base first", MaskConfig { base_frame: BaseFrame::First, ..base.clone() }),
        ("base random", MaskConfig { base_frame: BaseFrame::Random, ..base.clone() }),
        ("forward warp", MaskConfig { warp: WarpMode::Forward, ..base.clone() }),
        ("clip level", MaskConfig { sample: SampleLevel::ClipLevel, ..base.clone() }),
        ("token init", MaskConfig { init: MaskInit::TokenRandom, ..base.clone() }),
        ("pixel init", MaskConfig { init: MaskInit::PixelRandom, ..base.clone() }),
        ("fill visible", MaskConfig { fill: HoleFill::Visible, ..base.clone() }),
        ("fill previous", MaskConfig { fill: HoleFill::PreviousMap, ..base.clone() }),
        ("exposure noise", MaskConfig { exposure_noise: Some(0.05), ..base.clone() }),
    ];
    for (name, cfg) in settings {
        let rng = Rng::new(7);
        let b = resolve_base_frame(dims.t, &cfg, &rng);
        let truth = scene.truth.flow_set(b);
        let m = generate(dims, Some(&truth), &cfg, &rng)?;
        let leak = leakage_rate(&m, &truth, dims, 1)?;
        println!("{name:>15}: base {b}, {} visible, leakage {:.3}", m.visible_count(), leak.rate);
    }

    // the same mask from estimated instead of exact flows
    let rng = Rng::new(7);
    let b = resolve_base_frame(dims.t, &base, &rng);
    let est = build_flow_set(&scene.clip, b, &FlowSource::Estimate(FlowConfig::default()))?;
    let m = generate(dims, Some(&est), &base, &rng)?;
    let leak = leakage_rate(&m, &scene.truth.flow_set(b), dims, 1)?;
    println!("{:>15}: base {b}, {} visible, leakage {:.3}", "estimated flow", m.visible_count(), leak.rate);
    Ok(())
}
