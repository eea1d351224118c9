//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass a substring to run a subset.

#[path = "support/oracle.rs"]
mod oracle;

use std::time::Instant;

use mgmask::bench::{compare_strategies, generate_scene, BenchOptions, SceneSpec, TrainOptions};
use mgmask::flow::{estimate_flow, FlowConfig, FlowField, FlowSet, FLO_MAGIC};
use mgmask::mae::{MaeConfig, ToyMae};
use mgmask::mask::{
    build_mask_volume_from, generate, sample_tokens, visible_per_slice, BaseFrame, GaussianMixture,
    MaskConfig, MaskVolume, SampleLevel, Strategy, TokenMask,
};
use mgmask::rng::Rng;
use mgmask::tensor::{ClipDims, Tensor, VideoClip, VTEN_MAGIC, VTEN_VERSION};

// Tolerances and budgets.
const COLLAPSE_SEEDS: u64 = 100;
const EQUIVARIANCE_SEEDS: u64 = 20;
const RATIOS: [f64; 5] = [0.75, 0.8, 0.85, 0.9, 0.95];
const FLOW_SEEDS: u64 = 20;
const FLOW_MAX_SPEED: f64 = 8.0;
const FLOW_EPE: f64 = 0.5;
const FLOW_MARGIN: usize = 16;
const GRAD_H: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;
// Denominator floor for the relative error of near-zero gradients.
const GRAD_FLOOR: f64 = 1e-6;
const HARDER_SEEDS: u64 = 50;
const HARDER_WINS: usize = 45;
const LEAK_SEEDS: u64 = 50;
const CODEC_CASES: u64 = 1000;
const ORACLE_CASES: u64 = 10;
const ORACLE_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Name, time budget in seconds, check.
type Criterion = (&'static str, f64, fn() -> Outcome);

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 9] = [
        ("zero_flow_collapse", 10.0, zero_flow_collapse),
        ("warp_equivariance", 30.0, warp_equivariance),
        ("cardinality", 10.0, cardinality),
        ("flow_accuracy", 60.0, flow_accuracy),
        ("gradient_check", 60.0, gradient_check),
        ("harder_task_direction", 1800.0, harder_task_direction),
        ("leakage_ordering", 300.0, leakage_ordering),
        ("codec_conformance", 30.0, codec_conformance),
        ("oracle_equivalence", 10.0, oracle_equivalence),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let secs = start.elapsed().as_secs_f64();
        let pass = out.pass && secs < budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} ({secs:.1}s, budget {budget:.0}s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn clip_dims() -> ClipDims {
    ClipDims::new(16, 224, 224).unwrap()
}

fn zero_flow_collapse() -> Outcome {
    let dims = clip_dims();
    let cfg = MaskConfig::default();
    let mut bad = Vec::new();
    for seed in 0..COLLAPSE_SEEDS {
        let rng = Rng::new(seed);
        let base = mgmask::mask::resolve_base_frame(dims.t, &cfg, &rng);
        let flows = FlowSet::zeros(dims.t, base, dims.h, dims.w).unwrap();
        let m = generate(dims, Some(&flows), &cfg, &rng).unwrap();
        let first = m.slice_visible(0);
        if (1..dims.slices()).any(|s| m.slice_visible(s) != first) {
            bad.push(seed);
        }
    }
    outcome(bad.is_empty(), format!("{} of {COLLAPSE_SEEDS} seeds with differing slices {bad:?}", bad.len()))
}

/// Shifts a slice's visible token indices by `dc` columns; `None` if any
/// leaves the grid.
fn shift_tokens(visible: &[usize], cols: usize, dc: isize) -> Option<Vec<usize>> {
    let mut out: Vec<usize> = visible
        .iter()
        .map(|&i| {
            let c = (i % cols) as isize + dc;
            (0..cols as isize).contains(&c).then(|| i - i % cols + c as usize)
        })
        .collect::<Option<_>>()?;
    out.sort_unstable();
    Some(out)
}

/// Checks `vol` frame `f` against the base frame translated by `shift` px
/// over every pixel whose source stays on the canvas.
fn volume_shift_matches(vol: &MaskVolume, base0: usize, f: usize, shift: isize) -> bool {
    let w = vol.width() as isize;
    let (a, b) = (vol.frame_data(base0), vol.frame_data(f));
    (0..vol.height()).all(|y| {
        (0..w).all(|x| {
            let src = x - shift;
            !(0..w).contains(&src) || b[y * w as usize + x as usize] == a[y * w as usize + src as usize]
        })
    })
}

fn warp_equivariance() -> Outcome {
    // One token per temporal slice step: 8 px per frame. Content moves left,
    // so slice b+k must show the base slice's visible set k columns left.
    let dims = clip_dims();
    let (rows, cols) = (dims.token_rows(), dims.token_cols());
    let cfg = MaskConfig::default();
    assert_eq!(cfg.base_frame, BaseFrame::Middle);
    let base = dims.t / 2;
    let base0 = base - 1;
    let base_slice = base0 / 2;
    let v = -8.0;
    let flows = FlowSet::uniform(dims.t, base, FlowField::constant(dims.h, dims.w, v, 0.0), FlowField::constant(dims.h, dims.w, -v, 0.0)).unwrap();
    let flows_16 = FlowSet::uniform(dims.t, base, FlowField::constant(dims.h, dims.w, -16.0, 0.0), FlowField::constant(dims.h, dims.w, 16.0, 0.0)).unwrap();
    let picks_n = 3;
    let ratio = 1.0 - picks_n as f64 / dims.tokens_per_slice() as f64;
    assert_eq!(visible_per_slice(ratio, dims), picks_n);
    let mut bad = Vec::new();
    let mut checked = 0;
    for seed in 0..EQUIVARIANCE_SEEDS {
        // centres kept in the columns that stay on the canvas for every slice
        let mut rng = Rng::new(seed);
        let mut picks = Vec::new();
        while picks.len() < picks_n {
            let t = rng.below(rows) * cols + 5 + rng.below(2);
            if !picks.contains(&t) {
                picks.push(t);
            }
        }
        let map = GaussianMixture::on_tokens(&picks, cols, cfg.sigma).render(dims.h, dims.w);
        let vol = build_mask_volume_from(map.clone(), &flows, &cfg, &Rng::new(seed)).unwrap();
        let m = sample_tokens(&vol, ratio, SampleLevel::FrameLevel).unwrap();
        let reference = m.slice_visible(base_slice);
        let mut ok = (0..dims.t).all(|f| volume_shift_matches(&vol, base0, f, (v * (f as f64 - base0 as f64)) as isize));
        // a full token per frame: each frame of the volume is the base map
        // moved one token per frame step wherever its source is on canvas
        let wide = build_mask_volume_from(map, &flows_16, &cfg, &Rng::new(seed)).unwrap();
        ok &= (0..dims.t).all(|f| volume_shift_matches(&wide, base0, f, -16 * (f as isize - base0 as isize)));
        for s in 0..dims.slices() {
            let k = s as isize - base_slice as isize;
            let want = shift_tokens(&reference, cols, -k);
            checked += 1;
            ok &= want.as_deref() == Some(&m.slice_visible(s)[..]);
        }
        if !ok {
            bad.push(seed);
        }
    }
    outcome(bad.is_empty(), format!("{checked} slices over {EQUIVARIANCE_SEEDS} seeds, mismatching seeds {bad:?}"))
}

fn cardinality() -> Outcome {
    let grids = [(16, 224, 224), (8, 112, 160), (4, 64, 64)];
    let mut count = 0;
    let mut bad = Vec::new();
    for &ratio in &RATIOS {
        for &(t, h, w) in &grids {
            let dims = ClipDims::new(t, h, w).unwrap();
            let k = visible_per_slice(ratio, dims);
            if k == 0 {
                continue;
            }
            for strategy in [Strategy::MotionGuided, Strategy::Tube, Strategy::Random] {
                for seed in 0..4 {
                    let cfg = MaskConfig {
                        ratio,
                        ..MaskConfig::with_strategy(strategy)
                    };
                    let rng = Rng::new(seed);
                    let base = mgmask::mask::resolve_base_frame(t, &cfg, &rng);
                    let flows = FlowSet::uniform(t, base, FlowField::constant(h, w, 5.5, -2.0), FlowField::constant(h, w, -5.5, 2.0)).unwrap();
                    let m = generate(dims, Some(&flows), &cfg, &rng).unwrap();
                    count += 1;
                    if (0..dims.slices()).any(|s| m.slice_visible(s).len() != k) {
                        bad.push((ratio, t, h, w, strategy.name(), seed));
                    }
                }
            }
        }
    }
    outcome(bad.is_empty(), format!("{count} masks, wrong counts {bad:?}"))
}

fn flow_accuracy() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    for seed in 0..FLOW_SEEDS {
        let mut rng = Rng::new(1000 + seed);
        let speed = if seed % 4 == 0 { FLOW_MAX_SPEED } else { FLOW_MAX_SPEED * rng.uniform() };
        let angle = std::f64::consts::TAU * rng.uniform();
        let spec = SceneSpec {
            velocity: (speed * angle.cos(), speed * angle.sin()),
            texture_seed: seed,
            frames: 2,
            height: 128,
            width: 128,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec, &mut rng).unwrap();
        let est = estimate_flow(&scene.clip.frame(0), &scene.clip.frame(1), &FlowConfig::default()).unwrap();
        let epe = est.mean_epe(&scene.truth.flow(0, 1), FLOW_MARGIN);
        worst = worst.max(epe);
        total += epe;
    }
    outcome(
        worst < FLOW_EPE,
        format!("worst interior EPE {worst:.3} px, mean {:.3} px over {FLOW_SEEDS} seeds", total / FLOW_SEEDS as f64),
    )
}

fn random_clip(t: usize, h: usize, w: usize, rng: &mut Rng) -> VideoClip {
    VideoClip::new(Tensor::new(vec![t, 3, h, w], (0..t * 3 * h * w).map(|_| rng.uniform()).collect()).unwrap()).unwrap()
}

/// Adds noise to every parameter so no weight keeps its symmetric
/// initial value.
fn perturb(model: &mut ToyMae, scale: f64, rng: &mut Rng) {
    for p in model.params_mut() {
        for v in p.iter_mut() {
            *v += scale * rng.normal();
        }
    }
}

fn gradient_check() -> Outcome {
    let cfg = MaeConfig {
        embed_dim: 8,
        depth: 1,
        heads: 2,
        decoder_dim: 8,
        decoder_depth: 1,
        seed: 11,
        ..MaeConfig::default()
    };
    let mut rng = Rng::new(5);
    let mut model = ToyMae::new(&cfg).unwrap();
    perturb(&mut model, 0.1, &mut rng);
    let clip = random_clip(4, 32, 32, &mut rng);
    let mask = TokenMask::from_visible_indices(2, 2, 2, &[0, 3, 5]).unwrap();
    let (_, grads) = model.backward(&clip, &mask).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads.params().into_iter().map(|(n, _, v)| (n, v.to_vec())).collect();
    let mut worst = (0.0, String::new());
    let mut n = 0;
    for (k, (name, g)) in analytic.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let orig = model.params_mut()[k][i];
            let mut at = |d: f64| {
                model.params_mut()[k][i] = orig + d;
                model.loss(&clip, &mask).unwrap()
            };
            let numeric = (at(GRAD_H) - at(-GRAD_H)) / (2.0 * GRAD_H);
            model.params_mut()[k][i] = orig;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{i}]"));
            }
            n += 1;
        }
    }
    outcome(worst.0 < GRAD_TOL, format!("{n} parameters, max relative error {:.2e} at {}", worst.0, worst.1))
}

fn harder_task_spec() -> SceneSpec {
    SceneSpec {
        velocity: (16.0, 0.0),
        frames: 4,
        height: 64,
        width: 64,
        texture_scale: 48.0,
        ..SceneSpec::default()
    }
}

fn harder_task_direction() -> Outcome {
    let spec = harder_task_spec();
    let cfgs: Vec<MaskConfig> = [Strategy::MotionGuided, Strategy::Tube]
        .map(|s| MaskConfig {
            ratio: 0.25,
            ..MaskConfig::with_strategy(s)
        })
        .to_vec();
    let mae = MaeConfig {
        embed_dim: 32,
        depth: 1,
        heads: 2,
        decoder_dim: 16,
        decoder_depth: 1,
        lr: 0.2,
        steps: 500,
        batch_size: 4,
        ..MaeConfig::default()
    };
    // many distinct clips stop the model from memorising single scenes
    let opts = BenchOptions {
        train: Some(TrainOptions { mae, clips: 128 }),
        ..BenchOptions::default()
    };
    let seeds: Vec<u64> = (0..HARDER_SEEDS).collect();
    let report = compare_strategies(&spec, &cfgs, &seeds, &opts).unwrap();
    let n = seeds.len();
    let losses = |s: usize| report.runs[s * n..(s + 1) * n].iter().map(|r| r.final_loss.unwrap()).collect::<Vec<_>>();
    let (mg, tube) = (losses(0), losses(1));
    let wins = mg.iter().zip(&tube).filter(|(a, b)| a > b).count();
    let gap = mg.iter().zip(&tube).map(|(a, b)| a - b).sum::<f64>() / n as f64;
    outcome(
        wins >= HARDER_WINS,
        format!("motion_guided loss above tube in {wins}/{n} seeds (need {HARDER_WINS}), mean gap {gap:+.5}"),
    )
}

fn leakage_ordering() -> Outcome {
    let cfgs: Vec<MaskConfig> = [Strategy::MotionGuided, Strategy::Tube].map(MaskConfig::with_strategy).to_vec();
    let seeds: Vec<u64> = (0..LEAK_SEEDS).collect();
    let run = |speed: f64| {
        let spec = SceneSpec {
            velocity: (speed, 0.0),
            ..SceneSpec::default()
        };
        let r = compare_strategies(&spec, &cfgs, &seeds, &BenchOptions::default()).unwrap();
        (r.summaries[0].median_rate, r.summaries[1].median_rate)
    };
    let (mg_fast, tube_fast) = run(16.0);
    let (mg_still, tube_still) = run(0.0);
    outcome(
        mg_fast < tube_fast && mg_still == tube_still,
        format!(
            "16 px: motion_guided {mg_fast:.4} < tube {tube_fast:.4}; 0 px: motion_guided {mg_still:.4} == tube {tube_still:.4}"
        ),
    )
}

fn random_f32(rng: &mut Rng) -> f32 {
    loop {
        let v = f32::from_bits(rng.next_u64() as u32);
        if v.is_finite() {
            return v;
        }
    }
}

/// Reference VTEN encoder written from the format description.
fn vten_reference(dims: &[usize], values: &[f32]) -> Vec<u8> {
    let mut out = VTEN_MAGIC.to_vec();
    out.extend(VTEN_VERSION.to_le_bytes());
    out.extend((dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend((d as u32).to_le_bytes());
    }
    for v in values {
        out.extend(v.to_le_bytes());
    }
    out
}

fn codec_conformance() -> Outcome {
    let mut rng = Rng::new(77);
    let mut failures = Vec::new();
    for case in 0..CODEC_CASES {
        let ndim = 1 + rng.below(4);
        let dims: Vec<usize> = (0..ndim).map(|_| 1 + rng.below(6)).collect();
        let values: Vec<f32> = (0..dims.iter().product::<usize>()).map(|_| random_f32(&mut rng)).collect();
        let t = Tensor::new(dims.clone(), values.iter().map(|&v| v as f64).collect()).unwrap();
        let bytes = t.to_vten_bytes().unwrap();
        let back = Tensor::from_vten_bytes(&bytes).unwrap();
        let same = back.data().iter().zip(&values).all(|(a, b)| (*a as f32).to_bits() == b.to_bits());
        if bytes != vten_reference(&dims, &values) || back.dims() != &dims[..] || !same || back.to_vten_bytes().unwrap() != bytes {
            failures.push(format!("vten {case}"));
        }

        let (h, w) = (1 + rng.below(8), 1 + rng.below(8));
        let uv: Vec<f32> = (0..2 * h * w).map(|_| random_f32(&mut rng)).collect();
        let field = FlowField::new(Tensor::new(vec![2, h, w], uv.iter().map(|&v| v as f64).collect()).unwrap()).unwrap();
        let bytes = field.to_flo_bytes();
        let mut want = FLO_MAGIC.to_le_bytes().to_vec();
        want.extend((w as i32).to_le_bytes());
        want.extend((h as i32).to_le_bytes());
        for p in 0..h * w {
            want.extend(uv[p].to_le_bytes());
            want.extend(uv[h * w + p].to_le_bytes());
        }
        let back = FlowField::from_flo_bytes(&bytes).unwrap();
        if bytes != want || back != field || back.to_flo_bytes() != bytes {
            failures.push(format!("flo {case}"));
        }
    }
    outcome(
        failures.is_empty(),
        format!("{CODEC_CASES} tensors and {CODEC_CASES} fields, failures {failures:?}"),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = Rng::new(2024);
    for case in 0..ORACLE_CASES {
        let heads = [1, 2, 4][rng.below(3)];
        let cfg = MaeConfig {
            embed_dim: heads * 2 * (1 + rng.below(3)),
            depth: 1 + rng.below(2),
            heads,
            decoder_dim: heads * 2 * (1 + rng.below(2)),
            decoder_depth: 1 + rng.below(2),
            norm_eps: [1e-6, 1e-3][rng.below(2)],
            seed: case,
            ..MaeConfig::default()
        };
        let (h, w) = (16 * (1 + rng.below(3)), 16 * (1 + rng.below(2)));
        // at least two tokens so one can be visible and one masked
        let t = if h * w == 256 { 4 } else { 2 * (1 + rng.below(2)) };
        let clip = random_clip(t, h, w, &mut rng);
        let dims = clip.dims();
        let n = dims.num_tokens();
        let n_vis = 1 + rng.below(n - 1);
        let mut visible = vec![false; n];
        let vis = rng.uniform_indices(n, n_vis).unwrap();
        vis.iter().for_each(|&i| visible[i] = true);
        let mask = TokenMask::from_visible_indices(dims.slices(), dims.token_rows(), dims.token_cols(), &vis).unwrap();
        let mut model = ToyMae::new(&cfg).unwrap();
        perturb(&mut model, 0.05, &mut rng);
        let got = model.loss(&clip, &mask).unwrap();
        let full = model.forward(&clip, &mask).unwrap().loss;
        let want = oracle::oracle_loss(&oracle::Named::of(&model), clip.tensor(), &visible, heads, cfg.norm_eps);
        worst = worst.max((got - want).abs() / want.abs()).max((full - want).abs() / want.abs());
    }
    outcome(worst < ORACLE_TOL, format!("{ORACLE_CASES} instances, max relative difference {worst:.2e}"))
}
