use super::init::{init_mask_binary, init_mask_gmm, BinaryLevel};
use super::tokens::{sample_tokens, TokenMask};
use super::volume::{add_exposure_noise, build_mask_volume_from};
use super::{visible_per_slice, BaseFrame, MaskConfig, MaskError, MaskInit, MaskMap, MaskVolume, SampleLevel, Strategy};
use crate::flow::FlowSet;
use crate::rng::Rng;
use crate::tensor::ClipDims;

// Child streams of the per-mask generator. Tube masking and GMM
// initialisation share STREAM_PICK so both see the same token pick.
pub(crate) const STREAM_BASE: u64 = 0;
pub(crate) const STREAM_PICK: u64 = 1;
pub(crate) const STREAM_FILL: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_RANDOM: u64 = 4;

/// Base frame (1-based): first -> 1, middle -> `floor(T/2)`, random ->
/// uniform in `[1, T]`.
pub fn choose_base_frame(t: usize, mode: BaseFrame, rng: &mut Rng) -> usize {
    assert!(t >= 2, "need at least two frames");
    match mode {
        BaseFrame::First => 1,
        BaseFrame::Middle => t / 2,
        BaseFrame::Random => 1 + rng.below(t),
    }
}

/// The base frame [`generate`] expects for this config and generator. Flow
/// sets for motion-guided masking must be built around this frame.
pub fn resolve_base_frame(t: usize, cfg: &MaskConfig, rng: &Rng) -> usize {
    choose_base_frame(t, cfg.base_frame, &mut rng.fork(STREAM_BASE))
}

pub(crate) fn initial_map(dims: ClipDims, cfg: &MaskConfig, rng: &Rng) -> Result<(MaskMap, Option<Vec<usize>>), MaskError> {
    let mut pick = rng.fork(STREAM_PICK);
    match cfg.init {
        MaskInit::Gmm => {
            let (m, picks) = init_mask_gmm(dims.h, dims.w, cfg.ratio, cfg.sigma, &mut pick)?;
            Ok((m, Some(picks)))
        }
        MaskInit::TokenRandom => Ok((init_mask_binary(dims.h, dims.w, cfg.ratio, BinaryLevel::Token, &mut pick)?, None)),
        MaskInit::PixelRandom => Ok((init_mask_binary(dims.h, dims.w, cfg.ratio, BinaryLevel::Pixel, &mut pick)?, None)),
    }
}

/// Produces the token mask for a clip of extent `dims`.
///
/// `flows` is required for [`Strategy::MotionGuided`] and must be based on
/// [`resolve_base_frame`]; the baselines ignore it. Output depends only on
/// `(dims, flows, cfg, rng seed)`.
pub fn generate(dims: ClipDims, flows: Option<&FlowSet>, cfg: &MaskConfig, rng: &Rng) -> Result<TokenMask, MaskError> {
    generate_with_volume(dims, flows, cfg, rng).map(|(m, _)| m)
}

/// [`generate`] that also returns the masking volume for motion-guided
/// masking (after the exposure-noise hook, before pooling).
pub fn generate_with_volume(
    dims: ClipDims,
    flows: Option<&FlowSet>,
    cfg: &MaskConfig,
    rng: &Rng,
) -> Result<(TokenMask, Option<MaskVolume>), MaskError> {
    cfg.validate()?;
    let (slices, rows, cols) = (dims.slices(), dims.token_rows(), dims.token_cols());
    let per = rows * cols;
    let k = visible_per_slice(cfg.ratio, dims);
    if k == 0 {
        return Err(MaskError::NoVisibleTokens {
            ratio: cfg.ratio,
            tokens: per,
        });
    }
    match cfg.strategy {
        Strategy::Tube => {
            let picks = rng.fork(STREAM_PICK).uniform_indices(per, k).expect("k <= per");
            Ok((TokenMask::replicated(slices, rows, cols, &picks)?, None))
        }
        Strategy::Random => {
            let mut r = rng.fork(STREAM_RANDOM);
            let indices: Vec<usize> = match cfg.sample {
                SampleLevel::FrameLevel => (0..slices)
                    .flat_map(|s| {
                        r.uniform_indices(per, k)
                            .expect("k <= per")
                            .into_iter()
                            .map(move |i| s * per + i)
                    })
                    .collect(),
                SampleLevel::ClipLevel => r.uniform_indices(slices * per, slices * k).expect("fits"),
            };
            Ok((TokenMask::from_visible_indices(slices, rows, cols, &indices)?, None))
        }
        Strategy::MotionGuided => {
            let flows = flows.ok_or(MaskError::MissingFlows)?;
            let expected = resolve_base_frame(dims.t, cfg, rng);
            if flows.base_index() != expected {
                return Err(MaskError::BaseMismatch {
                    flows: flows.base_index(),
                    expected,
                });
            }
            if flows.frames() != dims.t || (flows.height(), flows.width()) != (dims.h, dims.w) {
                return Err(MaskError::DimMismatch {
                    expected: vec![dims.t, dims.h, dims.w],
                    actual: vec![flows.frames(), flows.height(), flows.width()],
                });
            }
            let (initial, _) = initial_map(dims, cfg, rng)?;
            let mut vol = build_mask_volume_from(initial, flows, cfg, rng)?;
            if let Some(std) = cfg.exposure_noise {
                add_exposure_noise(&mut vol, std, &mut rng.fork(STREAM_NOISE));
            }
            Ok((sample_tokens(&vol, cfg.ratio, cfg.sample)?, Some(vol)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowField;

    fn dims() -> ClipDims {
        ClipDims::new(8, 64, 64).unwrap()
    }

    #[test]
    fn base_frame_modes() {
        let mut rng = Rng::new(0);
        assert_eq!(choose_base_frame(16, BaseFrame::Middle, &mut rng), 8);
        assert_eq!(choose_base_frame(16, BaseFrame::First, &mut rng), 1);
        assert_eq!(choose_base_frame(2, BaseFrame::Middle, &mut rng), 1);
        for _ in 0..100 {
            let b = choose_base_frame(5 * 2, BaseFrame::Random, &mut rng);
            assert!((1..=10).contains(&b));
        }
    }

    #[test]
    fn tube_replicates() {
        let m = generate(dims(), None, &MaskConfig::with_strategy(Strategy::Tube), &Rng::new(3)).unwrap();
        let first = m.slice_visible(0);
        assert_eq!(first.len(), 1);
        assert!((1..m.slices()).all(|s| m.slice_visible(s) == first));
    }

    #[test]
    fn random_frame_and_clip_level_counts() {
        let d = ClipDims::new(8, 64, 64).unwrap();
        let cfg = MaskConfig {
            ratio: 0.75,
            ..MaskConfig::with_strategy(Strategy::Random)
        };
        let m = generate(d, None, &cfg, &Rng::new(1)).unwrap();
        assert!((0..4).all(|s| m.slice_visible(s).len() == 4));
        let cfg = MaskConfig {
            sample: SampleLevel::ClipLevel,
            ..cfg
        };
        let m = generate(d, None, &cfg, &Rng::new(1)).unwrap();
        assert_eq!(m.visible_count(), 16);
    }

    #[test]
    fn motion_guided_needs_flows_with_matching_base() {
        let cfg = MaskConfig::default();
        assert!(matches!(generate(dims(), None, &cfg, &Rng::new(0)), Err(MaskError::MissingFlows)));
        let wrong = FlowSet::zeros(8, 1, 64, 64).unwrap();
        assert!(matches!(
            generate(dims(), Some(&wrong), &cfg, &Rng::new(0)),
            Err(MaskError::BaseMismatch { flows: 1, expected: 4 })
        ));
    }

    #[test]
    fn zero_flow_motion_guided_matches_tube_for_separated_picks() {
        // 224x224 grid, ratio 0.98 -> 3 centres; keep seeds whose centres are
        // at least 3 sigma apart and compare against tube masking.
        let d = ClipDims::new(4, 224, 224).unwrap();
        let flows = FlowSet::zeros(4, 2, 224, 224).unwrap();
        let mut checked = 0;
        for seed in 0..40 {
            let rng = Rng::new(seed);
            let picks = rng.fork(STREAM_PICK).uniform_indices(196, 3).unwrap();
            let sep = picks.iter().enumerate().all(|(i, &a)| {
                picks[i + 1..].iter().all(|&b| {
                    let (ra, ca, rb, cb) = (a / 14, a % 14, b / 14, b % 14);
                    ra.abs_diff(rb).max(ca.abs_diff(cb)) >= 3
                })
            });
            if !sep {
                continue;
            }
            checked += 1;
            let mg = generate(d, Some(&flows), &MaskConfig { ratio: 0.98, ..MaskConfig::default() }, &rng).unwrap();
            let tube = generate(d, None, &MaskConfig { ratio: 0.98, ..MaskConfig::with_strategy(Strategy::Tube) }, &rng).unwrap();
            assert_eq!(mg, tube, "seed {seed}");
        }
        assert!(checked > 10);
    }

    #[test]
    fn deterministic_and_noise_hook() {
        let d = dims();
        let flows = FlowSet::uniform(8, 4, FlowField::constant(64, 64, 3.0, 0.0), FlowField::constant(64, 64, -3.0, 0.0)).unwrap();
        let cfg = MaskConfig {
            ratio: 0.75,
            exposure_noise: Some(0.3),
            ..MaskConfig::default()
        };
        let a = generate(d, Some(&flows), &cfg, &Rng::new(11)).unwrap();
        let b = generate(d, Some(&flows), &cfg, &Rng::new(11)).unwrap();
        assert_eq!(a, b);
        assert!((0..4).all(|s| a.slice_visible(s).len() == 4));
    }
}
