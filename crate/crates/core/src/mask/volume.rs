use super::fill::{fill_holes, FillContext};
use super::generate::{initial_map, STREAM_FILL};
use super::{backward_warp, forward_warp, MaskConfig, MaskError, MaskMap, MaskVolume, WarpMode, EPS_MARKER};
use crate::flow::{FlowField, FlowSet};
use crate::rng::Rng;
use crate::tensor::ClipDims;

/// Draws the base-frame map per `cfg.init` and grows the volume from it.
pub fn build_mask_volume(
    dims: ClipDims,
    flows: &FlowSet,
    cfg: &MaskConfig,
    rng: &Rng,
) -> Result<MaskVolume, MaskError> {
    cfg.validate()?;
    let (initial, _) = initial_map(dims, cfg, rng)?;
    if flows.frames() != dims.t {
        return Err(MaskError::DimMismatch {
            expected: vec![dims.t],
            actual: vec![flows.frames()],
        });
    }
    build_mask_volume_from(initial, flows, cfg, rng)
}

/// Grows a `[T, H, W]` volume outward from `initial`, which becomes the map
/// of the flow set's base frame. Frames before the base are warped from
/// their successor, frames after it from their predecessor; every step is
/// warp then hole fill.
pub fn build_mask_volume_from(
    initial: MaskMap,
    flows: &FlowSet,
    cfg: &MaskConfig,
    rng: &Rng,
) -> Result<MaskVolume, MaskError> {
    cfg.validate()?;
    let (h, w) = (initial.height(), initial.width());
    if (flows.height(), flows.width()) != (h, w) {
        return Err(MaskError::DimMismatch {
            expected: vec![h, w],
            actual: vec![flows.height(), flows.width()],
        });
    }
    let frames = flows.frames();
    let base = flows.base_index();
    let mut maps: Vec<Option<MaskMap>> = vec![None; frames];

    let step = |i: usize, source: &MaskMap, first: bool| -> MaskMap {
        let field = flows.field(i).expect("non-base frame has a field");
        let (warped, holes) = match cfg.warp {
            WarpMode::Backward => backward_warp(source, field),
            // forward splatting needs source -> target displacements; the
            // stored field points target -> source, so negate it
            WarpMode::Forward => forward_warp(source, &negated(field)),
        };
        let mut fill_rng = rng.fork(STREAM_FILL).fork(i as u64);
        fill_holes(
            &warped,
            &holes,
            cfg.fill,
            FillContext {
                base: &initial,
                previous: (!first).then_some(source),
                ratio: cfg.ratio,
                rng: &mut fill_rng,
            },
        )
    };

    let mut prev = initial.clone();
    for i in (1..base).rev() {
        let next = step(i, &prev, i + 1 == base);
        maps[i - 1] = Some(next.clone());
        prev = next;
    }
    let mut prev = initial.clone();
    for i in base + 1..=frames {
        let next = step(i, &prev, i - 1 == base);
        maps[i - 1] = Some(next.clone());
        prev = next;
    }
    maps[base - 1] = Some(initial);
    MaskVolume::from_maps(maps.into_iter().map(|m| m.unwrap()).collect())
}

fn negated(f: &FlowField) -> FlowField {
    FlowField::from_uv(
        f.height(),
        f.width(),
        f.u().iter().map(|x| -x).collect(),
        f.v().iter().map(|x| -x).collect(),
    )
}

/// Adds zero-mean Gaussian noise of the given std to the map of one
/// uniformly chosen frame, flooring the result at [`EPS_MARKER`]. Returns the
/// chosen frame (0-based).
pub fn add_exposure_noise(vol: &mut MaskVolume, std: f64, rng: &mut Rng) -> usize {
    let t = rng.below(vol.frames());
    for v in vol.frame_data_mut(t) {
        *v = (*v + std * rng.normal()).max(EPS_MARKER);
    }
    t
}
