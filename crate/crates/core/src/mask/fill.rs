use super::{HoleFill, MaskMap, EPS_MARKER};
use crate::rng::Rng;

pub struct FillContext<'a> {
    pub base: &'a MaskMap,
    /// Map the current step was warped from; `None` on the first step away
    /// from the base, where previous-map filling degrades to tube filling.
    pub previous: Option<&'a MaskMap>,
    pub ratio: f64,
    pub rng: &'a mut Rng,
}

pub fn fill_holes(warped: &MaskMap, holes: &[bool], strategy: HoleFill, ctx: FillContext<'_>) -> MaskMap {
    assert_eq!(holes.len(), warped.data().len());
    let mut out = warped.data().to_vec();
    let FillContext {
        base,
        previous,
        ratio,
        rng,
    } = ctx;
    for (i, _) in holes.iter().enumerate().filter(|(_, &h)| h) {
        out[i] = match strategy {
            HoleFill::Tube => base.data()[i],
            HoleFill::PreviousMap => previous.unwrap_or(base).data()[i],
            HoleFill::Visible => 1.0,
            HoleFill::Invisible => EPS_MARKER,
            HoleFill::Random => {
                if rng.uniform() < 1.0 - ratio {
                    1.0
                } else {
                    EPS_MARKER
                }
            }
        };
    }
    MaskMap::from_vec(warped.height(), warped.width(), out)
}
