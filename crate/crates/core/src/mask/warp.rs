use super::MaskMap;
use crate::flow::FlowField;
use crate::sample::bilinear_zero;

fn check(m: &MaskMap, flow: &FlowField) {
    assert_eq!(
        (m.height(), m.width()),
        (flow.height(), flow.width()),
        "mask and flow extents differ"
    );
}

/// `out(p) = M(p + flow(p))`, bilinear, zero outside the map. A pixel is a
/// hole exactly when its output is `0.0`.
pub fn backward_warp(m: &MaskMap, flow: &FlowField) -> (MaskMap, Vec<bool>) {
    check(m, flow);
    let (h, w) = (m.height(), m.width());
    let (u, v) = (flow.u(), flow.v());
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            out[i] = bilinear_zero(m.data(), h, w, x as f64 + u[i], y as f64 + v[i]);
        }
    }
    let holes = out.iter().map(|&o| o == 0.0).collect();
    (MaskMap::from_vec(h, w, out), holes)
}

/// Splats every source pixel onto the bilinear neighbourhood of
/// `p + flow(p)`. Targets hit by several sources take the weighted average;
/// targets with no accumulated weight are holes (value `0.0`).
pub fn forward_warp(m: &MaskMap, flow: &FlowField) -> (MaskMap, Vec<bool>) {
    check(m, flow);
    let (h, w) = (m.height(), m.width());
    let (u, v) = (flow.u(), flow.v());
    let mut acc = vec![0.0; h * w];
    let mut weight = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let tx = x as f64 + u[i];
            let ty = y as f64 + v[i];
            let (x0, y0) = (tx.floor(), ty.floor());
            let (fx, fy) = (tx - x0, ty - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            for (wt, xi, yi) in [
                ((1.0 - fx) * (1.0 - fy), x0, y0),
                (fx * (1.0 - fy), x0 + 1, y0),
                ((1.0 - fx) * fy, x0, y0 + 1),
                (fx * fy, x0 + 1, y0 + 1),
            ] {
                if wt > 0.0 && xi >= 0 && yi >= 0 && xi < w as i64 && yi < h as i64 {
                    let j = yi as usize * w + xi as usize;
                    acc[j] += wt * m.data()[i];
                    weight[j] += wt;
                }
            }
        }
    }
    let holes: Vec<bool> = weight.iter().map(|&wt| wt == 0.0).collect();
    let out = acc
        .iter()
        .zip(&weight)
        .map(|(&a, &wt)| if wt > 0.0 { a / wt } else { 0.0 })
        .collect();
    (MaskMap::from_vec(h, w, out), holes)
}
