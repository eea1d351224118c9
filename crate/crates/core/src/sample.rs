//! Sampling helpers on row-major `h x w` planes.
//!
//! Pixel centres sit at integer coordinates; `x` is the column, `y` the row.

/// Bilinear sample where out-of-bounds neighbours contribute exactly zero.
///
/// For integer `(x, y)` inside the plane the result is bit-identical to the
/// stored value.
#[inline]
pub fn bilinear_zero(data: &[f64], h: usize, w: usize, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let at = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
            0.0
        } else {
            data[yi as usize * w + xi as usize]
        }
    };
    let mut acc = 0.0;
    let wts = [
        ((1.0 - fx) * (1.0 - fy), x0, y0),
        (fx * (1.0 - fy), x0 + 1, y0),
        ((1.0 - fx) * fy, x0, y0 + 1),
        (fx * fy, x0 + 1, y0 + 1),
    ];
    for (wt, xi, yi) in wts {
        if wt != 0.0 {
            acc += wt * at(xi, yi);
        }
    }
    acc
}

/// Bilinear sample with coordinates clamped to the plane (replicate edge).
#[inline]
pub fn bilinear_clamp(data: &[f64], h: usize, w: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = (x.floor() as usize).min(w - 1);
    let y0 = (y.floor() as usize).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = data[y0 * w + x0] * (1.0 - fx) + data[y0 * w + x1] * fx;
    let bot = data[y1 * w + x0] * (1.0 - fx) + data[y1 * w + x1] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Separable 5-tap binomial blur with replicated borders.
pub fn blur5(data: &[f64], h: usize, w: usize) -> Vec<f64> {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let clampi = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = K
                .iter()
                .enumerate()
                .map(|(k, c)| c * data[y * w + clampi(x as isize + k as isize - 2, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = K
                .iter()
                .enumerate()
                .map(|(k, c)| c * tmp[clampi(y as isize + k as isize - 2, h) * w + x])
                .sum();
        }
    }
    out
}

/// Blur then keep every second sample. Output extents round up.
pub fn downsample2(data: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let blurred = blur5(data, h, w);
    let (nh, nw) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = vec![0.0; nh * nw];
    for y in 0..nh {
        for x in 0..nw {
            out[y * nw + x] = blurred[(2 * y).min(h - 1) * w + (2 * x).min(w - 1)];
        }
    }
    (out, nh, nw)
}

/// Bilinear resize between grids that share the same physical extent.
pub fn resize(data: &[f64], h: usize, w: usize, nh: usize, nw: usize) -> Vec<f64> {
    let sy = h as f64 / nh as f64;
    let sx = w as f64 / nw as f64;
    let mut out = vec![0.0; nh * nw];
    for y in 0..nh {
        for x in 0..nw {
            let fy = (y as f64 + 0.5) * sy - 0.5;
            let fx = (x as f64 + 0.5) * sx - 0.5;
            out[y * nw + x] = bilinear_clamp(data, h, w, fx, fy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_samples_are_exact() {
        let data: Vec<f64> = (0..12).map(|i| (i as f64).sqrt() + 0.1).collect();
        for y in 0..3 {
            for x in 0..4 {
                let v = bilinear_zero(&data, 3, 4, x as f64, y as f64);
                assert_eq!(v.to_bits(), data[y * 4 + x].to_bits());
            }
        }
    }

    #[test]
    fn outside_is_zero_and_clamp_replicates() {
        let data = vec![1.0; 4];
        assert_eq!(bilinear_zero(&data, 2, 2, -1.0, 0.0), 0.0);
        assert_eq!(bilinear_zero(&data, 2, 2, 5.0, 5.0), 0.0);
        assert_eq!(bilinear_zero(&data, 2, 2, -0.5, 0.0), 0.5);
        assert_eq!(bilinear_clamp(&data, 2, 2, -3.0, 9.0), 1.0);
    }

    #[test]
    fn blur_preserves_constants() {
        let data = vec![3.0; 35];
        assert!(blur5(&data, 5, 7).iter().all(|&v| (v - 3.0).abs() < 1e-12));
        let (d, h, w) = downsample2(&data, 5, 7);
        assert_eq!((h, w), (3, 4));
        assert!(d.iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }
}
