use super::config::visible_count;
use super::{MaskError, MaskMap, EPS_MARKER};
use crate::rng::Rng;
use crate::tensor::TOKEN_SIZE;

/// Unnormalised mixture of axis-aligned Gaussians, one per picked token.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture {
    /// `(x, y)` centres in pixel coordinates.
    pub centers: Vec<(f64, f64)>,
    pub sigma: (f64, f64),
}

impl GaussianMixture {
    /// Centres at the midpoints `(16c + 7.5, 16r + 7.5)` of the given
    /// row-major token indices on a grid `cols` tokens wide.
    pub fn on_tokens(tokens: &[usize], cols: usize, sigma: (f64, f64)) -> Self {
        let half = (TOKEN_SIZE as f64 - 1.0) / 2.0;
        let centers = tokens
            .iter()
            .map(|&t| {
                let (r, c) = (t / cols, t % cols);
                (
                    (TOKEN_SIZE * c) as f64 + half,
                    (TOKEN_SIZE * r) as f64 + half,
                )
            })
            .collect();
        Self { centers, sigma }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (sx, sy) = self.sigma;
        self.centers
            .iter()
            .map(|&(cx, cy)| {
                (-((x - cx).powi(2) / (2.0 * sx * sx) + (y - cy).powi(2) / (2.0 * sy * sy))).exp()
            })
            .sum()
    }

    /// Evaluates on every pixel and floors at [`EPS_MARKER`].
    pub fn render(&self, h: usize, w: usize) -> MaskMap {
        let mut data = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                data[y * w + x] = self.eval(x as f64, y as f64).max(EPS_MARKER);
            }
        }
        MaskMap::from_vec(h, w, data)
    }
}

fn check_grid(h: usize, w: usize) -> Result<(), MaskError> {
    if h == 0 || w == 0 || !h.is_multiple_of(TOKEN_SIZE) || !w.is_multiple_of(TOKEN_SIZE) {
        return Err(MaskError::DimMismatch {
            expected: vec![TOKEN_SIZE, TOKEN_SIZE],
            actual: vec![h, w],
        });
    }
    Ok(())
}

/// Picks `floor((1 - ratio) * tokens)` distinct tokens and renders the
/// Gaussian mixture centred on them. Returns the map and the picked token
/// indices in draw order.
pub fn init_mask_gmm(
    h: usize,
    w: usize,
    ratio: f64,
    sigma: (f64, f64),
    rng: &mut Rng,
) -> Result<(MaskMap, Vec<usize>), MaskError> {
    check_grid(h, w)?;
    let cols = w / TOKEN_SIZE;
    let tokens = (h / TOKEN_SIZE) * cols;
    let k = visible_count(ratio, tokens);
    if k == 0 {
        return Err(MaskError::NoVisibleTokens { ratio, tokens });
    }
    let picks = rng.uniform_indices(tokens, k).expect("k <= tokens");
    let map = GaussianMixture::on_tokens(&picks, cols, sigma).render(h, w);
    Ok((map, picks))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryLevel {
    Token,
    Pixel,
}

/// Binary initial map: visible cells are 1, the rest [`EPS_MARKER`].
pub fn init_mask_binary(
    h: usize,
    w: usize,
    ratio: f64,
    level: BinaryLevel,
    rng: &mut Rng,
) -> Result<MaskMap, MaskError> {
    check_grid(h, w)?;
    let mut data = vec![EPS_MARKER; h * w];
    match level {
        BinaryLevel::Token => {
            let cols = w / TOKEN_SIZE;
            let tokens = (h / TOKEN_SIZE) * cols;
            let k = visible_count(ratio, tokens);
            for t in rng.uniform_indices(tokens, k).expect("k <= tokens") {
                let (r, c) = (t / cols, t % cols);
                for y in r * TOKEN_SIZE..(r + 1) * TOKEN_SIZE {
                    data[y * w + c * TOKEN_SIZE..y * w + (c + 1) * TOKEN_SIZE].fill(1.0);
                }
            }
        }
        BinaryLevel::Pixel => {
            let k = visible_count(ratio, h * w);
            for p in rng.uniform_indices(h * w, k).expect("k <= pixels") {
                data[p] = 1.0;
            }
        }
    }
    Ok(MaskMap::from_vec(h, w, data))
}
