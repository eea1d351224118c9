use super::cubes::{cubify, Cubes, CUBE_LEN};
use super::{MaeConfig, MaeError};
use crate::mask::TokenMask;
use crate::rng::Rng;
use crate::tensor::VideoClip;

const LN_EPS: f64 = 1e-5;
const MLP_RATIO: usize = 4;

/// `[n, d]` fixed sinusoidal table over flattened token index.
pub fn sinusoid_table(n: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * d];
    for pos in 0..n {
        for j in 0..d {
            let angle = pos as f64 / 10000f64.powf((2 * (j / 2)) as f64 / d as f64);
            out[pos * d + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
struct Linear {
    inp: usize,
    out: usize,
    /// `[out, inp]`
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Linear {
    fn new(inp: usize, out: usize, rng: &mut Rng) -> Self {
        let a = (6.0 / (inp + out) as f64).sqrt();
        Self {
            inp,
            out,
            w: (0..inp * out).map(|_| a * (2.0 * rng.uniform() - 1.0)).collect(),
            b: vec![0.0; out],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            inp: self.inp,
            out: self.out,
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n * self.out];
        for i in 0..n {
            let xi = &x[i * self.inp..(i + 1) * self.inp];
            for o in 0..self.out {
                let wo = &self.w[o * self.inp..(o + 1) * self.inp];
                y[i * self.out + o] = self.b[o] + dot(wo, xi);
            }
        }
        y
    }

    /// Accumulates parameter gradients into `g`; returns `dx` if asked.
    fn backward(&self, x: &[f64], dy: &[f64], n: usize, g: &mut Linear, want_dx: bool) -> Vec<f64> {
        let mut dx = if want_dx { vec![0.0; n * self.inp] } else { Vec::new() };
        for i in 0..n {
            let xi = &x[i * self.inp..(i + 1) * self.inp];
            for o in 0..self.out {
                let d = dy[i * self.out + o];
                if d == 0.0 {
                    continue;
                }
                g.b[o] += d;
                let wo = &self.w[o * self.inp..(o + 1) * self.inp];
                axpy(d, xi, &mut g.w[o * self.inp..(o + 1) * self.inp]);
                if want_dx {
                    axpy(d, wo, &mut dx[i * self.inp..(i + 1) * self.inp]);
                }
            }
        }
        dx
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayerNorm {
    g: Vec<f64>,
    b: Vec<f64>,
}

struct NormCache {
    xhat: Vec<f64>,
    inv: Vec<f64>,
}

impl LayerNorm {
    fn new(d: usize) -> Self {
        Self {
            g: vec![1.0; d],
            b: vec![0.0; d],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            g: vec![0.0; self.g.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    fn forward(&self, x: &[f64], n: usize) -> (Vec<f64>, NormCache) {
        let d = self.g.len();
        let mut y = vec![0.0; n * d];
        let mut xhat = vec![0.0; n * d];
        let mut inv = vec![0.0; n];
        for i in 0..n {
            let xi = &x[i * d..(i + 1) * d];
            let mean = xi.iter().sum::<f64>() / d as f64;
            let var = xi.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            inv[i] = 1.0 / (var + LN_EPS).sqrt();
            for j in 0..d {
                let h = (xi[j] - mean) * inv[i];
                xhat[i * d + j] = h;
                y[i * d + j] = self.g[j] * h + self.b[j];
            }
        }
        (y, NormCache { xhat, inv })
    }

    fn backward(&self, c: &NormCache, dy: &[f64], n: usize, g: &mut LayerNorm) -> Vec<f64> {
        let d = self.g.len();
        let mut dx = vec![0.0; n * d];
        let mut dh = vec![0.0; d];
        for i in 0..n {
            let (mut m1, mut m2) = (0.0, 0.0);
            for j in 0..d {
                let k = i * d + j;
                g.g[j] += dy[k] * c.xhat[k];
                g.b[j] += dy[k];
                dh[j] = dy[k] * self.g[j];
                m1 += dh[j];
                m2 += dh[j] * c.xhat[k];
            }
            m1 /= d as f64;
            m2 /= d as f64;
            for j in 0..d {
                let k = i * d + j;
                dx[k] = c.inv[i] * (dh[j] - m1 - c.xhat[k] * m2);
            }
        }
        dx
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Block {
    norm1: LayerNorm,
    qkv: Linear,
    proj: Linear,
    norm2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
}

struct BlockCache {
    n1: NormCache,
    h1: Vec<f64>,
    qkv: Vec<f64>,
    /// `[heads, n, n]` softmax weights.
    attn: Vec<f64>,
    ctx: Vec<f64>,
    n2: NormCache,
    h2: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

impl Block {
    fn new(d: usize, rng: &mut Rng) -> Self {
        Self {
            norm1: LayerNorm::new(d),
            qkv: Linear::new(d, 3 * d, rng),
            proj: Linear::new(d, d, rng),
            norm2: LayerNorm::new(d),
            fc1: Linear::new(d, MLP_RATIO * d, rng),
            fc2: Linear::new(MLP_RATIO * d, d, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            norm1: self.norm1.zeros_like(),
            qkv: self.qkv.zeros_like(),
            proj: self.proj.zeros_like(),
            norm2: self.norm2.zeros_like(),
            fc1: self.fc1.zeros_like(),
            fc2: self.fc2.zeros_like(),
        }
    }

    fn forward(&self, x: &[f64], n: usize, heads: usize) -> (Vec<f64>, BlockCache) {
        let d = self.norm1.g.len();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (h1, n1) = self.norm1.forward(x, n);
        let qkv = self.qkv.forward(&h1, n);
        let mut attn = vec![0.0; heads * n * n];
        let mut ctx = vec![0.0; n * d];
        for hd in 0..heads {
            let off = hd * dh;
            for i in 0..n {
                let q = &qkv[i * 3 * d + off..i * 3 * d + off + dh];
                let row = &mut attn[(hd * n + i) * n..(hd * n + i + 1) * n];
                let mut max = f64::NEG_INFINITY;
                for j in 0..n {
                    let k = &qkv[j * 3 * d + d + off..j * 3 * d + d + off + dh];
                    row[j] = scale * dot(q, k);
                    max = max.max(row[j]);
                }
                let mut sum = 0.0;
                for a in row.iter_mut() {
                    *a = (*a - max).exp();
                    sum += *a;
                }
                for a in row.iter_mut() {
                    *a /= sum;
                }
                let out = &mut ctx[i * d + off..i * d + off + dh];
                for j in 0..n {
                    let v = &qkv[j * 3 * d + 2 * d + off..j * 3 * d + 2 * d + off + dh];
                    axpy(row[j], v, out);
                }
            }
        }
        let att_out = self.proj.forward(&ctx, n);
        let mid: Vec<f64> = x.iter().zip(&att_out).map(|(a, b)| a + b).collect();
        let (h2, n2) = self.norm2.forward(&mid, n);
        let pre = self.fc1.forward(&h2, n);
        let act: Vec<f64> = pre.iter().map(|&v| gelu(v)).collect();
        let mlp = self.fc2.forward(&act, n);
        let y = mid.iter().zip(&mlp).map(|(a, b)| a + b).collect();
        (
            y,
            BlockCache {
                n1,
                h1,
                qkv,
                attn,
                ctx,
                n2,
                h2,
                pre,
                act,
            },
        )
    }

    fn backward(&self, c: &BlockCache, dy: &[f64], n: usize, heads: usize, g: &mut Block) -> Vec<f64> {
        let d = self.norm1.g.len();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        // MLP branch
        let dact = self.fc2.backward(&c.act, dy, n, &mut g.fc2, true);
        let dpre: Vec<f64> = dact.iter().zip(&c.pre).map(|(a, &p)| a * gelu_grad(p)).collect();
        let dh2 = self.fc1.backward(&c.h2, &dpre, n, &mut g.fc1, true);
        let dmid_norm = self.norm2.backward(&c.n2, &dh2, n, &mut g.norm2);
        let dmid: Vec<f64> = dy.iter().zip(&dmid_norm).map(|(a, b)| a + b).collect();
        // attention branch
        let dctx = self.proj.backward(&c.ctx, &dmid, n, &mut g.proj, true);
        let mut dqkv = vec![0.0; n * 3 * d];
        let mut da = vec![0.0; n];
        for hd in 0..heads {
            let off = hd * dh;
            for i in 0..n {
                let a = &c.attn[(hd * n + i) * n..(hd * n + i + 1) * n];
                let dout = &dctx[i * d + off..i * d + off + dh];
                let mut dot_sum = 0.0;
                for j in 0..n {
                    let v = &c.qkv[j * 3 * d + 2 * d + off..j * 3 * d + 2 * d + off + dh];
                    da[j] = dot(dout, v);
                    dot_sum += da[j] * a[j];
                    axpy(a[j], dout, &mut dqkv[j * 3 * d + 2 * d + off..j * 3 * d + 2 * d + off + dh]);
                }
                for j in 0..n {
                    let ds = a[j] * (da[j] - dot_sum) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let (qs, ks) = (i * 3 * d + off, j * 3 * d + d + off);
                    for e in 0..dh {
                        dqkv[qs + e] += ds * c.qkv[ks + e];
                        dqkv[ks + e] += ds * c.qkv[qs + e];
                    }
                }
            }
        }
        let dh1 = self.qkv.backward(&c.h1, &dqkv, n, &mut g.qkv, true);
        let dx_norm = self.norm1.backward(&c.n1, &dh1, n, &mut g.norm1);
        dmid.iter().zip(&dx_norm).map(|(a, b)| a + b).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Model parameters. The same type holds gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyMae {
    heads: usize,
    norm_eps: f64,
    embed: Linear,
    encoder: Vec<Block>,
    encoder_norm: LayerNorm,
    bridge: Linear,
    mask_token: Vec<f64>,
    decoder: Vec<Block>,
    decoder_norm: LayerNorm,
    head: Linear,
}

/// Result of a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub loss: f64,
    /// Predictions for every token, in the normalized target space.
    pub reconstruction: Cubes,
}

/// Mean squared error over masked rows only, divided by
/// `masked count * 1536`.
pub fn masked_loss(reconstruction: &Cubes, targets: &Cubes, masked: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &i in masked {
        acc += reconstruction
            .row(i)
            .iter()
            .zip(targets.row(i))
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
    }
    acc / (masked.len() * CUBE_LEN) as f64
}

struct Pass {
    loss: f64,
    pred: Vec<f64>,
    grads: Option<ToyMae>,
}

impl ToyMae {
    pub fn new(cfg: &MaeConfig) -> Result<Self, MaeError> {
        cfg.validate()?;
        let mut rng = Rng::new(cfg.seed).fork(0x6d_61_65);
        let (d, dd) = (cfg.embed_dim, cfg.decoder_dim);
        Ok(Self {
            heads: cfg.heads,
            norm_eps: cfg.norm_eps,
            embed: Linear::new(CUBE_LEN, d, &mut rng),
            encoder: (0..cfg.depth).map(|_| Block::new(d, &mut rng)).collect(),
            encoder_norm: LayerNorm::new(d),
            bridge: Linear::new(d, dd, &mut rng),
            mask_token: (0..dd).map(|_| 0.02 * rng.normal()).collect(),
            decoder: (0..cfg.decoder_depth).map(|_| Block::new(dd, &mut rng)).collect(),
            decoder_norm: LayerNorm::new(dd),
            head: Linear::new(dd, CUBE_LEN, &mut rng),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            heads: self.heads,
            norm_eps: self.norm_eps,
            embed: self.embed.zeros_like(),
            encoder: self.encoder.iter().map(Block::zeros_like).collect(),
            encoder_norm: self.encoder_norm.zeros_like(),
            bridge: self.bridge.zeros_like(),
            mask_token: vec![0.0; self.mask_token.len()],
            decoder: self.decoder.iter().map(Block::zeros_like).collect(),
            decoder_norm: self.decoder_norm.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.embed.out
    }

    pub fn decoder_dim(&self) -> usize {
        self.bridge.out
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn norm_eps(&self) -> f64 {
        self.norm_eps
    }

    /// Every parameter as `(name, dims, values)` in a fixed order.
    pub fn params(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        fn push_lin<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f64])>, name: &str, l: &'a Linear) {
            out.push((format!("{name}.weight"), vec![l.out, l.inp], &l.w));
            out.push((format!("{name}.bias"), vec![l.out], &l.b));
        }
        fn push_norm<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f64])>, name: &str, n: &'a LayerNorm) {
            out.push((format!("{name}.weight"), vec![n.g.len()], &n.g));
            out.push((format!("{name}.bias"), vec![n.b.len()], &n.b));
        }
        fn push_block<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f64])>, name: &str, b: &'a Block) {
            push_norm(out, &format!("{name}.norm1"), &b.norm1);
            push_lin(out, &format!("{name}.attn.qkv"), &b.qkv);
            push_lin(out, &format!("{name}.attn.proj"), &b.proj);
            push_norm(out, &format!("{name}.norm2"), &b.norm2);
            push_lin(out, &format!("{name}.mlp.fc1"), &b.fc1);
            push_lin(out, &format!("{name}.mlp.fc2"), &b.fc2);
        }
        push_lin(&mut out, "embed", &self.embed);
        for (i, b) in self.encoder.iter().enumerate() {
            push_block(&mut out, &format!("encoder.{i}"), b);
        }
        push_norm(&mut out, "encoder_norm", &self.encoder_norm);
        push_lin(&mut out, "bridge", &self.bridge);
        out.push(("mask_token".into(), vec![self.mask_token.len()], &self.mask_token));
        for (i, b) in self.decoder.iter().enumerate() {
            push_block(&mut out, &format!("decoder.{i}"), b);
        }
        push_norm(&mut out, "decoder_norm", &self.decoder_norm);
        push_lin(&mut out, "head", &self.head);
        out
    }

    /// Mutable view of every parameter, same order as [`ToyMae::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        fn block<'a>(out: &mut Vec<&'a mut Vec<f64>>, b: &'a mut Block) {
            let Block {
                norm1,
                qkv,
                proj,
                norm2,
                fc1,
                fc2,
            } = b;
            out.extend([&mut norm1.g, &mut norm1.b, &mut qkv.w, &mut qkv.b, &mut proj.w, &mut proj.b]);
            out.extend([&mut norm2.g, &mut norm2.b, &mut fc1.w, &mut fc1.b, &mut fc2.w, &mut fc2.b]);
        }
        let ToyMae {
            embed,
            encoder,
            encoder_norm,
            bridge,
            mask_token,
            decoder,
            decoder_norm,
            head,
            ..
        } = self;
        out.extend([&mut embed.w, &mut embed.b]);
        for b in encoder.iter_mut() {
            block(&mut out, b);
        }
        out.extend([&mut encoder_norm.g, &mut encoder_norm.b, &mut bridge.w, &mut bridge.b, mask_token]);
        for b in decoder.iter_mut() {
            block(&mut out, b);
        }
        out.extend([&mut decoder_norm.g, &mut decoder_norm.b, &mut head.w, &mut head.b]);
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.2.len()).sum()
    }

    /// `self -= lr * grads`.
    pub fn sgd_step(&mut self, grads: &ToyMae, lr: f64) {
        let g = grads.params();
        for (p, (_, _, gv)) in self.params_mut().into_iter().zip(g) {
            axpy(-lr, gv, p);
        }
    }

    fn split(mask: &TokenMask, grid: [usize; 3]) -> Result<(Vec<usize>, Vec<usize>), MaeError> {
        if mask.dims() != grid {
            return Err(MaeError::MaskMismatch {
                mask: mask.dims(),
                grid,
            });
        }
        let (vis, msk) = (mask.visible_indices(), mask.masked_indices());
        if vis.is_empty() || msk.is_empty() {
            return Err(MaeError::DegenerateMask);
        }
        Ok((vis, msk))
    }

    fn grid(clip: &VideoClip) -> [usize; 3] {
        let d = clip.dims();
        [d.slices(), d.token_rows(), d.token_cols()]
    }

    pub fn forward(&self, clip: &VideoClip, mask: &TokenMask) -> Result<Forward, MaeError> {
        let (vis, msk) = Self::split(mask, Self::grid(clip))?;
        let cubes = cubify(clip);
        let all: Vec<usize> = (0..cubes.len()).collect();
        let pass = self.run(&cubes, &vis, &msk, &all, false);
        Ok(Forward {
            loss: pass.loss,
            reconstruction: Cubes::new(cubes.len(), pass.pred).expect("one row per token"),
        })
    }

    /// Loss when the encoder is fed the visible tokens in `order` (a
    /// permutation of the visible indices).
    pub fn loss_with_order(&self, clip: &VideoClip, mask: &TokenMask, order: &[usize]) -> Result<f64, MaeError> {
        let (mut vis, msk) = Self::split(mask, Self::grid(clip))?;
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        vis.sort_unstable();
        if sorted != vis {
            return Err(MaeError::InvalidConfig("order is not a permutation of the visible tokens".into()));
        }
        Ok(self.run(&cubify(clip), order, &msk, &msk, false).loss)
    }

    pub fn loss(&self, clip: &VideoClip, mask: &TokenMask) -> Result<f64, MaeError> {
        let (vis, msk) = Self::split(mask, Self::grid(clip))?;
        Ok(self.run(&cubify(clip), &vis, &msk, &msk, false).loss)
    }

    /// Loss and exact gradients for every parameter.
    pub fn backward(&self, clip: &VideoClip, mask: &TokenMask) -> Result<(f64, ToyMae), MaeError> {
        let (vis, msk) = Self::split(mask, Self::grid(clip))?;
        let pass = self.run(&cubify(clip), &vis, &msk, &msk, true);
        Ok((pass.loss, pass.grads.expect("requested")))
    }

    /// Encoder over `vis` (in that order), decoder over all positions, head
    /// evaluated on `head_rows`.
    fn run(&self, cubes: &Cubes, vis: &[usize], msk: &[usize], head_rows: &[usize], want_grad: bool) -> Pass {
        let n = cubes.len();
        let (d, dd) = (self.embed_dim(), self.decoder_dim());
        let nv = vis.len();
        let targets = cubes.normalized(self.norm_eps);
        let pe_e = sinusoid_table(n, d);
        let pe_d = sinusoid_table(n, dd);

        let mut xin = vec![0.0; nv * CUBE_LEN];
        for (j, &p) in vis.iter().enumerate() {
            xin[j * CUBE_LEN..(j + 1) * CUBE_LEN].copy_from_slice(cubes.row(p));
        }
        let mut x = self.embed.forward(&xin, nv);
        for (j, &p) in vis.iter().enumerate() {
            axpy(1.0, &pe_e[p * d..(p + 1) * d], &mut x[j * d..(j + 1) * d]);
        }
        let mut enc_caches = Vec::with_capacity(self.encoder.len());
        for b in &self.encoder {
            let (y, c) = b.forward(&x, nv, self.heads);
            enc_caches.push(c);
            x = y;
        }
        let (z, enc_norm_cache) = self.encoder_norm.forward(&x, nv);
        let lat = self.bridge.forward(&z, nv);

        let mut slot = vec![usize::MAX; n];
        for (j, &p) in vis.iter().enumerate() {
            slot[p] = j;
        }
        let mut y = vec![0.0; n * dd];
        for p in 0..n {
            let row = &mut y[p * dd..(p + 1) * dd];
            if slot[p] == usize::MAX {
                row.copy_from_slice(&self.mask_token);
            } else {
                row.copy_from_slice(&lat[slot[p] * dd..(slot[p] + 1) * dd]);
            }
            axpy(1.0, &pe_d[p * dd..(p + 1) * dd], row);
        }
        let mut dec_caches = Vec::with_capacity(self.decoder.len());
        for b in &self.decoder {
            let (o, c) = b.forward(&y, n, self.heads);
            dec_caches.push(c);
            y = o;
        }
        let (u, dec_norm_cache) = self.decoder_norm.forward(&y, n);
        let mut hin = vec![0.0; head_rows.len() * dd];
        for (k, &p) in head_rows.iter().enumerate() {
            hin[k * dd..(k + 1) * dd].copy_from_slice(&u[p * dd..(p + 1) * dd]);
        }
        let pred_rows = self.head.forward(&hin, head_rows.len());

        let mut pred = vec![0.0; n * CUBE_LEN];
        for (k, &p) in head_rows.iter().enumerate() {
            pred[p * CUBE_LEN..(p + 1) * CUBE_LEN].copy_from_slice(&pred_rows[k * CUBE_LEN..(k + 1) * CUBE_LEN]);
        }
        let recon = Cubes::new(n, pred).expect("one row per token");
        let loss = masked_loss(&recon, &targets, msk);
        let pred = recon.data().to_vec();
        if !want_grad {
            return Pass {
                loss,
                pred,
                grads: None,
            };
        }

        let mut g = self.zeros_like();
        let denom = (msk.len() * CUBE_LEN) as f64;
        let mut is_masked = vec![false; n];
        for &p in msk {
            is_masked[p] = true;
        }
        let mut dpred = vec![0.0; head_rows.len() * CUBE_LEN];
        for (k, &p) in head_rows.iter().enumerate() {
            if !is_masked[p] {
                continue;
            }
            for e in 0..CUBE_LEN {
                dpred[k * CUBE_LEN + e] = 2.0 * (pred[p * CUBE_LEN + e] - targets.row(p)[e]) / denom;
            }
        }
        let dhin = self.head.backward(&hin, &dpred, head_rows.len(), &mut g.head, true);
        let mut du = vec![0.0; n * dd];
        for (k, &p) in head_rows.iter().enumerate() {
            axpy(1.0, &dhin[k * dd..(k + 1) * dd], &mut du[p * dd..(p + 1) * dd]);
        }
        let mut dy = self.decoder_norm.backward(&dec_norm_cache, &du, n, &mut g.decoder_norm);
        for (i, b) in self.decoder.iter().enumerate().rev() {
            dy = b.backward(&dec_caches[i], &dy, n, self.heads, &mut g.decoder[i]);
        }
        let mut dlat = vec![0.0; nv * dd];
        for p in 0..n {
            let row = &dy[p * dd..(p + 1) * dd];
            if slot[p] == usize::MAX {
                axpy(1.0, row, &mut g.mask_token);
            } else {
                dlat[slot[p] * dd..(slot[p] + 1) * dd].copy_from_slice(row);
            }
        }
        let dz = self.bridge.backward(&z, &dlat, nv, &mut g.bridge, true);
        let mut dx = self.encoder_norm.backward(&enc_norm_cache, &dz, nv, &mut g.encoder_norm);
        for (i, b) in self.encoder.iter().enumerate().rev() {
            dx = b.backward(&enc_caches[i], &dx, nv, self.heads, &mut g.encoder[i]);
        }
        self.embed.backward(&xin, &dx, nv, &mut g.embed, false);
        Pass {
            loss,
            pred,
            grads: Some(g),
        }
    }

    /// Rebuilds a model from named parameters (see [`ToyMae::params`]).
    pub fn from_params(cfg: &MaeConfig, mut lookup: impl FnMut(&str, &[usize]) -> Option<Vec<f64>>) -> Result<Self, MaeError> {
        let mut m = Self::new(cfg)?;
        let meta: Vec<(String, Vec<usize>)> = m.params().into_iter().map(|(n, d, _)| (n, d)).collect();
        for ((name, dims), slot) in meta.into_iter().zip(m.params_mut()) {
            let v = lookup(&name, &dims).ok_or_else(|| MaeError::Checkpoint(format!("missing parameter {name}")))?;
            if v.len() != slot.len() {
                return Err(MaeError::Checkpoint(format!("parameter {name} has {} values, expected {}", v.len(), slot.len())));
            }
            *slot = v;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn tiny() -> MaeConfig {
        MaeConfig {
            embed_dim: 8,
            depth: 1,
            heads: 2,
            decoder_dim: 8,
            decoder_depth: 1,
            ..MaeConfig::default()
        }
    }

    fn clip(seed: u64) -> VideoClip {
        let mut rng = Rng::new(seed);
        let data = (0..4 * 3 * 32 * 32).map(|_| rng.uniform()).collect();
        VideoClip::new(Tensor::new(vec![4, 3, 32, 32], data).unwrap()).unwrap()
    }

    fn mask() -> TokenMask {
        TokenMask::from_visible_indices(2, 2, 2, &[0, 3, 5]).unwrap()
    }

    #[test]
    fn positional_table_is_deterministic() {
        let a = sinusoid_table(8, 6);
        assert_eq!(a, sinusoid_table(8, 6));
        assert_eq!(a[0..6], [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!((a[6] - 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn zero_head_on_constant_cubes_gives_zero_loss_and_gradient() {
        let mut m = ToyMae::new(&tiny()).unwrap();
        m.head.w.iter_mut().for_each(|v| *v = 0.0);
        let c = VideoClip::new(Tensor::filled(&[4, 3, 32, 32], 0.4)).unwrap();
        let (loss, g) = m.backward(&c, &mask()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.head.w.iter().chain(&g.head.b).all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_masks_rejected() {
        let m = ToyMae::new(&tiny()).unwrap();
        let all = TokenMask::new(2, 2, 2, vec![true; 8]).unwrap();
        let none = TokenMask::new(2, 2, 2, vec![false; 8]).unwrap();
        assert!(matches!(m.forward(&clip(0), &all), Err(MaeError::DegenerateMask)));
        assert!(matches!(m.forward(&clip(0), &none), Err(MaeError::DegenerateMask)));
        let wrong = TokenMask::new(1, 2, 2, vec![true, false, false, false]).unwrap();
        assert!(matches!(m.forward(&clip(0), &wrong), Err(MaeError::MaskMismatch { .. })));
    }

    #[test]
    fn forward_loss_matches_fast_path() {
        let m = ToyMae::new(&tiny()).unwrap();
        let f = m.forward(&clip(1), &mask()).unwrap();
        assert_eq!(f.loss, m.loss(&clip(1), &mask()).unwrap());
        assert_eq!(f.loss, m.backward(&clip(1), &mask()).unwrap().0);
    }

    #[test]
    fn visible_rows_do_not_affect_loss() {
        let m = ToyMae::new(&tiny()).unwrap();
        let c = clip(2);
        let f = m.forward(&c, &mask()).unwrap();
        let targets = cubify(&c).normalized(1e-6);
        let mut perturbed = f.reconstruction.clone();
        for p in mask().visible_indices() {
            perturbed.row_mut(p).iter_mut().for_each(|v| *v += 3.5);
        }
        let msk = mask().masked_indices();
        assert_eq!(masked_loss(&perturbed, &targets, &msk), f.loss);
    }

    #[test]
    fn gradients_are_deterministic() {
        let m = ToyMae::new(&tiny()).unwrap();
        let a = m.backward(&clip(3), &mask()).unwrap();
        let b = m.backward(&clip(3), &mask()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spot_finite_difference() {
        let mut m = ToyMae::new(&tiny()).unwrap();
        let c = clip(4);
        let (_, g) = m.backward(&c, &mask()).unwrap();
        let grads: Vec<Vec<f64>> = g.params().into_iter().map(|p| p.2.to_vec()).collect();
        let h = 1e-5;
        for k in 0..grads.len() {
            let idx = grads[k].len() / 2;
            let orig = m.params_mut()[k][idx];
            m.params_mut()[k][idx] = orig + h;
            let lp = m.loss(&c, &mask()).unwrap();
            m.params_mut()[k][idx] = orig - h;
            let lm = m.loss(&c, &mask()).unwrap();
            m.params_mut()[k][idx] = orig;
            let num = (lp - lm) / (2.0 * h);
            let an = grads[k][idx];
            assert!((num - an).abs() <= 1e-6 * an.abs().max(num.abs()).max(1e-3), "param {k}: {an} vs {num}");
        }
    }

    #[test]
    fn checkpoint_lookup_round_trip() {
        let m = ToyMae::new(&tiny()).unwrap();
        let named: std::collections::HashMap<String, Vec<f64>> = m.params().into_iter().map(|(n, _, v)| (n, v.to_vec())).collect();
        let back = ToyMae::from_params(&MaeConfig { seed: 99, ..tiny() }, |n, _| named.get(n).cloned()).unwrap();
        assert_eq!(back, m);
    }
}
