//! Straight-line reference forward pass for the toy autoencoder, written
//! against the named parameter list only. Shares no code with the library
//! model beyond the parameter names.

use std::collections::HashMap;

use mgmask::mae::ToyMae;
use mgmask::tensor::Tensor;

pub struct Named {
    map: HashMap<String, (Vec<usize>, Vec<f64>)>,
}

impl Named {
    pub fn of(model: &ToyMae) -> Self {
        Self {
            map: model
                .params()
                .into_iter()
                .map(|(n, d, v)| (n, (d, v.to_vec())))
                .collect(),
        }
    }

    fn vec(&self, name: &str) -> &Vec<f64> {
        &self.map.get(name).unwrap_or_else(|| panic!("no {name}")).1
    }

    fn mat(&self, name: &str) -> Vec<Vec<f64>> {
        let (d, v) = self.map.get(name).unwrap_or_else(|| panic!("no {name}"));
        (0..d[0]).map(|r| v[r * d[1]..(r + 1) * d[1]].to_vec()).collect()
    }

    fn has(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }
}

fn affine(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bias)| {
            let mut acc = *bias;
            for k in 0..x.len() {
                acc += row[k] * x[k];
            }
            acc
        })
        .collect()
}

fn layer_norm(x: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = (var + 1e-5).sqrt();
    (0..x.len()).map(|i| g[i] * (x[i] - mean) / sd + b[i]).collect()
}

fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x.powi(3))).tanh())
}

fn pe(pos: usize, d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| {
            let pair = (j - j % 2) as f64;
            let a = pos as f64 * (-(pair / d as f64) * 10000f64.ln()).exp();
            if j % 2 == 0 {
                a.sin()
            } else {
                a.cos()
            }
        })
        .collect()
}

fn block(p: &Named, prefix: &str, x: Vec<Vec<f64>>, heads: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let d = x[0].len();
    let hd = d / heads;
    let g = |s: &str| p.vec(&format!("{prefix}.{s}")).clone();
    let m = |s: &str| p.mat(&format!("{prefix}.{s}"));
    let (qkv_w, qkv_b) = (m("attn.qkv.weight"), g("attn.qkv.bias"));
    let h: Vec<Vec<f64>> = x.iter().map(|r| layer_norm(r, &g("norm1.weight"), &g("norm1.bias"))).collect();
    let qkv: Vec<Vec<f64>> = h.iter().map(|r| affine(&qkv_w, &qkv_b, r)).collect();
    let mut ctx = vec![vec![0.0; d]; n];
    for head in 0..heads {
        for i in 0..n {
            let mut logits = vec![0.0; n];
            for j in 0..n {
                let mut s = 0.0;
                for e in 0..hd {
                    s += qkv[i][head * hd + e] * qkv[j][d + head * hd + e];
                }
                logits[j] = s / (hd as f64).sqrt();
            }
            let top = logits.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = logits.iter().map(|l| (l - top).exp()).sum();
            for j in 0..n {
                let a = (logits[j] - top).exp() / z;
                for e in 0..hd {
                    ctx[i][head * hd + e] += a * qkv[j][2 * d + head * hd + e];
                }
            }
        }
    }
    let (pw, pb) = (m("attn.proj.weight"), g("attn.proj.bias"));
    let (w1, b1) = (m("mlp.fc1.weight"), g("mlp.fc1.bias"));
    let (w2, b2) = (m("mlp.fc2.weight"), g("mlp.fc2.bias"));
    (0..n)
        .map(|i| {
            let a = affine(&pw, &pb, &ctx[i]);
            let mid: Vec<f64> = (0..d).map(|k| x[i][k] + a[k]).collect();
            let h2 = layer_norm(&mid, &g("norm2.weight"), &g("norm2.bias"));
            let act: Vec<f64> = affine(&w1, &b1, &h2).into_iter().map(gelu).collect();
            let out = affine(&w2, &b2, &act);
            (0..d).map(|k| mid[k] + out[k]).collect()
        })
        .collect()
}

/// Masked normalized MSE of the model described by `p` on `clip`
/// (`[T, 3, H, W]`), with `visible[token]` in `(slice, row, col)` order.
pub fn oracle_loss(p: &Named, clip: &Tensor, visible: &[bool], heads: usize, norm_eps: f64) -> f64 {
    let (t, h, w) = (clip.dims()[0], clip.dims()[2], clip.dims()[3]);
    let (rows, cols) = (h / 16, w / 16);
    let n = (t / 2) * rows * cols;
    let cube = |i: usize| -> Vec<f64> {
        let (s, r, c) = (i / (rows * cols), (i / cols) % rows, i % cols);
        let mut v = Vec::with_capacity(1536);
        for dt in 0..2 {
            for dy in 0..16 {
                for dx in 0..16 {
                    for ch in 0..3 {
                        v.push(clip.get(&[2 * s + dt, ch, 16 * r + dy, 16 * c + dx]));
                    }
                }
            }
        }
        v
    };
    let target = |i: usize| -> Vec<f64> {
        let v = cube(i);
        let mean = v.iter().sum::<f64>() / 1536.0;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 1536.0;
        v.iter().map(|x| (x - mean) / (var + norm_eps).sqrt()).collect()
    };

    let embed_w = p.mat("embed.weight");
    let d = embed_w.len();
    let vis: Vec<usize> = (0..n).filter(|&i| visible[i]).collect();
    let mut x: Vec<Vec<f64>> = vis
        .iter()
        .map(|&i| {
            let e = affine(&embed_w, p.vec("embed.bias"), &cube(i));
            let q = pe(i, d);
            (0..d).map(|k| e[k] + q[k]).collect()
        })
        .collect();
    let mut layer = 0;
    while p.has(&format!("encoder.{layer}.norm1.weight")) {
        x = block(p, &format!("encoder.{layer}"), x, heads);
        layer += 1;
    }
    let bridge_w = p.mat("bridge.weight");
    let dd = bridge_w.len();
    let latents: Vec<Vec<f64>> = x
        .iter()
        .map(|r| affine(&bridge_w, p.vec("bridge.bias"), &layer_norm(r, p.vec("encoder_norm.weight"), p.vec("encoder_norm.bias"))))
        .collect();
    let mut y: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let base = match vis.iter().position(|&v| v == i) {
                Some(j) => latents[j].clone(),
                None => p.vec("mask_token").clone(),
            };
            let q = pe(i, dd);
            (0..dd).map(|k| base[k] + q[k]).collect()
        })
        .collect();
    let mut layer = 0;
    while p.has(&format!("decoder.{layer}.norm1.weight")) {
        y = block(p, &format!("decoder.{layer}"), y, heads);
        layer += 1;
    }
    let head_w = p.mat("head.weight");
    let mut total = 0.0;
    let mut count = 0usize;
    for i in (0..n).filter(|&i| !visible[i]) {
        let u = layer_norm(&y[i], p.vec("decoder_norm.weight"), p.vec("decoder_norm.bias"));
        let pred = affine(&head_w, p.vec("head.bias"), &u);
        let tgt = target(i);
        total += pred.iter().zip(&tgt).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        count += 1;
    }
    total / (count as f64 * 1536.0)
}
