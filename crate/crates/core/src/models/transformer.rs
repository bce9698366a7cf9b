//! Compact transformer-encoder sequence classifier.
//!
//! Token and position embeddings feed an embedding LayerNorm and a stack of
//! post-norm encoder layers (multi-head self-attention, then a GELU
//! feed-forward block, each wrapped in a residual connection and
//! LayerNorm). A linear head on the first position produces two logits.
//!
//! All parameters live in one flat `f64` vector; [`Layout`] maps every
//! tensor to its offset. With `share_layer_params` every layer maps to the
//! same block, so the block gets the gradient contributions of all layers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::codec::{self, ModelKind, Reader, Writer};
use crate::models::optim::AdamW;
use crate::rng::SplitMix64;

const LN_EPS: f64 = 1e-5;
const N_CLASSES: usize = 2;
/// Samples per gradient work unit. Chunk gradients are summed in chunk
/// order, so results do not depend on the thread count.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub share_layer_params: bool,
    pub dropout: f64,
    /// Standard deviation of the normal weight initialisation.
    pub init_std: f64,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            vocab_size: 0,
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 128,
            max_len: 64,
            share_layer_params: false,
            dropout: 0.1,
            init_std: 0.02,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("transformer {m}")));
        if self.vocab_size == 0 {
            return bad("vocab_size must be positive");
        }
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.n_layers == 0 || self.d_ff == 0 {
            return bad("n_layers and d_ff must be positive");
        }
        if self.max_len < 2 {
            return bad("max_len must be >= 2");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad("init_std must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 2e-5,
            epochs: 4,
            weight_decay: 0.01,
            batch_size: 32,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("training {m}")));
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be >= 0");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0)
        {
            return bad("adam betas must be in [0, 1) and eps > 0");
        }
        Ok(())
    }
}

/// Offsets of one encoder layer's tensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOffsets {
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub tok_emb: usize,
    pub pos_emb: usize,
    pub emb_ln_g: usize,
    pub emb_ln_b: usize,
    pub blocks: Vec<BlockOffsets>,
    /// Index into `blocks` for every layer.
    pub layer_block: Vec<usize>,
    pub head_w: usize,
    pub head_b: usize,
    pub total: usize,
    /// `(offset, len)` of every tensor that receives weight decay.
    matrices: Vec<(usize, usize)>,
    /// `(offset, len)` of LayerNorm gains (initialised to 1).
    gains: Vec<(usize, usize)>,
}

impl Layout {
    pub fn new(c: &TransformerConfig) -> Self {
        let (v, d, f, l) = (c.vocab_size, c.d_model, c.d_ff, c.max_len);
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let mut matrices = Vec::new();
        let mut gains = Vec::new();
        let tok_emb = take(v * d);
        matrices.push((tok_emb, v * d));
        let pos_emb = take(l * d);
        matrices.push((pos_emb, l * d));
        let emb_ln_g = take(d);
        gains.push((emb_ln_g, d));
        let emb_ln_b = take(d);
        let n_blocks = if c.share_layer_params { 1 } else { c.n_layers };
        let mut blocks = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            let mut mat = |n: usize, take: &mut dyn FnMut(usize) -> usize| {
                let o = take(n);
                matrices.push((o, n));
                o
            };
            let wq = mat(d * d, &mut take);
            let bq = take(d);
            let wk = mat(d * d, &mut take);
            let bk = take(d);
            let wv = mat(d * d, &mut take);
            let bv = take(d);
            let wo = mat(d * d, &mut take);
            let bo = take(d);
            let ln1_g = take(d);
            let ln1_b = take(d);
            let w1 = mat(d * f, &mut take);
            let b1 = take(f);
            let w2 = mat(f * d, &mut take);
            let b2 = take(d);
            let ln2_g = take(d);
            let ln2_b = take(d);
            gains.push((ln1_g, d));
            gains.push((ln2_g, d));
            blocks.push(BlockOffsets {
                wq,
                bq,
                wk,
                bk,
                wv,
                bv,
                wo,
                bo,
                ln1_g,
                ln1_b,
                w1,
                b1,
                w2,
                b2,
                ln2_g,
                ln2_b,
            });
        }
        let head_w = take(d * N_CLASSES);
        matrices.push((head_w, d * N_CLASSES));
        let head_b = take(N_CLASSES);
        let layer_block = (0..c.n_layers)
            .map(|i| if c.share_layer_params { 0 } else { i })
            .collect();
        Layout {
            tok_emb,
            pos_emb,
            emb_ln_g,
            emb_ln_b,
            blocks,
            layer_block,
            head_w,
            head_b,
            total: off,
            matrices,
            gains,
        }
    }

    /// Per-parameter weight-decay mask: matrices yes, biases and norms no.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        for &(o, n) in &self.matrices {
            mask[o..o + n].iter_mut().for_each(|m| *m = true);
        }
        mask
    }

    pub fn block_for_layer(&self, layer: usize) -> &BlockOffsets {
        &self.blocks[self.layer_block[layer]]
    }
}

// ---------------------------------------------------------------------------
// Dense kernels on row-major slices.

/// `y[t×n] = x[t×m] · w[m×n] + b`.
fn linear(x: &[f64], w: &[f64], b: &[f64], m: usize, n: usize) -> Vec<f64> {
    let t = x.len() / m;
    let mut y = Vec::with_capacity(t * n);
    for r in 0..t {
        y.extend_from_slice(b);
        let yr = &mut y[r * n..(r + 1) * n];
        for (k, &a) in x[r * m..(r + 1) * m].iter().enumerate() {
            if a != 0.0 {
                for (yj, &wj) in yr.iter_mut().zip(&w[k * n..(k + 1) * n]) {
                    *yj += a * wj;
                }
            }
        }
    }
    y
}

/// Backward of [`linear`]: accumulates `dw`, `db` and returns `dx`.
fn linear_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    m: usize,
    n: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let t = x.len() / m;
    let mut dx = vec![0.0; t * m];
    for r in 0..t {
        let dyr = &dy[r * n..(r + 1) * n];
        for (dbj, &g) in db.iter_mut().zip(dyr) {
            *dbj += g;
        }
        for k in 0..m {
            let wk = &w[k * n..(k + 1) * n];
            let a = x[r * m + k];
            let dwk = &mut dw[k * n..(k + 1) * n];
            let mut s = 0.0;
            for j in 0..n {
                s += dyr[j] * wk[j];
                dwk[j] += a * dyr[j];
            }
            dx[r * m + k] = s;
        }
    }
    dx
}

struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], g: &[f64], b: &[f64], d: usize) -> (Vec<f64>, NormCache) {
    let t = x.len() / d;
    let mut y = vec![0.0; t * d];
    let mut xhat = vec![0.0; t * d];
    let mut inv_std = vec![0.0; t];
    for r in 0..t {
        let row = &x[r * d..(r + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = is;
        for j in 0..d {
            let h = (row[j] - mean) * is;
            xhat[r * d + j] = h;
            y[r * d + j] = g[j] * h + b[j];
        }
    }
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(
    dy: &[f64],
    c: &NormCache,
    g: &[f64],
    d: usize,
    dg: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let t = dy.len() / d;
    let mut dx = vec![0.0; t * d];
    let mut dxhat = vec![0.0; d];
    for r in 0..t {
        let (mut m1, mut m2) = (0.0, 0.0);
        for j in 0..d {
            let i = r * d + j;
            dg[j] += dy[i] * c.xhat[i];
            db[j] += dy[i];
            dxhat[j] = dy[i] * g[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * c.xhat[i];
        }
        m1 /= d as f64;
        m2 /= d as f64;
        for j in 0..d {
            let i = r * d + j;
            dx[i] = c.inv_std[r] * (dxhat[j] - m1 - c.xhat[i] * m2);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

fn dropout_mask(len: usize, p: f64, rng: &mut SplitMix64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.next_f64() < p { 0.0 } else { keep })
        .collect()
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        x.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
}

// ---------------------------------------------------------------------------

struct LayerCache {
    h_in: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Attention probabilities, `[head][query][key]`.
    attn: Vec<f64>,
    ctx: Vec<f64>,
    mask1: Option<Vec<f64>>,
    ln1: NormCache,
    u: Vec<f64>,
    f_pre: Vec<f64>,
    f_act: Vec<f64>,
    mask2: Option<Vec<f64>>,
    ln2: NormCache,
}

struct ForwardCache {
    ids: Vec<u32>,
    emb_ln: NormCache,
    mask0: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    h_final: Vec<f64>,
}

/// A trained or freshly initialised classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformerClassifier {
    config: TransformerConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl TransformerClassifier {
    /// Random initialisation: normal(0, init_std) matrices and embeddings,
    /// zero biases, unit LayerNorm gains.
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = SplitMix64::derive(seed, &[0x1417]);
        for &(o, n) in &layout.matrices {
            for p in &mut params[o..o + n] {
                *p = config.init_std * rng.normal();
            }
        }
        for &(o, n) in &layout.gains {
            params[o..o + n].iter_mut().for_each(|p| *p = 1.0);
        }
        Ok(TransformerClassifier {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::invalid("empty token sequence"));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.config.vocab_size) {
            return Err(Error::invalid(format!(
                "token id {bad} out of range for vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(())
    }

    fn truncate<'a>(&self, ids: &'a [u32]) -> &'a [u32] {
        &ids[..ids.len().min(self.config.max_len)]
    }

    fn p(&self, off: usize, len: usize) -> &[f64] {
        &self.params[off..off + len]
    }

    /// One encoder layer on a `t × d_model` input.
    fn layer_forward(
        &self,
        layer: usize,
        h_in: Vec<f64>,
        mut rng: Option<&mut SplitMix64>,
    ) -> (Vec<f64>, LayerCache) {
        let c = &self.config;
        let (d, f, nh) = (c.d_model, c.d_ff, c.n_heads);
        let dh = d / nh;
        let t = h_in.len() / d;
        let b = *self.layout.block_for_layer(layer);
        let q = linear(&h_in, self.p(b.wq, d * d), self.p(b.bq, d), d, d);
        let k = linear(&h_in, self.p(b.wk, d * d), self.p(b.bk, d), d, d);
        let v = linear(&h_in, self.p(b.wv, d * d), self.p(b.bv, d), d, d);
        let scale = 1.0 / (dh as f64).sqrt();
        let mut attn = vec![0.0; nh * t * t];
        let mut ctx = vec![0.0; t * d];
        for h in 0..nh {
            for i in 0..t {
                let row = &mut attn[(h * t + i) * t..(h * t + i + 1) * t];
                let qi = &q[i * d + h * dh..i * d + (h + 1) * dh];
                for (j, s) in row.iter_mut().enumerate() {
                    let kj = &k[j * d + h * dh..j * d + (h + 1) * dh];
                    *s = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax_in_place(row);
                let ci = &mut ctx[i * d + h * dh..i * d + (h + 1) * dh];
                for (j, &a) in row.iter().enumerate() {
                    let vj = &v[j * d + h * dh..j * d + (h + 1) * dh];
                    ci.iter_mut().zip(vj).for_each(|(c, &x)| *c += a * x);
                }
            }
        }
        let mut attn_out = linear(&ctx, self.p(b.wo, d * d), self.p(b.bo, d), d, d);
        let mask1 = rng
            .as_deref_mut()
            .map(|r| dropout_mask(t * d, c.dropout, r));
        apply_mask(&mut attn_out, &mask1);
        let z1: Vec<f64> = h_in.iter().zip(&attn_out).map(|(a, b)| a + b).collect();
        let (u, ln1) = layer_norm(&z1, self.p(b.ln1_g, d), self.p(b.ln1_b, d), d);
        let f_pre = linear(&u, self.p(b.w1, d * f), self.p(b.b1, f), d, f);
        let f_act: Vec<f64> = f_pre.iter().map(|&x| gelu(x)).collect();
        let mut f_out = linear(&f_act, self.p(b.w2, f * d), self.p(b.b2, d), f, d);
        let mask2 = rng.map(|r| dropout_mask(t * d, c.dropout, r));
        apply_mask(&mut f_out, &mask2);
        let z2: Vec<f64> = u.iter().zip(&f_out).map(|(a, b)| a + b).collect();
        let (h_out, ln2) = layer_norm(&z2, self.p(b.ln2_g, d), self.p(b.ln2_b, d), d);
        let cache = LayerCache {
            h_in,
            q,
            k,
            v,
            attn,
            ctx,
            mask1,
            ln1,
            u,
            f_pre,
            f_act,
            mask2,
            ln2,
        };
        (h_out, cache)
    }

    fn embed(
        &self,
        ids: &[u32],
        rng: Option<&mut SplitMix64>,
    ) -> (Vec<f64>, NormCache, Option<Vec<f64>>) {
        let d = self.config.d_model;
        let mut x = Vec::with_capacity(ids.len() * d);
        for (pos, &id) in ids.iter().enumerate() {
            let te = self.p(self.layout.tok_emb + id as usize * d, d);
            let pe = self.p(self.layout.pos_emb + pos * d, d);
            x.extend(te.iter().zip(pe).map(|(a, b)| a + b));
        }
        let (mut h, cache) = layer_norm(
            &x,
            self.p(self.layout.emb_ln_g, d),
            self.p(self.layout.emb_ln_b, d),
            d,
        );
        let mask = rng.map(|r| dropout_mask(h.len(), self.config.dropout, r));
        apply_mask(&mut h, &mask);
        (h, cache, mask)
    }

    /// Forward pass. Dropout is active iff `rng` is given and dropout > 0.
    fn forward(
        &self,
        ids: &[u32],
        mut rng: Option<&mut SplitMix64>,
    ) -> ([f64; N_CLASSES], ForwardCache) {
        if self.config.dropout == 0.0 {
            rng = None;
        }
        let d = self.config.d_model;
        let (mut h, emb_ln, mask0) = self.embed(ids, rng.as_deref_mut());
        let mut layers = Vec::with_capacity(self.config.n_layers);
        for l in 0..self.config.n_layers {
            let (out, cache) = self.layer_forward(l, h, rng.as_deref_mut());
            layers.push(cache);
            h = out;
        }
        let logits = self.head(&h[..d]);
        let cache = ForwardCache {
            ids: ids.to_vec(),
            emb_ln,
            mask0,
            layers,
            h_final: h,
        };
        (logits, cache)
    }

    fn head(&self, cls: &[f64]) -> [f64; N_CLASSES] {
        let w = self.p(self.layout.head_w, cls.len() * N_CLASSES);
        let b = self.p(self.layout.head_b, N_CLASSES);
        let mut out = [b[0], b[1]];
        for (k, &x) in cls.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                *o += x * w[k * N_CLASSES + c];
            }
        }
        out
    }

    fn backward(&self, cache: &ForwardCache, dlogits: [f64; N_CLASSES], grad: &mut [f64]) {
        let c = &self.config;
        let (d, f, nh) = (c.d_model, c.d_ff, c.n_heads);
        let dh = d / nh;
        let t = cache.ids.len();
        let lay = &self.layout;

        let mut dh_cur = vec![0.0; t * d];
        {
            let w = self.p(lay.head_w, d * N_CLASSES);
            for k in 0..d {
                for (cl, &g) in dlogits.iter().enumerate() {
                    grad[lay.head_w + k * N_CLASSES + cl] += cache.h_final[k] * g;
                    dh_cur[k] += w[k * N_CLASSES + cl] * g;
                }
            }
            for (cl, &g) in dlogits.iter().enumerate() {
                grad[lay.head_b + cl] += g;
            }
        }

        for l in (0..c.n_layers).rev() {
            let lc = &cache.layers[l];
            let b = *lay.block_for_layer(l);
            let (dg, db) = split_pair(grad, b.ln2_g, b.ln2_b, d);
            let dz2 = layer_norm_backward(&dh_cur, &lc.ln2, self.p(b.ln2_g, d), d, dg, db);
            let mut df = dz2.clone();
            apply_mask(&mut df, &lc.mask2);
            let (dw2, db2) = split_pair_sized(grad, b.w2, f * d, b.b2, d);
            let dact = linear_backward(&lc.f_act, self.p(b.w2, f * d), &df, f, d, dw2, db2);
            let dpre: Vec<f64> = dact
                .iter()
                .zip(&lc.f_pre)
                .map(|(g, &x)| g * gelu_grad(x))
                .collect();
            let (dw1, db1) = split_pair_sized(grad, b.w1, d * f, b.b1, f);
            let du_ffn = linear_backward(&lc.u, self.p(b.w1, d * f), &dpre, d, f, dw1, db1);
            let du: Vec<f64> = dz2.iter().zip(&du_ffn).map(|(a, b)| a + b).collect();

            let (dg, db) = split_pair(grad, b.ln1_g, b.ln1_b, d);
            let dz1 = layer_norm_backward(&du, &lc.ln1, self.p(b.ln1_g, d), d, dg, db);
            let mut dattn_out = dz1.clone();
            apply_mask(&mut dattn_out, &lc.mask1);
            let (dwo, dbo) = split_pair_sized(grad, b.wo, d * d, b.bo, d);
            let dctx = linear_backward(&lc.ctx, self.p(b.wo, d * d), &dattn_out, d, d, dwo, dbo);

            let scale = 1.0 / (dh as f64).sqrt();
            let mut dq = vec![0.0; t * d];
            let mut dk = vec![0.0; t * d];
            let mut dv = vec![0.0; t * d];
            let mut ds = vec![0.0; t];
            for h in 0..nh {
                let hs = h * dh..(h + 1) * dh;
                for i in 0..t {
                    let a = &lc.attn[(h * t + i) * t..(h * t + i + 1) * t];
                    let dci = &dctx[i * d + hs.start..i * d + hs.end];
                    let mut dot = 0.0;
                    for j in 0..t {
                        let vj = &lc.v[j * d + hs.start..j * d + hs.end];
                        let da: f64 = dci.iter().zip(vj).map(|(x, y)| x * y).sum();
                        ds[j] = da;
                        dot += da * a[j];
                        let dvj = &mut dv[j * d + hs.start..j * d + hs.end];
                        dvj.iter_mut().zip(dci).for_each(|(o, &g)| *o += a[j] * g);
                    }
                    for j in 0..t {
                        let s = a[j] * (ds[j] - dot) * scale;
                        if s == 0.0 {
                            continue;
                        }
                        for e in hs.clone() {
                            dq[i * d + e] += s * lc.k[j * d + e];
                            dk[j * d + e] += s * lc.q[i * d + e];
                        }
                    }
                }
            }
            let mut dh_in = dz1;
            for (w, bias, dy) in [(b.wq, b.bq, &dq), (b.wk, b.bk, &dk), (b.wv, b.bv, &dv)] {
                let (dw, dbias) = split_pair_sized(grad, w, d * d, bias, d);
                let dx = linear_backward(&lc.h_in, self.p(w, d * d), dy, d, d, dw, dbias);
                dh_in.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
            }
            dh_cur = dh_in;
        }

        apply_mask(&mut dh_cur, &cache.mask0);
        let (dg, db) = split_pair(grad, lay.emb_ln_g, lay.emb_ln_b, d);
        let dx = layer_norm_backward(&dh_cur, &cache.emb_ln, self.p(lay.emb_ln_g, d), d, dg, db);
        for (pos, &id) in cache.ids.iter().enumerate() {
            let row = &dx[pos * d..(pos + 1) * d];
            let te = lay.tok_emb + id as usize * d;
            let pe = lay.pos_emb + pos * d;
            for j in 0..d {
                grad[te + j] += row[j];
                grad[pe + j] += row[j];
            }
        }
    }

    /// Class probabilities `[negative, positive]` in evaluation mode.
    /// Sequences longer than `max_len` are truncated.
    pub fn predict_probs(&self, ids: &[u32]) -> Result<[f64; N_CLASSES]> {
        self.check_ids(ids)?;
        let (mut logits, _) = self.forward(self.truncate(ids), None);
        softmax_in_place(&mut logits);
        Ok(logits)
    }

    /// Probability of the positive (offensive) class.
    pub fn predict_proba(&self, ids: &[u32]) -> Result<f64> {
        Ok(self.predict_probs(ids)?[1])
    }

    /// Attention probabilities of every layer, `[layer][head * t * t]`.
    pub fn attention_maps(&self, ids: &[u32]) -> Result<Vec<Vec<f64>>> {
        self.check_ids(ids)?;
        let (_, cache) = self.forward(self.truncate(ids), None);
        Ok(cache.layers.into_iter().map(|l| l.attn).collect())
    }

    /// Applies encoder layer `layer` (evaluation mode) to a `t × d_model` input.
    pub fn apply_layer(&self, layer: usize, h: &[f64]) -> Result<Vec<f64>> {
        let d = self.config.d_model;
        if layer >= self.config.n_layers || h.is_empty() || !h.len().is_multiple_of(d) {
            return Err(Error::invalid("bad layer index or input shape"));
        }
        Ok(self.layer_forward(layer, h.to_vec(), None).0)
    }

    /// Cross-entropy of one sample, adding its gradient into `grad`.
    fn sample_loss_grad(
        &self,
        ids: &[u32],
        positive: bool,
        rng: Option<&mut SplitMix64>,
        grad: &mut [f64],
    ) -> f64 {
        let (logits, cache) = self.forward(ids, rng);
        let mut p = logits;
        softmax_in_place(&mut p);
        let loss = cross_entropy(logits, positive);
        let mut dl = p;
        dl[usize::from(positive)] -= 1.0;
        self.backward(&cache, dl, grad);
        loss
    }

    /// Mean cross-entropy of a batch in evaluation mode.
    pub fn batch_loss(&self, batch: &[(Vec<u32>, bool)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut total = 0.0;
        for (ids, y) in batch {
            self.check_ids(ids)?;
            let (logits, _) = self.forward(self.truncate(ids), None);
            total += cross_entropy(logits, *y);
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean cross-entropy and its gradient over a batch in evaluation mode.
    pub fn batch_gradient(&self, batch: &[(Vec<u32>, bool)]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for (ids, _) in batch {
            self.check_ids(ids)?;
        }
        let items: Vec<(&[u32], bool, Option<SplitMix64>)> = batch
            .iter()
            .map(|(ids, y)| (self.truncate(ids), *y, None))
            .collect();
        let (loss, mut grad) = self.accumulate(&items);
        let n = batch.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok((loss / n, grad))
    }

    /// Summed loss and gradient, computed in fixed-size chunks in parallel
    /// and reduced in chunk order.
    fn accumulate(&self, items: &[(&[u32], bool, Option<SplitMix64>)]) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, Vec<f64>)> = items
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; self.params.len()];
                let mut loss = 0.0;
                for (ids, y, rng) in chunk {
                    let mut rng = rng.clone();
                    loss += self.sample_loss_grad(ids, *y, rng.as_mut(), &mut grad);
                }
                (loss, grad)
            })
            .collect();
        let mut iter = parts.into_iter();
        let (mut loss, mut grad) = iter.next().unwrap_or((0.0, vec![0.0; self.params.len()]));
        for (l, g) in iter {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        (loss, grad)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode(&mut w);
        w.finish(ModelKind::Transformer)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = codec::open(bytes, ModelKind::Transformer)?;
        let m = Self::decode(&mut r)?;
        r.finish()?;
        Ok(m)
    }

    pub(crate) fn encode(&self, w: &mut Writer) {
        let c = &self.config;
        w.usizes(&[
            c.vocab_size,
            c.d_model,
            c.n_heads,
            c.n_layers,
            c.d_ff,
            c.max_len,
        ]);
        w.bool(c.share_layer_params);
        w.f64(c.dropout);
        w.f64(c.init_std);
        w.f64s(&self.params);
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let dims = r.usizes()?;
        let [vocab_size, d_model, n_heads, n_layers, d_ff, max_len] = dims[..] else {
            return Err(Error::Format("bad transformer header".into()));
        };
        let config = TransformerConfig {
            vocab_size,
            d_model,
            n_heads,
            n_layers,
            d_ff,
            max_len,
            share_layer_params: r.bool()?,
            dropout: r.f64()?,
            init_std: r.f64()?,
        };
        config
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        let layout = Layout::new(&config);
        let params = r.f64s()?;
        if params.len() != layout.total {
            return Err(Error::Format(format!(
                "expected {} parameters, found {}",
                layout.total,
                params.len()
            )));
        }
        Ok(TransformerClassifier {
            config,
            layout,
            params,
        })
    }
}

fn cross_entropy(logits: [f64; N_CLASSES], positive: bool) -> f64 {
    let max = logits[0].max(logits[1]);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[usize::from(positive)]
}

fn split_pair(grad: &mut [f64], a: usize, b: usize, n: usize) -> (&mut [f64], &mut [f64]) {
    split_pair_sized(grad, a, n, b, n)
}

/// Two disjoint mutable windows `grad[a..a+na]` and `grad[b..b+nb]`, `a < b`.
fn split_pair_sized(
    grad: &mut [f64],
    a: usize,
    na: usize,
    b: usize,
    nb: usize,
) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a + na <= b);
    let (lo, hi) = grad.split_at_mut(b);
    (&mut lo[a..a + na], &mut hi[..nb])
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct TransformerTraining {
    pub model: TransformerClassifier,
    /// Mean training loss of every epoch (with dropout active).
    pub history: Vec<EpochRecord>,
}

/// Mini-batch AdamW training with a constant learning rate. Sample order
/// and dropout masks derive from `train.seed`, so a fixed seed reproduces
/// the parameters bit for bit.
pub fn train_transformer(
    samples: &[(Vec<u32>, bool)],
    config: TransformerConfig,
    train: &TrainingConfig,
) -> Result<TransformerTraining> {
    train.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let mut model = TransformerClassifier::new(config, train.seed)?;
    for (ids, _) in samples {
        model.check_ids(ids)?;
    }
    let decay = model.layout.decay_mask();
    let mut opt = AdamW::new(
        model.n_params(),
        train.learning_rate,
        train.beta1,
        train.beta2,
        train.eps,
        train.weight_decay,
    );
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(train.epochs);
    for epoch in 0..train.epochs {
        SplitMix64::derive(train.seed, &[0xE90C, epoch as u64]).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(train.batch_size) {
            let items: Vec<(&[u32], bool, Option<SplitMix64>)> = batch
                .iter()
                .map(|&i| {
                    let rng = SplitMix64::derive(train.seed, &[0xD80F, epoch as u64, i as u64]);
                    (model.truncate(&samples[i].0), samples[i].1, Some(rng))
                })
                .collect();
            let (loss, mut grad) = model.accumulate(&items);
            let n = batch.len() as f64;
            grad.iter_mut().for_each(|g| *g /= n);
            opt.step(&mut model.params, &grad, &decay);
            epoch_loss += loss;
        }
        history.push(EpochRecord {
            epoch: epoch + 1,
            loss: epoch_loss / samples.len() as f64,
        });
    }
    Ok(TransformerTraining { model, history })
}

/// Largest relative error between analytic and central-difference
/// gradients over `n_checks` randomly chosen parameters, evaluated on the
/// batch's mean loss in evaluation mode.
pub fn grad_check(
    model: &TransformerClassifier,
    batch: &[(Vec<u32>, bool)],
    epsilon: f64,
    n_checks: usize,
    seed: u64,
) -> Result<f64> {
    let (_, analytic) = model.batch_gradient(batch)?;
    let mut rng = SplitMix64::new(seed);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..n_checks {
        let i = rng.below(model.n_params());
        let orig = probe.params[i];
        probe.params[i] = orig + epsilon;
        let up = probe.batch_loss(batch)?;
        probe.params[i] = orig - epsilon;
        let down = probe.batch_loss(batch)?;
        probe.params[i] = orig;
        let fd = (up - down) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
