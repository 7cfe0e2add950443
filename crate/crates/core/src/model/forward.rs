//! Training-mode forward pass with cached activations, the loss, and the
//! hand-written backward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::batch::{EncodedBatch, EncodedExample};
use super::linalg::{gelu, gelu_grad, gemm, layer_norm, layer_norm_backward, linear, linear_backward, softmax_row, View};
use super::{ModelError, ModelParams};
use crate::encoding::ABSENT;

/// Activations of one transformer block.
#[derive(Debug, Default)]
pub(crate) struct LayerCache {
    ln1_xhat: Vec<f64>,
    ln1_rstd: Vec<f64>,
    a1: Vec<f64>,
    pub(crate) qkv: Vec<f64>,
    /// Attention probabilities per head, T×T each, before dropout.
    att: Vec<f64>,
    att_mask: Option<Vec<f64>>,
    y: Vec<f64>,
    proj_mask: Option<Vec<f64>>,
    ln2_xhat: Vec<f64>,
    ln2_rstd: Vec<f64>,
    a2: Vec<f64>,
    h_pre: Vec<f64>,
    h_act: Vec<f64>,
    mlp_mask: Option<Vec<f64>>,
}

#[derive(Debug, Default)]
pub(crate) struct Cache {
    pub(crate) t: usize,
    emb_mask: Option<Vec<f64>>,
    pub(crate) layers: Vec<LayerCache>,
    lnf_xhat: Vec<f64>,
    lnf_rstd: Vec<f64>,
    /// Final normalized hidden states, T×d.
    pub(crate) z: Vec<f64>,
}

fn dropout_mask(len: usize, p: f64, rng: &mut Option<&mut ChaCha8Rng>) -> Option<Vec<f64>> {
    let rng = rng.as_deref_mut()?;
    if p <= 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some((0..len).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect())
}

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, s) in x.iter_mut().zip(m) {
            *v *= s;
        }
    }
}

/// Sum of the five embedding rows at every position.
pub(crate) fn embed(p: &ModelParams, ex: &EncodedExample, positions: std::ops::Range<usize>) -> Vec<f64> {
    let d = p.config.n_embd;
    let l = &p.layout;
    let mut h = vec![0.0; positions.len() * d];
    for (r, t) in positions.enumerate() {
        let row = &mut h[r * d..(r + 1) * d];
        let type_table = if t < ex.n_cloud { l.emb_class } else { l.emb_token };
        let mut add = |table: usize, id: usize| {
            let src = &p.tensor(table)[id * d..(id + 1) * d];
            for (a, b) in row.iter_mut().zip(src) {
                *a += b;
            }
        };
        for axis in 0..3 {
            add(l.emb_xyz[axis], ex.coord_ids[t][axis]);
        }
        add(type_table, ex.type_ids[t]);
        add(l.emb_pos, t);
    }
    h
}

/// Causal multi-head attention for all rows of `qkv`; writes the
/// concatenated head outputs to `y` and the probabilities to `att`.
fn attention(qkv: &[f64], t: usize, d: usize, nh: usize, att: &mut [f64], y: &mut [f64], mask: &Option<Vec<f64>>) {
    let dh = d / nh;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dropped = if mask.is_some() { vec![0.0; t * t] } else { Vec::new() };
    for h in 0..nh {
        let s = &mut att[h * t * t..(h + 1) * t * t];
        let q = View { off: h * dh, rs: 3 * d, cs: 1 };
        let kt = View { off: d + h * dh, rs: 1, cs: 3 * d };
        gemm(t, dh, t, scale, qkv, q, qkv, kt, 0.0, s, View::rows(t));
        for i in 0..t {
            let row = &mut s[i * t..(i + 1) * t];
            softmax_row(&mut row[..=i]);
            row[i + 1..].fill(0.0);
        }
        let v = View { off: 2 * d + h * dh, rs: 3 * d, cs: 1 };
        let out = View { off: h * dh, rs: d, cs: 1 };
        let probs: &[f64] = match mask {
            Some(m) => {
                let m = &m[h * t * t..(h + 1) * t * t];
                for ((o, a), k) in dropped.iter_mut().zip(s.iter()).zip(m) {
                    *o = a * k;
                }
                &dropped
            }
            None => s,
        };
        gemm(t, t, dh, 1.0, probs, View::rows(t), qkv, v, 0.0, y, out);
    }
}

/// Forward pass over a whole sequence. Passing an rng enables dropout.
pub(crate) fn forward(p: &ModelParams, ex: &EncodedExample, mut rng: Option<&mut ChaCha8Rng>) -> Cache {
    let cfg = &p.config;
    let (d, nh, t) = (cfg.n_embd, cfg.n_head, ex.len());
    let eps = cfg.layer_norm_epsilon;
    let mut x = embed(p, ex, 0..t);
    let emb_mask = dropout_mask(t * d, cfg.embd_pdrop, &mut rng);
    apply_mask(&mut x, &emb_mask);
    let mut layers = Vec::with_capacity(cfg.n_layer);
    for b in &p.layout.blocks {
        let mut c = LayerCache::default();
        c.a1 = vec![0.0; t * d];
        layer_norm(&x, d, p.tensor(b.ln1_g), p.tensor(b.ln1_b), eps, &mut c.a1, Some(&mut c.ln1_xhat), Some(&mut c.ln1_rstd));
        c.qkv = vec![0.0; t * 3 * d];
        linear(&c.a1, t, d, p.tensor(b.qkv_w), p.tensor(b.qkv_b), 3 * d, &mut c.qkv);
        c.att = vec![0.0; nh * t * t];
        c.att_mask = dropout_mask(nh * t * t, cfg.attn_pdrop, &mut rng);
        c.y = vec![0.0; t * d];
        attention(&c.qkv, t, d, nh, &mut c.att, &mut c.y, &c.att_mask);
        let mut proj = vec![0.0; t * d];
        linear(&c.y, t, d, p.tensor(b.proj_w), p.tensor(b.proj_b), d, &mut proj);
        c.proj_mask = dropout_mask(t * d, cfg.resid_pdrop, &mut rng);
        apply_mask(&mut proj, &c.proj_mask);
        for (a, v) in x.iter_mut().zip(&proj) {
            *a += v;
        }
        c.a2 = vec![0.0; t * d];
        layer_norm(&x, d, p.tensor(b.ln2_g), p.tensor(b.ln2_b), eps, &mut c.a2, Some(&mut c.ln2_xhat), Some(&mut c.ln2_rstd));
        c.h_pre = vec![0.0; t * 4 * d];
        linear(&c.a2, t, d, p.tensor(b.fc_w), p.tensor(b.fc_b), 4 * d, &mut c.h_pre);
        c.h_act = c.h_pre.iter().map(|&v| gelu(v)).collect();
        let mut out = vec![0.0; t * d];
        linear(&c.h_act, t, 4 * d, p.tensor(b.out_w), p.tensor(b.out_b), d, &mut out);
        c.mlp_mask = dropout_mask(t * d, cfg.resid_pdrop, &mut rng);
        apply_mask(&mut out, &c.mlp_mask);
        for (a, v) in x.iter_mut().zip(&out) {
            *a += v;
        }
        layers.push(c);
    }
    let mut cache = Cache { t, emb_mask, layers, ..Default::default() };
    cache.z = vec![0.0; t * d];
    let l = &p.layout;
    layer_norm(&x, d, p.tensor(l.lnf_g), p.tensor(l.lnf_b), eps, &mut cache.z, Some(&mut cache.lnf_xhat), Some(&mut cache.lnf_rstd));
    cache
}

/// Logits of head `h` for the selected rows of `z`, rows×V.
pub(crate) fn head_logits(p: &ModelParams, z_rows: &[f64], rows: usize, h: usize) -> Vec<f64> {
    let d = p.config.n_embd;
    let v = p.config.head_sizes()[h];
    let mut out = vec![0.0; rows * v];
    gemm(rows, d, v, 1.0, z_rows, View::rows(d), p.tensor(p.layout.heads[h]), View::rows(v), 0.0, &mut out, View::rows(v));
    out
}

fn gather_rows(z: &[f64], d: usize, rows: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * d);
    for &r in rows {
        out.extend_from_slice(&z[r * d..(r + 1) * d]);
    }
    out
}

/// Backward pass from the gradient of the final hidden states.
fn backward(p: &ModelParams, ex: &EncodedExample, cache: &Cache, dz: &[f64], g: &mut [f64]) {
    let cfg = &p.config;
    let (d, nh, t) = (cfg.n_embd, cfg.n_head, cache.t);
    let dh = d / nh;
    let scale = 1.0 / (dh as f64).sqrt();
    let l = &p.layout;
    let mut dx = vec![0.0; t * d];
    {
        let (dgr, dbr) = (l.range(l.lnf_g), l.range(l.lnf_b));
        let (dg, db) = split_two(g, dgr, dbr);
        layer_norm_backward(dz, d, &cache.lnf_xhat, &cache.lnf_rstd, p.tensor(l.lnf_g), dg, db, &mut dx);
    }
    for (b, c) in l.blocks.iter().zip(&cache.layers).rev() {
        // MLP residual branch
        let mut dout = dx.clone();
        apply_mask(&mut dout, &c.mlp_mask);
        let mut dh_act = vec![0.0; t * 4 * d];
        {
            let (dw, db) = split_two(g, l.range(b.out_w), l.range(b.out_b));
            linear_backward(&c.h_act, t, 4 * d, p.tensor(b.out_w), d, &dout, dw, db, &mut dh_act, false);
        }
        for (gv, &x) in dh_act.iter_mut().zip(&c.h_pre) {
            *gv *= gelu_grad(x);
        }
        let mut da2 = vec![0.0; t * d];
        {
            let (dw, db) = split_two(g, l.range(b.fc_w), l.range(b.fc_b));
            linear_backward(&c.a2, t, d, p.tensor(b.fc_w), 4 * d, &dh_act, dw, db, &mut da2, false);
        }
        {
            let (dg, db) = split_two(g, l.range(b.ln2_g), l.range(b.ln2_b));
            layer_norm_backward(&da2, d, &c.ln2_xhat, &c.ln2_rstd, p.tensor(b.ln2_g), dg, db, &mut dx);
        }
        // attention residual branch
        let mut dproj = dx.clone();
        apply_mask(&mut dproj, &c.proj_mask);
        let mut dy = vec![0.0; t * d];
        {
            let (dw, db) = split_two(g, l.range(b.proj_w), l.range(b.proj_b));
            linear_backward(&c.y, t, d, p.tensor(b.proj_w), d, &dproj, dw, db, &mut dy, false);
        }
        let mut dqkv = vec![0.0; t * 3 * d];
        let mut dp = vec![0.0; t * t];
        let mut dropped = if c.att_mask.is_some() { vec![0.0; t * t] } else { Vec::new() };
        for h in 0..nh {
            let probs = &c.att[h * t * t..(h + 1) * t * t];
            let dyv = View { off: h * dh, rs: d, cs: 1 };
            let vt = View { off: 2 * d + h * dh, rs: 1, cs: 3 * d };
            gemm(t, dh, t, 1.0, &dy, dyv, &c.qkv, vt, 0.0, &mut dp, View::rows(t));
            let used: &[f64] = match &c.att_mask {
                Some(m) => {
                    let m = &m[h * t * t..(h + 1) * t * t];
                    for ((o, a), k) in dropped.iter_mut().zip(probs).zip(m) {
                        *o = a * k;
                    }
                    for (g, k) in dp.iter_mut().zip(m) {
                        *g *= k;
                    }
                    &dropped
                }
                None => probs,
            };
            let dv = View { off: 2 * d + h * dh, rs: 3 * d, cs: 1 };
            gemm(t, t, dh, 1.0, used, View::t(t), &dy, dyv, 0.0, &mut dqkv, dv);
            // softmax backward, in place: dS = P ∘ (dP − rowsum(P ∘ dP))
            for i in 0..t {
                let pr = &probs[i * t..(i + 1) * t];
                let gr = &mut dp[i * t..(i + 1) * t];
                let dot: f64 = pr[..=i].iter().zip(&gr[..=i]).map(|(a, b)| a * b).sum();
                for j in 0..=i {
                    gr[j] = pr[j] * (gr[j] - dot);
                }
                gr[i + 1..].fill(0.0);
            }
            let q = View { off: h * dh, rs: 3 * d, cs: 1 };
            let k = View { off: d + h * dh, rs: 3 * d, cs: 1 };
            gemm(t, t, dh, scale, &dp, View::rows(t), &c.qkv, k, 0.0, &mut dqkv, q);
            gemm(t, t, dh, scale, &dp, View::t(t), &c.qkv, q, 0.0, &mut dqkv, k);
        }
        let mut da1 = vec![0.0; t * d];
        {
            let (dw, db) = split_two(g, l.range(b.qkv_w), l.range(b.qkv_b));
            linear_backward(&c.a1, t, d, p.tensor(b.qkv_w), 3 * d, &dqkv, dw, db, &mut da1, false);
        }
        {
            let (dg, db) = split_two(g, l.range(b.ln1_g), l.range(b.ln1_b));
            layer_norm_backward(&da1, d, &c.ln1_xhat, &c.ln1_rstd, p.tensor(b.ln1_g), dg, db, &mut dx);
        }
    }
    apply_mask(&mut dx, &cache.emb_mask);
    for pos in 0..t {
        let row = &dx[pos * d..(pos + 1) * d];
        let type_table = if pos < ex.n_cloud { l.emb_class } else { l.emb_token };
        let mut add = |table: usize, id: usize| {
            let off = l.tensors[table].offset + id * d;
            for (a, b) in g[off..off + d].iter_mut().zip(row) {
                *a += b;
            }
        };
        for axis in 0..3 {
            add(l.emb_xyz[axis], ex.coord_ids[pos][axis]);
        }
        add(type_table, ex.type_ids[pos]);
        add(l.emb_pos, pos);
    }
}

/// Two disjoint mutable sub-slices of the gradient vector.
fn split_two(g: &mut [f64], a: std::ops::Range<usize>, b: std::ops::Range<usize>) -> (&mut [f64], &mut [f64]) {
    assert!(a.end <= b.start, "tensors are laid out in order");
    let (lo, hi) = g.split_at_mut(b.start);
    (&mut lo[a], &mut hi[..b.end - b.start])
}

/// Loss summary for a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Sum over heads of each head's mean cross-entropy.
    pub total: f64,
    pub per_head: [f64; 7],
    /// Unmasked targets per head.
    pub counts: [usize; 7],
}

/// Loss over a batch and, when `grads` is given, its gradient (added into
/// `grads`). Passing an rng enables dropout.
pub fn loss_and_grad(
    p: &ModelParams,
    batch: &EncodedBatch,
    mut rng: Option<&mut ChaCha8Rng>,
    mut grads: Option<&mut [f64]>,
) -> Result<LossReport, ModelError> {
    let mut counts = [0usize; 7];
    for ex in &batch.examples {
        ex.check(&p.config)?;
        for t in &ex.targets {
            for h in 0..7 {
                counts[h] += (t[h] != ABSENT) as usize;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(ModelError::EmptyBatch);
    }
    let d = p.config.n_embd;
    let sizes = p.config.head_sizes();
    let mut per_head = [0.0; 7];
    for ex in &batch.examples {
        let cache = forward(p, ex, rng.as_deref_mut());
        let rows = ex.target_rows();
        if rows.is_empty() {
            continue;
        }
        let zr = gather_rows(&cache.z, d, &rows);
        let mut dzr = vec![0.0; rows.len() * d];
        for h in 0..7 {
            if counts[h] == 0 {
                continue;
            }
            let v = sizes[h];
            let mut logits = head_logits(p, &zr, rows.len(), h);
            let norm = 1.0 / counts[h] as f64;
            let mut any = false;
            for (r, &pos) in rows.iter().enumerate() {
                let target = ex.targets[pos][h];
                let row = &mut logits[r * v..(r + 1) * v];
                if target == ABSENT {
                    row.fill(0.0);
                    continue;
                }
                any = true;
                let target = target as usize;
                let raw = row[target];
                let lse = softmax_row(row);
                per_head[h] += (lse - raw) * norm;
                row[target] -= 1.0;
                for x in row.iter_mut() {
                    *x *= norm;
                }
            }
            if let (Some(g), true) = (grads.as_deref_mut(), any) {
                let w = p.layout.range(p.layout.heads[h]);
                gemm(d, rows.len(), v, 1.0, &zr, View::t(d), &logits, View::rows(v), 1.0, &mut g[w], View::rows(v));
                gemm(rows.len(), v, d, 1.0, &logits, View::rows(v), p.tensor(p.layout.heads[h]), View::t(v), 1.0, &mut dzr, View::rows(d));
            }
        }
        if let Some(g) = grads.as_deref_mut() {
            let mut dz = vec![0.0; cache.t * d];
            for (r, &pos) in rows.iter().enumerate() {
                dz[pos * d..(pos + 1) * d].copy_from_slice(&dzr[r * d..(r + 1) * d]);
            }
            backward(p, ex, &cache, &dz, g);
        }
    }
    let total = per_head.iter().sum();
    if !f64::is_finite(total) {
        return Err(ModelError::NonFinite("loss".into()));
    }
    Ok(LossReport { total, per_head, counts })
}

/// Logits of all seven heads at every position (evaluation mode).
pub fn forward_logits(p: &ModelParams, ex: &EncodedExample) -> Result<Vec<Vec<f64>>, ModelError> {
    ex.check(&p.config)?;
    let cache = forward(p, ex, None);
    Ok((0..7).map(|h| head_logits(p, &cache.z, cache.t, h)).collect())
}
