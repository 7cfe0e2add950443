//! Incremental decoding with cached keys and values.

use super::forward::head_logits;
use super::linalg::{gelu, gemm, layer_norm, linear, softmax_row, View};
use super::{EncodedExample, ModelError, ModelParams};

/// Logits of the seven heads at one position.
pub type HeadLogits = [Vec<f64>; 7];

/// Decoder state after consuming a prefix of positions.
pub struct InferenceState<'a> {
    params: &'a ModelParams,
    n_cloud: usize,
    len: usize,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    last_z: Vec<f64>,
}

impl<'a> InferenceState<'a> {
    /// Starts a sequence whose first `n_cloud` positions are point-cloud
    /// points.
    pub fn new(params: &'a ModelParams, n_cloud: usize) -> Self {
        let n = params.config.n_layer;
        InferenceState {
            params,
            n_cloud,
            len: 0,
            keys: vec![Vec::new(); n],
            values: vec![Vec::new(); n],
            last_z: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Appends one position: a point class id while inside the cloud
    /// segment, a token id afterwards.
    pub fn push(&mut self, type_id: usize, coord_ids: [usize; 3]) -> Result<(), ModelError> {
        let p = self.params;
        let cfg = &p.config;
        let t = self.len;
        if t >= cfg.n_ctx {
            return Err(ModelError::Context { len: t + 1, n_ctx: cfg.n_ctx });
        }
        let type_limit = if t < self.n_cloud { cfg.num_point_class } else { cfg.input_vocab_size };
        if type_id >= type_limit || coord_ids.iter().any(|&c| c >= cfg.input_dist_size) {
            return Err(ModelError::Index { position: t });
        }
        let (d, nh) = (cfg.n_embd, cfg.n_head);
        let dh = d / nh;
        let scale = 1.0 / (dh as f64).sqrt();
        let eps = cfg.layer_norm_epsilon;
        // a one-position example reuses the embedding code
        let ex = EncodedExample {
            n_cloud: self.n_cloud,
            type_ids: vec![0; t + 1],
            coord_ids: vec![[0; 3]; t + 1],
            targets: Vec::new(),
        };
        let mut ex = ex;
        ex.type_ids[t] = type_id;
        ex.coord_ids[t] = coord_ids;
        let mut x = super::forward::embed(p, &ex, t..t + 1);
        let mut a = vec![0.0; d];
        let mut qkv = vec![0.0; 3 * d];
        let mut y = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        let mut hid = vec![0.0; 4 * d];
        let mut scores = vec![0.0; t + 1];
        for (li, b) in p.layout.blocks.iter().enumerate() {
            layer_norm(&x, d, p.tensor(b.ln1_g), p.tensor(b.ln1_b), eps, &mut a, None, None);
            linear(&a, 1, d, p.tensor(b.qkv_w), p.tensor(b.qkv_b), 3 * d, &mut qkv);
            self.keys[li].extend_from_slice(&qkv[d..2 * d]);
            self.values[li].extend_from_slice(&qkv[2 * d..]);
            let (keys, values) = (&self.keys[li], &self.values[li]);
            for h in 0..nh {
                let kt = View { off: h * dh, rs: 1, cs: d };
                gemm(1, dh, t + 1, scale, &qkv, View::rows(dh).at(h * dh), keys, kt, 0.0, &mut scores, View::rows(t + 1));
                softmax_row(&mut scores);
                let v = View { off: h * dh, rs: d, cs: 1 };
                gemm(1, t + 1, dh, 1.0, &scores, View::rows(t + 1), values, v, 0.0, &mut y, View::rows(dh).at(h * dh));
            }
            linear(&y, 1, d, p.tensor(b.proj_w), p.tensor(b.proj_b), d, &mut tmp);
            for (xv, v) in x.iter_mut().zip(&tmp) {
                *xv += v;
            }
            layer_norm(&x, d, p.tensor(b.ln2_g), p.tensor(b.ln2_b), eps, &mut a, None, None);
            linear(&a, 1, d, p.tensor(b.fc_w), p.tensor(b.fc_b), 4 * d, &mut hid);
            for v in hid.iter_mut() {
                *v = gelu(*v);
            }
            linear(&hid, 1, 4 * d, p.tensor(b.out_w), p.tensor(b.out_b), d, &mut tmp);
            for (xv, v) in x.iter_mut().zip(&tmp) {
                *xv += v;
            }
        }
        let l = &p.layout;
        let mut z = vec![0.0; d];
        layer_norm(&x, d, p.tensor(l.lnf_g), p.tensor(l.lnf_b), eps, &mut z, None, None);
        self.last_z = z;
        self.len += 1;
        Ok(())
    }

    /// Head logits at the most recent position.
    pub fn logits(&self) -> HeadLogits {
        assert!(self.len > 0, "no position pushed yet");
        std::array::from_fn(|h| head_logits(self.params, &self.last_z, 1, h))
    }
}
