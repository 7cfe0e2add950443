use serde::{Deserialize, Serialize};

use super::ModelError;

/// Transformer shape and regularization. Field names follow the GPT-2
/// configuration vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_layer: usize,
    pub n_head: usize,
    pub n_embd: usize,
    /// Maximum positions: point cloud plus molecule tokens.
    pub n_ctx: usize,
    /// FSMILES token table and token head.
    pub input_vocab_size: usize,
    /// Per-axis coordinate tables and heads.
    pub input_dist_size: usize,
    pub num_bond_leng: usize,
    pub num_bond_ang: usize,
    pub num_dih_ang: usize,
    pub num_point_class: usize,
    pub resid_pdrop: f64,
    pub embd_pdrop: f64,
    pub attn_pdrop: f64,
    pub initializer_range: f64,
    pub layer_norm_epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::toy()
    }
}

impl ModelConfig {
    /// Small model that trains on one CPU core in minutes.
    pub fn toy() -> Self {
        ModelConfig {
            n_layer: 2,
            n_head: 4,
            n_embd: 64,
            n_ctx: 256,
            input_vocab_size: 300,
            input_dist_size: 300,
            num_bond_leng: 200,
            num_bond_ang: 200,
            num_dih_ang: 200,
            num_point_class: 4,
            resid_pdrop: 0.0,
            embd_pdrop: 0.0,
            attn_pdrop: 0.0,
            initializer_range: 0.02,
            layer_norm_epsilon: 1e-5,
        }
    }

    /// GPT-medium scale configuration.
    pub fn large() -> Self {
        ModelConfig {
            n_layer: 24,
            n_head: 16,
            n_embd: 1024,
            n_ctx: 1024,
            resid_pdrop: 0.1,
            embd_pdrop: 0.1,
            attn_pdrop: 0.1,
            ..ModelConfig::toy()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "toy" => Some(Self::toy()),
            "large" => Some(Self::large()),
            _ => None,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.n_embd / self.n_head
    }

    /// Output sizes of the seven heads: token, x, y, z, l, theta, phi.
    pub fn head_sizes(&self) -> [usize; 7] {
        let d = self.input_dist_size;
        [self.input_vocab_size, d, d, d, self.num_bond_leng, self.num_bond_ang, self.num_dih_ang]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.n_layer == 0 || self.n_head == 0 || self.n_embd == 0 || self.n_ctx == 0 {
            return bad("n_layer, n_head, n_embd and n_ctx must be positive");
        }
        if self.n_embd % self.n_head != 0 {
            return bad("n_embd must be divisible by n_head");
        }
        if self.head_sizes().contains(&0) || self.num_point_class == 0 {
            return bad("vocabulary sizes must be positive");
        }
        if self.input_vocab_size < crate::fsmiles::Vocab::get().len() {
            return bad("input_vocab_size is smaller than the FSMILES vocabulary");
        }
        for p in [self.resid_pdrop, self.embd_pdrop, self.attn_pdrop] {
            if !(0.0..1.0).contains(&p) {
                return bad("dropout rates must lie in [0, 1)");
            }
        }
        if !(self.initializer_range >= 0.0) || !(self.layer_norm_epsilon > 0.0) {
            return bad("initializer_range must be >= 0 and layer_norm_epsilon > 0");
        }
        Ok(())
    }
}
