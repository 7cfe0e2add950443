use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError};

/// One named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorClass {
    Embedding,
    LayerNormGain,
    LayerNormBias,
    AttentionWeight,
    AttentionBias,
    MlpWeight,
    MlpBias,
    Head,
}

impl TensorInfo {
    pub fn class(&self) -> TensorClass {
        let n = self.name.as_str();
        let last = n.rsplit('.').next().unwrap_or("");
        if n.starts_with("emb.") {
            TensorClass::Embedding
        } else if n.starts_with("head.") {
            TensorClass::Head
        } else if n.contains(".ln") || n.starts_with("ln_f") {
            if last == "g" {
                TensorClass::LayerNormGain
            } else {
                TensorClass::LayerNormBias
            }
        } else if n.contains(".attn.") {
            if last == "w" {
                TensorClass::AttentionWeight
            } else {
                TensorClass::AttentionBias
            }
        } else if last == "w" {
            TensorClass::MlpWeight
        } else {
            TensorClass::MlpBias
        }
    }

    /// Whether weight decay applies: matrices of linear maps and heads.
    pub fn decays(&self) -> bool {
        matches!(self.class(), TensorClass::AttentionWeight | TensorClass::MlpWeight | TensorClass::Head)
    }
}

/// Tensor indices of one transformer block.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockIdx {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub qkv_w: usize,
    pub qkv_b: usize,
    pub proj_w: usize,
    pub proj_b: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub fc_w: usize,
    pub fc_b: usize,
    pub out_w: usize,
    pub out_b: usize,
}

/// Names, shapes and offsets of every tensor, in checkpoint order.
#[derive(Debug, Clone)]
pub struct Layout {
    pub tensors: Vec<TensorInfo>,
    pub total: usize,
    pub(crate) emb_xyz: [usize; 3],
    pub(crate) emb_token: usize,
    pub(crate) emb_class: usize,
    pub(crate) emb_pos: usize,
    pub(crate) blocks: Vec<BlockIdx>,
    pub(crate) lnf_g: usize,
    pub(crate) lnf_b: usize,
    pub(crate) heads: [usize; 7],
}

pub const HEAD_NAMES: [&str; 7] = ["token", "x", "y", "z", "l", "theta", "phi"];

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Layout {
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>| {
            let len = shape.iter().product();
            tensors.push(TensorInfo { name, shape, offset: total, len });
            total += len;
            tensors.len() - 1
        };
        let d = cfg.n_embd;
        let emb_xyz = ["x", "y", "z"].map(|a| add(format!("emb.{a}"), vec![cfg.input_dist_size, d]));
        let emb_token = add("emb.token".into(), vec![cfg.input_vocab_size, d]);
        let emb_class = add("emb.class".into(), vec![cfg.num_point_class, d]);
        let emb_pos = add("emb.pos".into(), vec![cfg.n_ctx, d]);
        let blocks = (0..cfg.n_layer)
            .map(|i| BlockIdx {
                ln1_g: add(format!("h{i}.ln1.g"), vec![d]),
                ln1_b: add(format!("h{i}.ln1.b"), vec![d]),
                qkv_w: add(format!("h{i}.attn.qkv.w"), vec![d, 3 * d]),
                qkv_b: add(format!("h{i}.attn.qkv.b"), vec![3 * d]),
                proj_w: add(format!("h{i}.attn.proj.w"), vec![d, d]),
                proj_b: add(format!("h{i}.attn.proj.b"), vec![d]),
                ln2_g: add(format!("h{i}.ln2.g"), vec![d]),
                ln2_b: add(format!("h{i}.ln2.b"), vec![d]),
                fc_w: add(format!("h{i}.mlp.fc.w"), vec![d, 4 * d]),
                fc_b: add(format!("h{i}.mlp.fc.b"), vec![4 * d]),
                out_w: add(format!("h{i}.mlp.proj.w"), vec![4 * d, d]),
                out_b: add(format!("h{i}.mlp.proj.b"), vec![d]),
            })
            .collect();
        let lnf_g = add("ln_f.g".into(), vec![d]);
        let lnf_b = add("ln_f.b".into(), vec![d]);
        let sizes = cfg.head_sizes();
        let heads = std::array::from_fn(|h| add(format!("head.{}", HEAD_NAMES[h]), vec![d, sizes[h]]));
        Layout {
            tensors,
            total,
            emb_xyz,
            emb_token,
            emb_class,
            emb_pos,
            blocks,
            lnf_g,
            lnf_b,
            heads,
        }
    }

    pub fn range(&self, t: usize) -> std::ops::Range<usize> {
        let info = &self.tensors[t];
        info.offset..info.offset + info.len
    }
}

/// All model weights in one flat vector.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.data.iter().map(|v| v.to_bits()).eq(other.data.iter().map(|v| v.to_bits()))
    }
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let layout = Layout::new(config);
        let data = vec![0.0; layout.total];
        Ok(ModelParams {
            config: config.clone(),
            layout,
            data,
        })
    }

    /// GPT-2 style initialization: normal weights with standard deviation
    /// `initializer_range`, zero biases, unit LayerNorm gains. Output heads
    /// start at zero so every head begins at the uniform distribution.
    /// Values are rounded to f32, the storage precision.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, config.initializer_range).map_err(|e| ModelError::Config(e.to_string()))?;
        for t in 0..p.layout.tensors.len() {
            let class = p.layout.tensors[t].class();
            let r = p.layout.range(t);
            match class {
                TensorClass::Embedding | TensorClass::AttentionWeight | TensorClass::MlpWeight => {
                    for v in &mut p.data[r] {
                        *v = normal.sample(&mut rng);
                    }
                }
                TensorClass::LayerNormGain => p.data[r].fill(1.0),
                _ => {}
            }
        }
        p.round_to_f32();
        Ok(p)
    }

    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }

    pub fn tensor(&self, t: usize) -> &[f64] {
        &self.data[self.layout.range(t)]
    }

    pub fn tensor_by_name(&self, name: &str) -> Option<&[f64]> {
        let t = self.layout.tensors.iter().position(|i| i.name == name)?;
        Some(self.tensor(t))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
