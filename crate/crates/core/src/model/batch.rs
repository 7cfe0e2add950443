use crate::encoding::{EncodedSequence, ABSENT};
use crate::geom::LatticePoint;

use super::{ModelConfig, ModelError};

/// Targets per position for the seven heads; [`ABSENT`] masks a head.
pub type Targets = [i32; 7];

/// One training sequence: the point cloud segment followed by the molecule
/// segment. Position `t` of the molecule segment predicts token `t + 1`
/// together with its coordinates and geometry bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedExample {
    pub n_cloud: usize,
    /// Point class ids for cloud positions, token ids for molecule positions.
    pub type_ids: Vec<usize>,
    pub coord_ids: Vec<[usize; 3]>,
    pub targets: Vec<Targets>,
}

#[derive(Debug, Clone, Default)]
pub struct EncodedBatch {
    pub examples: Vec<EncodedExample>,
}

fn coord_ids(q: [i32; 3]) -> [usize; 3] {
    // non-atom tokens use the pad coordinate id
    q.map(|v| if v == ABSENT { 0 } else { v as usize })
}

impl EncodedExample {
    pub fn new(cloud: &[(usize, LatticePoint)], seq: &EncodedSequence) -> Self {
        let n_cloud = cloud.len();
        let total = n_cloud + seq.len();
        let mut ex = EncodedExample {
            n_cloud,
            type_ids: Vec::with_capacity(total),
            coord_ids: Vec::with_capacity(total),
            targets: vec![[ABSENT; 7]; total],
        };
        for &(class, q) in cloud {
            ex.type_ids.push(class);
            ex.coord_ids.push(coord_ids(q));
        }
        for i in 0..seq.len() {
            ex.type_ids.push(seq.tokens[i] as usize);
            ex.coord_ids.push(coord_ids(seq.coords[i]));
            if i + 1 < seq.len() {
                let c = seq.coords[i + 1];
                let g = seq.geom[i + 1];
                ex.targets[n_cloud + i] = [seq.tokens[i + 1] as i32, c[0], c[1], c[2], g[0], g[1], g[2]];
            }
        }
        ex
    }

    pub fn len(&self) -> usize {
        self.type_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.type_ids.is_empty()
    }

    /// Positions with at least one unmasked head.
    pub fn target_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&t| self.targets[t].iter().any(|&v| v != ABSENT)).collect()
    }

    pub fn check(&self, cfg: &ModelConfig) -> Result<(), ModelError> {
        if self.len() > cfg.n_ctx {
            return Err(ModelError::Context { len: self.len(), n_ctx: cfg.n_ctx });
        }
        let sizes = cfg.head_sizes();
        for t in 0..self.len() {
            let type_limit = if t < self.n_cloud { cfg.num_point_class } else { cfg.input_vocab_size };
            let ok = self.type_ids[t] < type_limit
                && self.coord_ids[t].iter().all(|&c| c < cfg.input_dist_size)
                && self.targets[t].iter().zip(sizes).all(|(&v, n)| v == ABSENT || (0..n as i32).contains(&v));
            if !ok {
                return Err(ModelError::Index { position: t });
            }
        }
        Ok(())
    }
}
