use super::ModelParams;

/// Linear warmup to `base`, then cosine decay to `min_ratio·base` at
/// `total` steps. Steps count from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub base: f64,
    pub warmup: usize,
    pub total: usize,
    pub min_ratio: f64,
}

impl Schedule {
    pub fn lr(&self, step: usize) -> f64 {
        if step < self.warmup {
            return self.base * step as f64 / self.warmup as f64;
        }
        let span = self.total.saturating_sub(self.warmup).max(1);
        let progress = ((step - self.warmup) as f64 / span as f64).min(1.0);
        let min = self.base * self.min_ratio;
        min + (self.base - min) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

/// Adam with decoupled weight decay. Moments stay in f64; parameters are
/// rounded to f32 after every update so checkpoints are lossless.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: usize,
    m: Vec<f64>,
    v: Vec<f64>,
    decay: Vec<bool>,
}

impl AdamW {
    pub fn new(params: &ModelParams, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        let mut decay = vec![false; params.data.len()];
        for (t, info) in params.layout.tensors.iter().enumerate() {
            if info.decays() {
                decay[params.layout.range(t)].fill(true);
            }
        }
        AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
            step: 0,
            m: vec![0.0; params.data.len()],
            v: vec![0.0; params.data.len()],
            decay,
        }
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..grads.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            let mut p = params.data[i];
            if self.decay[i] {
                p -= lr * self.weight_decay * p;
            }
            p -= lr * mhat / (vhat.sqrt() + self.eps);
            params.data[i] = p as f32 as f64;
        }
    }
}

/// Scales `grads` to global norm at most `max_norm`; returns the norm
/// before clipping.
pub(crate) fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn warmup_then_cosine() {
        let s = Schedule { base: 1e-3, warmup: 100, total: 1100, min_ratio: 0.1 };
        assert_eq!(s.lr(50), 1e-3 * 50.0 / 100.0);
        assert_eq!(s.lr(100), 1e-3);
        assert!((s.lr(600) - 0.55e-3).abs() < 1e-15);
        assert!((s.lr(1100) - 1e-4).abs() < 1e-15);
        assert!((s.lr(5000) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let cfg = ModelConfig { n_layer: 1, n_embd: 8, n_head: 2, n_ctx: 4, ..ModelConfig::toy() };
        let mut p = ModelParams::zeros(&cfg).unwrap();
        let mut opt = AdamW::new(&p, 0.9, 0.999, 1e-8, 0.0);
        let mut g = vec![0.0; p.data.len()];
        g[0] = 3.0;
        g[1] = -0.5;
        opt.update(&mut p, &g, 0.01);
        assert!((p.data[0] + 0.01).abs() < 1e-8);
        assert!((p.data[1] - 0.01).abs() < 1e-8);
        assert_eq!(p.data[2], 0.0);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }
}
