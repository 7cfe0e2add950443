use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::loss_and_grad;
use super::optim::{clip_grad_norm, AdamW, Schedule};
use super::{EncodedBatch, EncodedExample, ModelConfig, ModelError, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    /// Final learning rate as a fraction of the base rate.
    pub min_lr_ratio: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Global gradient-norm limit; 0 disables clipping.
    pub grad_clip: f64,
    /// Checkpoint interval in steps; 0 keeps only the final parameters.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::toy()
    }
}

impl TrainConfig {
    pub fn toy() -> Self {
        TrainConfig {
            steps: 3000,
            batch_size: 4,
            learning_rate: 3e-4,
            warmup_steps: 100,
            min_lr_ratio: 0.1,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grad_clip: 1.0,
            checkpoint_every: 0,
        }
    }

    pub fn large() -> Self {
        TrainConfig {
            batch_size: 96,
            learning_rate: 1e-5,
            warmup_steps: 1000,
            ..TrainConfig::toy()
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            base: self.learning_rate,
            warmup: self.warmup_steps,
            total: self.steps,
            min_ratio: self.min_lr_ratio,
        }
    }
}

/// Record of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStep {
    pub step: usize,
    pub loss: f64,
    pub per_head: [f64; 7],
    pub lr: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub steps: Vec<TrainStep>,
}

impl TrainLog {
    /// `step,loss` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss\n");
        for r in &self.steps {
            s.push_str(&format!("{},{}\n", r.step, r.loss));
        }
        s
    }
}

/// Trains from a fresh initialization. Batches walk a per-epoch shuffle;
/// initialization, shuffling and dropout each draw from their own stream of
/// the seeded generator, so the result depends only on the inputs.
/// `on_step` sees every step, with the parameters after the update.
pub fn train(
    data: &[EncodedExample],
    model: &ModelConfig,
    cfg: &TrainConfig,
    seed: u64,
    on_step: &mut dyn FnMut(&TrainStep, &ModelParams),
) -> Result<(ModelParams, TrainLog), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(ModelError::Config("batch_size must be positive".into()));
    }
    for ex in data {
        ex.check(model)?;
    }
    let mut params = ModelParams::init(model, seed)?;
    let mut opt = AdamW::new(&params, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
    let schedule = cfg.schedule();
    let mut shuffle = ChaCha8Rng::seed_from_u64(seed);
    shuffle.set_stream(1);
    let mut dropout = ChaCha8Rng::seed_from_u64(seed);
    dropout.set_stream(2);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut grads = vec![0.0; params.data.len()];
    let mut log = TrainLog::default();
    for step in 1..=cfg.steps {
        let mut batch = EncodedBatch::default();
        while batch.examples.len() < cfg.batch_size.min(data.len()) {
            if cursor == order.len() {
                order = (0..data.len()).collect();
                order.shuffle(&mut shuffle);
                cursor = 0;
            }
            batch.examples.push(data[order[cursor]].clone());
            cursor += 1;
        }
        grads.fill(0.0);
        let report = loss_and_grad(&params, &batch, Some(&mut dropout), Some(&mut grads))?;
        if !report.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(ModelError::NonFinite(format!("loss or gradient at step {step}")));
        }
        let grad_norm = clip_grad_norm(&mut grads, cfg.grad_clip);
        let lr = schedule.lr(step);
        opt.update(&mut params, &grads, lr);
        let rec = TrainStep {
            step,
            loss: report.total,
            per_head: report.per_head,
            lr,
            grad_norm,
        };
        on_step(&rec, &params);
        log.steps.push(rec);
    }
    Ok((params, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (ModelConfig, Vec<EncodedExample>) {
        let model = ModelConfig { n_layer: 1, n_head: 2, n_embd: 16, n_ctx: 32, ..ModelConfig::toy() };
        let seq = crate::encoding::EncodedSequence {
            tokens: vec![1, 4, 36, 2],
            coords: vec![[-1; 3], [150, 150, 150], [160, 150, 151], [-1; 3]],
            geom: vec![[-1; 3], [-1; 3], [14, -1, -1], [-1; 3]],
        };
        let ex = EncodedExample::new(&[(1, [149, 150, 151]), (0, [152, 150, 150])], &seq);
        (model, vec![ex])
    }

    #[test]
    fn loss_decreases_and_runs_repeat() {
        let (model, data) = tiny();
        let cfg = TrainConfig { steps: 60, warmup_steps: 5, learning_rate: 3e-3, ..TrainConfig::toy() };
        let (p1, log1) = train(&data, &model, &cfg, 3, &mut |_, _| {}).unwrap();
        let (p2, log2) = train(&data, &model, &cfg, 3, &mut |_, _| {}).unwrap();
        assert!(p1 == p2);
        assert_eq!(log1.to_csv(), log2.to_csv());
        assert!(log1.steps[59].loss < 0.5 * log1.steps[0].loss);
        assert!(log1.to_csv().starts_with("step,loss\n1,"));
    }

    #[test]
    fn rejects_empty_and_overlong() {
        let (model, data) = tiny();
        assert!(matches!(train(&[], &model, &TrainConfig::toy(), 0, &mut |_, _| {}), Err(ModelError::EmptyDataset)));
        let short = ModelConfig { n_ctx: 4, ..model };
        assert!(matches!(train(&data, &short, &TrainConfig::toy(), 0, &mut |_, _| {}), Err(ModelError::Context { .. })));
    }
}
