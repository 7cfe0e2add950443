use std::time::Instant;

use edmol_core::model::{
    forward_logits, loss_and_grad, EncodedBatch, EncodedExample, InferenceState, ModelConfig, ModelParams,
    TensorClass,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config(dropout: f64) -> ModelConfig {
    ModelConfig {
        n_layer: 2,
        n_head: 2,
        n_embd: 16,
        n_ctx: 40,
        input_vocab_size: 90,
        input_dist_size: 30,
        num_bond_leng: 20,
        num_bond_ang: 19,
        num_dih_ang: 37,
        resid_pdrop: dropout,
        embd_pdrop: dropout,
        attn_pdrop: dropout,
        ..ModelConfig::toy()
    }
}

fn random_example(cfg: &ModelConfig, rng: &mut ChaCha8Rng, n_cloud: usize, n_mol: usize) -> EncodedExample {
    let sizes = cfg.head_sizes();
    let total = n_cloud + n_mol;
    let mut ex = EncodedExample {
        n_cloud,
        type_ids: Vec::new(),
        coord_ids: Vec::new(),
        targets: vec![[-1; 7]; total],
    };
    for t in 0..total {
        let limit = if t < n_cloud { cfg.num_point_class } else { cfg.input_vocab_size };
        ex.type_ids.push(rng.gen_range(0..limit));
        ex.coord_ids.push([0; 3].map(|_| rng.gen_range(0..cfg.input_dist_size)));
        if t >= n_cloud && t + 1 < total {
            for h in 0..7 {
                if h == 0 || rng.gen_bool(0.7) {
                    ex.targets[t][h] = rng.gen_range(0..sizes[h]) as i32;
                }
            }
        }
    }
    ex
}

/// Parameters with every tensor randomized, heads included, so that every
/// gradient path is exercised.
fn random_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::zeros(cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..p.layout.tensors.len() {
        let class = p.layout.tensors[t].class();
        for v in &mut p.data[p.layout.range(t)] {
            *v = match class {
                TensorClass::LayerNormGain => 1.0 + rng.gen_range(-0.3..0.3),
                _ => rng.gen_range(-0.3..0.3),
            };
        }
    }
    p
}

fn loss_at(p: &ModelParams, batch: &EncodedBatch, dropout_seed: Option<u64>) -> f64 {
    let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    loss_and_grad(p, batch, rng.as_mut(), None).unwrap().total
}

fn gradcheck(dropout: f64) -> f64 {
    let cfg = small_config(dropout);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let batch = EncodedBatch {
        examples: vec![random_example(&cfg, &mut rng, 5, 9), random_example(&cfg, &mut rng, 5, 7)],
    };
    let mut p = random_params(&cfg, 5);
    let seed = (dropout > 0.0).then_some(99);
    let mut grads = vec![0.0; p.data.len()];
    let mut drng = seed.map(ChaCha8Rng::seed_from_u64);
    loss_and_grad(&p, &batch, drng.as_mut(), Some(&mut grads)).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut classes = std::collections::HashSet::new();
    for t in 0..p.layout.tensors.len() {
        let info = p.layout.tensors[t].clone();
        classes.insert(info.class());
        // the largest-gradient entries of each tensor, plus random ones
        let r = p.layout.range(t);
        let mut idx: Vec<usize> = r.clone().collect();
        idx.sort_by(|&a, &b| grads[b].abs().total_cmp(&grads[a].abs()));
        let mut picks: Vec<usize> = idx.iter().take(2).copied().collect();
        for _ in 0..2 {
            picks.push(rng.gen_range(r.clone()));
        }
        for i in picks {
            let orig = p.data[i];
            p.data[i] = orig + h;
            let up = loss_at(&p, &batch, seed);
            p.data[i] = orig - h;
            let down = loss_at(&p, &batch, seed);
            p.data[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[i];
            let scale = analytic.abs().max(numeric.abs());
            if scale < 1e-7 {
                // both vanish: the entry does not influence this batch
                assert!((analytic - numeric).abs() < 1e-9, "{} [{i}]: {analytic} vs {numeric}", info.name);
                continue;
            }
            let rel = (analytic - numeric).abs() / scale;
            assert!(rel < 1e-4, "{} [{}]: analytic {analytic} numeric {numeric} rel {rel}", info.name, i - info.offset);
            worst = worst.max(rel);
        }
    }
    assert_eq!(classes.len(), 8);
    worst
}

#[test]
fn gradient_check_all_tensor_classes() {
    let t0 = Instant::now();
    let worst = gradcheck(0.0);
    eprintln!("gradient check: worst relative error {worst:.2e}");
    assert!(t0.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn gradient_check_with_fixed_dropout_masks() {
    gradcheck(0.1);
}

#[test]
fn untrained_loss_is_sum_of_log_vocab_sizes() {
    let cfg = ModelConfig::toy();
    let p = ModelParams::init(&cfg, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ex = random_example(&cfg, &mut rng, 12, 20);
    for t in &mut ex.targets {
        if t[0] >= 0 {
            t.iter_mut().for_each(|v| *v = v.abs());
        }
    }
    let report = loss_and_grad(&p, &EncodedBatch { examples: vec![ex] }, None, None).unwrap();
    let expected: f64 = cfg.head_sizes().iter().map(|&v| (v as f64).ln()).sum();
    assert!((report.total - expected).abs() < 1e-6, "{} vs {expected}", report.total);
}

#[test]
fn causality_is_bit_exact() {
    let cfg = small_config(0.0);
    let p = random_params(&cfg, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ex = random_example(&cfg, &mut rng, 6, 12);
    let base = forward_logits(&p, &ex).unwrap();
    for t in [0, 5, 9, 17] {
        let mut other = ex.clone();
        other.type_ids[t] = (other.type_ids[t] + 1) % if t < 6 { 4 } else { 90 };
        other.coord_ids[t][1] = (other.coord_ids[t][1] + 7) % 30;
        let changed = forward_logits(&p, &other).unwrap();
        for h in 0..7 {
            let v = cfg.head_sizes()[h];
            assert_eq!(base[h][..t * v].iter().map(|x| x.to_bits()).collect::<Vec<_>>(), changed[h][..t * v].iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            assert_ne!(base[h][t * v..], changed[h][t * v..]);
        }
    }
}

#[test]
fn batch_members_are_independent() {
    let cfg = small_config(0.0);
    let p = random_params(&cfg, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ex = random_example(&cfg, &mut rng, 4, 10);
    let one = loss_and_grad(&p, &EncodedBatch { examples: vec![ex.clone()] }, None, None).unwrap();
    let two = loss_and_grad(&p, &EncodedBatch { examples: vec![ex.clone(), ex] }, None, None).unwrap();
    assert!((one.total - two.total).abs() < 1e-12);
}

#[test]
fn incremental_decoding_matches_full_forward() {
    let cfg = small_config(0.0);
    let p = random_params(&cfg, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ex = random_example(&cfg, &mut rng, 7, 15);
    let full = forward_logits(&p, &ex).unwrap();
    let mut state = InferenceState::new(&p, ex.n_cloud);
    for t in 0..ex.len() {
        state.push(ex.type_ids[t], ex.coord_ids[t]).unwrap();
        let step = state.logits();
        for h in 0..7 {
            let v = cfg.head_sizes()[h];
            for j in 0..v {
                assert!((step[h][j] - full[h][t * v + j]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn blocks_with_zero_weights_reduce_to_head_of_normalized_embedding() {
    let cfg = ModelConfig { n_layer: 1, ..small_config(0.0) };
    let mut p = random_params(&cfg, 10);
    for t in 0..p.layout.tensors.len() {
        let name = p.layout.tensors[t].name.clone();
        if name.starts_with("h0.") && !name.contains(".ln") {
            let r = p.layout.range(t);
            p.data[r].fill(0.0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ex = random_example(&cfg, &mut rng, 3, 5);
    let logits = forward_logits(&p, &ex).unwrap();
    let d = cfg.n_embd;
    let table = |name: &str, id: usize| p.tensor_by_name(name).unwrap()[id * d..(id + 1) * d].to_vec();
    for t in 0..ex.len() {
        let mut e = vec![0.0; d];
        let kind = if t < ex.n_cloud { "emb.class" } else { "emb.token" };
        let rows = [
            table("emb.x", ex.coord_ids[t][0]),
            table("emb.y", ex.coord_ids[t][1]),
            table("emb.z", ex.coord_ids[t][2]),
            table(kind, ex.type_ids[t]),
            table("emb.pos", t),
        ];
        for r in &rows {
            for j in 0..d {
                e[j] += r[j];
            }
        }
        let mean = e.iter().sum::<f64>() / d as f64;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d as f64;
        let g = p.tensor_by_name("ln_f.g").unwrap();
        let b = p.tensor_by_name("ln_f.b").unwrap();
        let z: Vec<f64> = (0..d).map(|j| (e[j] - mean) / (var + 1e-5).sqrt() * g[j] + b[j]).collect();
        let w = p.tensor_by_name("head.theta").unwrap();
        let v = cfg.head_sizes()[5];
        for k in 0..v {
            let want: f64 = (0..d).map(|j| z[j] * w[j * v + k]).sum();
            assert!((logits[5][t * v + k] - want).abs() < 1e-6);
        }
    }
}

#[test]
fn zero_tables_give_zero_hidden_states() {
    let cfg = small_config(0.0);
    let mut p = random_params(&cfg, 1);
    for t in 0..p.layout.tensors.len() {
        if p.layout.tensors[t].class() == TensorClass::Embedding || p.layout.tensors[t].name.starts_with('h') {
            let r = p.layout.range(t);
            p.data[r].fill(0.0);
        }
    }
    // with zero input, LayerNorm yields its bias, so the logits equal ln_f.b · W
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ex = random_example(&cfg, &mut rng, 2, 4);
    let logits = forward_logits(&p, &ex).unwrap();
    let d = cfg.n_embd;
    let b = p.tensor_by_name("ln_f.b").unwrap();
    let w = p.tensor_by_name("head.token").unwrap();
    let v = cfg.head_sizes()[0];
    for t in 0..ex.len() {
        for k in 0..v {
            let want: f64 = (0..d).map(|j| b[j] * w[j * v + k]).sum();
            assert!((logits[0][t * v + k] - want).abs() < 1e-12);
        }
    }
}
