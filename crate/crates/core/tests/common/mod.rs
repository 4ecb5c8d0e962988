#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sain::cell::AblationMode;
use sain::data::{PaddedSentence, TaskKind};
use sain::encoder::{ContextMode, EncoderConfig};
use sain::model::{ModelConfig, Sain};
use sain::{Real, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tensor<T: Real>(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::from_f64_lossy(rng.gen_range(-scale..scale))).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Random mask with at least one valid position.
pub fn mask(rng: &mut impl Rng, n: usize) -> Vec<bool> {
    let mut m: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let k = rng.gen_range(0..n);
    m[k] = true;
    m
}

pub fn config(task: TaskKind, ablation: AblationMode, steps: usize, d_s: usize, d_w: usize) -> ModelConfig {
    ModelConfig {
        task,
        steps,
        encoder: EncoderConfig {
            d_s,
            d_w,
            mode: ContextMode::Toy,
        },
        ablation,
        num_tokens: 20,
        num_labels: 5,
        ..ModelConfig::default()
    }
}

pub fn model<T: Real>(task: TaskKind, ablation: AblationMode, steps: usize, seed: u64) -> Sain<T> {
    Sain::new(config(task, ablation, steps, 4, 4), seed).unwrap()
}

/// A sentence of `len` random tokens and `steps` random label sequences,
/// all positions valid.
pub fn sentence(rng: &mut impl Rng, len: usize, steps: usize, tokens: usize, labels: usize) -> PaddedSentence {
    PaddedSentence {
        token_ids: (0..len).map(|_| rng.gen_range(0..tokens)).collect(),
        labels: (0..steps)
            .map(|_| (0..len).map(|_| rng.gen_range(0..labels)).collect())
            .collect(),
        mask: vec![true; len],
    }
}

/// Appends `extra` masked positions holding arbitrary ids.
pub fn pad(s: &PaddedSentence, extra: usize, rng: &mut impl Rng, tokens: usize, labels: usize) -> PaddedSentence {
    let mut out = s.clone();
    for _ in 0..extra {
        out.token_ids.push(rng.gen_range(0..tokens));
        for seq in &mut out.labels {
            seq.push(rng.gen_range(0..labels));
        }
        out.mask.push(false);
    }
    out
}

pub mod props;
pub mod oracles;
pub mod fixtures;
