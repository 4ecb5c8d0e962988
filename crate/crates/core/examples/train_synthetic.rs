//! Trains on a generated single-hop chain task, checkpoints the model, reloads
//! it and scores held-out examples.
//!
//! cargo run --release --example train_synthetic

use sain::autodiff::Checkpoint;
use sain::data::{gen_synthetic_chain, SynthConfig, TaskKind, Vocabs};
use sain::encoder::{ContextMode, EncoderConfig};
use sain::eval::evaluate;
use sain::model::{ModelConfig, Sain};
use sain::train::{TrainConfig, TrainData, Trainer};

fn main() -> sain::Result<()> {
    let raw = gen_synthetic_chain(&SynthConfig {
        chain_len: 1,
        count: 600,
        seed: 1,
        ..SynthConfig::default()
    })?;
    let (train_raw, test_raw) = raw.split_at(500);
    let vocabs = Vocabs::build(&raw);
    let steps = 4;
    let train = vocabs.tag_all(train_raw, steps)?;
    let test = vocabs.tag_all(test_raw, steps)?;

    let config = ModelConfig {
        steps,
        encoder: EncoderConfig {
            d_s: 32,
            d_w: 16,
            mode: ContextMode::Toy,
        },
        num_tokens: vocabs.tokens.len(),
        num_labels: vocabs.labels.len(),
        ..ModelConfig::default()
    };
    let model = Sain::<f32>::new(config, 0)?;
    let mut trainer = Trainer::new(
        model,
        TrainConfig {
            lr: 5e-3,
            max_steps: 1000,
            ..TrainConfig::default()
        },
    )?;
    trainer.run(TrainData::new(&train), |_, r| {
        if r.step % 100 == 0 {
            println!("step {:>4}  loss {:.4}  lr {:.2e}", r.step, r.loss, r.lr);
        }
        Ok(())
    })?;

    let dir = std::env::temp_dir().join("sain-example");
    std::fs::create_dir_all(&dir).map_err(|e| sain::SainError::io(&dir, e))?;
    let path = dir.join("chain.ckpt");
    trainer.model.to_checkpoint(serde_json::json!({})).save(&path)?;
    let reloaded = Sain::<f32>::from_checkpoint(&Checkpoint::load(&path)?, None)?;

    let report = evaluate(&reloaded, &test, TaskKind::Mrc, None)?;
    println!("held-out EM {:.1}  F1 {:.1}", report.exact_match.unwrap_or(0.0), report.f1.unwrap_or(0.0));
    for r in report.records.iter().take(3) {
        println!("  {}: predicted {:?}, gold {:?}", r.id, r.prediction, r.gold);
    }
    Ok(())
}
