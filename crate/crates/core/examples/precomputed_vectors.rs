//! Trains on contextual rows supplied from outside instead of the built-in
//! biLSTM. Any encoder can fill the vector file; here a fixed random
//! projection of token ids stands in for it.
//!
//! cargo run --release --example precomputed_vectors

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sain::data::{gen_synthetic_chain, SynthConfig, TaggedSentence, TaskKind, Vocabs};
use sain::encoder::{ContextMode, ContextVectors, EncoderConfig, SentenceRole};
use sain::eval::evaluate;
use sain::model::{ModelConfig, Sain};
use sain::train::{TrainConfig, TrainData, Trainer};
use sain::Tensor;

const D_S: usize = 16;

fn rows(sentence: &TaggedSentence, table: &[f32]) -> sain::Result<Tensor<f32>> {
    let data = sentence
        .token_ids
        .iter()
        .flat_map(|&t| table[t * D_S..(t + 1) * D_S].to_vec())
        .collect();
    Ok(Tensor::new(vec![sentence.token_ids.len(), D_S], data)?)
}

fn main() -> sain::Result<()> {
    let raw = gen_synthetic_chain(&SynthConfig {
        chain_len: 1,
        count: 300,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let vocabs = Vocabs::build(&raw);
    let data = vocabs.tag_all(&raw, 3)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let table: Vec<f32> = (0..vocabs.tokens.len() * D_S).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut vectors = ContextVectors::new(D_S);
    for ex in &data {
        vectors.insert(ex.id.clone(), SentenceRole::Passage, rows(&ex.passage, &table)?)?;
        vectors.insert(ex.id.clone(), SentenceRole::Question, rows(&ex.question, &table)?)?;
    }
    let path = std::env::temp_dir().join("sain-example-vectors.bin");
    vectors.save(&path)?;
    let vectors = ContextVectors::load(&path)?;
    println!("{} blocks of width {} in {}", vectors.len(), vectors.d_s(), path.display());

    let config = ModelConfig {
        steps: 3,
        encoder: EncoderConfig {
            d_s: D_S,
            d_w: 8,
            mode: ContextMode::Precomputed,
        },
        num_tokens: vocabs.tokens.len(),
        num_labels: vocabs.labels.len(),
        ..ModelConfig::default()
    };
    let mut trainer = Trainer::new(
        Sain::<f32>::new(config, 0)?,
        TrainConfig {
            lr: 5e-3,
            max_steps: 300,
            ..TrainConfig::default()
        },
    )?;
    let train = TrainData {
        examples: &data,
        vectors: Some(&vectors),
    };
    let records = trainer.run(train, |_, _| Ok(()))?;
    println!("loss {:.3} -> {:.3}", records[0].loss, records[records.len() - 1].loss);
    let report = evaluate(&trainer.model, &data, TaskKind::Mrc, Some(&vectors))?;
    println!("training-set EM {:.1}", report.exact_match.unwrap_or(0.0));
    Ok(())
}
