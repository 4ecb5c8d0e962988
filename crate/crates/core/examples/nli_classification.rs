//! Sentence-pair classification: the premise is the passage and the
//! hypothesis plays the question. Hypotheses restate a premise clause
//! (entailment), swap its arguments (contradiction) or name an absent
//! entity (neutral).
//!
//! cargo run --release --example nli_classification

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sain::data::{gen_synthetic_chain, Answer, RawExample, SynthConfig, TaskKind, Vocabs};
use sain::encoder::{ContextMode, EncoderConfig};
use sain::eval::evaluate;
use sain::model::{ModelConfig, Sain};
use sain::train::{TrainConfig, TrainData, Trainer};

const LABELS: [&str; 3] = ["entailment", "contradiction", "neutral"];

fn clause(ex: &RawExample, k: usize) -> Option<(String, String, String)> {
    let tags = &ex.srl_passage[k];
    let find = |t: &str| tags.iter().position(|l| l == t).map(|p| ex.passage[p].clone());
    Some((find("ARG0")?, find("V")?, find("ARG1")?))
}

fn pairs(seed: u64, count: usize) -> sain::Result<Vec<RawExample>> {
    let premises = gen_synthetic_chain(&SynthConfig {
        chain_len: 1,
        count,
        seed,
        ..SynthConfig::default()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strangers: Vec<String> = (0..20).map(|k| format!("zed{k}")).collect();
    let mut out = Vec::new();
    for (i, premise) in premises.into_iter().enumerate() {
        let k = rng.gen_range(0..premise.srl_passage.len());
        let Some((a, v, b)) = clause(&premise, k) else { continue };
        let label = i % 3;
        let hypothesis = match label {
            0 => [a, v, b],
            1 => [b, v, a],
            _ => [strangers.choose(&mut rng).expect("non-empty").clone(), v, b],
        };
        out.push(RawExample {
            id: format!("pair{i}"),
            passage: premise.passage,
            question: hypothesis.to_vec(),
            answer: Answer::Label { label },
            srl_passage: premise.srl_passage,
            srl_question: vec![["ARG0", "V", "ARG1"].map(String::from).to_vec()],
        });
    }
    Ok(out)
}

fn main() -> sain::Result<()> {
    let raw = pairs(4, 900)?;
    let (train_raw, test_raw) = raw.split_at(750);
    let vocabs = Vocabs::build(&raw);
    let train = vocabs.tag_all(train_raw, 3)?;
    let test = vocabs.tag_all(test_raw, 3)?;
    let config = ModelConfig {
        task: TaskKind::Nli,
        steps: 3,
        encoder: EncoderConfig {
            d_s: 32,
            d_w: 16,
            mode: ContextMode::Toy,
        },
        num_tokens: vocabs.tokens.len(),
        num_labels: vocabs.labels.len(),
        num_classes: LABELS.len(),
        ..ModelConfig::default()
    };
    let mut trainer = Trainer::new(
        Sain::<f32>::new(config, 0)?,
        TrainConfig {
            lr: 3e-3,
            max_steps: 800,
            ..TrainConfig::default()
        },
    )?;
    trainer.run(TrainData::new(&train), |_, r| {
        if r.step % 200 == 0 {
            println!("step {:>4}  loss {:.4}", r.step, r.loss);
        }
        Ok(())
    })?;
    let report = evaluate(&trainer.model, &test, TaskKind::Nli, None)?;
    println!("held-out accuracy {:.1}% (chance 33.3%)", report.accuracy.unwrap_or(0.0));
    Ok(())
}
