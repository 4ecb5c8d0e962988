//! Prints where each reasoning step looks in the passage.
//!
//! cargo run --release --example trace_attention

use sain::data::{gen_synthetic_chain, SynthConfig, Vocabs};
use sain::encoder::{ContextMode, EncoderConfig};
use sain::eval::{export_trace, render_heatmap};
use sain::model::{ModelConfig, Sain};
use sain::train::{TrainConfig, TrainData, Trainer};

fn main() -> sain::Result<()> {
    let raw = gen_synthetic_chain(&SynthConfig {
        chain_len: 2,
        count: 200,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let vocabs = Vocabs::build(&raw);
    let data = vocabs.tag_all(&raw, 4)?;
    let config = ModelConfig {
        steps: 4,
        encoder: EncoderConfig {
            d_s: 24,
            d_w: 12,
            mode: ContextMode::Toy,
        },
        num_tokens: vocabs.tokens.len(),
        num_labels: vocabs.labels.len(),
        ..ModelConfig::default()
    };
    let mut trainer = Trainer::new(
        Sain::<f32>::new(config, 3)?,
        TrainConfig {
            lr: 5e-3,
            max_steps: 300,
            ..TrainConfig::default()
        },
    )?;
    trainer.run(TrainData::new(&data), |_, _| Ok(()))?;

    let trace = export_trace(&trainer.model, &data[0], None)?;
    println!("question: {}", trace.question_tokens.join(" "));
    println!("{}", render_heatmap(&trace));
    println!("{}", serde_json::to_string(&trace.records[0]).expect("trace serialises"));
    Ok(())
}
