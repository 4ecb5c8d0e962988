//! Trains each ablation and a range of step counts on the same data and
//! prints the comparison tables.
//!
//! cargo run --release --example ablation_sweep

use sain::cell::AblationMode;
use sain::data::{gen_synthetic_chain, SynthConfig};
use sain::encoder::{ContextMode, EncoderConfig};
use sain::eval::{render_table, sweep_noise, sweep_steps, Experiment};
use sain::model::ModelConfig;
use sain::train::TrainConfig;

fn main() -> sain::Result<()> {
    let raw = gen_synthetic_chain(&SynthConfig {
        chain_len: 1,
        count: 1700,
        companions: true,
        seed: 11,
        ..SynthConfig::default()
    })?;
    let (train, test) = raw.split_at(1500);
    let exp = Experiment {
        model: ModelConfig {
            encoder: EncoderConfig {
                d_s: 32,
                d_w: 16,
                mode: ContextMode::Toy,
            },
            ..ModelConfig::default()
        },
        train: TrainConfig {
            lr: 5e-3,
            max_steps: 1500,
            ..TrainConfig::default()
        },
        train_set: train,
        eval_set: test,
        seeds: vec![0],
    };

    for ablation in [AblationMode::Full, AblationMode::NoIm, AblationMode::NoSi, AblationMode::NoIr] {
        let run = exp.run_cell(2, ablation, 0.0, 0)?;
        println!("{ablation:?}: test EM {:.1}", run.report.headline());
    }
    println!("{}", render_table(&sweep_steps(&exp, &[2, 4])?));
    let noisy = Experiment {
        model: ModelConfig { steps: 2, ..exp.model.clone() },
        ..exp
    };
    println!("{}", render_table(&sweep_noise(&noisy, &[0.0, 0.4])?));
    Ok(())
}
