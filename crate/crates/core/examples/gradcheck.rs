//! Finite-difference check of every ablation mode in double precision.
//!
//! cargo run --release --example gradcheck

use sain::cell::AblationMode;
use sain::data::TaskKind;
use sain::encoder::{ContextMode, EncoderConfig};
use sain::model::{ModelConfig, Sain};
use sain::train::{gradcheck_model, GradcheckInstance};

fn main() -> sain::Result<()> {
    for task in [TaskKind::Mrc, TaskKind::Nli] {
        for ablation in [AblationMode::Full, AblationMode::NoIm, AblationMode::NoSi, AblationMode::NoIr] {
            let config = ModelConfig {
                task,
                steps: 3,
                encoder: EncoderConfig {
                    d_s: 4,
                    d_w: 4,
                    mode: ContextMode::Toy,
                },
                ablation,
                num_tokens: 20,
                num_labels: 5,
                ..ModelConfig::default()
            };
            let model = Sain::<f64>::new(config, 0)?;
            let instance = GradcheckInstance::random(&model, 12, 6, 2, 0);
            let report = gradcheck_model(&model, &instance, 1e-4)?;
            let worst = report.worst().map_or("-", |g| g.name.as_str());
            println!(
                "{task:?} {ablation:?}: max relative error {:.2e} ({worst}) {}",
                report.max_rel_err,
                if report.passed { "ok" } else { "FAILED" }
            );
        }
    }
    Ok(())
}
