//! Step-count and label-noise sweeps: one fresh training run per cell.

use serde::{Deserialize, Serialize};

use crate::cell::AblationMode;
use crate::data::{inject_label_noise, RawExample, TaggedExample, Vocabs};
use crate::error::{Result, SainError};
use crate::eval::report::{evaluate, EvalReport};
use crate::model::{ModelConfig, Sain};
use crate::train::{TrainConfig, TrainData, Trainer};

/// Template shared by every cell of a sweep.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    /// `steps`, `ablation` and the vocabulary sizes are overwritten per cell.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_set: &'a [RawExample],
    pub eval_set: &'a [RawExample],
    /// Each cell is trained once per seed and the metric averaged.
    pub seeds: Vec<u64>,
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub model: Sain<f32>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub steps: usize,
    pub ablation: AblationMode,
    pub noise: f64,
    pub seeds: Vec<u64>,
    pub metrics: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: String,
    pub rows: Vec<SweepRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

fn stream_seed(seed: u64, stream: u64, index: usize) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Corrupts `proportion` of the labels of every example; `stream`
/// separates training and evaluation draws.
pub fn noisy(examples: &[TaggedExample], proportion: f64, seed: u64, stream: u64, num_labels: usize) -> Result<Vec<TaggedExample>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| inject_label_noise(ex, proportion, stream_seed(seed, stream, i), num_labels))
        .collect()
}

impl Experiment<'_> {
    /// Trains and evaluates one configuration with one seed.
    pub fn run_cell(&self, steps: usize, ablation: AblationMode, noise: f64, seed: u64) -> Result<CellRun> {
        let vocabs = Vocabs::build(&[self.train_set, self.eval_set].concat());
        let num_labels = vocabs.labels.len();
        let train = noisy(&vocabs.tag_all(self.train_set, steps)?, noise, seed, 0, num_labels)?;
        let eval = noisy(&vocabs.tag_all(self.eval_set, steps)?, noise, seed, 1, num_labels)?;
        let config = ModelConfig {
            steps,
            ablation,
            num_tokens: vocabs.tokens.len(),
            num_labels,
            ..self.model.clone()
        };
        let task = config.task;
        let model = Sain::<f32>::new(config, seed)?;
        let mut trainer = Trainer::new(model, TrainConfig { seed, ..self.train.clone() })?;
        trainer.run(TrainData::new(&train), |_, _| Ok(()))?;
        let mut report = evaluate(&trainer.model, &eval, task, None)?;
        report.echo.noise = noise;
        Ok(CellRun {
            model: trainer.model,
            report,
        })
    }

    fn row(&self, steps: usize, ablation: AblationMode, noise: f64) -> Result<SweepRow> {
        let metrics = self
            .seeds
            .iter()
            .map(|&s| Ok(self.run_cell(steps, ablation, noise, s)?.report.headline()))
            .collect::<Result<Vec<_>>>()?;
        let mean = metrics.iter().sum::<f64>() / metrics.len().max(1) as f64;
        Ok(SweepRow {
            steps,
            ablation,
            noise,
            seeds: self.seeds.clone(),
            metrics,
            mean,
        })
    }

    fn check_seeds(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(SainError::Config("a sweep needs at least one seed".into()));
        }
        Ok(())
    }
}

/// One row per `(M, mode)` for modes with and without semantic embeddings.
pub fn sweep_steps(exp: &Experiment<'_>, m_list: &[usize]) -> Result<SweepTable> {
    exp.check_seeds()?;
    if m_list.is_empty() {
        return Err(SainError::Config("step list is empty".into()));
    }
    let mut rows = Vec::new();
    for &m in m_list {
        for mode in [AblationMode::Full, AblationMode::NoSi] {
            rows.push(exp.row(m, mode, 0.0)?);
        }
    }
    Ok(SweepTable {
        kind: "steps".into(),
        rows,
        run: None,
    })
}

/// One row per noise proportion, applied to training and evaluation tags.
pub fn sweep_noise(exp: &Experiment<'_>, proportions: &[f64]) -> Result<SweepTable> {
    exp.check_seeds()?;
    if let Some(p) = proportions.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SainError::Config(format!("noise proportion {p} outside [0,1]")));
    }
    let rows = proportions
        .iter()
        .map(|&p| exp.row(exp.model.steps, exp.model.ablation, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        kind: "noise".into(),
        rows,
        run: None,
    })
}

/// Plain-text rendering of a sweep table.
pub fn render_table(table: &SweepTable) -> String {
    let mut out = format!("{:>3}  {:<7}  {:>5}  {:>7}  per-seed\n", "M", "mode", "noise", "mean");
    for r in &table.rows {
        let per: Vec<String> = r.metrics.iter().map(|m| format!("{m:.1}")).collect();
        out.push_str(&format!(
            "{:>3}  {:<7}  {:>5.2}  {:>7.2}  {}\n",
            r.steps,
            r.ablation.as_str(),
            r.noise,
            r.mean,
            per.join(" ")
        ));
    }
    out
}
