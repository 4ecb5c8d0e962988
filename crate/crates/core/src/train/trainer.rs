//! Mini-batch training with clipping, checkpoints and resume.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::{Checkpoint, Graph};
use crate::data::batch::{epoch_order, make_batch};
use crate::data::TaggedExample;
use crate::encoder::ContextVectors;
use crate::error::{Result, SainError};
use crate::model::{ModelConfig, Sain};
use crate::tensor::Real;
use crate::train::adam::{adam_step, AdamConfig, AdamState};
use crate::train::schedule::lr_schedule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub warmup_ratio: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Write an intermediate checkpoint every this many steps.
    pub checkpoint_every: Option<usize>,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            warmup_ratio: 0.1,
            batch_size: 8,
            max_steps: 500,
            clip_norm: Some(1.0),
            seed: 0,
            checkpoint_every: None,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(SainError::Config(format!("warmup_ratio {} outside [0,1)", self.warmup_ratio)));
        }
        if self.batch_size == 0 {
            return Err(SainError::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(SainError::Config(format!("invalid learning rate {}", self.lr)));
        }
        if let Some(c) = self.clip_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(SainError::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// One record of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm: f64,
}

/// Training data: tagged examples plus, for the precomputed encoder, their
/// contextual vectors.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub examples: &'a [TaggedExample],
    pub vectors: Option<&'a ContextVectors>,
}

impl<'a> TrainData<'a> {
    pub fn new(examples: &'a [TaggedExample]) -> Self {
        TrainData { examples, vectors: None }
    }
}

#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: Sain<T>,
    pub adam: AdamState<T>,
    pub config: TrainConfig,
    /// Completed optimizer steps.
    pub step: usize,
}

fn mix(seed: u64, epoch: u64) -> u64 {
    seed ^ epoch.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl<T: Real> Trainer<T> {
    pub fn new(mut model: Sain<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        model.params.ensure_grads();
        let adam = AdamState::new(&model.params, config.adam);
        Ok(Trainer {
            model,
            adam,
            config,
            step: 0,
        })
    }

    /// Dataset positions of the batch used at 0-based step `step`; a pure
    /// function of the seed so resumed runs see the same batches.
    pub fn batch_indices(&self, step: usize, n: usize) -> Vec<usize> {
        let bs = self.config.batch_size.min(n);
        let per_epoch = n.div_ceil(bs);
        let epoch = (step / per_epoch) as u64;
        let pos = step % per_epoch;
        let order = epoch_order(n, Some(mix(self.config.seed, epoch)));
        order[pos * bs..((pos + 1) * bs).min(n)].to_vec()
    }

    /// Mean loss of the examples at `indices` with the current parameters;
    /// gradients are accumulated into the model's store.
    fn accumulate(&mut self, data: TrainData<'_>, indices: &[usize]) -> Result<f64> {
        let batch = make_batch(data.examples, indices);
        let scale = T::from_f64_lossy(1.0 / batch.len() as f64);
        let mut total = 0.0;
        for item in &batch.items {
            let ex = &data.examples[item.index];
            let mut g = Graph::new();
            let loss = self
                .model
                .example_loss(&mut g, ex, &item.passage, &item.question, data.vectors)
                .map_err(|e| match e {
                    SainError::Tensor(t) => SainError::NonFiniteLoss {
                        step: self.step + 1,
                        detail: format!("example {}: {t}", ex.id),
                    },
                    other => other,
                })?;
            let value = g.value(loss).data()[0].to_f64().unwrap_or(f64::NAN);
            if !value.is_finite() {
                return Err(SainError::NonFiniteLoss {
                    step: self.step + 1,
                    detail: format!("example {} produced loss {value}", ex.id),
                });
            }
            total += value;
            let scaled = g.scale_const(loss, scale)?;
            g.backward_into(scaled, &mut self.model.params)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Runs one optimizer step.
    pub fn train_step(&mut self, data: TrainData<'_>) -> Result<StepRecord> {
        if data.examples.is_empty() {
            return Err(SainError::Config("training set is empty".into()));
        }
        let indices = self.batch_indices(self.step, data.examples.len());
        self.model.params.zero_grads();
        let loss = self.accumulate(data, &indices)?;
        let grad_norm = self.model.params.grad_norm();
        if !grad_norm.is_finite() {
            return Err(SainError::NonFiniteLoss {
                step: self.step + 1,
                detail: format!("gradient norm {grad_norm}"),
            });
        }
        if let Some(c) = self.config.clip_norm {
            if grad_norm > c {
                self.model.params.scale_grads(T::from_f64_lossy(c / grad_norm));
            }
        }
        let lr = lr_schedule(self.step + 1, self.config.max_steps, self.config.lr, self.config.warmup_ratio);
        adam_step(&mut self.model.params, &mut self.adam, lr)?;
        self.step += 1;
        Ok(StepRecord {
            step: self.step,
            lr,
            loss,
            grad_norm,
        })
    }

    /// Loss the next step would report, without touching parameters or
    /// optimizer state.
    pub fn peek_loss(&self, data: TrainData<'_>) -> Result<f64> {
        let mut probe = self.clone();
        probe.accumulate(data, &self.batch_indices(self.step, data.examples.len()))
    }

    pub fn to_checkpoint(&self, meta: serde_json::Value) -> Checkpoint {
        let mut meta = meta;
        if !meta.is_object() {
            meta = serde_json::json!({ "extra": meta });
        }
        if let Some(obj) = meta.as_object_mut() {
            obj.insert("train".into(), serde_json::to_value(&self.config).expect("config serialises"));
            obj.insert("step".into(), self.step.into());
        }
        let mut ck = self.model.to_checkpoint(meta);
        self.adam.push_to(&mut ck, &self.model.params);
        ck
    }

    /// Restores model, optimizer state and step counter.
    pub fn from_checkpoint(ck: &Checkpoint, expected: Option<&ModelConfig>) -> Result<Self> {
        let model = Sain::<T>::from_checkpoint(ck, expected)?;
        let config: TrainConfig = serde_json::from_value(ck.manifest.meta["train"].clone())
            .map_err(|e| SainError::Checkpoint(format!("train config: {e}")))?;
        let step = ck.manifest.meta["step"]
            .as_u64()
            .ok_or_else(|| SainError::Checkpoint("step counter missing".into()))?;
        let mut trainer = Trainer::new(model, config)?;
        trainer.adam = AdamState::restore(ck, &trainer.model.params, trainer.config.adam, step)?;
        trainer.step = step as usize;
        Ok(trainer)
    }

    /// Steps until `max_steps`, calling `on_step` after each.
    pub fn run(
        &mut self,
        data: TrainData<'_>,
        mut on_step: impl FnMut(&Self, &StepRecord) -> Result<()>,
    ) -> Result<Vec<StepRecord>> {
        let mut records = Vec::new();
        while self.step < self.config.max_steps {
            let rec = self.train_step(data)?;
            on_step(self, &rec)?;
            records.push(rec);
        }
        Ok(records)
    }
}

/// Artifacts of a finished run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<StepRecord>,
    pub final_checkpoint: Option<PathBuf>,
}

/// Trains `trainer` to completion. With `out_dir` set, the metrics log goes to
/// `metrics.jsonl`, periodic checkpoints to `step-N.ckpt` and the final state
/// to `final.ckpt`; `meta` is embedded in every checkpoint.
pub fn train_loop<T: Real>(
    trainer: &mut Trainer<T>,
    data: TrainData<'_>,
    out_dir: Option<&Path>,
    meta: serde_json::Value,
) -> Result<TrainOutcome> {
    if data.examples.is_empty() {
        return Err(SainError::Config("training set is empty".into()));
    }
    let mut log = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| SainError::io(dir, e))?;
            let path = dir.join("metrics.jsonl");
            Some((fs::File::create(&path).map_err(|e| SainError::io(&path, e))?, path))
        }
        None => None,
    };
    let every = trainer.config.checkpoint_every;
    let records = trainer.run(data, |t, rec| {
        if let Some((file, path)) = log.as_mut() {
            let line = serde_json::to_string(rec).expect("record serialises");
            writeln!(file, "{line}").map_err(|e| SainError::io(&*path, e))?;
        }
        if let (Some(dir), Some(k)) = (out_dir, every) {
            if k > 0 && rec.step % k == 0 && rec.step < t.config.max_steps {
                t.to_checkpoint(meta.clone()).save(dir.join(format!("step-{}.ckpt", rec.step)))?;
            }
        }
        Ok(())
    })?;
    let final_checkpoint = match out_dir {
        Some(dir) => {
            let path = dir.join("final.ckpt");
            trainer.to_checkpoint(meta).save(&path)?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome {
        records,
        final_checkpoint,
    })
}
