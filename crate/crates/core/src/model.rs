//! The assembled network: encoder, reasoning cell and task head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Checkpoint, Graph, ParamStore, Var};
use crate::cell::{AblationMode, Inference, ReasoningCell};
use crate::data::{PaddedSentence, TaggedExample, Target, TaskKind};
use crate::encoder::{ContextVectors, Encoder, EncoderConfig, JointSequence, SentenceRole};
use crate::error::{Result, SainError};
use crate::heads::{decode_span, nli_loss, span_loss, ClassHead, NliPrediction, SpanHead, SpanPrediction, DEFAULT_MAX_SPAN};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: TaskKind,
    /// Number of reasoning steps and of structures per sentence.
    #[serde(rename = "M")]
    pub steps: usize,
    pub encoder: EncoderConfig,
    pub ablation: AblationMode,
    pub shared_cell: bool,
    pub num_tokens: usize,
    pub num_labels: usize,
    pub num_classes: usize,
    pub max_span_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            task: TaskKind::Mrc,
            steps: 3,
            encoder: EncoderConfig::default(),
            ablation: AblationMode::Full,
            shared_cell: true,
            num_tokens: 2,
            num_labels: 2,
            num_classes: 3,
            max_span_len: DEFAULT_MAX_SPAN,
        }
    }
}

impl ModelConfig {
    /// Width `d` of the rows the cell consumes.
    pub fn width(&self) -> usize {
        if self.ablation.uses_semantics() {
            self.encoder.joint_width()
        } else {
            self.encoder.d_s
        }
    }
}

/// Inputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ModelInput<'a, T> {
    pub passage: &'a PaddedSentence,
    pub question: &'a PaddedSentence,
    pub passage_vectors: Option<&'a Tensor<T>>,
    pub question_vectors: Option<&'a Tensor<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Output {
    Span { start: Var, end: Var },
    Class(Var),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    pub passage: JointSequence,
    pub question: JointSequence,
    pub inference: Inference<T>,
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Span(SpanPrediction),
    Label(NliPrediction),
}

/// One step of recorded attention, ready for export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub question_attention: Vec<f64>,
    pub passage_attention: Vec<f64>,
    pub gate: f64,
}

#[derive(Debug, Clone)]
pub struct Sain<T> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
    pub encoder: Encoder,
    pub cell: ReasoningCell,
    pub span_head: Option<SpanHead>,
    pub class_head: Option<ClassHead>,
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

impl<T: Real> Sain<T> {
    /// Initialises every parameter from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        if config.steps == 0 {
            return Err(SainError::Config("M must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let encoder = Encoder::new(
            &mut params,
            config.encoder,
            config.num_tokens,
            config.num_labels,
            config.ablation.uses_semantics(),
            &mut rng,
        )?;
        let d = config.width();
        let cell = ReasoningCell::new(&mut params, d, config.steps, config.shared_cell, &mut rng)?;
        let (span_head, class_head) = match config.task {
            TaskKind::Mrc => (Some(SpanHead::new(&mut params, config.steps, d, &mut rng)), None),
            TaskKind::Nli => (None, Some(ClassHead::new(&mut params, d, config.num_classes, &mut rng)?)),
        };
        Ok(Sain {
            config,
            params,
            encoder,
            cell,
            span_head,
            class_head,
        })
    }

    pub fn forward(&self, g: &mut Graph<T>, input: &ModelInput<'_, T>) -> Result<Forward<T>> {
        let m = self.config.steps;
        for (name, s) in [("passage", input.passage), ("question", input.question)] {
            if s.labels.len() != m {
                return Err(SainError::Config(format!(
                    "{name} carries {} structures, model expects M = {m}",
                    s.labels.len()
                )));
            }
        }
        let passage = self.encoder.encode(g, &self.params, input.passage, input.passage_vectors)?;
        let question = self.encoder.encode(g, &self.params, input.question, input.question_vectors)?;
        let inference = self
            .cell
            .run_inference(g, &self.params, &passage, &question, self.config.ablation)?;
        let output = match (self.span_head, self.class_head) {
            (Some(head), _) => {
                let (start, end) = head.span_logits(g, &self.params, &inference.memories, &inference.passage)?;
                Output::Span { start, end }
            }
            (None, Some(head)) => {
                let last = *inference.memories.last().expect("M ≥ 1");
                Output::Class(head.nli_logits(g, &self.params, last)?)
            }
            (None, None) => unreachable!("a head is always built"),
        };
        Ok(Forward {
            passage,
            question,
            inference,
            output,
        })
    }

    pub fn loss(&self, g: &mut Graph<T>, fwd: &Forward<T>, target: &Target) -> Result<Var> {
        match (fwd.output, *target) {
            (Output::Span { start, end }, Target::Span { start: ys, end: ye, .. }) => {
                Ok(span_loss(g, start, end, ys, ye, &fwd.passage.mask)?)
            }
            (Output::Class(logits), Target::Label(y)) => Ok(nli_loss(g, logits, y)?),
            _ => Err(SainError::TaskMismatch(format!(
                "{:?} model given a target of the other task",
                self.config.task
            ))),
        }
    }

    /// Contextual vectors of an example converted to `T`, when the encoder
    /// reads them from a file.
    pub fn lookup_vectors(
        &self,
        vectors: Option<&ContextVectors>,
        id: &str,
    ) -> Result<Option<(Tensor<T>, Tensor<T>)>> {
        if self.config.encoder.mode != crate::encoder::ContextMode::Precomputed {
            return Ok(None);
        }
        let v = vectors.ok_or_else(|| SainError::Config("precomputed encoder needs a vector file".into()))?;
        if v.d_s() != self.config.encoder.d_s {
            return Err(SainError::Incompatible(format!(
                "vector file width {} vs d_s {}",
                v.d_s(),
                self.config.encoder.d_s
            )));
        }
        Ok(Some((
            v.get(id, SentenceRole::Passage)?.cast(),
            v.get(id, SentenceRole::Question)?.cast(),
        )))
    }

    /// Loss of one (possibly padded) example on a fresh tape.
    pub fn example_loss(
        &self,
        g: &mut Graph<T>,
        example: &TaggedExample,
        passage: &PaddedSentence,
        question: &PaddedSentence,
        vectors: Option<&ContextVectors>,
    ) -> Result<Var> {
        let vecs = self.lookup_vectors(vectors, &example.id)?;
        let input = ModelInput {
            passage,
            question,
            passage_vectors: vecs.as_ref().map(|v| &v.0),
            question_vectors: vecs.as_ref().map(|v| &v.1),
        };
        let fwd = self.forward(g, &input)?;
        self.loss(g, &fwd, &example.target)
    }

    /// Decoded prediction plus per-step traces for an unpadded example.
    pub fn predict(&self, example: &TaggedExample, vectors: Option<&ContextVectors>) -> Result<(Prediction, Vec<StepTrace>)> {
        let passage = PaddedSentence::unpadded(&example.passage);
        let question = PaddedSentence::unpadded(&example.question);
        let vecs = self.lookup_vectors(vectors, &example.id)?;
        let input = ModelInput {
            passage: &passage,
            question: &question,
            passage_vectors: vecs.as_ref().map(|v| &v.0),
            question_vectors: vecs.as_ref().map(|v| &v.1),
        };
        let mut g = Graph::new();
        let fwd = self.forward(&mut g, &input)?;
        let traces = fwd
            .inference
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| StepTrace {
                step: i + 1,
                question_attention: to_f64(&s.question_attention),
                passage_attention: to_f64(&s.passage_attention),
                gate: s.gate.to_f64().unwrap_or(f64::NAN),
            })
            .collect();
        let prediction = match fwd.output {
            Output::Span { start, end } => {
                let s = g.value(start).data();
                let e = g.value(end).data();
                let (i, j, score) = decode_span(s, e, &passage.mask, self.config.max_span_len)?;
                let (ws, we, text) = example.passage.span_text(i, j);
                Prediction::Span(SpanPrediction {
                    p_start: to_f64(&crate::autodiff::masked_softmax(s, &passage.mask)?),
                    p_end: to_f64(&crate::autodiff::masked_softmax(e, &passage.mask)?),
                    start: i,
                    end: j,
                    start_word: ws,
                    end_word: we,
                    text,
                    score: score.to_f64().unwrap_or(f64::NAN),
                })
            }
            Output::Class(logits) => Prediction::Label(NliPrediction::from_logits(g.value(logits).data())?),
        };
        Ok((prediction, traces))
    }

    /// Parameters under the `param.` prefix with the config in the metadata.
    pub fn to_checkpoint(&self, mut meta: serde_json::Value) -> Checkpoint {
        if !meta.is_object() {
            meta = serde_json::json!({ "extra": meta });
        }
        if let Some(obj) = meta.as_object_mut() {
            obj.insert(
                "model".into(),
                serde_json::to_value(&self.config).expect("config serialises"),
            );
        }
        let mut ck = Checkpoint::new(meta);
        ck.push_store("param.", &self.params);
        ck
    }

    /// Rebuilds a model from a checkpoint, checking it against `expected`
    /// when given.
    pub fn from_checkpoint(ck: &Checkpoint, expected: Option<&ModelConfig>) -> Result<Self> {
        let stored: ModelConfig = serde_json::from_value(ck.manifest.meta["model"].clone())
            .map_err(|e| SainError::Checkpoint(format!("model config: {e}")))?;
        if let Some(want) = expected {
            if want.steps != stored.steps {
                return Err(SainError::Incompatible(format!(
                    "checkpoint trained with M = {}, requested M = {}",
                    stored.steps, want.steps
                )));
            }
            if want != &stored {
                return Err(SainError::Incompatible(format!(
                    "checkpoint model config {} differs from requested {}",
                    serde_json::to_string(&stored).unwrap_or_default(),
                    serde_json::to_string(want).unwrap_or_default()
                )));
            }
        }
        let mut model = Sain::new(stored, 0)?;
        ck.restore_store("param.", &mut model.params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic_chain, SynthConfig, Vocabs};

    fn small(task: TaskKind, ablation: AblationMode) -> (Sain<f64>, Vec<TaggedExample>) {
        let raw = gen_synthetic_chain(&SynthConfig {
            count: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        let v = Vocabs::build(&raw);
        let ds = v.tag_all(&raw, 4).unwrap();
        let cfg = ModelConfig {
            task,
            steps: 4,
            encoder: EncoderConfig {
                d_s: 4,
                d_w: 2,
                mode: crate::encoder::ContextMode::Toy,
            },
            ablation,
            num_tokens: v.tokens.len(),
            num_labels: v.labels.len(),
            ..ModelConfig::default()
        };
        (Sain::new(cfg, 5).unwrap(), ds)
    }

    #[test]
    fn every_mode_predicts_a_valid_span() {
        for mode in [AblationMode::Full, AblationMode::NoIm, AblationMode::NoSi, AblationMode::NoIr] {
            let (model, ds) = small(TaskKind::Mrc, mode);
            let (pred, traces) = model.predict(&ds[0], None).unwrap();
            let Prediction::Span(p) = pred else { panic!("span expected") };
            assert!(p.start <= p.end);
            assert_eq!(traces.len(), if mode == AblationMode::NoIm { 0 } else { 4 });
        }
    }

    #[test]
    fn checkpoint_roundtrip_and_m_mismatch() {
        let (model, ds) = small(TaskKind::Mrc, AblationMode::Full);
        let ck = model.to_checkpoint(serde_json::json!({}));
        let back = Sain::<f64>::from_checkpoint(&ck, Some(&model.config)).unwrap();
        assert_eq!(back.predict(&ds[1], None).unwrap(), model.predict(&ds[1], None).unwrap());
        let mut other = model.config.clone();
        other.steps = 3;
        assert!(matches!(
            Sain::<f64>::from_checkpoint(&ck, Some(&other)),
            Err(SainError::Incompatible(_))
        ));
    }

    #[test]
    fn wrong_target_kind_is_a_task_mismatch() {
        let (model, ds) = small(TaskKind::Mrc, AblationMode::Full);
        let p = PaddedSentence::unpadded(&ds[0].passage);
        let q = PaddedSentence::unpadded(&ds[0].question);
        let mut g = Graph::new();
        let input = ModelInput {
            passage: &p,
            question: &q,
            passage_vectors: None,
            question_vectors: None,
        };
        let fwd = model.forward(&mut g, &input).unwrap();
        assert!(matches!(
            model.loss(&mut g, &fwd, &Target::Label(0)),
            Err(SainError::TaskMismatch(_))
        ));
    }
}
