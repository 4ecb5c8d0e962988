//! Full-dataset evaluation.

use serde::{Deserialize, Serialize};

use crate::cell::AblationMode;
use crate::data::{TaggedExample, Target, TaskKind};
use crate::encoder::ContextVectors;
use crate::error::{Result, SainError};
use crate::eval::metrics::{exact_match, f1_token};
use crate::model::{Prediction, Sain};
use crate::tensor::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    /// Predicted answer text, or the predicted class index.
    pub prediction: String,
    pub gold: String,
    pub correct: bool,
    /// Exact match for spans, correctness for labels; 0 or 1.
    pub em: f64,
    /// Token F1 for spans, correctness for labels.
    pub f1: f64,
}

/// Settings the report was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEcho {
    pub task: TaskKind,
    #[serde(rename = "M")]
    pub steps: usize,
    pub ablation: AblationMode,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub echo: EvalEcho,
    /// Percentages; `exact_match` and `f1` for span tasks, `accuracy` for
    /// classification.
    pub exact_match: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub records: Vec<EvalRecord>,
    /// Resolved run configuration, filled in by the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

fn percent_mean(records: &[EvalRecord], f: impl Fn(&EvalRecord) -> f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    100.0 * records.iter().map(f).sum::<f64>() / records.len() as f64
}

impl EvalReport {
    /// Builds aggregates from `records`.
    pub fn from_records(echo: EvalEcho, records: Vec<EvalRecord>) -> Self {
        let mut report = EvalReport {
            echo,
            exact_match: None,
            f1: None,
            accuracy: None,
            records,
            run: None,
        };
        report.recompute();
        report
    }

    pub fn recompute(&mut self) {
        match self.echo.task {
            TaskKind::Mrc => {
                self.exact_match = Some(percent_mean(&self.records, |r| r.em));
                self.f1 = Some(percent_mean(&self.records, |r| r.f1));
                self.accuracy = None;
            }
            TaskKind::Nli => {
                self.exact_match = None;
                self.f1 = None;
                self.accuracy = Some(percent_mean(&self.records, |r| f64::from(u8::from(r.correct))));
            }
        }
    }

    /// EM for span tasks, accuracy for classification.
    pub fn headline(&self) -> f64 {
        self.exact_match.or(self.accuracy).unwrap_or(0.0)
    }
}

/// Predicts every example in order and scores it.
pub fn evaluate<T: Real>(
    model: &Sain<T>,
    dataset: &[TaggedExample],
    task: TaskKind,
    vectors: Option<&ContextVectors>,
) -> Result<EvalReport> {
    if model.config.task != task {
        return Err(SainError::TaskMismatch(format!(
            "{:?} model evaluated on a {task:?} dataset",
            model.config.task
        )));
    }
    let records = dataset
        .iter()
        .map(|ex| {
            let (pred, _) = model.predict(ex, vectors)?;
            score(ex, &pred)
        })
        .collect::<Result<Vec<_>>>()?;
    let echo = EvalEcho {
        task,
        steps: model.config.steps,
        ablation: model.config.ablation,
        noise: 0.0,
    };
    Ok(EvalReport::from_records(echo, records))
}

fn score(ex: &TaggedExample, pred: &Prediction) -> Result<EvalRecord> {
    let (prediction, gold, em, f1) = match (pred, &ex.target) {
        (Prediction::Span(p), Target::Span { .. }) => {
            let gold = ex.gold_text().unwrap_or_default();
            let em = exact_match(&p.text, &gold);
            let f1 = f1_token(&p.text, &gold);
            (p.text.clone(), gold, em, f1)
        }
        (Prediction::Label(p), Target::Label(y)) => {
            let hit = f64::from(u8::from(p.label == *y));
            (p.label.to_string(), y.to_string(), hit, hit)
        }
        _ => {
            return Err(SainError::TaskMismatch(format!(
                "example {} has a target of the other task",
                ex.id
            )))
        }
    };
    Ok(EvalRecord {
        id: ex.id.clone(),
        prediction,
        gold,
        correct: em == 1.0,
        em,
        f1,
    })
}
