//! Per-step attention traces and their plain-text heatmap.

use serde::{Deserialize, Serialize};

use crate::cell::AblationMode;
use crate::data::TaggedExample;
use crate::encoder::ContextVectors;
use crate::error::Result;
use crate::model::{Prediction, Sain, StepTrace};
use crate::tensor::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    #[serde(rename = "M")]
    pub steps: usize,
    pub ablation: AblationMode,
    pub question_tokens: Vec<String>,
    pub passage_tokens: Vec<String>,
    /// One record per reasoning step; empty when the cell is bypassed.
    pub records: Vec<StepTrace>,
    pub prediction: Prediction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<serde_json::Value>,
}

pub fn export_trace<T: Real>(model: &Sain<T>, example: &TaggedExample, vectors: Option<&ContextVectors>) -> Result<Trace> {
    let (prediction, records) = model.predict(example, vectors)?;
    Ok(Trace {
        id: example.id.clone(),
        steps: model.config.steps,
        ablation: model.config.ablation,
        question_tokens: example.question.subwords.clone(),
        passage_tokens: example.passage.subwords.clone(),
        records,
        prediction,
        run: None,
    })
}

const SHADES: [char; 6] = [' ', '.', ':', '+', '#', '@'];

fn shade(p: f64) -> char {
    let k = (p.clamp(0.0, 1.0) * (SHADES.len() - 1) as f64).round() as usize;
    SHADES[k]
}

fn block(out: &mut String, title: &str, tokens: &[String], records: &[StepTrace], pick: fn(&StepTrace) -> &[f64]) {
    let width = tokens.iter().map(|t| t.chars().count()).max().unwrap_or(0).max(title.len());
    out.push_str(&format!("{title:<width$}"));
    for r in records {
        out.push_str(&format!("  {:>7}", format!("step {}", r.step)));
    }
    out.push('\n');
    for (j, tok) in tokens.iter().enumerate() {
        out.push_str(&format!("{tok:<width$}"));
        for r in records {
            let p = pick(r).get(j).copied().unwrap_or(0.0);
            out.push_str(&format!("  {} {p:.3}", shade(p)));
        }
        out.push('\n');
    }
}

/// Tokens down the side, steps across; each cell shows a shade and the
/// probability.
pub fn render_heatmap(trace: &Trace) -> String {
    let mut out = format!("{}  M={}  {}\n", trace.id, trace.steps, trace.ablation);
    if trace.records.is_empty() {
        out.push_str("no reasoning steps recorded\n");
        return out;
    }
    block(&mut out, "question", &trace.question_tokens, &trace.records, |r| &r.question_attention);
    out.push('\n');
    block(&mut out, "passage", &trace.passage_tokens, &trace.records, |r| &r.passage_attention);
    out.push('\n');
    out.push_str("gate    ");
    for r in &trace.records {
        out.push_str(&format!("  {:.3}", r.gate));
    }
    out.push('\n');
    out
}
