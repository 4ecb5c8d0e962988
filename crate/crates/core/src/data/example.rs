//! Dataset records and the line-delimited JSON dataset file.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::vocab::{LABEL_O, LABEL_V};
use crate::error::{Result, SainError};

/// Task family of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Reading comprehension with an answer span in the passage.
    Mrc,
    /// Sentence-pair classification; premise as passage, hypothesis as question.
    Nli,
}

/// Gold answer of one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    /// Inclusive word span inside the passage.
    Span { start: usize, end: usize },
    /// Class index.
    Label { label: usize },
}

/// One dataset record as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExample {
    pub id: String,
    pub passage: Vec<String>,
    pub question: Vec<String>,
    pub answer: Answer,
    #[serde(default)]
    pub srl_passage: Vec<Vec<String>>,
    #[serde(default)]
    pub srl_question: Vec<Vec<String>>,
}

impl RawExample {
    pub fn invalid(&self, reason: impl Into<String>) -> SainError {
        SainError::InvalidRecord {
            id: self.id.clone(),
            reason: reason.into(),
        }
    }

    /// Checks structural invariants for the given task.
    pub fn validate(&self, task: TaskKind) -> Result<()> {
        if self.passage.is_empty() {
            return Err(self.invalid("empty passage"));
        }
        if self.question.is_empty() {
            return Err(self.invalid("empty question"));
        }
        for (role, words, srl) in [
            ("passage", &self.passage, &self.srl_passage),
            ("question", &self.question, &self.srl_question),
        ] {
            for (k, seq) in srl.iter().enumerate() {
                if seq.len() != words.len() {
                    return Err(self.invalid(format!(
                        "{role} SRL sequence {k} has {} labels for {} words",
                        seq.len(),
                        words.len()
                    )));
                }
                if seq.iter().filter(|l| l.as_str() == LABEL_V).count() > 1 {
                    return Err(self.invalid(format!("{role} SRL sequence {k} has more than one {LABEL_V}")));
                }
                if seq.iter().any(|l| l.is_empty()) {
                    return Err(self.invalid(format!("{role} SRL sequence {k} has an empty label (use {LABEL_O})")));
                }
            }
        }
        match (&self.answer, task) {
            (Answer::Span { start, end }, TaskKind::Mrc) => {
                if start > end {
                    return Err(self.invalid(format!("answer end {end} before start {start}")));
                }
                if *end >= self.passage.len() {
                    return Err(self.invalid(format!(
                        "answer span ({start},{end}) outside passage of {} words",
                        self.passage.len()
                    )));
                }
            }
            (Answer::Label { .. }, TaskKind::Nli) => {}
            (_, task) => return Err(self.invalid(format!("answer kind does not match task {task:?}"))),
        }
        Ok(())
    }

    /// Gold answer text for span records.
    pub fn answer_text(&self) -> Option<String> {
        match self.answer {
            Answer::Span { start, end } => Some(self.passage[start..=end].join(" ")),
            Answer::Label { .. } => None,
        }
    }
}

/// Parses a line-delimited dataset held in memory.
pub fn parse_dataset(text: &str, task: TaskKind, context: &str) -> Result<Vec<RawExample>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: RawExample = serde_json::from_str(line).map_err(|e| SainError::Parse {
            context: format!("{context}:{}", lineno + 1),
            detail: e.to_string(),
        })?;
        ex.validate(task)?;
        out.push(ex);
    }
    Ok(out)
}

/// Reads and validates a dataset file (one JSON record per line).
pub fn load_dataset(path: impl AsRef<Path>, task: TaskKind) -> Result<Vec<RawExample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SainError::io(path, e))?;
    parse_dataset(&text, task, &path.display().to_string())
}

/// Serializes records one per line.
pub fn dataset_to_string(examples: &[RawExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&serde_json::to_string(ex).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: impl AsRef<Path>, examples: &[RawExample]) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| SainError::io(path, e))?;
    f.write_all(dataset_to_string(examples).as_bytes())
        .map_err(|e| SainError::io(path, e))
}
