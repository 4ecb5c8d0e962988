//! Records converted to ids, aligned to subwords, and padded to M structures.

use serde::{Deserialize, Serialize};

use crate::data::align::{align_labels, pad_structures};
use crate::data::example::{Answer, RawExample};
use crate::data::tokenize::{tokenize_subwords, Expansion};
use crate::data::vocab::{LabelVocab, TokenVocab};
use crate::error::{Result, SainError};

/// One sentence (passage or question) in id form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub words: Vec<String>,
    pub subwords: Vec<String>,
    pub token_ids: Vec<usize>,
    pub expansion: Expansion,
    /// Word-level label ids of the real (non-padded) structures, at most M.
    pub word_labels: Vec<Vec<usize>>,
    /// Exactly M subword-level label sequences.
    pub labels: Vec<Vec<usize>>,
}

impl TaggedSentence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn num_structures(&self) -> usize {
        self.labels.len()
    }

    /// Recomputes the subword-level sequences from `word_labels`.
    pub fn realign(&mut self, m: usize) -> Result<()> {
        let aligned = align_labels(&self.word_labels, &self.expansion)?;
        self.labels = pad_structures(&aligned, m, self.len(), LabelVocab::O);
        Ok(())
    }

    /// Text of the word span covering subwords `start..=end`.
    pub fn span_text(&self, start: usize, end: usize) -> (usize, usize, String) {
        let ws = self.expansion.word_of(start);
        let we = self.expansion.word_of(end);
        (ws, we, self.words[ws..=we].join(" "))
    }
}

/// Gold target in subword coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    Span {
        start_word: usize,
        end_word: usize,
        start: usize,
        end: usize,
    },
    Label(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedExample {
    pub id: String,
    pub passage: TaggedSentence,
    pub question: TaggedSentence,
    pub target: Target,
}

impl TaggedExample {
    pub fn gold_text(&self) -> Option<String> {
        match self.target {
            Target::Span {
                start_word,
                end_word,
                ..
            } => Some(self.passage.words[start_word..=end_word].join(" ")),
            Target::Label(_) => None,
        }
    }
}

/// Vocabularies shared by training and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabs {
    pub tokens: TokenVocab,
    pub labels: LabelVocab,
}

impl Vocabs {
    /// Collects subwords and labels in corpus order.
    pub fn build(examples: &[RawExample]) -> Self {
        let mut tokens = TokenVocab::new();
        let mut labels = LabelVocab::new();
        for ex in examples {
            for words in [&ex.passage, &ex.question] {
                for sw in tokenize_subwords(words).0 {
                    tokens.insert(sw);
                }
            }
            for seq in ex.srl_passage.iter().chain(&ex.srl_question) {
                for l in seq {
                    labels.insert(l.clone());
                }
            }
        }
        Vocabs { tokens, labels }
    }

    pub fn reindex(&mut self) {
        self.tokens.reindex();
        self.labels.reindex();
    }

    fn tag_sentence(&self, ex: &RawExample, words: &[String], srl: &[Vec<String>], m: usize) -> Result<TaggedSentence> {
        let (subwords, expansion) = tokenize_subwords(words);
        let token_ids = subwords.iter().map(|s| self.tokens.id(s)).collect();
        let word_labels = srl
            .iter()
            .take(m)
            .map(|seq| {
                seq.iter()
                    .map(|l| {
                        self.labels
                            .id(l)
                            .ok_or_else(|| ex.invalid(format!("label {l} not in vocabulary")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut s = TaggedSentence {
            words: words.to_vec(),
            subwords,
            token_ids,
            expansion,
            word_labels,
            labels: Vec::new(),
        };
        s.realign(m)?;
        Ok(s)
    }

    /// Converts a validated record into id form with exactly `m` structures
    /// per sentence.
    pub fn tag(&self, ex: &RawExample, m: usize) -> Result<TaggedExample> {
        if m == 0 {
            return Err(SainError::Config("M must be at least 1".into()));
        }
        let passage = self.tag_sentence(ex, &ex.passage, &ex.srl_passage, m)?;
        let question = self.tag_sentence(ex, &ex.question, &ex.srl_question, m)?;
        let target = match ex.answer {
            Answer::Span { start, end } => {
                if end >= passage.words.len() || start > end {
                    return Err(ex.invalid("answer span outside passage"));
                }
                Target::Span {
                    start_word: start,
                    end_word: end,
                    start: passage.expansion.first_subword(start),
                    end: passage.expansion.last_subword(end),
                }
            }
            Answer::Label { label } => Target::Label(label),
        };
        Ok(TaggedExample {
            id: ex.id.clone(),
            passage,
            question,
            target,
        })
    }

    pub fn tag_all(&self, examples: &[RawExample], m: usize) -> Result<Vec<TaggedExample>> {
        examples.iter().map(|ex| self.tag(ex, m)).collect()
    }
}
