//! Subword alignment and structure padding of SRL label sequences.

use crate::data::tokenize::Expansion;
use crate::error::{Result, SainError};

/// Extends word-level label sequences to subword length by copying each
/// word's label onto all of its subwords.
pub fn align_labels<L: Clone>(sequences: &[Vec<L>], expansion: &Expansion) -> Result<Vec<Vec<L>>> {
    if !expansion.is_consistent() {
        return Err(SainError::Config("inconsistent expansion map".into()));
    }
    sequences
        .iter()
        .enumerate()
        .map(|(k, seq)| {
            if seq.len() != expansion.num_words() {
                return Err(SainError::Config(format!(
                    "label sequence {k} has {} entries for {} words",
                    seq.len(),
                    expansion.num_words()
                )));
            }
            Ok(expansion
                .subword_to_word
                .iter()
                .map(|&w| seq[w].clone())
                .collect())
        })
        .collect()
}

/// Collapses subword-level sequences back to word level (first subword of
/// each word).
pub fn collapse_labels<L: Clone>(sequences: &[Vec<L>], expansion: &Expansion) -> Vec<Vec<L>> {
    sequences
        .iter()
        .map(|seq| {
            expansion
                .word_spans
                .iter()
                .map(|span| seq[span.start].clone())
                .collect()
        })
        .collect()
}

/// Returns exactly `m` sequences of length `len`: the first `m` inputs (in
/// predicate order), followed by all-`fill` sequences when fewer exist.
pub fn pad_structures<L: Clone>(sequences: &[Vec<L>], m: usize, len: usize, fill: L) -> Vec<Vec<L>> {
    let mut out: Vec<Vec<L>> = sequences.iter().take(m).cloned().collect();
    while out.len() < m {
        out.push(vec![fill.clone(); len]);
    }
    out
}
