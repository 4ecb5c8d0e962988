//! Whitespace words split into subwords by a fixed affix table.
//!
//! Continuation pieces carry a `##` prefix. A word is split at most once at the
//! front (prefix table) and up to twice at the back (suffix table), and only
//! when the remaining stem keeps at least [`MIN_STEM`] characters.

use std::ops::Range;

use serde::{Deserialize, Serialize};

const PREFIXES: &[&str] = &["un", "re"];
const SUFFIXES: &[&str] = &[
    "ness", "ment", "less", "able", "ful", "ing", "est", "ed", "er", "ly",
];
const MIN_STEM: usize = 3;
const MAX_SUFFIXES: usize = 2;

/// Mapping between word positions and subword positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expansion {
    /// Subword range covered by each word.
    pub word_spans: Vec<Range<usize>>,
    /// Word index owning each subword.
    pub subword_to_word: Vec<usize>,
}

impl Expansion {
    /// One subword per word.
    pub fn identity(n: usize) -> Self {
        Expansion {
            word_spans: (0..n).map(|i| i..i + 1).collect(),
            subword_to_word: (0..n).collect(),
        }
    }

    /// Builds the map from per-word piece counts.
    pub fn from_counts(counts: &[usize]) -> Self {
        let mut word_spans = Vec::with_capacity(counts.len());
        let mut subword_to_word = Vec::new();
        let mut at = 0;
        for (w, &c) in counts.iter().enumerate() {
            word_spans.push(at..at + c);
            subword_to_word.extend(std::iter::repeat_n(w, c));
            at += c;
        }
        Expansion {
            word_spans,
            subword_to_word,
        }
    }

    pub fn num_words(&self) -> usize {
        self.word_spans.len()
    }

    pub fn num_subwords(&self) -> usize {
        self.subword_to_word.len()
    }

    pub fn first_subword(&self, word: usize) -> usize {
        self.word_spans[word].start
    }

    pub fn last_subword(&self, word: usize) -> usize {
        self.word_spans[word].end - 1
    }

    pub fn word_of(&self, subword: usize) -> usize {
        self.subword_to_word[subword]
    }

    /// True when spans tile `0..num_subwords` in order and agree with the
    /// reverse map.
    pub fn is_consistent(&self) -> bool {
        let mut at = 0;
        for (w, span) in self.word_spans.iter().enumerate() {
            if span.start != at || span.end <= span.start {
                return false;
            }
            if self.subword_to_word.get(span.clone()).is_none_or(|s| s.iter().any(|&x| x != w)) {
                return false;
            }
            at = span.end;
        }
        at == self.subword_to_word.len()
    }
}

/// Splits one word into subword pieces.
pub fn split_word(word: &str) -> Vec<String> {
    let lower = word.to_lowercase();
    let chars = lower.chars().count();
    if chars < MIN_STEM + 2 || !lower.chars().all(char::is_alphabetic) {
        return vec![lower];
    }

    let mut stem: &str = &lower;
    let mut head = None;
    for p in PREFIXES {
        if let Some(rest) = stem.strip_prefix(p) {
            if rest.chars().count() > MIN_STEM {
                head = Some(*p);
                stem = rest;
                break;
            }
        }
    }

    let mut tails: Vec<&str> = Vec::new();
    while tails.len() < MAX_SUFFIXES {
        let Some((rest, suf)) = SUFFIXES.iter().find_map(|s| {
            stem.strip_suffix(s)
                .filter(|r| r.chars().count() >= MIN_STEM)
                .map(|r| (r, *s))
        }) else {
            break;
        };
        tails.push(suf);
        stem = rest;
    }

    let mut pieces = Vec::with_capacity(1 + tails.len() + usize::from(head.is_some()));
    if let Some(h) = head {
        pieces.push(h.to_string());
        pieces.push(format!("##{stem}"));
    } else {
        pieces.push(stem.to_string());
    }
    pieces.extend(tails.iter().rev().map(|s| format!("##{s}")));
    pieces
}

/// Tokenizes a word sequence into subwords plus the word↔subword map.
pub fn tokenize_subwords<S: AsRef<str>>(words: &[S]) -> (Vec<String>, Expansion) {
    let mut subwords = Vec::new();
    let mut counts = Vec::with_capacity(words.len());
    for w in words {
        let pieces = split_word(w.as_ref());
        counts.push(pieces.len());
        subwords.extend(pieces);
    }
    (subwords, Expansion::from_counts(&counts))
}
