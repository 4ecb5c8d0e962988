use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const LABEL_O: &str = "O";
pub const LABEL_V: &str = "V";

/// Bidirectional SRL label ↔ id map. `O` is id 0 and `V` is id 1; further
/// labels are numbered in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocab {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Default for LabelVocab {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelVocab {
    pub const O: usize = 0;
    pub const V: usize = 1;

    pub fn new() -> Self {
        Self::from_labels(Vec::<String>::new())
    }

    /// Builds a vocabulary containing `O`, `V`, then `labels` in order.
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = LabelVocab {
            labels: Vec::new(),
            index: HashMap::new(),
        };
        v.insert(LABEL_O);
        v.insert(LABEL_V);
        for l in labels {
            v.insert(l);
        }
        v
    }

    pub fn insert(&mut self, label: impl Into<String>) -> usize {
        let label = label.into();
        if let Some(&id) = self.index.get(&label) {
            return id;
        }
        let id = self.labels.len();
        self.index.insert(label.clone(), id);
        self.labels.push(label);
        id
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: usize) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
    }
}

/// Subword string ↔ id map with reserved padding and unknown entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Default for TokenVocab {
    fn default() -> Self {
        Self::new()
    }
}

impl TokenVocab {
    pub const PAD: usize = 0;
    pub const UNK: usize = 1;

    pub fn new() -> Self {
        let mut v = TokenVocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.insert("[PAD]");
        v.insert("[UNK]");
        v
    }

    pub fn insert(&mut self, token: impl Into<String>) -> usize {
        let token = token.into();
        if let Some(&id) = self.index.get(&token) {
            return id;
        }
        let id = self.tokens.len();
        self.index.insert(token.clone(), id);
        self.tokens.push(token);
        id
    }

    /// Id of `token`, or [`TokenVocab::UNK`].
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(Self::UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_labels_are_fixed() {
        let v = LabelVocab::from_labels(["ARG1", "ARG0", "O"]);
        assert_eq!(v.id("O"), Some(LabelVocab::O));
        assert_eq!(v.id("V"), Some(LabelVocab::V));
        assert_eq!(v.id("ARG1"), Some(2));
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn serde_roundtrip_restores_index() {
        let v = LabelVocab::from_labels(["ARG0"]);
        let mut back: LabelVocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        back.reindex();
        assert_eq!(back, v);
        assert_eq!(back.id("ARG0"), Some(2));
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let mut v = TokenVocab::new();
        v.insert("cat");
        assert_eq!(v.id("cat"), 2);
        assert_eq!(v.id("dog"), TokenVocab::UNK);
    }
}
