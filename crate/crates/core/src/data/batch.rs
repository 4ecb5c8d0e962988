//! Mini-batches padded to the longest passage and question.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::tagged::{TaggedExample, TaggedSentence};
use crate::data::vocab::{LabelVocab, TokenVocab};

/// A sentence padded to a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedSentence {
    pub token_ids: Vec<usize>,
    /// M label sequences of the padded length.
    pub labels: Vec<Vec<usize>>,
    pub mask: Vec<bool>,
}

impl PaddedSentence {
    pub fn from_sentence(s: &TaggedSentence, len: usize) -> Self {
        let n = s.len();
        assert!(len >= n, "padding length {len} below sentence length {n}");
        let mut token_ids = s.token_ids.clone();
        token_ids.resize(len, TokenVocab::PAD);
        let labels = s
            .labels
            .iter()
            .map(|seq| {
                let mut seq = seq.clone();
                seq.resize(len, LabelVocab::O);
                seq
            })
            .collect();
        let mut mask = vec![true; n];
        mask.resize(len, false);
        PaddedSentence { token_ids, labels, mask }
    }

    /// Unpadded view of a sentence.
    pub fn unpadded(s: &TaggedSentence) -> Self {
        Self::from_sentence(s, s.len())
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn valid_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaddedExample {
    /// Position of the example in the source dataset.
    pub index: usize,
    pub passage: PaddedSentence,
    pub question: PaddedSentence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub passage_len: usize,
    pub question_len: usize,
    pub items: Vec<PaddedExample>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.index).collect()
    }
}

/// Builds one padded batch from the given dataset positions.
pub fn make_batch(dataset: &[TaggedExample], indices: &[usize]) -> Batch {
    let passage_len = indices.iter().map(|&i| dataset[i].passage.len()).max().unwrap_or(0);
    let question_len = indices.iter().map(|&i| dataset[i].question.len()).max().unwrap_or(0);
    let items = indices
        .iter()
        .map(|&i| PaddedExample {
            index: i,
            passage: PaddedSentence::from_sentence(&dataset[i].passage, passage_len),
            question: PaddedSentence::from_sentence(&dataset[i].question, question_len),
        })
        .collect();
    Batch {
        passage_len,
        question_len,
        items,
    }
}

/// Example order for one pass: identity without a seed, a seeded
/// permutation otherwise.
pub fn epoch_order(len: usize, shuffle_seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

/// Streams padded batches over one pass of `dataset`; the last batch may be
/// short.
pub fn batch_iter(
    dataset: &[TaggedExample],
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> impl Iterator<Item = Batch> + '_ {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let order = epoch_order(dataset.len(), shuffle_seed);
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    chunks.into_iter().map(move |idx| make_batch(dataset, &idx))
}
