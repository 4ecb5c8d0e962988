//! Random corruption of SRL labels.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::tagged::TaggedExample;
use crate::error::{Result, SainError};

/// Replaces exactly `round(proportion × L)` word-level labels with a different
/// label drawn uniformly from the rest of the vocabulary, where `L` counts the
/// labeled positions of the real structures of passage and question. Subword
/// sequences are re-derived afterwards so subwords keep agreeing with their word.
pub fn inject_label_noise(
    example: &TaggedExample,
    proportion: f64,
    seed: u64,
    num_labels: usize,
) -> Result<TaggedExample> {
    if !(0.0..=1.0).contains(&proportion) {
        return Err(SainError::Config(format!("noise proportion {proportion} outside [0,1]")));
    }
    let mut out = example.clone();
    let positions: Vec<(bool, usize, usize)> = [(true, &example.passage), (false, &example.question)]
        .into_iter()
        .flat_map(|(is_passage, s)| {
            s.word_labels
                .iter()
                .enumerate()
                .flat_map(move |(k, seq)| (0..seq.len()).map(move |w| (is_passage, k, w)))
        })
        .collect();
    let total = positions.len();
    let count = (proportion * total as f64).round() as usize;
    if count == 0 {
        return Ok(out);
    }
    if num_labels < 2 {
        return Err(SainError::Config("label noise needs at least two labels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, total, count.min(total)).into_vec();
    chosen.sort_unstable();
    for idx in chosen {
        let (is_passage, k, w) = positions[idx];
        let sentence = if is_passage { &mut out.passage } else { &mut out.question };
        let original = sentence.word_labels[k][w];
        let mut draw = rng.gen_range(0..num_labels - 1);
        if draw >= original {
            draw += 1;
        }
        sentence.word_labels[k][w] = draw;
    }
    let m = out.passage.labels.len();
    out.passage.realign(m)?;
    out.question.realign(m)?;
    Ok(out)
}

/// Number of word-level labeled positions eligible for corruption.
pub fn labeled_positions(example: &TaggedExample) -> usize {
    [&example.passage, &example.question]
        .iter()
        .flat_map(|s| s.word_labels.iter())
        .map(Vec::len)
        .sum()
}
