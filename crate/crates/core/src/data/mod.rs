//! Dataset ingestion, SRL alignment, label noise, synthetic tasks, batching.

pub mod align;
pub mod batch;
pub mod example;
pub mod noise;
pub mod synth;
pub mod tagged;
pub mod tokenize;
pub mod vocab;

pub use align::{align_labels, collapse_labels, pad_structures};
pub use batch::{batch_iter, make_batch, Batch, PaddedExample, PaddedSentence};
pub use example::{load_dataset, parse_dataset, write_dataset, Answer, RawExample, TaskKind};
pub use noise::inject_label_noise;
pub use synth::{gen_synthetic_chain, ClauseOrder, SynthConfig};
pub use tagged::{TaggedExample, TaggedSentence, Target, Vocabs};
pub use tokenize::{tokenize_subwords, Expansion};
pub use vocab::{LabelVocab, TokenVocab};
