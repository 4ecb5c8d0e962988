//! Semantics-aware inferential network at desk scale.
//!
//! Semantic-role label sequences are embedded and joined with a contextual
//! encoding of the same text, one joint matrix per predicate-argument
//! structure. A recurrent reasoning cell with control, read and write units
//! then visits one structure per step, and span-extraction or classification
//! heads read the resulting memories.
//!
//! Module map:
//! - [`autodiff`]: tensors, reverse-mode tape, checkpoint container
//! - [`data`]: dataset records, subword alignment, structure padding, label noise, synthetic chain tasks, batching
//! - [`encoder`]: contextual and semantic embeddings and their join
//! - [`cell`]: control/read/write reasoning over M structures, ablation modes
//! - [`heads`]: span and classification outputs and losses
//! - [`model`]: the assembled network
//! - [`train`]: Adam, warmup schedule, training loop, gradient checking
//! - [`eval`]: EM/F1/accuracy, sweeps, attention traces
//! - [`cli`]: command implementations behind the `sain` binary

pub mod autodiff;
pub mod cell;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod heads;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod train;

pub use error::{Result, SainError, TensorError};
pub use tensor::{DType, Real, Tensor};
