//! Dense tensors, reverse-mode differentiation, and checkpoint containers.

pub mod checkpoint;
pub mod graph;
pub mod params;

pub use checkpoint::{Checkpoint, Manifest, TensorEntry};
pub use graph::{masked_softmax, Graph, Var};
pub use params::{Gradients, ParamId, ParamStore};
