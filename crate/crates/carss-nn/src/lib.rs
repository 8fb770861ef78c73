//! Minimal dense-tensor kernel with reverse-mode differentiation, the
//! attention/feed-forward building blocks used by the subpath policies, and
//! the Adam optimizer. 32-bit elements are the training default; the whole
//! stack is generic so gradient tests run in 64-bit.

pub mod checkpoint;
mod error;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tensor;

pub use error::{NnError, Result};
pub use graph::{Gradients, Graph, Mask, Var};
pub use params::{Binding, ParamSet};
pub use scalar::Scalar;
pub use tensor::Tensor;
