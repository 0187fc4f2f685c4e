//! Dense tensors, reverse-mode autodiff, Adam, and gradient checking.

mod adam;
mod check;
mod graph;
mod tensor;

pub use adam::AdamState;
pub use check::finite_diff_check;
pub use graph::{Axis, Gradients, Graph, NodeId, LAYER_NORM_EPS};
pub use tensor::Tensor;
