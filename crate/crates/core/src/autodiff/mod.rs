//! Scalar computation graphs with reverse-mode gradients and forward-mode
//! input tangents.
//!
//! A [`Tape`] records operations; [`Tape::finish`] freezes it into an
//! immutable [`ScalarGraph`]. Evaluating a graph against a vector of root
//! values yields an [`Evaluation`], which is what [`reverse_gradient`] and
//! [`forward_tangent`] consume. Because a graph is immutable, the same graph
//! can be evaluated many times (once per training epoch, say) with different
//! root values.
//!
//! Derivatives of the network with respect to its inputs are needed inside
//! the PINN loss, and the loss must in turn be differentiated with respect to
//! the parameters. [`Tape::tangent`] handles this by recording the
//! input-tangent computation as ordinary graph nodes, so a single reverse
//! sweep over the extended graph yields the mixed partials.

mod graph;
mod tangent;

pub use graph::{eval_sigmoid, reverse_gradient, Evaluation, NodeId, OpKind, ScalarGraph, Tape};
pub use tangent::{forward_tangent, record_tangent_as_graph, DualValue, TangentGraph};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("evaluation does not belong to this graph (graph was not evaluated)")]
    NotEvaluated,
    #[error("root index {0} is not an independent variable of this graph")]
    NotARoot(usize),
    #[error("node {0:?} does not belong to this graph")]
    ForeignNode(NodeId),
    #[error("expected {expected} root values, got {got}")]
    RootCount { expected: usize, got: usize },
    #[error("non-finite value {value} produced at node {node} ({kind:?})")]
    NonFinite {
        node: usize,
        kind: OpKind,
        value: f64,
    },
}
