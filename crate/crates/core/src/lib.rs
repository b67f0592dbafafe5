//! Physics-informed neural networks for the 1D linear transport equation
//! `u_t + c·u_x = 0`, built on a small scalar autodiff engine.
//!
//! The crate covers the forward problem (known `c`, learn `u`) and the
//! inverse problem (learn `u` and `c` from observations).

pub mod autodiff;
pub mod error;
pub mod loss;
pub mod network;
pub mod optimizer;
pub mod rng;
pub mod sampling;
pub mod trainer;
pub mod transport;

pub use error::{PinnError, Result};
