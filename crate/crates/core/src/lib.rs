//! Ultradiscretized spiking neural networks.
//!
//! Soft max-plus neurons trained with exact reverse-mode gradients, the
//! surrogate-gradient baselines they are compared against, a small training
//! harness, and tools for counting the linear regions of the tropical limit.

pub mod autodiff;
pub mod encoding;
mod error;
pub mod network;
pub mod neurons;
pub mod training;
pub mod tropical;

pub use error::{Error, Result};
