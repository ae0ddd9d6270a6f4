//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every primitive as it is evaluated; [`Tape::backward`]
//! replays the record in reverse to produce exact gradients. Only the
//! primitives the neuron and network equations need are provided.

pub mod gradcheck;
pub mod numeric;
mod tape;
mod tensor;

pub use tape::{dspike_partials, dspike_soft, Gradients, Surrogate, Tape, Var};
pub use tensor::Tensor;
