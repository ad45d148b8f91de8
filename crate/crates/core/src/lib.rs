//! Tensor-logic reasoning: Datalog closure as sparse Boolean contractions,
//! relation-matrix embedding models, and filtered-ranking evaluation.

pub mod checkpoint;
pub mod datalog;
pub mod embed;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kg;
pub mod optim;
pub mod rng;
pub mod superposition;
pub mod tensor;

pub use error::{Error, Result};
