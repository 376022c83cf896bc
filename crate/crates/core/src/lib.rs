//! Entrywise (max-norm) low-rank approximation of matrices and tensors
//! generated by sampling smooth functions.

pub mod altproj;
pub mod bounds;
pub mod caps;
pub mod error;
pub mod generators;
pub mod harness;
pub mod jet;
pub mod jl;
pub mod linalg;
pub mod lowrank;
pub mod matrix_io;
pub mod multiindex;
pub mod rff;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod taylor;
pub mod tensor;

pub use caps::Caps;
pub use error::{Error, Result};
