//! Monitored Lindblad dynamics: generators, jump-counting statistics,
//! quantum-jump trajectories and thermodynamic uncertainty bounds.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod counting;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod parallel;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{ChannelSpec, JumpChannel, LindbladModel};
pub use operator::{DensityMatrix, Operator};
