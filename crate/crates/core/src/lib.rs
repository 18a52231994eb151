pub mod circuit;
pub mod clifford;
pub mod dataset;
pub mod encoding;
pub mod errgen;
pub mod error;
pub mod gate;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod pauli;
pub mod pipeline;
pub mod propagation;
pub mod sampler;
pub mod sim;

pub use error::{Error, Result};
