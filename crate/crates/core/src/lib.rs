//! MicroFuse: protein-to-genome expert fusion for gene-pair co-membership
//! prediction.
//!
//! The crate is organized as a small dense-math layer (`matrix`, `nn`), the
//! fusion architecture and baselines (`model`), the training objectives
//! (`losses`), rank/threshold metrics (`metrics`), dataset construction and
//! synthetic embedding generation (`data`), and the experiment driver with
//! its CLI-facing report formats (`experiment`).
//!
//! All numeric kernels are generic over [`scalar::Real`] (`f32` or `f64`);
//! the training stack uses the `f64` aliases below.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod matrix;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Scalar used by the training stack: 64-bit throughout, for determinism
/// and finite-difference fidelity.
pub type Scalar = f64;

/// Matrix specialized to the training scalar.
pub type MatrixF = matrix::Matrix<Scalar>;

/// CLI entry point; returns the process exit code.
pub fn run_cli() -> i32 {
    let args: Vec<String> = std::env::args().skip(1).collect();
    cli::run(&args)
}
