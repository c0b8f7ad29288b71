//! Variational topology optimization: a quantum or classical latent code is
//! decoded by a Fourier-feature network into a density field, evaluated with
//! SIMP plane-stress finite elements, and trained end to end with Adam.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod filtering;
pub mod grid;
pub mod latent;
pub mod loss;
pub mod metrics;
pub mod neuralfield;
pub mod optimize;
pub mod output;
pub mod quantum;
pub mod rng;

pub use config::{Encoding, RunConfig};
pub use error::{Error, Result};
pub use fem::{Benchmark, FemProblem, Material, Mesh};
pub use grid::DensityField;
pub use optimize::{sweep, sweep_seeds, train, Pipeline, RunResult, SweepResult};
