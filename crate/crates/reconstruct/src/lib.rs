//! Reconstruction of density matrices from phase-space measurement data.
//!
//! Three backends share one problem description and report format:
//! iterative maximum likelihood ([`imle`]), direct gradient descent on a
//! Cholesky-style parametrization under a fixed loss ([`cholesky_fit`]), and
//! the conditional-GAN approach ([`qst_cgan_fit`]) in which a generator
//! network produces the state and a discriminator supplies a learned loss.

pub mod cgan;
pub mod cholesky;
pub mod imle;
pub mod monitor;
pub mod problem;
pub mod report;

pub use cgan::{
    build_discriminator, build_generator, discriminator_specs, generator_specs, qst_cgan_fit, CganConfig, PenaltyPoint,
};
pub use cholesky::{cholesky_fit, CholeskyConfig, Loss};
pub use imle::{imle, imle_step, inverse_resolution, ImleConfig};
pub use monitor::ConvergenceMonitor;
pub use problem::{KnownNoise, ReconstructionProblem, Scaling};
pub use report::{FitReport, StopReason};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure at iteration {iteration}: {msg}")]
    Numerical { iteration: usize, msg: String },
    #[error(transparent)]
    Nn(#[from] qst_nn::NnError),
    #[error(transparent)]
    Core(#[from] qst_core::QstError),
}

pub type Result<T> = std::result::Result<T, ReconstructError>;
