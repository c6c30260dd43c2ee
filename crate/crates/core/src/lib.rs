//! Simulation side of the tomography engine: truncated Fock-space linear
//! algebra, the optical state families, phase-space measurements and the
//! noise channels applied to states and data.

pub mod error;
pub mod fock;
pub mod measure;
pub mod noise;
pub mod states;

pub use error::{QstError, Result};
pub use fock::{
    annihilation, creation, density_from_cholesky, displacement, expectation, fidelity, number,
    parity, root_fidelity, trace_distance, CMatrix, CholeskyFactor, DensityMatrix, Displacer, Ket,
    Tolerances, C64,
};

use rand::SeedableRng;

/// The generator behind every seeded operation in the workspace.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
