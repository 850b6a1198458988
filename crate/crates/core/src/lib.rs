//! Particle-filter lidar SLAM workbench with a learned degeneracy factor.
//!
//! The crate is organised bottom-up:
//! - [`world`]: simulated worlds, lidar, robot motion and ground-truth labels
//! - [`slam`]: the particle-filter SLAM core
//! - [`degeneracy`]: distribution fusion, selection and an analytic detector
//! - [`agent`]: actor-critic network, PPO and checkpoints
//! - [`training`]: episode orchestration and transfer learning
//! - [`eval`]: trajectory/detection metrics, the evaluation harness and plots

pub mod agent;
pub mod degeneracy;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod slam;
pub mod training;
pub mod world;

pub use error::{Error, Result};
pub use geometry::{normalize_angle, Pose, Sym2};

/// Deterministic RNG used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Seeds a [`Rng`] from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
