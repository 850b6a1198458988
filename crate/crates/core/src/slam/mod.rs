//! Particle-filter SLAM on a shared occupancy grid.

mod export;
mod field;
mod filter;
mod map;
mod motion;
mod particles;
mod scan_match;

pub use export::{format_trajectory, quaternion_from_yaw, write_trajectory, TimedPose};
pub use field::{scan_likelihood, squared_distance_transform, LikelihoodField, ScanPoints};
pub use filter::{PendingStep, SlamConfig, SlamState, StepResult, SwarmSnapshot};
pub use map::{MapMetadata, OccupancyGrid, FREE_THRESH, LOG_ODDS_CLAMP, OCCUPIED_THRESH};
pub use motion::{motion_covariance, motion_log_density, sample_motion_model, PriorFloor};
pub use particles::{n_eff, resample, systematic_indices, update_weights, Particle, ParticleSet};
pub use scan_match::{scan_match, ScanMatcher};
