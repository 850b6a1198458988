//! Online training: SLAM episodes as the environment, PPO as the learner.

mod config;
mod episode;
mod session;
mod toy;
mod train;

pub use config::{Ablation, AblationPreset, TrainConfig, TransferSpec, WorldSource};
pub use episode::{run_episode, EpisodeLog, StepLog, LOG_HEADER};
pub use session::{SessionConfig, SlamSession, StepRecord};
pub use toy::{train_toy, ToyConfig};
pub use train::{
    initial_params, log_csv, min_max_normalize, train, transfer_train, write_outputs, TrainOutcome, BEST_CHECKPOINT,
    FINAL_CHECKPOINT, LOG_FILE, NORMALIZED_FILE,
};
