//! Actor-critic degeneracy agent: a hand-written network with analytic
//! gradients, a squashed-Gaussian policy, reward shaping, GAE and PPO.

mod checkpoint;
mod network;
mod nn;
mod policy;
mod ppo;
mod rollout;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_checkpoint, load_checkpoint_into, save_checkpoint, LayerSpec,
    TrainingMeta, CHECKPOINT_VERSION,
};
pub use network::{AgentConfig, AgentParams, ForwardCache, ForwardOutput, FreezeScope, INITIAL_LOG_STD};
pub use nn::{Attention, Linear};
pub use policy::{
    build_state, build_state_from_snapshot, compute_reward, critic_forward, logistic, logit, policy_forward,
    PolicyOutput, RewardWeights, SquashedGaussian, ACTION_EPS, REWARD_COV_SCALE, STATE_SCALE,
};
pub use ppo::{ppo_loss, ppo_update, Adam, LossParts, PpoBatch, PpoConfig, PpoStats};
pub use rollout::{
    compute_advantages, monte_carlo_advantages, standardize, Advantages, RolloutBuffer, TransitionRecord,
};
