use ndarray::Array2;
use rand::{Rng as _, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::agent::{
    compute_advantages, ppo_update, Adam, AgentConfig, AgentParams, PpoBatch, PpoConfig, RolloutBuffer,
    SquashedGaussian, TransitionRecord,
};
use crate::error::Result;
use crate::Rng;

/// Single-step bandit with reward `1 - (a - target)²` and random states.
/// Used to check the optimizer without any SLAM in the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub episodes: usize,
    pub steps: usize,
    pub target: f64,
    /// Std of the Gaussian states, comparable to centered particle offsets.
    pub state_scale: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            episodes: 300,
            steps: 32,
            target: 0.7,
            state_scale: 0.1,
            seed: 0,
        }
    }
}

/// Mean sampled action of every episode.
pub fn train_toy(cfg: &ToyConfig, ppo: &PpoConfig) -> Result<Vec<f64>> {
    let mut master = Rng::seed_from_u64(cfg.seed);
    let agent = AgentConfig::default();
    let mut params = AgentParams::new(agent.clone(), &mut master)?;
    let mut adam = Adam::default();
    let mut rng = Rng::seed_from_u64(master.next_u64());
    let mut means = Vec::with_capacity(cfg.episodes);
    for _ in 0..cfg.episodes {
        let states = Array2::from_shape_fn((cfg.steps, agent.state_dim), |_| {
            cfg.state_scale * rng.sample::<f64, _>(StandardNormal)
        });
        let (out, _) = params.forward(&states)?;
        let mut buffer = RolloutBuffer::default();
        let mut sum = 0.0;
        for i in 0..cfg.steps {
            let dist = SquashedGaussian {
                mean: out.mean[i],
                log_std: params.log_std,
            };
            let (a, log_prob) = dist.sample(&mut rng);
            sum += a;
            buffer.push(TransitionRecord {
                state: states.row(i).to_vec(),
                action: a,
                log_prob,
                reward: 1.0 - (a - cfg.target).powi(2),
                value: out.value[i],
                done: true,
            })?;
        }
        means.push(sum / cfg.steps as f64);
        let adv = compute_advantages(&buffer, 0.98, 0.95)?;
        ppo_update(&mut params, &mut adam, &PpoBatch::new(&buffer, &adv)?, ppo)?;
    }
    Ok(means)
}
