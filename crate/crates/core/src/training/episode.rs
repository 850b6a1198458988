use serde::{Deserialize, Serialize};

use crate::agent::{
    build_state_from_snapshot, compute_reward, policy_forward, AgentParams, RolloutBuffer, TransitionRecord,
};
use crate::error::{Error, Result};
use crate::eval::compute_ate;
use crate::slam::TimedPose;
use crate::world::WorldModel;
use crate::Rng;

use super::{SlamSession, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub a: f64,
    pub n_eff: f64,
    /// `σx² + σy²` of the scan-matched set.
    pub spread: f64,
    pub score: f64,
    pub resampled: bool,
    pub reward: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cum_reward: f64,
    pub steps: Vec<StepLog>,
    /// Translational RMSE against ground truth; `None` when too short to score.
    pub ate: Option<f64>,
}

impl EpisodeLog {
    pub fn mean_reward(&self) -> f64 {
        if self.steps.is_empty() {
            0.0
        } else {
            self.cum_reward / self.steps.len() as f64
        }
    }

    pub fn mean_a(&self) -> f64 {
        mean(self.steps.iter().map(|s| s.a))
    }

    pub fn mean_neff(&self) -> f64 {
        mean(self.steps.iter().map(|s| s.n_eff))
    }

    pub fn resamples(&self) -> usize {
        self.steps.iter().filter(|s| s.resampled).count()
    }

    /// One row under [`LOG_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.episode,
            self.cum_reward,
            self.mean_a(),
            self.mean_neff(),
            self.resamples(),
            self.ate.map(|a| a.to_string()).unwrap_or_default()
        )
    }
}

pub const LOG_HEADER: &str = "episode,cum_reward,mean_a,mean_neff,resamples,ate";

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Drives one SLAM session with actions sampled from `params`.
pub fn run_episode(
    cfg: &TrainConfig,
    world: &WorldModel,
    params: &AgentParams,
    episode: usize,
    sim_seed: u64,
    rng: &mut Rng,
) -> Result<(RolloutBuffer, EpisodeLog)> {
    if params.config.state_dim != 4 * cfg.n_particles {
        return Err(Error::ShapeMismatch {
            layer: "backbone.0".into(),
            expected: format!("{} inputs", 4 * cfg.n_particles),
            found: format!("{} inputs", params.config.state_dim),
        });
    }
    let mut session = SlamSession::new(world.clone(), cfg.session(), sim_seed)?;
    let mut buffer = RolloutBuffer::default();
    let mut steps = Vec::new();
    let mut est = vec![TimedPose {
        t: 0.0,
        pose: session.slam.estimate,
    }];
    let mut gt = vec![TimedPose {
        t: 0.0,
        pose: session.gt.pose,
    }];
    let mut a_prev = None;

    while let Some(pending) = session.advance()? {
        let state = build_state_from_snapshot(&pending.snapshot)?;
        let out = policy_forward(params, &state)?;
        let (a, log_prob) = out.dist.sample(rng);
        let record = session.complete(pending, a)?;
        let r = &record.result;
        let prev = a_prev.unwrap_or(a);
        let reward = compute_reward(
            r.cov.xx.max(0.0),
            r.cov.yy.max(0.0),
            r.score,
            r.n_eff,
            cfg.n_particles,
            a,
            prev,
            &cfg.reward,
        )?;
        a_prev = Some(a);
        buffer.push(TransitionRecord {
            state,
            action: a,
            log_prob,
            reward,
            value: if cfg.critic_enabled { out.value } else { 0.0 },
            done: false,
        })?;
        steps.push(StepLog {
            a,
            n_eff: r.n_eff,
            spread: r.cov.trace(),
            score: r.score,
            resampled: r.resampled,
            reward,
            degenerate: record.degenerate,
        });
        est.push(TimedPose {
            t: record.t,
            pose: r.estimate,
        });
        gt.push(TimedPose {
            t: record.t,
            pose: record.gt,
        });
    }
    if let Some(last) = buffer.transitions.last_mut() {
        last.done = true;
    }
    let cum_reward = steps.iter().map(|s| s.reward).sum();
    let ate = compute_ate(&est, &gt, cfg.dt).ok().map(|r| r.rmse);
    Ok((
        buffer,
        EpisodeLog {
            episode,
            cum_reward,
            steps,
            ate,
        },
    ))
}
