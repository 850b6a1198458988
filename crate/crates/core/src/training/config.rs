use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, FreezeScope, PpoConfig, RewardWeights};
use crate::error::{Error, Result};
use crate::world::{generate_world, load_world, WorldKind, WorldModel, WorldParams};

use super::SessionConfig;

/// Where an episode's world comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum WorldSource {
    File {
        path: PathBuf,
    },
    Generated {
        kind: WorldKind,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        params: Option<WorldParams>,
    },
}

impl WorldSource {
    pub fn generated(kind: WorldKind, seed: u64) -> Self {
        Self::Generated {
            kind,
            seed,
            params: None,
        }
    }

    pub fn load(&self) -> Result<WorldModel> {
        match self {
            Self::File { path } => load_world(path),
            Self::Generated { kind, seed, params } => {
                let params = params.unwrap_or_else(|| WorldParams::for_kind(*kind));
                generate_world(*kind, &params, *seed)
            }
        }
    }
}

impl std::str::FromStr for WorldSource {
    type Err = Error;

    /// `room`, `corridor:7` (kind and generator seed) or a path to a world file.
    fn from_str(s: &str) -> Result<Self> {
        let (head, seed) = match s.split_once(':') {
            Some((h, n)) => match n.parse::<u64>() {
                Ok(n) => (h, Some(n)),
                Err(_) => (s, None),
            },
            None => (s, None),
        };
        match head.parse::<WorldKind>() {
            Ok(kind) => Ok(Self::generated(kind, seed.unwrap_or(0))),
            Err(_) => Ok(Self::File { path: PathBuf::from(s) }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSpec {
    pub source_checkpoint: PathBuf,
    pub freeze_scope: FreezeScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub world: WorldSource,
    pub episodes: usize,
    pub timesteps: usize,
    pub lr: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: Option<f64>,
    /// m/s.
    pub robot_speed: f64,
    /// Seconds per SLAM update.
    pub dt: f64,
    pub seed: u64,
    pub critic_enabled: bool,
    pub separate_critic: bool,
    pub transfer: Option<TransferSpec>,
    pub ablation_tag: String,
    pub reward: RewardWeights,
    pub n_particles: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let ppo = PpoConfig::default();
        Self {
            world: WorldSource::generated(WorldKind::Room, 0),
            episodes: 1000,
            timesteps: 200,
            lr: ppo.lr,
            gamma: 0.98,
            gae_lambda: 0.95,
            clip: ppo.clip,
            epochs: ppo.epochs,
            value_coef: ppo.value_coef,
            entropy_coef: ppo.entropy_coef,
            max_grad_norm: ppo.max_grad_norm,
            robot_speed: 0.3,
            dt: 0.5,
            seed: 0,
            critic_enabled: true,
            separate_critic: false,
            transfer: None,
            ablation_tag: String::new(),
            reward: RewardWeights::default(),
            n_particles: 30,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.timesteps == 0 {
            return Err(Error::InvalidParams("episodes and timesteps must be positive".into()));
        }
        if !(self.robot_speed > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidParams("robot speed and dt must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::InvalidParams("gamma and lambda must lie in [0, 1]".into()));
        }
        if !(self.lr > 0.0) || !(self.clip > 0.0) || self.epochs == 0 {
            return Err(Error::InvalidParams("lr, clip and epochs must be positive".into()));
        }
        if self.n_particles < 2 {
            return Err(Error::InvalidParams("at least two particles are required".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn ppo(&self) -> PpoConfig {
        PpoConfig {
            lr: self.lr,
            clip: self.clip,
            epochs: self.epochs,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
            max_grad_norm: self.max_grad_norm,
            use_critic: self.critic_enabled,
            ..PpoConfig::default()
        }
    }

    pub fn session(&self) -> SessionConfig {
        let mut s = SessionConfig {
            speed: self.robot_speed,
            dt: self.dt,
            timesteps: self.timesteps,
            ..SessionConfig::default()
        };
        s.slam.n_particles = self.n_particles;
        s
    }

    /// Network shape implied by the particle count.
    pub fn agent(&self) -> AgentConfig {
        AgentConfig {
            state_dim: 4 * self.n_particles,
            separate_critic: self.separate_critic,
            ..AgentConfig::default()
        }
    }
}

/// The six training variants compared in the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ablation {
    /// Critic, pretrained in a healthy world then transferred.
    E1,
    /// Critic, trained from scratch in the degenerate world.
    E2,
    /// Transfer without a critic.
    E3,
    /// No critic, no transfer.
    E4,
    /// Transfer with backbone and neck frozen.
    E5,
    /// Transfer with a separate critic network.
    E6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationPreset {
    pub critic_enabled: bool,
    pub transfer: bool,
    pub freeze_scope: FreezeScope,
    pub separate_critic: bool,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [Self::E1, Self::E2, Self::E3, Self::E4, Self::E5, Self::E6];

    pub fn preset(self) -> AblationPreset {
        let base = AblationPreset {
            critic_enabled: true,
            transfer: true,
            freeze_scope: FreezeScope::Backbone,
            separate_critic: false,
        };
        match self {
            Self::E1 => base,
            Self::E2 => AblationPreset {
                transfer: false,
                freeze_scope: FreezeScope::None,
                ..base
            },
            Self::E3 => AblationPreset {
                critic_enabled: false,
                ..base
            },
            Self::E4 => AblationPreset {
                critic_enabled: false,
                transfer: false,
                freeze_scope: FreezeScope::None,
                ..base
            },
            Self::E5 => AblationPreset {
                freeze_scope: FreezeScope::BackboneNeck,
                ..base
            },
            Self::E6 => AblationPreset {
                separate_critic: true,
                ..base
            },
        }
    }

    /// Applies the preset to `cfg`. Transfer variants need `source` to be set.
    pub fn apply(self, cfg: &mut TrainConfig, source: Option<PathBuf>) -> Result<()> {
        let p = self.preset();
        cfg.critic_enabled = p.critic_enabled;
        cfg.separate_critic = p.separate_critic;
        cfg.ablation_tag = self.to_string();
        cfg.transfer = if p.transfer {
            let source_checkpoint =
                source.ok_or_else(|| Error::InvalidParams(format!("{self} needs a source checkpoint")))?;
            Some(TransferSpec {
                source_checkpoint,
                freeze_scope: p.freeze_scope,
            })
        } else {
            None
        };
        Ok(())
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown ablation `{s}`")))
    }
}
