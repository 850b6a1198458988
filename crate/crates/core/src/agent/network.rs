use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{mlp_backward, mlp_forward, Attention, AttentionCache, Linear, MlpCache};
use crate::error::{Error, Result};

/// Layer widths of the actor-critic network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub state_dim: usize,
    pub backbone: Vec<usize>,
    pub neck: Vec<usize>,
    pub heads: usize,
    pub head_dim: usize,
    pub attention_out: usize,
    pub policy_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Critic gets its own backbone instead of sharing the policy's.
    pub separate_critic: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            state_dim: 120,
            backbone: vec![60, 128, 256, 256],
            neck: vec![192, 128],
            heads: 3,
            head_dim: 64,
            attention_out: 64,
            policy_hidden: vec![32],
            critic_hidden: vec![128, 64, 32],
            separate_critic: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[usize]| v.iter().all(|&d| d > 0);
        if self.state_dim == 0
            || self.backbone.is_empty()
            || self.neck.is_empty()
            || !positive(&self.backbone)
            || !positive(&self.neck)
            || !positive(&self.policy_hidden)
            || !positive(&self.critic_hidden)
            || self.heads == 0
            || self.head_dim == 0
            || self.attention_out == 0
        {
            return Err(Error::InvalidParams("agent layer widths must be positive".into()));
        }
        Ok(())
    }

    /// `(name, input, output)` of every dense layer, in a fixed order.
    pub fn layer_shapes(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let chain = |prefix: &str, input: usize, widths: &[usize], out: &mut Vec<(String, usize, usize)>| {
            let mut d = input;
            for (i, &w) in widths.iter().enumerate() {
                out.push((format!("{prefix}.{i}"), d, w));
                d = w;
            }
            d
        };
        let b = chain("backbone", self.state_dim, &self.backbone, &mut out);
        let n = chain("neck", b, &self.neck, &mut out);
        let model = self.heads * self.head_dim;
        for part in ["q", "k", "v"] {
            out.push((format!("attention.{part}"), n, model));
        }
        out.push(("attention.o".into(), model, self.attention_out));
        let mut policy = self.policy_hidden.clone();
        policy.push(1);
        chain("policy", self.attention_out, &policy, &mut out);
        let critic_in = if self.separate_critic {
            chain("critic_backbone", self.state_dim, &self.backbone, &mut out)
        } else {
            b
        };
        let mut critic = self.critic_hidden.clone();
        critic.push(1);
        chain("critic", critic_in, &critic, &mut out);
        out
    }
}

/// Which layer groups are excluded from updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreezeScope {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "backbone")]
    Backbone,
    #[serde(rename = "backbone+neck")]
    BackboneNeck,
}

impl std::str::FromStr for FreezeScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "backbone" => Ok(Self::Backbone),
            "backbone+neck" => Ok(Self::BackboneNeck),
            other => Err(Error::Parse(format!("unknown freeze scope `{other}`"))),
        }
    }
}

impl std::fmt::Display for FreezeScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Backbone => "backbone",
            Self::BackboneNeck => "backbone+neck",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub config: AgentConfig,
    pub backbone: Vec<Linear>,
    pub neck: Vec<Linear>,
    pub attention: Attention,
    pub policy: Vec<Linear>,
    pub log_std: f64,
    pub critic_backbone: Option<Vec<Linear>>,
    pub critic: Vec<Linear>,
    /// Layer name -> frozen.
    pub freeze_mask: BTreeMap<String, bool>,
}

pub const INITIAL_LOG_STD: f64 = -1.0;

fn chain<R: Rng + ?Sized>(input: usize, widths: &[usize], last_gain: f64, rng: &mut R) -> Vec<Linear> {
    let mut d = input;
    let n = widths.len();
    widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let gain = if i + 1 == n {
                last_gain
            } else {
                std::f64::consts::SQRT_2
            };
            let l = Linear::init(d, w, gain, rng);
            d = w;
            l
        })
        .collect()
}

fn zeros_chain(input: usize, widths: &[usize]) -> Vec<Linear> {
    let mut d = input;
    widths
        .iter()
        .map(|&w| {
            let l = Linear::zeros(d, w);
            d = w;
            l
        })
        .collect()
}

impl AgentParams {
    /// Random initialization: He-scaled hidden layers, a near-zero final
    /// policy layer (mean starts close to 0.5), zero biases, `log_std = -1`.
    pub fn new<R: Rng + ?Sized>(config: AgentConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let sqrt2 = std::f64::consts::SQRT_2;
        let backbone = chain(config.state_dim, &config.backbone, sqrt2, rng);
        let b_out = *config.backbone.last().expect("validated");
        let neck = chain(b_out, &config.neck, sqrt2, rng);
        let n_out = *config.neck.last().expect("validated");
        let attention = Attention::init(n_out, config.heads, config.head_dim, config.attention_out, rng);
        let mut policy_w = config.policy_hidden.clone();
        policy_w.push(1);
        let policy = chain(config.attention_out, &policy_w, 0.01, rng);
        let critic_backbone = config
            .separate_critic
            .then(|| chain(config.state_dim, &config.backbone, sqrt2, rng));
        let mut critic_w = config.critic_hidden.clone();
        critic_w.push(1);
        let critic = chain(b_out, &critic_w, 1.0, rng);
        let mut p = Self {
            config,
            backbone,
            neck,
            attention,
            policy,
            log_std: INITIAL_LOG_STD,
            critic_backbone,
            critic,
            freeze_mask: BTreeMap::new(),
        };
        p.freeze(FreezeScope::None);
        Ok(p)
    }

    /// Every value zero, nothing frozen.
    pub fn zeros(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let b_out = *c.backbone.last().expect("validated");
        let n_out = *c.neck.last().expect("validated");
        let mut policy_w = c.policy_hidden.clone();
        policy_w.push(1);
        let mut critic_w = c.critic_hidden.clone();
        critic_w.push(1);
        let mut p = Self {
            backbone: zeros_chain(c.state_dim, &c.backbone),
            neck: zeros_chain(b_out, &c.neck),
            attention: Attention::zeros(n_out, c.heads, c.head_dim, c.attention_out),
            policy: zeros_chain(c.attention_out, &policy_w),
            log_std: 0.0,
            critic_backbone: c.separate_critic.then(|| zeros_chain(c.state_dim, &c.backbone)),
            critic: zeros_chain(b_out, &critic_w),
            freeze_mask: BTreeMap::new(),
            config,
        };
        p.freeze(FreezeScope::None);
        Ok(p)
    }

    /// Same shapes, every value zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone()).expect("config was validated on construction")
    }

    /// Replaces the freeze mask according to `scope`.
    pub fn freeze(&mut self, scope: FreezeScope) {
        self.freeze_mask = self
            .layer_names()
            .into_iter()
            .map(|name| {
                let frozen = match scope {
                    FreezeScope::None => false,
                    FreezeScope::Backbone => name.starts_with("backbone.") || name.starts_with("critic_backbone."),
                    FreezeScope::BackboneNeck => {
                        name.starts_with("backbone.")
                            || name.starts_with("critic_backbone.")
                            || name.starts_with("neck.")
                    }
                };
                (name, frozen)
            })
            .collect();
    }

    pub fn is_frozen(&self, layer: &str) -> bool {
        self.freeze_mask.get(layer).copied().unwrap_or(false)
    }

    /// Dense layer names followed by `log_std`.
    pub fn layer_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.config.layer_shapes().into_iter().map(|(n, _, _)| n).collect();
        names.push("log_std".into());
        names
    }

    fn layers(&self) -> Vec<(String, &Linear)> {
        let mut out: Vec<(String, &Linear)> = Vec::new();
        for (i, l) in self.backbone.iter().enumerate() {
            out.push((format!("backbone.{i}"), l));
        }
        for (i, l) in self.neck.iter().enumerate() {
            out.push((format!("neck.{i}"), l));
        }
        out.push(("attention.q".into(), &self.attention.q));
        out.push(("attention.k".into(), &self.attention.k));
        out.push(("attention.v".into(), &self.attention.v));
        out.push(("attention.o".into(), &self.attention.o));
        for (i, l) in self.policy.iter().enumerate() {
            out.push((format!("policy.{i}"), l));
        }
        if let Some(cb) = &self.critic_backbone {
            for (i, l) in cb.iter().enumerate() {
                out.push((format!("critic_backbone.{i}"), l));
            }
        }
        for (i, l) in self.critic.iter().enumerate() {
            out.push((format!("critic.{i}"), l));
        }
        out
    }

    /// Mutable dense layers plus `log_std`, borrowed disjointly.
    fn split_mut(&mut self) -> (Vec<(String, &mut Linear)>, &mut f64) {
        let Self {
            backbone,
            neck,
            attention,
            policy,
            log_std,
            critic_backbone,
            critic,
            ..
        } = self;
        let mut out: Vec<(String, &mut Linear)> = Vec::new();
        for (i, l) in backbone.iter_mut().enumerate() {
            out.push((format!("backbone.{i}"), l));
        }
        for (i, l) in neck.iter_mut().enumerate() {
            out.push((format!("neck.{i}"), l));
        }
        out.push(("attention.q".into(), &mut attention.q));
        out.push(("attention.k".into(), &mut attention.k));
        out.push(("attention.v".into(), &mut attention.v));
        out.push(("attention.o".into(), &mut attention.o));
        for (i, l) in policy.iter_mut().enumerate() {
            out.push((format!("policy.{i}"), l));
        }
        if let Some(cb) = critic_backbone {
            for (i, l) in cb.iter_mut().enumerate() {
                out.push((format!("critic_backbone.{i}"), l));
            }
        }
        for (i, l) in critic.iter_mut().enumerate() {
            out.push((format!("critic.{i}"), l));
        }
        (out, log_std)
    }

    /// `(layer, tensor name, values)` for every parameter tensor, `log_std` last.
    pub fn tensors(&self) -> Vec<(String, String, &[f64])> {
        let mut out = Vec::new();
        for (name, l) in self.layers() {
            out.push((
                name.clone(),
                format!("{name}.weight"),
                l.w.as_slice().expect("standard layout"),
            ));
            out.push((
                name.clone(),
                format!("{name}.bias"),
                l.b.as_slice().expect("standard layout"),
            ));
        }
        out.push(("log_std".into(), "log_std".into(), std::slice::from_ref(&self.log_std)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, String, &mut [f64])> {
        let (layers, log_std) = self.split_mut();
        let mut out = Vec::new();
        for (name, l) in layers {
            out.push((
                name.clone(),
                format!("{name}.weight"),
                l.w.as_slice_mut().expect("standard layout"),
            ));
            out.push((
                name.clone(),
                format!("{name}.bias"),
                l.b.as_slice_mut().expect("standard layout"),
            ));
        }
        out.push(("log_std".into(), "log_std".into(), std::slice::from_mut(log_std)));
        out
    }

    /// Shape of each named tensor, matching [`AgentParams::tensors`].
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (name, l) in self.layers() {
            out.push((format!("{name}.weight"), l.w.shape().to_vec()));
            out.push((format!("{name}.bias"), l.b.shape().to_vec()));
        }
        out.push(("log_std".into(), Vec::new()));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Batched forward pass over rows of `states`.
    pub fn forward(&self, states: &Array2<f64>) -> Result<(ForwardOutput, ForwardCache)> {
        if states.ncols() != self.config.state_dim {
            return Err(Error::InvalidInput(format!(
                "state has {} entries, network expects {}",
                states.ncols(),
                self.config.state_dim
            )));
        }
        let (b, backbone) = mlp_forward(&self.backbone, states, true);
        let (n, neck) = mlp_forward(&self.neck, &b, true);
        let (att, attention) = self.attention.forward(&n, 1);
        let (m, policy) = mlp_forward(&self.policy, &att, false);
        let (critic_in, critic_backbone) = match &self.critic_backbone {
            Some(cb) => {
                let (h, cache) = mlp_forward(cb, states, true);
                (h, Some(cache))
            }
            None => (b, None),
        };
        let (v, critic) = mlp_forward(&self.critic, &critic_in, false);
        let out = ForwardOutput {
            mean: m.index_axis(Axis(1), 0).to_owned(),
            value: v.index_axis(Axis(1), 0).to_owned(),
        };
        if !out.mean.iter().chain(out.value.iter()).all(|v| v.is_finite()) || !self.log_std.is_finite() {
            return Err(Error::NonFinite("network activations".into()));
        }
        Ok((
            out,
            ForwardCache {
                backbone,
                neck,
                attention,
                policy,
                critic_backbone,
                critic,
            },
        ))
    }

    /// Gradients of a loss given `dL/dmean`, `dL/dvalue` (per row) and `dL/dlog_std`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_mean: &Array1<f64>,
        d_value: &Array1<f64>,
        d_log_std: f64,
    ) -> AgentParams {
        let mut g = self.zeros_like();
        let dm = d_mean.clone().insert_axis(Axis(1));
        let g_att = mlp_backward(&self.policy, &cache.policy, &dm, &mut g.policy);
        let g_neck = self.attention.backward(&cache.attention, &g_att, &mut g.attention);
        let mut g_b = mlp_backward(&self.neck, &cache.neck, &g_neck, &mut g.neck);

        let dv = d_value.clone().insert_axis(Axis(1));
        let g_critic_in = mlp_backward(&self.critic, &cache.critic, &dv, &mut g.critic);
        match (&self.critic_backbone, &cache.critic_backbone, &mut g.critic_backbone) {
            (Some(cb), Some(cc), Some(gcb)) => {
                mlp_backward(cb, cc, &g_critic_in, gcb);
            }
            _ => g_b += &g_critic_in,
        }
        mlp_backward(&self.backbone, &cache.backbone, &g_b, &mut g.backbone);
        g.log_std = d_log_std;
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Pre-squash policy mean per row.
    pub mean: Array1<f64>,
    pub value: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    backbone: MlpCache,
    neck: MlpCache,
    attention: AttentionCache,
    policy: MlpCache,
    critic_backbone: Option<MlpCache>,
    critic: MlpCache,
}
