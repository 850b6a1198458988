use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::network::AgentParams;
use super::policy::{logit, ACTION_EPS};
use super::rollout::{Advantages, RolloutBuffer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub lr: f64,
    pub clip: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Global gradient-norm ceiling over trainable tensors; `None` disables it.
    pub max_grad_norm: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Without a critic the value loss is dropped and critic layers stay fixed.
    pub use_critic: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            clip: 0.2,
            epochs: 5,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: Some(0.5),
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            use_critic: true,
        }
    }
}

/// Rollout data laid out for full-batch evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoBatch {
    pub states: Array2<f64>,
    pub actions: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    /// Standardized advantages.
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl PpoBatch {
    pub fn new(buffer: &RolloutBuffer, adv: &Advantages) -> Result<Self> {
        let n = buffer.len();
        if n < 2 {
            return Err(Error::InvalidInput(
                "a PPO update needs at least two transitions".into(),
            ));
        }
        if adv.standardized.len() != n || adv.returns.len() != n {
            return Err(Error::InvalidInput("advantages do not match the buffer".into()));
        }
        let dim = buffer.transitions[0].state.len();
        let mut flat = Vec::with_capacity(n * dim);
        for t in &buffer.transitions {
            if t.state.len() != dim {
                return Err(Error::InvalidInput("ragged states in buffer".into()));
            }
            flat.extend_from_slice(&t.state);
        }
        Ok(Self {
            states: Array2::from_shape_vec((n, dim), flat).map_err(|e| Error::InvalidInput(e.to_string()))?,
            actions: buffer.transitions.iter().map(|t| t.action).collect(),
            old_log_probs: buffer.transitions.iter().map(|t| t.log_prob).collect(),
            advantages: adv.standardized.clone(),
            returns: adv.returns.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// Mean clipped surrogate (to be maximized).
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// `-surrogate + c_v * value_loss - c_e * entropy`.
    pub total: f64,
    /// Fraction of samples on the clipped branch.
    pub clip_fraction: f64,
}

/// Total loss and its gradient with respect to every parameter.
pub fn ppo_loss(params: &AgentParams, batch: &PpoBatch, cfg: &PpoConfig) -> Result<(LossParts, AgentParams)> {
    let n = batch.len();
    let (out, cache) = params.forward(&batch.states)?;
    let sigma = params.log_std.exp();
    let var = sigma * sigma;
    let log_norm = params.log_std + 0.5 * (2.0 * std::f64::consts::PI).ln();
    let inv_n = 1.0 / n as f64;

    let mut d_mean = Array1::zeros(n);
    let mut d_value = Array1::zeros(n);
    let mut d_log_std = 0.0;
    let mut surrogate = 0.0;
    let mut value_loss = 0.0;
    let mut clipped = 0usize;

    for i in 0..n {
        let a = batch.actions[i].clamp(ACTION_EPS, 1.0 - ACTION_EPS);
        let z = logit(a);
        let m = out.mean[i];
        let d = z - m;
        let log_prob = -0.5 * d * d / var - log_norm - (a * (1.0 - a)).ln();
        let ratio = (log_prob - batch.old_log_probs[i]).exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let bounded = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        surrogate += unclipped.min(bounded);
        if unclipped <= bounded {
            // d(-r A / n) / d log_prob
            let g = -inv_n * adv * ratio;
            d_mean[i] = g * d / var;
            d_log_std += g * (d * d / var - 1.0);
        } else {
            clipped += 1;
        }
        if cfg.use_critic {
            let e = out.value[i] - batch.returns[i];
            value_loss += e * e;
            d_value[i] = cfg.value_coef * 2.0 * e * inv_n;
        }
    }
    surrogate *= inv_n;
    value_loss *= inv_n;
    let entropy = 0.5 + 0.5 * (2.0 * std::f64::consts::PI).ln() + params.log_std;
    d_log_std -= cfg.entropy_coef;
    let total = -surrogate + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;
    if !total.is_finite() {
        return Err(Error::NonFinite("PPO loss".into()));
    }
    let grads = params.backward(&cache, &d_mean, &d_value, d_log_std);
    Ok((
        LossParts {
            surrogate,
            value_loss,
            entropy,
            total,
            clip_fraction: clipped as f64 * inv_n,
        },
        grads,
    ))
}

/// First and second moment estimates, keyed by tensor name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub step: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    fn is_trainable(params: &AgentParams, layer: &str, cfg: &PpoConfig) -> bool {
        !params.is_frozen(layer) && (cfg.use_critic || !layer.starts_with("critic"))
    }

    /// Applies one step. Frozen (and, without a critic, critic) tensors are not touched.
    pub fn apply(&mut self, params: &mut AgentParams, grads: &AgentParams, cfg: &PpoConfig) {
        let trainable: Vec<bool> = params
            .tensors()
            .iter()
            .map(|(layer, _, _)| Self::is_trainable(params, layer, cfg))
            .collect();
        let grad_tensors = grads.tensors();
        let norm = grad_tensors
            .iter()
            .zip(&trainable)
            .filter(|(_, t)| **t)
            .flat_map(|((_, _, g), _)| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        let scale = match cfg.max_grad_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (((_, name, p), (_, _, g)), train) in params.tensors_mut().into_iter().zip(&grad_tensors).zip(&trainable) {
            if !train {
                continue;
            }
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; p.len()]);
            let v = self.v.entry(name).or_insert_with(|| vec![0.0; p.len()]);
            for k in 0..p.len() {
                let gk = g[k] * scale;
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
                let mh = m[k] / bc1;
                let vh = v[k] / bc2;
                p[k] -= cfg.lr * mh / (vh.sqrt() + cfg.adam_eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    /// Loss parts per epoch, evaluated before that epoch's step.
    pub epochs: Vec<LossParts>,
}

/// Full-batch clipped PPO. On a non-finite loss or parameters, nothing is
/// changed and the error is returned.
pub fn ppo_update(params: &mut AgentParams, adam: &mut Adam, batch: &PpoBatch, cfg: &PpoConfig) -> Result<PpoStats> {
    if batch.len() < 2 {
        return Err(Error::InvalidInput(
            "a PPO update needs at least two transitions".into(),
        ));
    }
    if !(cfg.lr > 0.0) || !(cfg.clip > 0.0) || cfg.epochs == 0 {
        return Err(Error::InvalidParams("lr, clip and epochs must be positive".into()));
    }
    let mut next = params.clone();
    let mut next_adam = adam.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (parts, grads) = ppo_loss(&next, batch, cfg)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("PPO gradient".into()));
        }
        next_adam.apply(&mut next, &grads, cfg);
        if !next.is_finite() {
            return Err(Error::NonFinite("updated parameters".into()));
        }
        epochs.push(parts);
    }
    *params = next;
    *adam = next_adam;
    Ok(PpoStats { epochs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::network::{AgentConfig, FreezeScope};
    use crate::agent::policy::SquashedGaussian;
    use crate::seeded_rng;
    use rand::Rng;

    fn tiny() -> AgentConfig {
        AgentConfig {
            state_dim: 6,
            backbone: vec![5, 7, 6, 6],
            neck: vec![5, 4],
            heads: 3,
            head_dim: 2,
            attention_out: 4,
            policy_hidden: vec![3],
            critic_hidden: vec![5, 4, 3],
            separate_critic: false,
        }
    }

    fn batch(p: &AgentParams, n: usize, seed: u64) -> PpoBatch {
        let mut rng = seeded_rng(seed);
        let d = p.config.state_dim;
        let states = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let (out, _) = p.forward(&states).unwrap();
        let mut actions = Vec::new();
        let mut old = Vec::new();
        for i in 0..n {
            let dist = SquashedGaussian {
                mean: out.mean[i],
                log_std: p.log_std,
            };
            let (a, lp) = dist.sample(&mut rng);
            actions.push(a);
            // Shifted so that some samples land on the clipped branch.
            old.push(lp + rng.random_range(-0.5..0.5));
        }
        PpoBatch {
            states,
            actions,
            old_log_probs: old,
            advantages: (0..n).map(|_| rng.random_range(-1.5..1.5)).collect(),
            returns: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    fn check_gradients(config: AgentConfig, per_tensor: Option<usize>, seed: u64) {
        let mut rng = seeded_rng(seed);
        let mut p = AgentParams::new(config, &mut rng).unwrap();
        // Bigger final-layer weights so the policy gradient is not vanishingly small.
        for l in p.policy.iter_mut() {
            l.w.mapv_inplace(|w| w * 30.0);
        }
        p.log_std = -0.4;
        // Zero biases put dead units exactly on the ReLU kink, where central
        // differences are meaningless.
        for (_, name, t) in p.tensors_mut() {
            if name.ends_with(".bias") {
                t.iter_mut().for_each(|b| *b = rng.random_range(-0.2..0.2));
            }
        }
        let b = batch(&p, 4, seed + 1);
        let cfg = PpoConfig::default();
        let (_, g) = ppo_loss(&p, &b, &cfg).unwrap();
        let h = 1e-5;
        let names: Vec<(String, usize)> = p.tensors().iter().map(|(_, n, t)| (n.clone(), t.len())).collect();
        let grads: BTreeMap<String, Vec<f64>> = g.tensors().into_iter().map(|(_, n, t)| (n, t.to_vec())).collect();
        let mut checked = 0;
        for (name, len) in names {
            let idx: Vec<usize> = match per_tensor {
                Some(k) if len > k => (0..k).map(|_| rng.random_range(0..len)).collect(),
                _ => (0..len).collect(),
            };
            for k in idx {
                let eval = |delta: f64| {
                    let mut q = p.clone();
                    for (_, n, t) in q.tensors_mut() {
                        if n == name {
                            t[k] += delta;
                        }
                    }
                    ppo_loss(&q, &b, &cfg).unwrap().0.total
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let an = grads[&name][k];
                assert!(rel_err(an, fd) < 1e-4, "{name}[{k}]: analytic {an} vs fd {fd}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn gradient_matches_finite_differences_tiny() {
        check_gradients(tiny(), None, 21);
    }

    #[test]
    fn gradient_matches_finite_differences_separate_critic() {
        check_gradients(
            AgentConfig {
                separate_critic: true,
                ..tiny()
            },
            None,
            31,
        );
    }

    #[test]
    fn gradient_matches_finite_differences_full_size_sampled() {
        check_gradients(AgentConfig::default(), Some(6), 41);
    }

    #[test]
    fn first_epoch_surrogate_is_mean_advantage() {
        let mut rng = seeded_rng(4);
        let p = AgentParams::new(tiny(), &mut rng).unwrap();
        let mut b = batch(&p, 8, 5);
        let (out, _) = p.forward(&b.states).unwrap();
        for i in 0..8 {
            let dist = SquashedGaussian {
                mean: out.mean[i],
                log_std: p.log_std,
            };
            b.old_log_probs[i] = dist.log_prob(b.actions[i]);
        }
        let (parts, _) = ppo_loss(&p, &b, &PpoConfig::default()).unwrap();
        let mean_adv = b.advantages.iter().sum::<f64>() / 8.0;
        assert!((parts.surrogate - mean_adv).abs() < 1e-12);
        assert_eq!(parts.clip_fraction, 0.0);
    }

    #[test]
    fn all_frozen_is_bit_identical() {
        let mut rng = seeded_rng(6);
        let mut p = AgentParams::new(tiny(), &mut rng).unwrap();
        for v in p.freeze_mask.values_mut() {
            *v = true;
        }
        let before = p.clone();
        let b = batch(&p, 6, 7);
        let mut adam = Adam::default();
        ppo_update(&mut p, &mut adam, &b, &PpoConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn backbone_freeze_keeps_backbone_and_moves_heads() {
        let mut rng = seeded_rng(9);
        let mut p = AgentParams::new(tiny(), &mut rng).unwrap();
        p.freeze(FreezeScope::BackboneNeck);
        let before = p.clone();
        let b = batch(&p, 6, 10);
        let mut adam = Adam::default();
        for _ in 0..3 {
            ppo_update(&mut p, &mut adam, &b, &PpoConfig::default()).unwrap();
        }
        assert_eq!(p.backbone, before.backbone);
        assert_eq!(p.neck, before.neck);
        assert_ne!(p.policy, before.policy);
        assert_ne!(p.critic, before.critic);
        assert_ne!(p.log_std, before.log_std);
    }

    #[test]
    fn non_finite_loss_keeps_params() {
        let mut rng = seeded_rng(12);
        let mut p = AgentParams::new(tiny(), &mut rng).unwrap();
        let mut b = batch(&p, 4, 13);
        b.returns[0] = f64::NAN;
        let before = p.clone();
        let mut adam = Adam::default();
        assert!(ppo_update(&mut p, &mut adam, &b, &PpoConfig::default()).is_err());
        assert_eq!(p, before);
        assert_eq!(adam, Adam::default());
    }

    #[test]
    fn without_critic_value_layers_stay() {
        let mut rng = seeded_rng(14);
        let mut p = AgentParams::new(tiny(), &mut rng).unwrap();
        let before = p.clone();
        let b = batch(&p, 6, 15);
        let cfg = PpoConfig {
            use_critic: false,
            ..PpoConfig::default()
        };
        ppo_update(&mut p, &mut Adam::default(), &b, &cfg).unwrap();
        assert_eq!(p.critic, before.critic);
        assert_ne!(p.policy, before.policy);
    }

    #[test]
    fn per_sample_surrogate_respects_clip_bound() {
        let mut rng = seeded_rng(16);
        let p = AgentParams::new(tiny(), &mut rng).unwrap();
        let cfg = PpoConfig::default();
        for seed in 0..50 {
            let b = batch(&p, 1, 100 + seed);
            let (parts, _) = ppo_loss(&p, &b, &cfg).unwrap();
            let adv = b.advantages[0];
            assert!(parts.surrogate <= ((1.0 - cfg.clip) * adv).max((1.0 + cfg.clip) * adv) + 1e-12);
        }
    }
}
