use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub state: Vec<f64>,
    pub action: f64,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

impl TransitionRecord {
    pub fn is_finite(&self) -> bool {
        self.state.iter().all(|v| v.is_finite())
            && self.action.is_finite()
            && self.log_prob.is_finite()
            && self.reward.is_finite()
            && self.value.is_finite()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub transitions: Vec<TransitionRecord>,
}

impl RolloutBuffer {
    pub fn push(&mut self, t: TransitionRecord) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("transition".into()));
        }
        if !(t.action > 0.0 && t.action < 1.0) {
            return Err(Error::InvalidInput(format!("action {} outside (0, 1)", t.action)));
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    /// Before standardization.
    pub raw: Vec<f64>,
    /// Zero mean, unit variance.
    pub standardized: Vec<f64>,
    /// Value-function targets.
    pub returns: Vec<f64>,
}

/// Subtracts the mean and divides by the population std (plus a small guard).
pub fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt() + 1e-8;
    v.iter().map(|x| (x - mean) / sd).collect()
}

/// GAE(λ). `done` zeroes the bootstrap, as does the end of the buffer.
pub fn compute_advantages(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Result<Advantages> {
    if buffer.is_empty() {
        return Err(Error::InvalidInput("empty rollout buffer".into()));
    }
    let tr = &buffer.transitions;
    let n = tr.len();
    let mut raw = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for i in (0..n).rev() {
        let live = if tr[i].done { 0.0 } else { 1.0 };
        let delta = tr[i].reward + gamma * next_value * live - tr[i].value;
        next_adv = delta + gamma * lambda * live * next_adv;
        raw[i] = next_adv;
        next_value = tr[i].value;
    }
    let returns = raw.iter().zip(tr).map(|(a, t)| a + t.value).collect();
    Ok(Advantages {
        standardized: standardize(&raw),
        raw,
        returns,
    })
}

/// Critic-free fallback: discounted Monte-Carlo returns serve as advantages.
pub fn monte_carlo_advantages(buffer: &RolloutBuffer, gamma: f64) -> Result<Advantages> {
    if buffer.is_empty() {
        return Err(Error::InvalidInput("empty rollout buffer".into()));
    }
    let tr = &buffer.transitions;
    let mut returns = vec![0.0; tr.len()];
    let mut acc = 0.0;
    for i in (0..tr.len()).rev() {
        if tr[i].done {
            acc = 0.0;
        }
        acc = tr[i].reward + gamma * acc;
        returns[i] = acc;
    }
    Ok(Advantages {
        standardized: standardize(&returns),
        raw: returns.clone(),
        returns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use rand::Rng;

    fn buffer(rewards: &[f64], values: &[f64]) -> RolloutBuffer {
        let n = rewards.len();
        RolloutBuffer {
            transitions: rewards
                .iter()
                .zip(values)
                .enumerate()
                .map(|(i, (&r, &v))| TransitionRecord {
                    state: vec![0.0],
                    action: 0.5,
                    log_prob: 0.0,
                    reward: r,
                    value: v,
                    done: i + 1 == n,
                })
                .collect(),
        }
    }

    /// Direct sum over future TD errors.
    fn gae_double_loop(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
        let n = r.len();
        let value = |k: usize| if k < n { v[k] } else { 0.0 };
        (0..n)
            .map(|t| {
                let mut s = 0.0;
                for k in t..n {
                    let delta = r[k] + gamma * value(k + 1) - v[k];
                    s += (gamma * lambda).powi((k - t) as i32) * delta;
                }
                s
            })
            .collect()
    }

    #[test]
    fn telescoping_example() {
        let a = compute_advantages(&buffer(&[1.0, 1.0, 1.0], &[0.0; 3]), 1.0, 1.0).unwrap();
        assert_eq!(a.raw, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn true_values_give_zero_advantage() {
        let r = [0.5, -0.2, 1.0, 0.3];
        let g = 0.98;
        let mut v = vec![0.0; 4];
        let mut acc = 0.0;
        for i in (0..4).rev() {
            acc = r[i] + g * acc;
            v[i] = acc;
        }
        let a = compute_advantages(&buffer(&r, &v), g, 0.95).unwrap();
        assert!(a.raw.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = seeded_rng(8);
        for _ in 0..5 {
            let r: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..200).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = compute_advantages(&buffer(&r, &v), 0.98, 0.95).unwrap();
            let oracle = gae_double_loop(&r, &v, 0.98, 0.95);
            for (x, y) in a.raw.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-10);
            }
            let m: f64 = a.standardized.iter().sum::<f64>() / 200.0;
            let var: f64 = a.standardized.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 200.0;
            assert!(m.abs() < 1e-12 && (var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_buffer_rejected() {
        assert!(compute_advantages(&RolloutBuffer::default(), 0.98, 0.95).is_err());
        assert!(monte_carlo_advantages(&RolloutBuffer::default(), 0.98).is_err());
    }

    #[test]
    fn monte_carlo_returns() {
        let a = monte_carlo_advantages(&buffer(&[1.0, 1.0, 1.0], &[9.0; 3]), 0.5).unwrap();
        assert_eq!(a.returns, vec![1.75, 1.5, 1.0]);
    }
}
