use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::network::AgentParams;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::slam::SwarmSnapshot;

/// Coordinates are divided by this after centering, in meters.
pub const STATE_SCALE: f64 = 5.0;
/// Sampled and evaluated actions are kept this far from 0 and 1.
pub const ACTION_EPS: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Centered, scaled particle coordinates ordered `[x_z, y_z, x_u, y_u]`.
pub fn build_state(p_z: &[Pose], p_u: &[Pose], n: usize) -> Result<Vec<f64>> {
    if p_z.len() != n || p_u.len() != n {
        return Err(Error::InvalidInput(format!(
            "state expects {n} particles per set, got {} and {}",
            p_z.len(),
            p_u.len()
        )));
    }
    let all = p_z.iter().chain(p_u);
    let (sx, sy) = all.fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let (cx, cy) = (sx / (2 * n) as f64, sy / (2 * n) as f64);
    let mut out = Vec::with_capacity(4 * n);
    for set in [p_z, p_u] {
        out.extend(set.iter().map(|p| (p.x - cx) / STATE_SCALE));
        out.extend(set.iter().map(|p| (p.y - cy) / STATE_SCALE));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state vector".into()));
    }
    Ok(out)
}

pub fn build_state_from_snapshot(snapshot: &SwarmSnapshot) -> Result<Vec<f64>> {
    build_state(&snapshot.p_z, &snapshot.p_u, snapshot.p_z.len())
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(a: f64) -> f64 {
    (a / (1.0 - a)).ln()
}

/// `logistic(Normal(mean, exp(log_std)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquashedGaussian {
    pub mean: f64,
    pub log_std: f64,
}

impl SquashedGaussian {
    pub fn std(&self) -> f64 {
        self.log_std.exp()
    }

    /// Deterministic action.
    pub fn mode(&self) -> f64 {
        logistic(self.mean)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let eps: f64 = StandardNormal.sample(rng);
        let a = logistic(self.mean + self.std() * eps).clamp(ACTION_EPS, 1.0 - ACTION_EPS);
        (a, self.log_prob(a))
    }

    /// Density of `a` including the squash Jacobian.
    pub fn log_prob(&self, a: f64) -> f64 {
        let a = a.clamp(ACTION_EPS, 1.0 - ACTION_EPS);
        let z = logit(a);
        let s = self.std();
        let d = (z - self.mean) / s;
        -0.5 * d * d - self.log_std - 0.5 * LN_2PI - (a * (1.0 - a)).ln()
    }

    /// Entropy of the pre-squash Gaussian, used as the exploration bonus.
    pub fn base_entropy(&self) -> f64 {
        0.5 + 0.5 * LN_2PI + self.log_std
    }
}

/// Policy output for a single state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOutput {
    /// `logistic(pre-squash mean)`, strictly in `(0, 1)`.
    pub mu: f64,
    pub dist: SquashedGaussian,
    pub value: f64,
}

pub fn policy_forward(params: &AgentParams, state: &[f64]) -> Result<PolicyOutput> {
    let x = Array2::from_shape_vec((1, state.len()), state.to_vec()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let (out, _) = params.forward(&x)?;
    let dist = SquashedGaussian {
        mean: out.mean[0],
        log_std: params.log_std,
    };
    Ok(PolicyOutput {
        mu: dist.mode(),
        dist,
        value: out.value[0],
    })
}

pub fn critic_forward(params: &AgentParams, state: &[f64]) -> Result<f64> {
    policy_forward(params, state).map(|o| o.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub covariance: f64,
    pub score: f64,
    pub n_eff: f64,
    pub smoothness: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            covariance: 0.3,
            score: 0.3,
            n_eff: 0.2,
            smoothness: 0.2,
        }
    }
}

/// Covariance length scale of the first reward term, in m².
pub const REWARD_COV_SCALE: f64 = 3.0;

/// Per-step reward. Every term is normalized to `[0, 1]` before weighting.
#[allow(clippy::too_many_arguments)]
pub fn compute_reward(
    var_x: f64,
    var_y: f64,
    score: f64,
    n_eff: f64,
    n: usize,
    a: f64,
    a_prev: f64,
    w: &RewardWeights,
) -> Result<f64> {
    let weights = [w.covariance, w.score, w.n_eff, w.smoothness];
    if weights.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return Err(Error::InvalidInput(
            "reward weights must be finite and non-negative".into(),
        ));
    }
    let tol = 1e-9;
    let ok = var_x >= 0.0
        && var_y >= 0.0
        && (-tol..=1.0 + tol).contains(&score)
        && n > 0
        && (1.0 - tol..=n as f64 + tol).contains(&n_eff)
        && (0.0..=1.0).contains(&a)
        && (0.0..=1.0).contains(&a_prev);
    if !ok {
        return Err(Error::InvalidInput(format!(
            "reward inputs out of range: var=({var_x}, {var_y}) s={score} n_eff={n_eff}/{n} a={a} a_prev={a_prev}"
        )));
    }
    let da = a - a_prev;
    Ok(w.covariance * (-(var_x + var_y) / REWARD_COV_SCALE).exp()
        + w.score * score.clamp(0.0, 1.0)
        + w.n_eff * (n_eff / n as f64).min(1.0)
        - w.smoothness * da * da)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::network::AgentConfig;
    use crate::seeded_rng;

    #[test]
    fn state_orders_blocks_and_centers() {
        let z: Vec<Pose> = (0..30).map(|i| Pose::new(1.0 + i as f64 * 0.01, 2.0, 0.0)).collect();
        let u: Vec<Pose> = z.iter().map(|p| Pose::new(p.x - 1.0, p.y, 0.0)).collect();
        let s = build_state(&z, &u, 30).unwrap();
        assert_eq!(s.len(), 120);
        for i in 0..30 {
            assert!((s[i] - s[60 + i] - 0.2).abs() < 1e-12);
            assert!(s[30 + i].abs() < 1e-12);
        }
        assert!(build_state(&z[..29], &u[..29], 30).is_err());
    }

    #[test]
    fn coincident_particles_give_zero_state() {
        let p = vec![Pose::new(3.0, -4.0, 1.0); 30];
        assert!(build_state(&p, &p, 30).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn permutation_permutes_blocks() {
        let mut rng = seeded_rng(2);
        let z: Vec<Pose> = (0..30).map(|_| Pose::new(rng.random(), rng.random(), 0.0)).collect();
        let u: Vec<Pose> = (0..30).map(|_| Pose::new(rng.random(), rng.random(), 0.0)).collect();
        let perm: Vec<usize> = (0..30).rev().collect();
        let zp: Vec<Pose> = perm.iter().map(|&i| z[i]).collect();
        let up: Vec<Pose> = perm.iter().map(|&i| u[i]).collect();
        let s = build_state(&z, &u, 30).unwrap();
        let sp = build_state(&zp, &up, 30).unwrap();
        for block in 0..4 {
            for (k, &i) in perm.iter().enumerate() {
                assert!((sp[block * 30 + k] - s[block * 30 + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reward_best_case_and_limits() {
        let w = RewardWeights::default();
        let r = compute_reward(0.0, 0.0, 1.0, 30.0, 30, 0.4, 0.4, &w).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        let r = compute_reward(1e12, 1e12, 0.0, 1.0, 30, 1.0, 0.0, &w).unwrap();
        assert!((r - (0.2 / 30.0 - 0.2)).abs() < 1e-12);
        assert!(compute_reward(-1.0, 0.0, 0.5, 2.0, 30, 0.5, 0.5, &w).is_err());
        assert!(compute_reward(0.0, 0.0, 0.5, 31.0, 30, 0.5, 0.5, &w).is_err());
    }

    #[test]
    fn reward_decreases_with_spread() {
        let w = RewardWeights::default();
        let mut rng = seeded_rng(11);
        for _ in 0..100 {
            let vx: f64 = rng.random::<f64>() * 5.0;
            let vy: f64 = rng.random::<f64>() * 5.0;
            let s: f64 = rng.random();
            let ne = 1.0 + rng.random::<f64>() * 29.0;
            let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
            let lo = compute_reward(vx, vy, s, ne, 30, a, b, &w).unwrap();
            let hi = compute_reward(vx + 0.1, vy, s, ne, 30, a, b, &w).unwrap();
            assert!(hi < lo);
        }
    }

    #[test]
    fn log_prob_finite_at_the_clamp() {
        let d = SquashedGaussian {
            mean: 0.3,
            log_std: -1.0,
        };
        assert!(d.log_prob(1e-6).is_finite());
        assert!(d.log_prob(0.0).is_finite());
        assert!(d.log_prob(1.0).is_finite());
    }

    #[test]
    fn tiny_std_samples_the_mode() {
        let d = SquashedGaussian {
            mean: 0.7,
            log_std: -40.0,
        };
        let mut rng = seeded_rng(1);
        for _ in 0..10 {
            assert!((d.sample(&mut rng).0 - logistic(0.7)).abs() < 1e-12);
        }
    }

    #[test]
    fn log_prob_matches_histogram() {
        let d = SquashedGaussian {
            mean: 0.4,
            log_std: -0.3,
        };
        let mut rng = seeded_rng(5);
        let n = 100_000;
        let bins = 20;
        let mut counts = vec![0usize; bins];
        for _ in 0..n {
            let (a, _) = d.sample(&mut rng);
            counts[((a * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let width = 1.0 / bins as f64;
        for (k, &c) in counts.iter().enumerate() {
            let empirical = c as f64 / n as f64 / width;
            // Bin-average density by midpoint quadrature.
            let sub = 200;
            let model: f64 = (0..sub)
                .map(|j| d.log_prob((k as f64 + (j as f64 + 0.5) / sub as f64) * width).exp())
                .sum::<f64>()
                / sub as f64;
            if model > 0.2 {
                assert!(
                    (empirical - model).abs() / model < 0.05,
                    "bin {k}: {empirical} vs {model}"
                );
            }
        }
    }

    #[test]
    fn mean_is_half_for_zero_state() {
        let mut rng = seeded_rng(3);
        let p = AgentParams::new(AgentConfig::default(), &mut rng).unwrap();
        let out = policy_forward(&p, &[0.0; 120]).unwrap();
        assert_eq!(out.mu, 0.5);
        assert!(policy_forward(&p, &[0.0; 119]).is_err());
    }
}
