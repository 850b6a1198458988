use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose,
    pub weight: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub normalized: bool,
}

impl ParticleSet {
    /// `n` particles at `pose` with uniform weights.
    pub fn at(pose: Pose, n: usize) -> Self {
        assert!(n >= 2, "a particle set needs at least two particles");
        let w = 1.0 / n as f64;
        Self {
            particles: vec![
                Particle {
                    pose,
                    weight: w,
                    score: 0.0,
                };
                n
            ],
            normalized: true,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.particles.iter().map(|p| p.pose).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }
}

/// Sets each weight proportional to `score * motion_prior` and normalizes.
/// Falls back to uniform weights when every product is zero.
pub fn update_weights(set: &ParticleSet, scores: &[f64], motion_priors: &[f64]) -> Result<ParticleSet> {
    let n = set.len();
    if scores.len() != n || motion_priors.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} scores and priors, got {} and {}",
            scores.len(),
            motion_priors.len()
        )));
    }
    if scores
        .iter()
        .chain(motion_priors)
        .any(|v| !(*v >= 0.0) || !v.is_finite())
    {
        return Err(Error::InvalidInput(
            "scores and priors must be finite and non-negative".into(),
        ));
    }
    let products: Vec<f64> = scores.iter().zip(motion_priors).map(|(s, p)| s * p).collect();
    let total: f64 = products.iter().sum();
    let mut out = set.clone();
    for (i, p) in out.particles.iter_mut().enumerate() {
        p.score = scores[i];
        p.weight = if total > 0.0 {
            products[i] / total
        } else {
            1.0 / n as f64
        };
    }
    out.normalized = true;
    Ok(out)
}

/// Effective sample size `1 / sum(w^2)` of a normalized weight vector.
pub fn n_eff(weights: &[f64]) -> Result<f64> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidInput(format!(
            "n_eff needs normalized non-negative weights (sum = {total})"
        )));
    }
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    Ok((1.0 / sq).clamp(1.0, weights.len() as f64))
}

/// Systematic resampling walk for a given offset `u0 ∈ [0, 1)`: pointer `k`
/// sits at `(u0 + k) / n` on the cumulative weight axis.
pub fn systematic_indices(weights: &[f64], u0: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut i = 0;
    for k in 0..n {
        let target = (u0 + k as f64) / n as f64;
        while target >= cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        out.push(i);
    }
    out
}

/// Low-variance systematic resampling; the result carries uniform weights.
pub fn resample<R: Rng + ?Sized>(set: &ParticleSet, rng: &mut R) -> ParticleSet {
    let n = set.len();
    let u0: f64 = rng.random_range(0.0..1.0);
    let idx = systematic_indices(&set.weights(), u0);
    let w = 1.0 / n as f64;
    ParticleSet {
        particles: idx
            .into_iter()
            .map(|i| Particle {
                weight: w,
                ..set.particles[i]
            })
            .collect(),
        normalized: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(n: usize) -> ParticleSet {
        let mut s = ParticleSet::at(Pose::default(), n);
        for (i, p) in s.particles.iter_mut().enumerate() {
            p.pose.x = i as f64;
        }
        s
    }

    #[test]
    fn weights_from_scores_and_priors() {
        let s = set(2);
        let w = update_weights(&s, &[2.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(w.weights(), vec![0.5, 0.5]);
        let w = update_weights(&set(3), &[1.0, 2.0, 1.0], &[1.0; 3]).unwrap();
        assert_eq!(w.weights(), vec![0.25, 0.5, 0.25]);
        let w = update_weights(&set(4), &[0.0; 4], &[1.0; 4]).unwrap();
        assert_eq!(w.weights(), vec![0.25; 4]);
        assert!(update_weights(&set(2), &[-1.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(update_weights(&set(2), &[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn n_eff_examples() {
        assert!((n_eff(&[1.0 / 30.0; 30]).unwrap() - 30.0).abs() < 1e-9);
        let mut one = vec![0.0; 30];
        one[0] = 1.0;
        assert_eq!(n_eff(&one).unwrap(), 1.0);
        let mut two = vec![0.0; 30];
        two[0] = 0.5;
        two[1] = 0.5;
        assert_eq!(n_eff(&two).unwrap(), 2.0);
        assert!(n_eff(&[0.3, 0.3]).is_err());
    }

    #[test]
    fn degenerate_weights_copy_one_particle() {
        let mut s = set(5);
        for (i, p) in s.particles.iter_mut().enumerate() {
            p.weight = if i == 0 { 1.0 } else { 0.0 };
        }
        let r = resample(&s, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(r.particles.iter().all(|p| p.pose.x == 0.0 && p.weight == 0.2));
    }

    #[test]
    fn hand_computed_systematic_walk() {
        // Cumulative: 0.1, 0.5, 0.6, 1.0; pointers at 0.05, 0.30, 0.55, 0.80.
        let idx = systematic_indices(&[0.1, 0.4, 0.1, 0.4], 0.2);
        assert_eq!(idx, vec![0, 1, 2, 3]);
        // Pointers at 0.225, 0.475, 0.725, 0.975.
        let idx = systematic_indices(&[0.1, 0.4, 0.1, 0.4], 0.9);
        assert_eq!(idx, vec![1, 1, 3, 3]);
    }
}
