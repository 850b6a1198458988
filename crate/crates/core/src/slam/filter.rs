use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::field::{LikelihoodField, ScanPoints};
use super::map::OccupancyGrid;
use super::motion::{motion_log_density, sample_motion_model, PriorFloor};
use super::particles::{n_eff, resample, update_weights, ParticleSet};
use super::scan_match::ScanMatcher;
use crate::degeneracy::{self, Centroid, Choice, Selection};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Sym2};
use crate::world::{GridLayout, LidarScan, OdometryNoise, OdometryReading};
use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlamConfig {
    pub n_particles: usize,
    pub noise: OdometryNoise,
    pub prior_floor: PriorFloor,
    pub matcher: ScanMatcher,
    pub sigma_hit: f64,
    /// Returns at or beyond this range are mapped but not matched.
    pub usable_range: Option<f64>,
    /// Map updates between likelihood-field rebuilds.
    pub field_refresh: usize,
    /// Resample when `n_eff < resample_ratio * N`.
    pub resample_ratio: f64,
    /// With fusion disabled the factor is never requested and `p_z` is kept.
    pub fusion_enabled: bool,
}

impl Default for SlamConfig {
    fn default() -> Self {
        Self {
            n_particles: 30,
            noise: OdometryNoise::default(),
            prior_floor: PriorFloor::default(),
            matcher: ScanMatcher::default(),
            sigma_hit: 0.1,
            usable_range: None,
            field_refresh: 10,
            resample_ratio: 0.5,
            fusion_enabled: true,
        }
    }
}

/// What the degeneracy-factor provider sees at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmSnapshot {
    pub p_u: Vec<Pose>,
    pub p_z: Vec<Pose>,
    pub scores_z: Vec<f64>,
    /// Positional covariance of `p_z`.
    pub cov: Sym2,
}

impl SwarmSnapshot {
    /// Highest-scoring scan-matched pose.
    pub fn best_z(&self) -> Pose {
        self.p_z[degeneracy::best_index(&self.scores_z)]
    }
}

/// A step that has been motion-sampled and scan-matched but not yet fused.
#[derive(Debug, Clone)]
pub struct PendingStep {
    pub snapshot: SwarmSnapshot,
    pub points: ScanPoints,
    scan: LidarScan,
    u: OdometryReading,
    prev: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub estimate: Pose,
    pub a: f64,
    pub n_eff: f64,
    pub cov: Sym2,
    pub resampled: bool,
    pub choice: Choice,
    /// Score of the estimate, in `[0, 1]`.
    pub score: f64,
    pub g_u: Centroid,
    pub g_z: Centroid,
    pub g_c: Centroid,
    /// Drift of `g_z` from `g_u` under `cov`.
    pub mahalanobis: f64,
}

#[derive(Debug, Clone)]
pub struct SlamState {
    pub config: SlamConfig,
    pub map: OccupancyGrid,
    pub field: LikelihoodField,
    pub particles: ParticleSet,
    pub estimate: Pose,
    rng: Rng,
    updates_since_refresh: usize,
}

impl SlamState {
    pub fn new(layout: GridLayout, initial: Pose, config: SlamConfig, seed: u64) -> Result<Self> {
        if config.n_particles < 2 {
            return Err(Error::InvalidParams("at least two particles are required".into()));
        }
        if !(config.sigma_hit > 0.0) || config.field_refresh == 0 {
            return Err(Error::InvalidParams(
                "sigma_hit and field_refresh must be positive".into(),
            ));
        }
        let map = OccupancyGrid::new(layout);
        let field = LikelihoodField::from_occupancy(layout, &map.occupied_mask(), config.sigma_hit);
        Ok(Self {
            config,
            map,
            field,
            particles: ParticleSet::at(initial, config.n_particles),
            estimate: initial,
            rng: Rng::seed_from_u64(seed),
            updates_since_refresh: 0,
        })
    }

    /// Integrates a scan at the current estimate and rebuilds the field.
    /// Used once at startup, before any motion.
    pub fn integrate_initial_scan(&mut self, scan: &LidarScan) -> Result<()> {
        self.map.update(&self.estimate, scan)?;
        self.rebuild_field();
        Ok(())
    }

    pub fn rebuild_field(&mut self) {
        self.field = LikelihoodField::from_occupancy(self.map.layout, &self.map.occupied_mask(), self.config.sigma_hit);
        self.updates_since_refresh = 0;
    }

    /// Motion sampling and per-particle scan matching.
    pub fn prepare(&mut self, u: &OdometryReading, scan: &LidarScan) -> Result<PendingStep> {
        let prev = self.particles.poses();
        let p_u: Vec<Pose> = prev
            .iter()
            .map(|p| sample_motion_model(p, u, &self.config.noise, &mut self.rng))
            .collect();
        let points = match self.config.usable_range {
            Some(r) => ScanPoints::within(scan, r),
            None => ScanPoints::new(scan),
        };
        let mut p_z = Vec::with_capacity(p_u.len());
        let mut scores_z = Vec::with_capacity(p_u.len());
        for p in &p_u {
            let (pose, score) = self.config.matcher.optimize(p, &points, &self.field);
            if !pose.is_finite() || !score.is_finite() {
                return Err(Error::NonFinite("scan match".into()));
            }
            p_z.push(pose);
            scores_z.push(score);
        }
        let cov = degeneracy::swarm_covariance(&p_z)?;
        Ok(PendingStep {
            snapshot: SwarmSnapshot {
                p_u,
                p_z,
                scores_z,
                cov,
            },
            points,
            scan: scan.clone(),
            u: *u,
            prev,
        })
    }

    /// Fusion with factor `a`, selection, weighting, resampling and map update.
    pub fn finish(&mut self, pending: PendingStep, a: f64) -> Result<StepResult> {
        let PendingStep {
            snapshot,
            points,
            scan,
            u,
            prev,
        } = pending;
        let g_u = degeneracy::centroid(&snapshot.p_u)?;
        let g_z = degeneracy::centroid(&snapshot.p_z)?;
        let a = if self.config.fusion_enabled { a } else { 0.0 };
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidInput(format!("degeneracy factor {a} outside [0, 1]")));
        }

        let (selection, g_c) = if self.config.fusion_enabled {
            let fusion = degeneracy::fuse(&snapshot.p_z, &g_u, a)?;
            let sel = degeneracy::select_with_points(&snapshot.p_z, &snapshot.scores_z, &fusion, &points, &self.field)?;
            (sel, fusion.g_c)
        } else {
            let sel = Selection {
                choice: Choice::Observation,
                poses: snapshot.p_z.clone(),
                scores: snapshot.scores_z.clone(),
            };
            (sel, g_z)
        };

        let log_priors: Vec<f64> = prev
            .iter()
            .zip(&selection.poses)
            .map(|(from, to)| motion_log_density(from, &u, to, &self.config.noise, &self.config.prior_floor))
            .collect();
        let top = log_priors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::NonFinite("motion prior".into()));
        }
        let priors: Vec<f64> = log_priors.iter().map(|lp| (lp - top).exp()).collect();

        let mut set = self.particles.clone();
        for (p, pose) in set.particles.iter_mut().zip(&selection.poses) {
            p.pose = *pose;
        }
        let set = update_weights(&set, &selection.scores, &priors)?;
        let neff = n_eff(&set.weights())?;

        let best = selection.best_index();
        let estimate = selection.poses[best];
        let score = selection.scores[best];

        let resampled = neff < self.config.resample_ratio * set.len() as f64;
        self.particles = if resampled { resample(&set, &mut self.rng) } else { set };
        self.estimate = estimate;

        self.map.update(&estimate, &scan)?;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.config.field_refresh {
            self.rebuild_field();
        }

        let mahalanobis = degeneracy::mahalanobis(&g_u, &g_z, &snapshot.cov)?;
        Ok(StepResult {
            estimate,
            a,
            n_eff: neff,
            cov: snapshot.cov,
            resampled,
            choice: selection.choice,
            score,
            g_u,
            g_z,
            g_c,
            mahalanobis,
        })
    }

    /// One full filter update. `factor` is consulted only when fusion is enabled.
    pub fn slam_step(
        &mut self,
        u: &OdometryReading,
        scan: &LidarScan,
        factor: impl FnOnce(&SwarmSnapshot) -> f64,
    ) -> Result<StepResult> {
        let pending = self.prepare(u, scan)?;
        let a = if self.config.fusion_enabled {
            factor(&pending.snapshot)
        } else {
            0.0
        };
        self.finish(pending, a)
    }
}
