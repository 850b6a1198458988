use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::slam::{PendingStep, SlamConfig, SlamState, StepResult};
use crate::world::{
    gt_degenerate, odometry_from_motion, raycast_noisy, step_robot, GroundTruthState, LidarConfig, OdometryNoise,
    WaypointFollower, WorldModel,
};
use crate::Rng;

/// Everything that shapes one simulated SLAM run apart from the world and the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub lidar: LidarConfig,
    pub slam: SlamConfig,
    /// Noise of the simulated wheel odometry.
    pub odometry_noise: OdometryNoise,
    /// Robot speed, m/s.
    pub speed: f64,
    /// Seconds per SLAM update.
    pub dt: f64,
    pub timesteps: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            lidar: LidarConfig::default(),
            slam: SlamConfig::default(),
            odometry_noise: OdometryNoise::default(),
            speed: 0.3,
            dt: 0.5,
            timesteps: 200,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0) || !(self.dt > 0.0) || self.timesteps == 0 {
            return Err(Error::InvalidParams("speed, dt and timesteps must be positive".into()));
        }
        Ok(())
    }
}

/// One completed SLAM update with the matching ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub gt: Pose,
    pub degenerate: bool,
    pub result: StepResult,
}

/// Offsets the filter's RNG stream from the simulator's so paired runs that
/// differ only in the degeneracy factor see identical sensor data.
const FILTER_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// A robot driving a world's waypoint route while the filter tracks it.
#[derive(Debug, Clone)]
pub struct SlamSession {
    pub world: WorldModel,
    pub config: SessionConfig,
    pub slam: SlamState,
    pub gt: GroundTruthState,
    follower: WaypointFollower,
    sim_rng: Rng,
    steps: usize,
}

impl SlamSession {
    /// Starts at the first waypoint facing the second and maps the first scan.
    pub fn new(world: WorldModel, config: SessionConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if world.waypoints.len() < 2 {
            return Err(Error::InvalidWorld("a route needs at least two waypoints".into()));
        }
        let (a, b) = (world.waypoints[0], world.waypoints[1]);
        let start = Pose::new(a.0, a.1, (b.1 - a.1).atan2(b.0 - a.0));
        let mut sim_rng = Rng::seed_from_u64(seed);
        let mut slam = SlamState::new(world.layout, start, config.slam, seed ^ FILTER_STREAM)?;
        let scan = raycast_noisy(&world, &start, &config.lidar, &mut sim_rng)?;
        slam.integrate_initial_scan(&scan)?;
        let follower = WaypointFollower::new(world.waypoints[1..].to_vec(), config.speed);
        Ok(Self {
            world,
            config,
            slam,
            gt: GroundTruthState { pose: start, time: 0.0 },
            follower,
            sim_rng,
            steps: 0,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.steps >= self.config.timesteps || self.follower.finished()
    }

    /// Moves the robot one period and runs the filter up to the fusion point.
    /// Returns `None` once the route or the step budget is exhausted.
    pub fn advance(&mut self) -> Result<Option<PendingStep>> {
        if self.steps >= self.config.timesteps {
            return Ok(None);
        }
        let Some((v, w)) = self.follower.command(&self.gt.pose, self.config.dt) else {
            return Ok(None);
        };
        let prev = self.gt;
        self.gt = step_robot(&self.world, &prev, v, w, self.config.dt);
        let u = odometry_from_motion(&prev, &self.gt, &self.config.odometry_noise, &mut self.sim_rng);
        let scan = raycast_noisy(&self.world, &self.gt.pose, &self.config.lidar, &mut self.sim_rng)?;
        self.slam.prepare(&u, &scan).map(Some)
    }

    /// Completes the pending update with factor `a`.
    pub fn complete(&mut self, pending: PendingStep, a: f64) -> Result<StepRecord> {
        let result = self.slam.finish(pending, a)?;
        self.steps += 1;
        Ok(StepRecord {
            t: self.gt.time,
            gt: self.gt.pose,
            degenerate: gt_degenerate(&self.world, &self.gt.pose),
            result,
        })
    }

    /// Runs to the end, asking `factor` for `a` at every step.
    pub fn run(&mut self, mut factor: impl FnMut(&PendingStep, &SlamState) -> f64) -> Result<Vec<StepRecord>> {
        let mut out = Vec::new();
        while let Some(pending) = self.advance()? {
            let a = if self.config.slam.fusion_enabled {
                factor(&pending, &self.slam)
            } else {
                0.0
            };
            out.push(self.complete(pending, a)?);
        }
        Ok(out)
    }
}
