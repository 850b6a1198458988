use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::WorldModel;
use crate::geometry::{normalize_angle, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthState {
    pub pose: Pose,
    pub time: f64,
}

/// Relative motion in the odometry frame, decomposed as rotate / translate / rotate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OdometryReading {
    pub trans: f64,
    pub rot1: f64,
    pub rot2: f64,
}

impl OdometryReading {
    pub fn is_zero(&self) -> bool {
        self.trans == 0.0 && self.rot1 == 0.0 && self.rot2 == 0.0
    }

    /// Decomposes the motion between two poses.
    pub fn between(prev: &Pose, cur: &Pose) -> Self {
        let (dx, dy) = (cur.x - prev.x, cur.y - prev.y);
        let trans = dx.hypot(dy);
        let rot1 = if trans < 1e-9 {
            0.0
        } else {
            normalize_angle(dy.atan2(dx) - prev.theta)
        };
        let rot2 = normalize_angle(cur.theta - prev.theta - rot1);
        Self { trans, rot1, rot2 }
    }

    /// Deterministic composition `f(pose, u)`.
    pub fn apply(&self, pose: &Pose) -> Pose {
        let heading = pose.theta + self.rot1;
        Pose::new(
            pose.x + self.trans * heading.cos(),
            pose.y + self.trans * heading.sin(),
            pose.theta + self.rot1 + self.rot2,
        )
    }
}

/// Odometry noise parameters `(a1, a2, a3, a4)`: rotation from rotation,
/// rotation from translation, translation from translation, translation from rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryNoise {
    pub alphas: [f64; 4],
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self {
            alphas: [0.05, 0.01, 0.05, 0.01],
        }
    }
}

impl OdometryNoise {
    pub fn zero() -> Self {
        Self { alphas: [0.0; 4] }
    }

    /// Variances of `(rot1, trans, rot2)` for a given motion.
    pub fn variances(&self, u: &OdometryReading) -> (f64, f64, f64) {
        let [a1, a2, a3, a4] = self.alphas;
        let (r1, t, r2) = (u.rot1 * u.rot1, u.trans * u.trans, u.rot2 * u.rot2);
        (a1 * r1 + a2 * t, a3 * t + a4 * (r1 + r2), a1 * r2 + a2 * t)
    }

    /// Draws a perturbed copy of `u`.
    pub fn perturb<R: Rng + ?Sized>(&self, u: &OdometryReading, rng: &mut R) -> OdometryReading {
        let (v1, vt, v2) = self.variances(u);
        let n1: f64 = rng.sample(StandardNormal);
        let nt: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        OdometryReading {
            rot1: normalize_angle(u.rot1 + v1.sqrt() * n1),
            trans: (u.trans + vt.sqrt() * nt).max(0.0),
            rot2: normalize_angle(u.rot2 + v2.sqrt() * n2),
        }
    }
}

/// Unicycle integration over `dt`. A translation that would enter an
/// occupied cell is cancelled; the heading still updates.
pub fn step_robot(world: &WorldModel, state: &GroundTruthState, v: f64, omega: f64, dt: f64) -> GroundTruthState {
    debug_assert!(dt > 0.0);
    let p = state.pose;
    let theta1 = p.theta + omega * dt;
    let (dx, dy) = if omega.abs() < 1e-9 {
        (v * dt * p.theta.cos(), v * dt * p.theta.sin())
    } else {
        let r = v / omega;
        (r * (theta1.sin() - p.theta.sin()), -r * (theta1.cos() - p.theta.cos()))
    };
    let dist = dx.hypot(dy);
    let steps = ((dist / (0.5 * world.layout.resolution)).ceil() as usize).max(1);
    let blocked = (1..=steps).any(|k| {
        let f = k as f64 / steps as f64;
        world.occupied_at(p.x + f * dx, p.y + f * dy)
    });
    let pose = if blocked {
        Pose::new(p.x, p.y, theta1)
    } else {
        Pose::new(p.x + dx, p.y + dy, theta1)
    };
    GroundTruthState {
        pose,
        time: state.time + dt,
    }
}

/// Odometry reading for the ground-truth motion `prev -> cur`, perturbed by the α-model.
pub fn odometry_from_motion<R: Rng + ?Sized>(
    prev: &GroundTruthState,
    cur: &GroundTruthState,
    noise: &OdometryNoise,
    rng: &mut R,
) -> OdometryReading {
    let exact = OdometryReading::between(&prev.pose, &cur.pose);
    noise.perturb(&exact, rng)
}

/// Turn-then-drive waypoint tracker producing `(v, omega)` commands.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointFollower {
    pub waypoints: Vec<(f64, f64)>,
    pub next: usize,
    pub speed: f64,
    pub max_omega: f64,
    pub reach_tolerance: f64,
}

impl WaypointFollower {
    pub fn new(waypoints: Vec<(f64, f64)>, speed: f64) -> Self {
        Self {
            waypoints,
            next: 0,
            speed,
            max_omega: 0.8,
            reach_tolerance: 0.15,
        }
    }

    pub fn finished(&self) -> bool {
        self.next >= self.waypoints.len()
    }

    /// Next command; `None` once every waypoint has been reached.
    pub fn command(&mut self, pose: &Pose, dt: f64) -> Option<(f64, f64)> {
        while let Some(&(wx, wy)) = self.waypoints.get(self.next) {
            let dist = (wx - pose.x).hypot(wy - pose.y);
            if dist < self.reach_tolerance {
                self.next += 1;
                continue;
            }
            let err = normalize_angle((wy - pose.y).atan2(wx - pose.x) - pose.theta);
            let omega = (err / dt).clamp(-self.max_omega, self.max_omega);
            let v = if err.abs() > 0.25 {
                0.0
            } else {
                self.speed.min(dist / dt)
            };
            return Some((v, omega));
        }
        None
    }
}
