use serde::{Deserialize, Serialize};

use super::field::{LikelihoodField, ScanPoints};
use crate::geometry::Pose;
use crate::world::LidarScan;

/// Hill-climbing coordinate search over `(x, y, theta)` with halving steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanMatcher {
    pub linear_step: f64,
    pub angular_step: f64,
    pub min_linear_step: f64,
    pub min_angular_step: f64,
    /// Moves allowed per step size before forcing a halving.
    pub max_moves_per_level: usize,
}

impl Default for ScanMatcher {
    fn default() -> Self {
        Self {
            linear_step: 0.05,
            angular_step: 0.02,
            min_linear_step: 0.005,
            min_angular_step: 0.002,
            max_moves_per_level: 40,
        }
    }
}

impl ScanMatcher {
    /// Returns the refined pose and its score. The score never drops below the
    /// initial one; the result is a local optimum at the final step size.
    pub fn optimize(&self, pose0: &Pose, points: &ScanPoints, field: &LikelihoodField) -> (Pose, f64) {
        let Some(mut best) = points.mean_log_likelihood(field, pose0) else {
            return (*pose0, 0.0);
        };
        let mut pose = *pose0;
        let (mut lin, mut ang) = (self.linear_step, self.angular_step);
        let mut moves = 0;
        while lin >= self.min_linear_step || ang >= self.min_angular_step {
            let candidates = [
                Pose {
                    x: pose.x + lin,
                    ..pose
                },
                Pose {
                    x: pose.x - lin,
                    ..pose
                },
                Pose {
                    y: pose.y + lin,
                    ..pose
                },
                Pose {
                    y: pose.y - lin,
                    ..pose
                },
                Pose::new(pose.x, pose.y, pose.theta + ang),
                Pose::new(pose.x, pose.y, pose.theta - ang),
            ];
            let mut improved = None;
            let mut top = best;
            for c in candidates {
                let s = points.mean_log_likelihood(field, &c).unwrap_or(f64::NEG_INFINITY);
                if s > top {
                    top = s;
                    improved = Some(c);
                }
            }
            match improved {
                Some(c) if moves < self.max_moves_per_level => {
                    pose = c;
                    best = top;
                    moves += 1;
                }
                Some(c) => {
                    pose = c;
                    best = top;
                    moves = 0;
                    lin *= 0.5;
                    ang *= 0.5;
                }
                None => {
                    moves = 0;
                    lin *= 0.5;
                    ang *= 0.5;
                }
            }
        }
        (pose, best.exp())
    }
}

pub fn scan_match(pose0: &Pose, scan: &LidarScan, field: &LikelihoodField) -> (Pose, f64) {
    ScanMatcher::default().optimize(pose0, &ScanPoints::new(scan), field)
}
