use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose,
}

/// `(qx, qy, qz, qw)` of a rotation by `yaw` about +z.
pub fn quaternion_from_yaw(yaw: f64) -> (f64, f64, f64, f64) {
    let (s, c) = (0.5 * yaw).sin_cos();
    (0.0, 0.0, s, c)
}

/// One `timestamp x y z qx qy qz qw` line per pose, six decimals, `z = 0`.
pub fn format_trajectory(poses: &[TimedPose]) -> String {
    let mut out = String::new();
    for p in poses {
        let (qx, qy, qz, qw) = quaternion_from_yaw(p.pose.theta);
        let _ = writeln!(
            out,
            "{:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            p.t, p.pose.x, p.pose.y, 0.0, qx, qy, qz, qw
        );
    }
    out
}

pub fn write_trajectory(path: impl AsRef<Path>, poses: &[TimedPose]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_trajectory(poses)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_format() {
        let s = format_trajectory(&[TimedPose {
            t: 0.5,
            pose: Pose::new(1.0, -2.0, std::f64::consts::FRAC_PI_2),
        }]);
        assert_eq!(
            s,
            "0.500000 1.000000 -2.000000 0.000000 0.000000 0.000000 0.707107 0.707107\n"
        );
    }

    #[test]
    fn quaternion_is_unit() {
        for k in -10..=10 {
            let (_, _, z, w) = quaternion_from_yaw(k as f64 * 0.3);
            assert!((z * z + w * w - 1.0).abs() < 1e-15);
        }
    }
}
