use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Pose, Sym2};
use crate::world::{OdometryNoise, OdometryReading};

/// Draws a successor pose from the odometry motion model.
pub fn sample_motion_model<R: Rng + ?Sized>(
    pose: &Pose,
    u: &OdometryReading,
    noise: &OdometryNoise,
    rng: &mut R,
) -> Pose {
    noise.perturb(u, rng).apply(pose)
}

/// Lower bounds on the standard deviations used by [`motion_log_density`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorFloor {
    pub xy: f64,
    pub theta: f64,
}

impl Default for PriorFloor {
    fn default() -> Self {
        Self { xy: 0.05, theta: 0.05 }
    }
}

/// Linearized 3x3 covariance of the motion model in the travel frame
/// `(along, cross, theta)`. Returns `(var_along, [[cross, cross_th], [cross_th, th]])`.
fn travel_frame_covariance(u: &OdometryReading, noise: &OdometryNoise) -> (f64, Sym2) {
    let (v1, vt, v2) = noise.variances(u);
    let t = u.trans;
    (vt, Sym2::new(t * t * v1, t * v1, v1 + v2))
}

/// Linearized positional covariance of `sample_motion_model(pose, u)`.
pub fn motion_covariance(pose: &Pose, u: &OdometryReading, noise: &OdometryNoise) -> Sym2 {
    let (va, lat) = travel_frame_covariance(u, noise);
    let vc = lat.xx;
    let phi = pose.theta + u.rot1;
    let (s, c) = phi.sin_cos();
    Sym2::new(c * c * va + s * s * vc, c * s * (va - vc), s * s * va + c * c * vc)
}

/// Log-density (up to a constant shared by all particles) of reaching `to`
/// from `from` under odometry `u`, with the linearized α-model covariance
/// inflated by `floor`.
pub fn motion_log_density(
    from: &Pose,
    u: &OdometryReading,
    to: &Pose,
    noise: &OdometryNoise,
    floor: &PriorFloor,
) -> f64 {
    let mean = u.apply(from);
    let phi = from.theta + u.rot1;
    let (s, c) = phi.sin_cos();
    let (dx, dy) = (to.x - mean.x, to.y - mean.y);
    let along = c * dx + s * dy;
    let cross = -s * dx + c * dy;
    let dth = normalize_angle(to.theta - mean.theta);

    let (va, lat) = travel_frame_covariance(u, noise);
    let va = va + floor.xy * floor.xy;
    let lat = lat.add(&Sym2::new(floor.xy * floor.xy, 0.0, floor.theta * floor.theta));
    let inv = lat.inverse().expect("floored covariance is positive definite");
    let maha = along * along / va + inv.quad_form(cross, dth);
    -0.5 * maha - 0.5 * (va.ln() + lat.det().ln())
}
