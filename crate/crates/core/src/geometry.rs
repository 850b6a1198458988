use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar robot pose in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    /// Maps a point from this pose's body frame into the world frame.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            theta: self.theta,
        }
    }

    pub fn distance_xy(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Self::new(self.yy / d, -self.xy / d, self.xx / d))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * self.trace();
        let diff = 0.5 * (self.xx - self.yy);
        let r = diff.hypot(self.xy);
        (half_tr - r, half_tr + r)
    }

    pub fn quad_form(&self, vx: f64, vy: f64) -> f64 {
        vx * (self.xx * vx + self.xy * vy) + vy * (self.xy * vx + self.yy * vy)
    }

    pub fn apply(&self, vx: f64, vy: f64) -> (f64, f64) {
        (self.xx * vx + self.xy * vy, self.xy * vx + self.yy * vy)
    }

    pub fn add(&self, other: &Sym2) -> Sym2 {
        Sym2::new(self.xx + other.xx, self.xy + other.xy, self.yy + other.yy)
    }

    pub fn scale(&self, k: f64) -> Sym2 {
        Sym2::new(self.xx * k, self.xy * k, self.yy * k)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.eigenvalues().0 >= -tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(2.5 * PI) - 0.5 * PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5 * PI) + 0.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn sym2_eigen_and_inverse() {
        let m = Sym2::new(4.0, 0.0, 1.0);
        assert_eq!(m.eigenvalues(), (1.0, 4.0));
        let inv = m.inverse().unwrap();
        assert!((inv.xx - 0.25).abs() < 1e-15);
        assert!((m.quad_form(2.0, 0.0) - 16.0).abs() < 1e-12);
        assert!(Sym2::new(1.0, 2.0, 1.0).inverse().is_some());
        assert!(!Sym2::new(1.0, 2.0, 1.0).is_psd(1e-12));
    }
}
