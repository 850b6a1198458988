use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{GridLayout, WorldModel};
use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Shortest range reported when the sensor origin sits in an occupied cell.
pub const MIN_RANGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub n_beams: usize,
    pub fov: f64,
    pub max_range: f64,
    pub noise_std: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            n_beams: 180,
            fov: TAU,
            max_range: 8.0,
            noise_std: 0.01,
        }
    }
}

impl LidarConfig {
    /// Beam angles in the sensor frame. A full circle omits the duplicate
    /// endpoint; a partial fan includes both edges.
    pub fn beam_angles(&self) -> Vec<f64> {
        let n = self.n_beams;
        if n == 1 {
            return vec![0.0];
        }
        let full = self.fov >= TAU - 1e-9;
        let step = if full {
            self.fov / n as f64
        } else {
            self.fov / (n - 1) as f64
        };
        (0..n).map(|i| -0.5 * self.fov + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub ranges: Vec<f64>,
    pub angles: Vec<f64>,
    pub max_range: f64,
}

impl LidarScan {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn is_max_range(&self, i: usize) -> bool {
        self.ranges[i] >= self.max_range
    }

    /// Beam endpoints in the sensor frame, skipping max-range returns.
    pub fn endpoints(&self) -> Vec<(f64, f64)> {
        self.ranges
            .iter()
            .zip(&self.angles)
            .filter(|(r, _)| **r < self.max_range)
            .map(|(r, a)| (r * a.cos(), r * a.sin()))
            .collect()
    }
}

/// Walks the grid cells crossed by a ray (Amanatides-Woo). `visit` receives
/// `(row, col, t_enter)` with `t_enter` in meters and returns `true` to stop.
/// Traversal also ends when the ray leaves the grid or passes `max_dist`.
pub fn traverse_cells<F>(layout: &GridLayout, x: f64, y: f64, angle: f64, max_dist: f64, mut visit: F)
where
    F: FnMut(usize, usize, f64) -> bool,
{
    let (gx, gy) = layout.to_grid(x, y);
    let (dy, dx) = angle.sin_cos();
    let mut col = gx.floor() as i64;
    let mut row = gy.floor() as i64;
    let res = layout.resolution;
    let (w, h) = (layout.width as i64, layout.height as i64);

    let step_c: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_r: i64 = if dy > 0.0 { 1 } else { -1 };
    // Parametric distance (in cells) to the first boundary and per-cell increments.
    let (mut t_max_c, t_delta_c) = if dx.abs() < 1e-15 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let next = if dx > 0.0 { col as f64 + 1.0 } else { col as f64 };
        ((next - gx) / dx, 1.0 / dx.abs())
    };
    let (mut t_max_r, t_delta_r) = if dy.abs() < 1e-15 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let next = if dy > 0.0 { row as f64 + 1.0 } else { row as f64 };
        ((next - gy) / dy, 1.0 / dy.abs())
    };

    let max_t = max_dist / res;
    let mut t_enter = 0.0;
    loop {
        if col < 0 || row < 0 || col >= w || row >= h || t_enter > max_t {
            return;
        }
        if visit(row as usize, col as usize, t_enter * res) {
            return;
        }
        if t_max_c < t_max_r {
            t_enter = t_max_c;
            t_max_c += t_delta_c;
            col += step_c;
        } else {
            t_enter = t_max_r;
            t_max_r += t_delta_r;
            row += step_r;
        }
    }
}

fn cast_beam(world: &WorldModel, pose: &Pose, angle: f64, max_range: f64) -> f64 {
    let mut range = max_range;
    traverse_cells(
        &world.layout,
        pose.x,
        pose.y,
        pose.theta + angle,
        max_range,
        |r, c, t| {
            if world.is_occupied(r, c) {
                range = t.max(MIN_RANGE).min(max_range);
                true
            } else {
                false
            }
        },
    );
    range
}

/// Noise-free scan: each range is the distance to the first occupied cell
/// boundary along the beam, clamped to `max_range`.
pub fn raycast(world: &WorldModel, pose: &Pose, cfg: &LidarConfig) -> Result<LidarScan> {
    if !world.layout.contains(pose.x, pose.y) {
        return Err(Error::OutOfBounds { x: pose.x, y: pose.y });
    }
    let angles = cfg.beam_angles();
    let ranges = angles
        .iter()
        .map(|&a| cast_beam(world, pose, a, cfg.max_range))
        .collect();
    Ok(LidarScan {
        ranges,
        angles,
        max_range: cfg.max_range,
    })
}

/// Raycast plus Gaussian range noise on the returns that hit something.
pub fn raycast_noisy<R: Rng + ?Sized>(
    world: &WorldModel,
    pose: &Pose,
    cfg: &LidarConfig,
    rng: &mut R,
) -> Result<LidarScan> {
    let mut scan = raycast(world, pose, cfg)?;
    for r in scan.ranges.iter_mut() {
        if *r < cfg.max_range {
            let n: f64 = rng.sample(StandardNormal);
            *r = (*r + cfg.noise_std * n).clamp(MIN_RANGE, cfg.max_range - 1e-9);
        }
    }
    Ok(scan)
}
