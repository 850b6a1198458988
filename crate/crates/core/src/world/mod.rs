//! Simulated 2D worlds: occupancy geometry, lidar, robot kinematics and
//! ground-truth degeneracy labels.

mod generate;
mod lidar;
mod robot;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

pub use generate::{generate_world, WorldKind, WorldParams};
pub use lidar::{raycast, raycast_noisy, traverse_cells, LidarConfig, LidarScan};
pub use robot::{odometry_from_motion, step_robot, GroundTruthState, OdometryNoise, OdometryReading, WaypointFollower};

/// Geometry shared by every grid in the crate: cell `(row, col)` covers
/// `[ox + col*res, ox + (col+1)*res) x [oy + row*res, oy + (row+1)*res)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: (f64, f64),
}

impl GridLayout {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Continuous grid coordinates (in cells) of a world point.
    pub fn to_grid(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.origin.0) / self.resolution,
            (y - self.origin.1) / self.resolution,
        )
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (gx, gy) = self.to_grid(x, y);
        if gx < 0.0 || gy < 0.0 || !gx.is_finite() || !gy.is_finite() {
            return None;
        }
        let (col, row) = (gx.floor() as usize, gy.floor() as usize);
        (col < self.width && row < self.height).then_some((row, col))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.resolution,
            self.origin.1 + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.cell_of(x, y).is_some()
    }

    /// World-frame bounds `(x0, y0, x1, y1)`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.0,
            self.origin.1,
            self.origin.0 + self.width as f64 * self.resolution,
            self.origin.1 + self.height as f64 * self.resolution,
        )
    }
}

/// Closed axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

impl From<[f64; 4]> for Rect {
    fn from(v: [f64; 4]) -> Self {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x0, r.y0, r.x1, r.y1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub name: String,
    pub layout: GridLayout,
    /// Row-major occupancy, `true` = occupied.
    pub occupied: Vec<bool>,
    pub degenerate_regions: Vec<Rect>,
    pub waypoints: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    width: usize,
    height: usize,
    occupied: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    name: String,
    resolution: f64,
    origin: [f64; 2],
    grid: GridFile,
    degenerate_regions: Vec<Rect>,
    waypoints: Vec<[f64; 2]>,
}

impl WorldModel {
    /// An all-free world, mostly useful for tests.
    pub fn empty(name: &str, layout: GridLayout) -> Self {
        Self {
            name: name.to_string(),
            layout,
            occupied: vec![false; layout.cells()],
            degenerate_regions: Vec::new(),
            waypoints: Vec::new(),
        }
    }

    pub fn is_occupied(&self, row: usize, col: usize) -> bool {
        self.occupied[self.layout.index(row, col)]
    }

    /// Occupancy at a world point; points outside the grid count as occupied.
    pub fn occupied_at(&self, x: f64, y: f64) -> bool {
        match self.layout.cell_of(x, y) {
            Some((r, c)) => self.is_occupied(r, c),
            None => true,
        }
    }

    pub fn set_occupied(&mut self, row: usize, col: usize, value: bool) {
        let i = self.layout.index(row, col);
        self.occupied[i] = value;
    }

    /// Sets every cell whose center lies in `rect` to `value`.
    pub fn fill_rect(&mut self, rect: Rect, value: bool) {
        let l = self.layout;
        for row in 0..l.height {
            for col in 0..l.width {
                let (cx, cy) = l.cell_center(row, col);
                if rect.contains(cx, cy) {
                    self.set_occupied(row, col, value);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        if !(l.resolution > 0.0) || !l.resolution.is_finite() {
            return Err(Error::InvalidWorld(format!(
                "resolution must be positive, got {}",
                l.resolution
            )));
        }
        if l.width == 0 || l.height == 0 {
            return Err(Error::InvalidWorld("grid is empty".into()));
        }
        if self.occupied.len() != l.cells() {
            return Err(Error::InvalidWorld(format!(
                "occupancy has {} cells, layout needs {}",
                self.occupied.len(),
                l.cells()
            )));
        }
        let (ex0, ey0, ex1, ey1) = l.extent();
        let tol = 1e-9;
        for (i, r) in self.degenerate_regions.iter().enumerate() {
            if r.x0 < ex0 - tol || r.y0 < ey0 - tol || r.x1 > ex1 + tol || r.y1 > ey1 + tol {
                return Err(Error::InvalidWorld(format!(
                    "degenerate region {i} exceeds grid bounds"
                )));
            }
        }
        for (i, &(x, y)) in self.waypoints.iter().enumerate() {
            match l.cell_of(x, y) {
                None => {
                    return Err(Error::InvalidWorld(format!(
                        "waypoint {i} ({x}, {y}) lies outside the grid"
                    )))
                }
                Some((r, c)) if self.is_occupied(r, c) => {
                    return Err(Error::InvalidWorld(format!(
                        "waypoint occluded: waypoint {i} ({x}, {y}) is inside an occupied cell"
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let l = &self.layout;
        let mut occ = Vec::new();
        for row in 0..l.height {
            for col in 0..l.width {
                if self.is_occupied(row, col) {
                    occ.push([row, col]);
                }
            }
        }
        let file = WorldFile {
            name: self.name.clone(),
            resolution: l.resolution,
            origin: [l.origin.0, l.origin.1],
            grid: GridFile {
                width: l.width,
                height: l.height,
                occupied: occ,
            },
            degenerate_regions: self.degenerate_regions.clone(),
            waypoints: self.waypoints.iter().map(|&(x, y)| [x, y]).collect(),
        };
        serde_json::to_string(&file).expect("world serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WorldFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("world file: {e}")))?;
        let layout = GridLayout {
            width: file.grid.width,
            height: file.grid.height,
            resolution: file.resolution,
            origin: (file.origin[0], file.origin[1]),
        };
        let mut occupied = vec![false; layout.cells()];
        for &[row, col] in &file.grid.occupied {
            if row >= layout.height || col >= layout.width {
                return Err(Error::InvalidWorld(format!(
                    "occupied cell [{row}, {col}] outside {}x{} grid",
                    layout.height, layout.width
                )));
            }
            occupied[layout.index(row, col)] = true;
        }
        let world = WorldModel {
            name: file.name,
            layout,
            occupied,
            degenerate_regions: file.degenerate_regions,
            waypoints: file.waypoints.iter().map(|p| (p[0], p[1])).collect(),
        };
        world.validate()?;
        Ok(world)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_world(path: impl AsRef<Path>) -> Result<WorldModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WorldModel::from_json(&text)
}

/// Ground-truth degeneracy label: inside any (closed) degenerate region.
pub fn gt_degenerate(world: &WorldModel, pose: &Pose) -> bool {
    world.degenerate_regions.iter().any(|r| r.contains(pose.x, pose.y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world() -> WorldModel {
        let layout = GridLayout {
            width: 20,
            height: 10,
            resolution: 0.1,
            origin: (0.0, 0.0),
        };
        let mut w = WorldModel::empty("small", layout);
        w.fill_rect(Rect::new(0.0, 0.0, 2.0, 0.1), true);
        w.degenerate_regions.push(Rect::new(0.5, 0.2, 1.5, 0.8));
        w.waypoints = vec![(0.35, 0.55), (1.75, 0.55)];
        w
    }

    #[test]
    fn json_round_trip_is_identity() {
        let w = small_world();
        let back = WorldModel::from_json(&w.to_json()).unwrap();
        assert_eq!(w, back);
    }

    #[test]
    fn occluded_waypoint_is_rejected() {
        let mut w = small_world();
        w.waypoints.push((1.0, 0.05));
        let err = WorldModel::from_json(&w.to_json()).unwrap_err();
        assert!(err.to_string().contains("waypoint occluded"), "{err}");
    }

    #[test]
    fn malformed_file_is_parse_error() {
        assert!(matches!(WorldModel::from_json("{\"name\": 3}"), Err(Error::Parse(_))));
    }

    #[test]
    fn region_outside_grid_is_rejected() {
        let mut w = small_world();
        w.degenerate_regions.push(Rect::new(1.0, 0.0, 3.0, 0.5));
        assert!(w.validate().is_err());
    }

    #[test]
    fn degenerate_label_uses_closed_regions() {
        let w = small_world();
        assert!(gt_degenerate(&w, &Pose::new(1.0, 0.5, 0.0)));
        assert!(gt_degenerate(&w, &Pose::new(0.5, 0.2, 0.0)));
        assert!(gt_degenerate(&w, &Pose::new(1.5, 0.8, 1.0)));
        assert!(!gt_degenerate(&w, &Pose::new(0.3, 0.5, 0.0)));
    }
}
