use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::world::{traverse_cells, GridLayout, LidarScan};

pub const LOG_ODDS_CLAMP: f64 = 10.0;
pub const OCCUPIED_THRESH: f64 = 0.65;
pub const FREE_THRESH: f64 = 0.196;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Log-odds occupancy map sharing the simulator's grid layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub layout: GridLayout,
    pub log_odds: Vec<f64>,
    pub hit: f64,
    pub miss: f64,
}

impl OccupancyGrid {
    pub fn new(layout: GridLayout) -> Self {
        Self {
            layout,
            log_odds: vec![0.0; layout.cells()],
            hit: logit(0.7),
            miss: logit(0.4),
        }
    }

    pub fn probability(&self, row: usize, col: usize) -> f64 {
        let l = self.log_odds[self.layout.index(row, col)];
        1.0 / (1.0 + (-l).exp())
    }

    pub fn is_known(&self, row: usize, col: usize) -> bool {
        self.log_odds[self.layout.index(row, col)] != 0.0
    }

    /// Cells whose occupancy probability exceeds the occupied threshold.
    pub fn occupied_mask(&self) -> Vec<bool> {
        let t = logit(OCCUPIED_THRESH);
        self.log_odds.iter().map(|&l| l > t).collect()
    }

    fn bump(&mut self, row: usize, col: usize, delta: f64) {
        let i = self.layout.index(row, col);
        self.log_odds[i] = (self.log_odds[i] + delta).clamp(-LOG_ODDS_CLAMP, LOG_ODDS_CLAMP);
    }

    /// Integrates one scan taken from `pose`: cells along each beam become
    /// more free, the endpoint cell more occupied. Max-range beams only clear.
    pub fn update(&mut self, pose: &Pose, scan: &LidarScan) -> Result<()> {
        if !self.layout.contains(pose.x, pose.y) {
            return Err(Error::OutOfBounds { x: pose.x, y: pose.y });
        }
        let layout = self.layout;
        let mut free = Vec::new();
        for (i, (&r, &a)) in scan.ranges.iter().zip(&scan.angles).enumerate() {
            let angle = pose.theta + a;
            let hit_cell = if scan.is_max_range(i) {
                None
            } else {
                // Obstacles have depth: the return marks the cell half a cell
                // beyond the measured surface, so range noise around a cell
                // boundary does not spill into the free cell in front of it.
                let reach = r + 0.5 * layout.resolution;
                layout.cell_of(pose.x + reach * angle.cos(), pose.y + reach * angle.sin())
            };
            free.clear();
            traverse_cells(&layout, pose.x, pose.y, angle, r, |row, col, t| {
                if Some((row, col)) == hit_cell || t >= r {
                    return true;
                }
                free.push((row, col));
                false
            });
            for &(row, col) in &free {
                self.bump(row, col, self.miss);
            }
            if let Some((row, col)) = hit_cell {
                self.bump(row, col, self.hit);
            }
        }
        Ok(())
    }

    /// Binary PGM (P5): 0 = occupied, 254 = free, 205 = unknown. Image row 0 is the top of the map.
    pub fn to_pgm(&self) -> Vec<u8> {
        let l = &self.layout;
        let mut out = format!("P5\n{} {}\n255\n", l.width, l.height).into_bytes();
        for row in (0..l.height).rev() {
            for col in 0..l.width {
                let p = self.probability(row, col);
                let v = if !self.is_known(row, col) {
                    205
                } else if p > OCCUPIED_THRESH {
                    0
                } else if p < FREE_THRESH {
                    254
                } else {
                    205
                };
                out.push(v);
            }
        }
        out
    }

    pub fn metadata(&self) -> MapMetadata {
        MapMetadata {
            resolution: self.layout.resolution,
            origin: [self.layout.origin.0, self.layout.origin.1],
            occupied_thresh: OCCUPIED_THRESH,
            free_thresh: FREE_THRESH,
        }
    }

    /// Writes `<stem>.pgm` and its `<stem>.json` sidecar.
    pub fn export(&self, pgm_path: impl AsRef<Path>) -> Result<()> {
        let pgm_path = pgm_path.as_ref();
        fs::write(pgm_path, self.to_pgm()).map_err(|e| Error::io(pgm_path, e))?;
        let meta_path = pgm_path.with_extension("json");
        let meta = serde_json::to_string_pretty(&self.metadata()).expect("metadata serializes");
        fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub resolution: f64,
    pub origin: [f64; 2],
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}
