use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GridLayout, Rect, WorldModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldKind {
    Room,
    Corridor,
    Mixed,
}

impl std::str::FromStr for WorldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "room" => Ok(WorldKind::Room),
            "corridor" => Ok(WorldKind::Corridor),
            "mixed" => Ok(WorldKind::Mixed),
            other => Err(Error::InvalidParams(format!("unknown world kind `{other}`"))),
        }
    }
}

/// Generator parameters, all lengths in meters. Fields a kind does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    pub resolution: f64,
    pub wall: f64,
    pub room_width: f64,
    pub room_height: f64,
    pub obstacles: usize,
    pub corridor_length: f64,
    pub corridor_width: f64,
    /// Small recesses cut into corridor walls.
    pub corridor_features: usize,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            wall: 0.1,
            room_width: 10.0,
            room_height: 10.0,
            obstacles: 12,
            corridor_length: 30.0,
            corridor_width: 2.0,
            corridor_features: 0,
        }
    }
}

impl WorldParams {
    /// Defaults tuned per kind: mixed worlds use smaller rooms.
    pub fn for_kind(kind: WorldKind) -> Self {
        match kind {
            WorldKind::Mixed => Self {
                room_width: 8.0,
                room_height: 8.0,
                obstacles: 8,
                corridor_length: 20.0,
                ..Self::default()
            },
            _ => Self::default(),
        }
    }

    fn validate(&self, kind: WorldKind) -> Result<()> {
        if !(self.resolution > 0.0) || !(self.wall >= self.resolution) {
            return Err(Error::InvalidParams(
                "resolution must be positive and walls at least one cell thick".into(),
            ));
        }
        if matches!(kind, WorldKind::Corridor | WorldKind::Mixed) {
            if self.corridor_length < 10.0 {
                return Err(Error::InvalidParams(format!(
                    "corridor length must be >= 10 m, got {}",
                    self.corridor_length
                )));
            }
            if self.corridor_width < 1.0 {
                return Err(Error::InvalidParams(format!(
                    "corridor width must be >= 1 m, got {}",
                    self.corridor_width
                )));
            }
        }
        if matches!(kind, WorldKind::Room | WorldKind::Mixed) && (self.room_width < 4.0 || self.room_height < 4.0) {
            return Err(Error::InvalidParams("rooms must be at least 4 x 4 m".into()));
        }
        if kind == WorldKind::Mixed && self.corridor_width > self.room_height - 1.0 {
            return Err(Error::InvalidParams("corridor wider than the rooms it joins".into()));
        }
        Ok(())
    }
}

/// Builds a deterministic world for `(kind, params, seed)`.
pub fn generate_world(kind: WorldKind, params: &WorldParams, seed: u64) -> Result<WorldModel> {
    params.validate(kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = match kind {
        WorldKind::Room => room(params, &mut rng, seed),
        WorldKind::Corridor => corridor(params, &mut rng, seed),
        WorldKind::Mixed => mixed(params, &mut rng, seed),
    };
    world.validate()?;
    Ok(world)
}

/// Solid block of the given size with nothing carved yet.
fn solid(name: String, res: f64, width_m: f64, height_m: f64) -> WorldModel {
    let layout = GridLayout {
        width: (width_m / res).round() as usize,
        height: (height_m / res).round() as usize,
        resolution: res,
        origin: (0.0, 0.0),
    };
    let mut w = WorldModel::empty("", layout);
    w.name = name;
    w.occupied.iter_mut().for_each(|c| *c = true);
    w
}

fn segment_distance(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (px - a.0 - t * dx).hypot(py - a.1 - t * dy)
}

/// Distance between a rectangle and a polyline, approximated by sampling the rectangle outline.
fn rect_path_clearance(r: &Rect, path: &[(f64, f64)]) -> f64 {
    let mut best = f64::INFINITY;
    let n = 8;
    for i in 0..=n {
        let f = i as f64 / n as f64;
        let pts = [
            (r.x0 + f * (r.x1 - r.x0), r.y0),
            (r.x0 + f * (r.x1 - r.x0), r.y1),
            (r.x0, r.y0 + f * (r.y1 - r.y0)),
            (r.x1, r.y0 + f * (r.y1 - r.y0)),
        ];
        for (px, py) in pts {
            for seg in path.windows(2) {
                best = best.min(segment_distance(px, py, seg[0], seg[1]));
            }
        }
    }
    for seg in path.windows(2) {
        if r.contains(seg[0].0, seg[0].1) {
            return 0.0;
        }
    }
    best
}

/// Scatters box obstacles inside `area`, keeping them off `path` and `keep_clear`.
fn scatter_obstacles(
    world: &mut WorldModel,
    rng: &mut ChaCha8Rng,
    area: Rect,
    count: usize,
    path: &[(f64, f64)],
    keep_clear: &[Rect],
) {
    let margin = 0.3;
    let mut placed = 0;
    let mut attempts = 0;
    while placed < count && attempts < 2000 {
        attempts += 1;
        let (hw, hh) = (rng.random_range(0.15..0.4), rng.random_range(0.15..0.4));
        let cx = rng.random_range(area.x0 + margin + hw..area.x1 - margin - hw);
        let cy = rng.random_range(area.y0 + margin + hh..area.y1 - margin - hh);
        let r = Rect::new(cx - hw, cy - hh, cx + hw, cy + hh);
        if rect_path_clearance(&r, path) < 0.6 {
            continue;
        }
        let overlaps = keep_clear
            .iter()
            .any(|k| r.x0 < k.x1 + 0.3 && r.x1 > k.x0 - 0.3 && r.y0 < k.y1 + 0.3 && r.y1 > k.y0 - 0.3);
        if overlaps {
            continue;
        }
        world.fill_rect(r, true);
        placed += 1;
    }
}

fn room(p: &WorldParams, rng: &mut ChaCha8Rng, seed: u64) -> WorldModel {
    let t = p.wall;
    let (w, h) = (p.room_width, p.room_height);
    let mut world = solid(format!("room-{seed}"), p.resolution, w + 2.0 * t, h + 2.0 * t);
    let interior = Rect::new(t, t, t + w, t + h);
    world.fill_rect(interior, false);

    let m = (w.min(h) / 4.0).min(2.5);
    let lap = [
        (t + m, t + m),
        (t + w - m, t + m),
        (t + w - m, t + h - m),
        (t + m, t + h - m),
        (t + m, t + m),
    ];
    let mut path: Vec<(f64, f64)> = lap.to_vec();
    path.extend_from_slice(&lap[1..]);
    scatter_obstacles(&mut world, rng, interior, p.obstacles, &path, &[]);
    world.waypoints = path;
    world
}

fn corridor(p: &WorldParams, rng: &mut ChaCha8Rng, seed: u64) -> WorldModel {
    let t = p.wall;
    let (len, wid) = (p.corridor_length, p.corridor_width);
    // Extra rows above and below hold optional wall recesses.
    let pad = 0.3;
    let mut world = solid(
        format!("corridor-{seed}"),
        p.resolution,
        len + 2.0 * t,
        wid + 2.0 * (t + pad),
    );
    let y0 = t + pad;
    let interior = Rect::new(t, y0, t + len, y0 + wid);
    world.fill_rect(interior, false);
    for _ in 0..p.corridor_features {
        let x = rng.random_range(t + 1.0..t + len - 1.0);
        let top = rng.random_bool(0.5);
        let recess = if top {
            Rect::new(x, y0 + wid, x + 0.3, y0 + wid + 0.2)
        } else {
            Rect::new(x, y0 - 0.2, x + 0.3, y0)
        };
        world.fill_rect(recess, false);
    }
    let cy = y0 + 0.5 * wid;
    world.waypoints = vec![(t + 1.0, cy), (t + len - 1.0, cy)];
    world.degenerate_regions = vec![interior];
    world
}

fn mixed(p: &WorldParams, rng: &mut ChaCha8Rng, seed: u64) -> WorldModel {
    let t = p.wall;
    let (rw, rh) = (p.room_width, p.room_height);
    let (len, wid) = (p.corridor_length, p.corridor_width);
    let mut world = solid(
        format!("mixed-{seed}"),
        p.resolution,
        2.0 * rw + len + 2.0 * t,
        rh + 2.0 * t,
    );
    let cy = t + 0.5 * rh;
    let room1 = Rect::new(t, t, t + rw, t + rh);
    let hall = Rect::new(t + rw, cy - 0.5 * wid, t + rw + len, cy + 0.5 * wid);
    let room2 = Rect::new(t + rw + len, t, t + 2.0 * rw + len, t + rh);
    for r in [room1, hall, room2] {
        world.fill_rect(r, false);
    }

    let e = 1.5;
    let path = vec![
        (t + e, t + e),
        (t + rw - e, t + e),
        (t + rw - e, cy),
        (t + rw + len + e, cy),
        (t + rw + len + e, t + rh - e),
        (t + 2.0 * rw + len - e, t + rh - e),
    ];
    let mouth1 = Rect::new(t + rw - 1.0, cy - 0.5 * wid, t + rw, cy + 0.5 * wid);
    let mouth2 = Rect::new(t + rw + len, cy - 0.5 * wid, t + rw + len + 1.0, cy + 0.5 * wid);
    scatter_obstacles(&mut world, rng, room1, p.obstacles, &path, &[mouth1]);
    scatter_obstacles(&mut world, rng, room2, p.obstacles, &path, &[mouth2]);
    world.waypoints = path;
    world.degenerate_regions = vec![hall];
    world
}
