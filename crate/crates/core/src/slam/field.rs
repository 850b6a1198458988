use crate::geometry::Pose;
use crate::world::{GridLayout, LidarScan};

/// Distances beyond this many kernel widths read the floor value.
const CUTOFF_SIGMAS: f64 = 4.0;

/// Exact 1-D squared distance transform of a sampled function (Felzenszwalb & Huttenlocher).
fn dt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q] == f64::INFINITY {
            continue;
        }
        if f[v[0]] == f64::INFINITY {
            v[0] = q;
            continue;
        }
        // z[0] is -inf, so the envelope pop never underflows.
        let s = loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
            } else {
                break s;
            }
        };
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if f[v[0]] == f64::INFINITY {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared Euclidean distance (in cells) from every cell center to the nearest occupied cell center.
pub fn squared_distance_transform(layout: &GridLayout, occupied: &[bool]) -> Vec<f64> {
    let (w, h) = (layout.width, layout.height);
    let n = w.max(h);
    let mut grid: Vec<f64> = occupied.iter().map(|&o| if o { 0.0 } else { f64::INFINITY }).collect();
    let (mut f, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut v, mut z) = (vec![0usize; n], vec![0.0; n + 1]);
    for col in 0..w {
        for row in 0..h {
            f[row] = grid[row * w + col];
        }
        dt_1d(&f[..h], &mut out[..h], &mut v, &mut z);
        for row in 0..h {
            grid[row * w + col] = out[row];
        }
    }
    for row in 0..h {
        f[..w].copy_from_slice(&grid[row * w..(row + 1) * w]);
        dt_1d(&f[..w], &mut out[..w], &mut v, &mut z);
        grid[row * w..(row + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

/// Precomputed obstacle-proximity likelihoods `exp(-d^2 / 2 sigma^2)` with a
/// positive floor, stored alongside their logarithms.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodField {
    pub layout: GridLayout,
    pub sigma_hit: f64,
    pub values: Vec<f64>,
    /// Log-values with a one-cell border replicating the edge cells.
    padded: Vec<f64>,
    log_floor: f64,
}

fn pad_edges(layout: &GridLayout, log_values: &[f64]) -> Vec<f64> {
    let (w, h) = (layout.width, layout.height);
    let mut out = Vec::with_capacity((w + 2) * (h + 2));
    for r in 0..h + 2 {
        let src = r.saturating_sub(1).min(h - 1);
        let row = &log_values[src * w..(src + 1) * w];
        out.push(row[0]);
        out.extend_from_slice(row);
        out.push(row[w - 1]);
    }
    out
}

impl LikelihoodField {
    pub fn from_occupancy(layout: GridLayout, occupied: &[bool], sigma_hit: f64) -> Self {
        assert_eq!(occupied.len(), layout.cells());
        let d2 = squared_distance_transform(&layout, occupied);
        let res2 = layout.resolution * layout.resolution;
        let inv = 1.0 / (2.0 * sigma_hit * sigma_hit);
        let log_floor = -(CUTOFF_SIGMAS * CUTOFF_SIGMAS) / 2.0;
        let log_values: Vec<f64> = d2.iter().map(|&c| (-(c * res2) * inv).max(log_floor)).collect();
        let values = log_values.iter().map(|l| l.exp()).collect();
        Self {
            padded: pad_edges(&layout, &log_values),
            layout,
            sigma_hit,
            values,
            log_floor,
        }
    }

    /// Field built from a caller-supplied per-cell function, for synthetic objectives.
    pub fn from_fn(layout: GridLayout, sigma_hit: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut log_values = Vec::with_capacity(layout.cells());
        for row in 0..layout.height {
            for col in 0..layout.width {
                let (x, y) = layout.cell_center(row, col);
                let v: f64 = f(x, y);
                assert!(v > 0.0 && v <= 1.0, "field values must lie in (0, 1]");
                log_values.push(v.ln());
            }
        }
        let log_floor = log_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let values = log_values.iter().map(|l| l.exp()).collect();
        Self {
            padded: pad_edges(&layout, &log_values),
            layout,
            sigma_hit,
            values,
            log_floor,
        }
    }

    pub fn floor(&self) -> f64 {
        self.log_floor.exp()
    }

    /// Bilinear interpolation of the log-field at a world point. Points off the grid read the floor.
    #[inline]
    pub fn log_lookup(&self, x: f64, y: f64) -> f64 {
        let l = &self.layout;
        let gx = (x - l.origin.0) / l.resolution - 0.5;
        let gy = (y - l.origin.1) / l.resolution - 0.5;
        if !(gx > -1.0 && gy > -1.0 && gx < l.width as f64 && gy < l.height as f64) {
            return self.log_floor;
        }
        // Shifted by one so truncation acts as floor; indices address the padded grid.
        let (c1, r1) = ((gx + 1.0) as usize, (gy + 1.0) as usize);
        let (fx, fy) = (gx + 1.0 - c1 as f64, gy + 1.0 - r1 as f64);
        let stride = l.width + 2;
        let i = r1 * stride + c1;
        let p = &self.padded;
        let top = p[i] * (1.0 - fx) + p[i + 1] * fx;
        let bot = p[i + stride] * (1.0 - fx) + p[i + stride + 1] * fx;
        top * (1.0 - fy) + bot * fy
    }

    pub fn lookup(&self, x: f64, y: f64) -> f64 {
        self.log_lookup(x, y).exp()
    }
}

/// Sensor-frame endpoints of the non-max-range beams of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoints {
    pub points: Vec<(f64, f64)>,
}

impl ScanPoints {
    pub fn new(scan: &LidarScan) -> Self {
        Self {
            points: scan.endpoints(),
        }
    }

    /// Endpoints of returns shorter than `usable_range`.
    pub fn within(scan: &LidarScan, usable_range: f64) -> Self {
        Self {
            points: scan
                .ranges
                .iter()
                .zip(&scan.angles)
                .filter(|(r, _)| **r < scan.max_range && **r < usable_range)
                .map(|(r, a)| (r * a.cos(), r * a.sin()))
                .collect(),
        }
    }

    /// Mean log-likelihood of the endpoints placed at `pose`; `None` if no beam returned.
    pub fn mean_log_likelihood(&self, field: &LikelihoodField, pose: &Pose) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let (s, c) = pose.theta.sin_cos();
        let sum: f64 = self
            .points
            .iter()
            .map(|&(px, py)| field.log_lookup(pose.x + c * px - s * py, pose.y + s * px + c * py))
            .sum();
        Some(sum / self.points.len() as f64)
    }

    /// Geometric mean of per-endpoint likelihoods, in `[0, 1]`.
    pub fn score(&self, field: &LikelihoodField, pose: &Pose) -> f64 {
        self.mean_log_likelihood(field, pose).map_or(0.0, f64::exp)
    }
}

/// Likelihood score of `scan` taken from `pose`: the geometric mean of the
/// field at each beam endpoint, max-range beams skipped, 0 if none remain.
pub fn scan_likelihood(scan: &LidarScan, field: &LikelihoodField, pose: &Pose) -> f64 {
    ScanPoints::new(scan).score(field, pose)
}
