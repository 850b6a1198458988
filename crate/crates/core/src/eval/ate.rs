use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slam::TimedPose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub rmse: f64,
    pub max_dx: f64,
    pub max_dy: f64,
    pub matches: usize,
}

/// Pairs each estimate with the ground-truth pose nearest in time, keeping
/// pairs no more than `tolerance` seconds apart.
pub fn match_by_time(est: &[TimedPose], gt: &[TimedPose], tolerance: f64) -> Vec<(TimedPose, TimedPose)> {
    if gt.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<TimedPose> = gt.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    est.iter()
        .filter_map(|e| {
            let i = sorted.partition_point(|g| g.t < e.t);
            let candidates = [i.checked_sub(1), (i < sorted.len()).then_some(i)];
            candidates
                .into_iter()
                .flatten()
                .map(|k| sorted[k])
                .min_by(|a, b| (a.t - e.t).abs().total_cmp(&(b.t - e.t).abs()))
                .filter(|g| (g.t - e.t).abs() <= tolerance)
                .map(|g| (*e, g))
        })
        .collect()
}

/// Translational error in the shared world frame. Both trajectories start
/// from the same origin, so no alignment is applied.
pub fn compute_ate(est: &[TimedPose], gt: &[TimedPose], period: f64) -> Result<AteReport> {
    let pairs = match_by_time(est, gt, 0.5 * period);
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "ATE needs at least two matched poses, found {}",
            pairs.len()
        )));
    }
    let mut sq = 0.0;
    let mut max_dx: f64 = 0.0;
    let mut max_dy: f64 = 0.0;
    for (e, g) in &pairs {
        let dx = e.pose.x - g.pose.x;
        let dy = e.pose.y - g.pose.y;
        sq += dx * dx + dy * dy;
        max_dx = max_dx.max(dx.abs());
        max_dy = max_dy.max(dy.abs());
    }
    Ok(AteReport {
        rmse: (sq / pairs.len() as f64).sqrt(),
        max_dx,
        max_dy,
        matches: pairs.len(),
    })
}
