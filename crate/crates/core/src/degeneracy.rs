//! Degeneracy handling: the observation distribution `p_z` is rigidly
//! translated toward the motion-model centroid `g_u` by a factor `a`, and the
//! better-scoring of the original and fused sets is kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Sym2};
use crate::slam::{LikelihoodField, ScanPoints};
use crate::world::LidarScan;

/// Regularization added to near-singular covariances.
pub const COV_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Centroid {
    pub x: f64,
    pub y: f64,
}

impl Centroid {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Mean `(x, y)` of a non-empty pose set.
pub fn centroid(poses: &[Pose]) -> Result<Centroid> {
    if poses.is_empty() {
        return Err(Error::InvalidInput("centroid of an empty pose set".into()));
    }
    let n = poses.len() as f64;
    let (sx, sy) = poses.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok(Centroid::new(sx / n, sy / n))
}

/// Sample covariance of `(x, y)` with `1/(N-1)` normalization.
pub fn swarm_covariance(poses: &[Pose]) -> Result<Sym2> {
    if poses.len() < 2 {
        return Err(Error::InvalidInput("covariance needs at least two poses".into()));
    }
    let g = centroid(poses)?;
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for p in poses {
        let (dx, dy) = (p.x - g.x, p.y - g.y);
        xx += dx * dx;
        xy += dx * dy;
        yy += dy * dy;
    }
    let k = 1.0 / (poses.len() - 1) as f64;
    Ok(Sym2::new(xx * k, xy * k, yy * k))
}

/// Mahalanobis distance between two centroids under `cov`, regularized by
/// `COV_EPS * I` when `cov` is near-singular.
pub fn mahalanobis(g_u: &Centroid, g_z: &Centroid, cov: &Sym2) -> Result<f64> {
    let mut c = *cov;
    if c.det() <= COV_EPS * COV_EPS || c.eigenvalues().0 <= COV_EPS {
        c = c.add(&Sym2::new(COV_EPS, 0.0, COV_EPS));
    }
    if !c.is_psd(0.0) || c.eigenvalues().0 <= 0.0 {
        return Err(Error::InvalidInput("covariance is not positive definite".into()));
    }
    let inv = c
        .inverse()
        .ok_or_else(|| Error::InvalidInput("singular covariance".into()))?;
    let d2 = inv.quad_form(g_u.x - g_z.x, g_u.y - g_z.y);
    Ok(d2.max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionResult {
    pub p_c: Vec<Pose>,
    pub g_c: Centroid,
    pub shift: (f64, f64),
}

/// Translates the whole of `p_z` so that its centroid lands on
/// `g_c = (1 - a) g_z + a g_u`. Orientations are untouched.
pub fn fuse(p_z: &[Pose], g_u: &Centroid, a: f64) -> Result<FusionResult> {
    let g_z = centroid(p_z)?;
    let shift = (a * (g_u.x - g_z.x), a * (g_u.y - g_z.y));
    let p_c = p_z.iter().map(|p| p.translated(shift.0, shift.1)).collect();
    Ok(FusionResult {
        p_c,
        g_c: Centroid::new(g_z.x + shift.0, g_z.y + shift.1),
        shift,
    })
}

/// Information-weighted fusion of two Gaussians:
/// `Σc⁻¹ = (1-a) Σz⁻¹ + a Σu⁻¹`, `gc = Σc ((1-a) Σz⁻¹ gz + a Σu⁻¹ gu)`.
/// Not used by the filter (only the centroid interpolation is actuated) but
/// kept for checking that the interpolation is its equal-covariance case.
pub fn information_fusion(
    cov_z: &Sym2,
    g_z: &Centroid,
    cov_u: &Sym2,
    g_u: &Centroid,
    a: f64,
) -> Result<(Sym2, Centroid)> {
    let iz = cov_z
        .inverse()
        .ok_or_else(|| Error::InvalidInput("singular Σz".into()))?;
    let iu = cov_u
        .inverse()
        .ok_or_else(|| Error::InvalidInput("singular Σu".into()))?;
    let info = iz.scale(1.0 - a).add(&iu.scale(a));
    let cov_c = info
        .inverse()
        .ok_or_else(|| Error::InvalidInput("singular fused information".into()))?;
    let (zx, zy) = iz.apply(g_z.x, g_z.y);
    let (ux, uy) = iu.apply(g_u.x, g_u.y);
    let (gx, gy) = cov_c.apply((1.0 - a) * zx + a * ux, (1.0 - a) * zy + a * uy);
    Ok((cov_c, Centroid::new(gx, gy)))
}

/// Which distribution a step ended up using.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    /// The scan-matched observation distribution `p_z`.
    Observation,
    /// The fused distribution `p_c`.
    Fused,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub choice: Choice,
    pub poses: Vec<Pose>,
    pub scores: Vec<f64>,
}

impl Selection {
    /// Index of the highest-scoring particle (first one on ties).
    pub fn best_index(&self) -> usize {
        best_index(&self.scores)
    }

    pub fn best_score(&self) -> f64 {
        self.scores[self.best_index()]
    }
}

pub(crate) fn best_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Rescores `p_c` and keeps whichever set has the better best particle.
/// Ties keep `p_z`.
pub fn select_with_points(
    p_z: &[Pose],
    scores_z: &[f64],
    fusion: &FusionResult,
    points: &ScanPoints,
    field: &LikelihoodField,
) -> Result<Selection> {
    if p_z.len() != scores_z.len() || p_z.len() != fusion.p_c.len() || p_z.is_empty() {
        return Err(Error::InvalidInput("inconsistent distribution lengths".into()));
    }
    let scores_c: Vec<f64> = fusion.p_c.iter().map(|p| points.score(field, p)).collect();
    let best_z = scores_z[best_index(scores_z)];
    let best_c = scores_c[best_index(&scores_c)];
    Ok(if best_c > best_z {
        Selection {
            choice: Choice::Fused,
            poses: fusion.p_c.clone(),
            scores: scores_c,
        }
    } else {
        Selection {
            choice: Choice::Observation,
            poses: p_z.to_vec(),
            scores: scores_z.to_vec(),
        }
    })
}

pub fn select_distribution(
    p_z: &[Pose],
    scores_z: &[f64],
    fusion: &FusionResult,
    scan: &LidarScan,
    field: &LikelihoodField,
) -> Result<Selection> {
    select_with_points(p_z, scores_z, fusion, &ScanPoints::new(scan), field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticDetectorReport {
    /// Symmetrized numeric Hessian over `(x, y, theta)`.
    pub hessian: [[f64; 3]; 3],
    /// Eigenvalues of the translational 2x2 block, ascending.
    pub eigenvalues: [f64; 2],
    pub factor: f64,
}

/// Finite-difference steps for the detector Hessian.
pub const HESSIAN_STEP_XY: f64 = 0.02;
pub const HESSIAN_STEP_THETA: f64 = 0.01;
const DETECTOR_EPS: f64 = 1e-12;

/// Curvature-based degeneracy factor of an arbitrary objective at `pose`.
/// `factor = 1 - λmin / (λmax + ε)` over the translational block, clamped to
/// `[0, 1]`; non-finite curvature reads as fully degenerate.
pub fn hessian_detector_with(objective: impl Fn(&Pose) -> f64, pose: &Pose) -> AnalyticDetectorReport {
    let steps = [HESSIAN_STEP_XY, HESSIAN_STEP_XY, HESSIAN_STEP_THETA];
    let shifted = |d: [f64; 3]| -> f64 {
        objective(&Pose {
            x: pose.x + d[0],
            y: pose.y + d[1],
            theta: pose.theta + d[2],
        })
    };
    let f0 = shifted([0.0; 3]);
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut d = [0.0; 3];
        d[i] = steps[i];
        let fp = shifted(d);
        d[i] = -steps[i];
        let fm = shifted(d);
        h[i][i] = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
        for j in (i + 1)..3 {
            let mut v = [0.0; 4];
            for (k, (si, sj)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].iter().enumerate() {
                let mut d = [0.0; 3];
                d[i] = si * steps[i];
                d[j] = sj * steps[j];
                v[k] = shifted(d);
            }
            let hij = (v[0] - v[1] - v[2] + v[3]) / (4.0 * steps[i] * steps[j]);
            h[i][j] = hij;
            h[j][i] = hij;
        }
    }
    let block = Sym2::new(h[0][0], h[0][1], h[1][1]);
    let (lo, hi) = block.eigenvalues();
    let finite = h.iter().flatten().all(|v| v.is_finite());
    let factor = if !finite || !lo.is_finite() || !hi.is_finite() {
        1.0
    } else {
        (1.0 - lo / (hi + DETECTOR_EPS)).clamp(0.0, 1.0)
    };
    AnalyticDetectorReport {
        hessian: h,
        eigenvalues: [lo, hi],
        factor: if factor.is_finite() { factor } else { 1.0 },
    }
}

/// Analytic baseline detector on the scan-matching objective `-log score`.
pub fn hessian_detector(pose: &Pose, scan: &LidarScan, field: &LikelihoodField) -> AnalyticDetectorReport {
    let points = ScanPoints::new(scan);
    hessian_detector_points(pose, &points, field)
}

pub fn hessian_detector_points(pose: &Pose, points: &ScanPoints, field: &LikelihoodField) -> AnalyticDetectorReport {
    hessian_detector_with(|p| points.mean_log_likelihood(field, p).map_or(f64::NAN, |l| -l), pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(xy: &[(f64, f64)]) -> Vec<Pose> {
        xy.iter().map(|&(x, y)| Pose::new(x, y, 0.1)).collect()
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(
            centroid(&pts(&[(0.0, 0.0), (2.0, 0.0)])).unwrap(),
            Centroid::new(1.0, 0.0)
        );
        assert_eq!(centroid(&pts(&[(3.0, -1.0)])).unwrap(), Centroid::new(3.0, -1.0));
        assert!(centroid(&[]).is_err());
    }

    #[test]
    fn mahalanobis_examples() {
        let d = mahalanobis(&Centroid::new(0.0, 0.0), &Centroid::new(3.0, 4.0), &Sym2::identity()).unwrap();
        assert!((d - 5.0).abs() < 1e-12);
        let same = mahalanobis(&Centroid::new(1.0, 1.0), &Centroid::new(1.0, 1.0), &Sym2::identity()).unwrap();
        assert_eq!(same, 0.0);
        let d = mahalanobis(
            &Centroid::new(2.0, 0.0),
            &Centroid::new(0.0, 0.0),
            &Sym2::new(4.0, 0.0, 1.0),
        )
        .unwrap();
        assert!((d - 1.0).abs() < 1e-12);
        // Singular covariance gets regularized rather than rejected.
        let d = mahalanobis(
            &Centroid::new(0.0, 0.0),
            &Centroid::new(0.0, 0.0),
            &Sym2::new(0.0, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(d, 0.0);
        assert!(mahalanobis(
            &Centroid::default(),
            &Centroid::new(1.0, 0.0),
            &Sym2::new(1.0, 0.0, -2.0)
        )
        .is_err());
    }

    #[test]
    fn fuse_examples() {
        let p_z = pts(&[(0.0, -1.0), (2.0, 1.0)]);
        let g_u = Centroid::new(3.0, 2.0);
        let r0 = fuse(&p_z, &g_u, 0.0).unwrap();
        assert_eq!(r0.p_c, p_z);
        let r1 = fuse(&p_z, &g_u, 1.0).unwrap();
        let c1 = centroid(&r1.p_c).unwrap();
        assert!((c1.x - 3.0).abs() < 1e-12 && (c1.y - 2.0).abs() < 1e-12);
        let r = fuse(&p_z, &g_u, 0.5).unwrap();
        assert_eq!(r.g_c, Centroid::new(2.0, 1.0));
        assert_eq!(r.shift, (1.0, 1.0));
        assert!(r.p_c.iter().zip(&p_z).all(|(c, z)| c.theta == z.theta));
    }

    #[test]
    fn covariance_examples() {
        let same = pts(&[(1.0, 1.0); 5]);
        assert_eq!(swarm_covariance(&same).unwrap(), Sym2::new(0.0, 0.0, 0.0));
        let c = swarm_covariance(&pts(&[(-1.0, 0.0), (1.0, 0.0)])).unwrap();
        assert_eq!(c, Sym2::new(2.0, 0.0, 0.0));
        assert!(swarm_covariance(&pts(&[(0.0, 0.0)])).is_err());
    }

    #[test]
    fn covariance_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let p: Vec<Pose> = (0..30)
                .map(|_| Pose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0))
                .collect();
            let c = swarm_covariance(&p).unwrap();
            // Oracle: explicit two-pass loop.
            let n = p.len();
            let mut mx = 0.0;
            let mut my = 0.0;
            for q in &p {
                mx += q.x;
                my += q.y;
            }
            mx /= n as f64;
            my /= n as f64;
            let mut o = [0.0; 3];
            for q in &p {
                o[0] += (q.x - mx).powi(2);
                o[1] += (q.x - mx) * (q.y - my);
                o[2] += (q.y - my).powi(2);
            }
            for (v, e) in [c.xx, c.xy, c.yy].iter().zip(o) {
                assert!((v - e / (n - 1) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn detector_on_isotropic_bowl_is_low() {
        let center = Pose::new(1.0, 2.0, 0.0);
        let bowl = |p: &Pose| 3.0 * ((p.x - center.x).powi(2) + (p.y - center.y).powi(2)) + 0.5 * p.theta * p.theta;
        let r = hessian_detector_with(bowl, &center);
        assert!(r.factor < 0.05, "{}", r.factor);
        assert!((r.eigenvalues[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn detector_on_flat_objective_is_one() {
        let r = hessian_detector_with(|_| 0.7, &Pose::new(0.0, 0.0, 0.0));
        assert_eq!(r.factor, 1.0);
        let r = hessian_detector_with(|_| f64::NAN, &Pose::new(0.0, 0.0, 0.0));
        assert_eq!(r.factor, 1.0);
    }

    #[test]
    fn detector_is_scale_invariant() {
        let center = Pose::new(0.0, 0.0, 0.0);
        let f = |p: &Pose| 4.0 * p.x * p.x + 0.5 * p.y * p.y + 0.3 * p.x * p.y + p.theta * p.theta;
        let a = hessian_detector_with(f, &center).factor;
        let b = hessian_detector_with(|p| 250.0 * f(p), &center).factor;
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn tie_keeps_observation() {
        let layout = crate::world::GridLayout {
            width: 20,
            height: 20,
            resolution: 0.05,
            origin: (0.0, 0.0),
        };
        let mut occ = vec![false; layout.cells()];
        occ[layout.index(10, 15)] = true;
        let field = LikelihoodField::from_occupancy(layout, &occ, 0.1);
        let scan = LidarScan {
            ranges: vec![0.25],
            angles: vec![0.0],
            max_range: 8.0,
        };
        let p_z = vec![Pose::new(0.5, 0.5, 0.0), Pose::new(0.45, 0.52, 0.0)];
        let scores: Vec<f64> = p_z
            .iter()
            .map(|p| crate::slam::scan_likelihood(&scan, &field, p))
            .collect();
        let same = fuse(&p_z, &centroid(&p_z).unwrap(), 0.0).unwrap();
        let sel = select_distribution(&p_z, &scores, &same, &scan, &field).unwrap();
        assert_eq!(sel.choice, Choice::Observation);

        // Shift toward the obstacle so the fused set strictly wins.
        let toward = Centroid::new(0.525, 0.525);
        let fused = FusionResult {
            p_c: p_z.iter().map(|p| Pose::new(0.525, 0.525, p.theta)).collect(),
            g_c: toward,
            shift: (0.0, 0.0),
        };
        let sel = select_distribution(&p_z, &scores, &fused, &scan, &field).unwrap();
        assert_eq!(sel.choice, Choice::Fused);
        assert!(sel.best_score() > scores[best_index(&scores)]);
    }
}
