use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{build_state_from_snapshot, policy_forward, AgentParams};
use crate::degeneracy::{hessian_detector_points, Choice};
use crate::error::{Error, Result};
use crate::slam::{write_trajectory, OccupancyGrid, TimedPose};
use crate::training::{SessionConfig, SlamSession};
use crate::world::WorldModel;

use super::ate::compute_ate;
use super::detection::{detection_metrics, DetectionFrame, DETECTION_THRESHOLD};
use super::plot::{render_svg, PlotSeries};

/// Threshold applied to the Hessian baseline's factor.
pub const BASELINE_THRESHOLD: f64 = 0.7;

/// How the degeneracy factor is produced during an evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvalMode {
    /// The trained agent's mean action.
    Doa,
    /// Fusion disabled.
    Vanilla,
    /// Factor from the scan-match Hessian's translational eigenvalue ratio.
    AnalyticBaseline,
    Constant(f64),
}

impl EvalMode {
    /// Detection threshold for this mode's factor, if it has one.
    pub fn threshold(&self) -> Option<f64> {
        match self {
            Self::Doa => Some(DETECTION_THRESHOLD),
            Self::AnalyticBaseline => Some(BASELINE_THRESHOLD),
            Self::Constant(_) => Some(DETECTION_THRESHOLD),
            Self::Vanilla => None,
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doa" => Ok(Self::Doa),
            "vanilla" => Ok(Self::Vanilla),
            "analytic-baseline" => Ok(Self::AnalyticBaseline),
            _ => {
                let a = s
                    .strip_prefix("constant:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("unknown eval mode `{s}`")))?;
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::Parse(format!("constant factor {a} outside [0, 1]")));
                }
                Ok(Self::Constant(a))
            }
        }
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Doa => f.write_str("doa"),
            Self::Vanilla => f.write_str("vanilla"),
            Self::AnalyticBaseline => f.write_str("analytic-baseline"),
            Self::Constant(a) => write!(f, "constant:{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub seed: u64,
    pub ate: f64,
    pub max_dx: f64,
    pub max_dy: f64,
    pub resample_count: usize,
    pub mean_neff: f64,
    /// Percent; absent when the mode has no factor or the world has no labels.
    pub detection_success: Option<f64>,
    pub fused_steps: usize,
    pub steps: usize,
}

pub const METRICS_HEADER: &str = "seed,ate,max_dx,max_dy,resample_count,mean_neff,detection_success,fused_steps,steps";

impl EvalMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.ate,
            self.max_dx,
            self.max_dy,
            self.resample_count,
            self.mean_neff,
            self.detection_success.map(|d| d.to_string()).unwrap_or_default(),
            self.fused_steps,
            self.steps
        )
    }
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub metrics: EvalMetrics,
    pub estimate: Vec<TimedPose>,
    pub ground_truth: Vec<TimedPose>,
    /// Factor per step with the ground-truth label; empty for vanilla runs.
    pub factors: Vec<DetectionFrame>,
    pub map: OccupancyGrid,
}

/// Runs one SLAM session under `mode`. `params` is required for [`EvalMode::Doa`].
pub fn run_eval_seed(
    world: &WorldModel,
    mode: EvalMode,
    params: Option<&AgentParams>,
    config: &SessionConfig,
    seed: u64,
) -> Result<EvalRun> {
    let mut config = *config;
    config.slam.fusion_enabled = mode != EvalMode::Vanilla;
    if mode == EvalMode::Doa {
        let p = params.ok_or_else(|| Error::InvalidInput("doa mode needs a checkpoint".into()))?;
        if p.config.state_dim != 4 * config.slam.n_particles {
            return Err(Error::ShapeMismatch {
                layer: "backbone.0".into(),
                expected: format!("{} inputs", 4 * config.slam.n_particles),
                found: format!("{} inputs", p.config.state_dim),
            });
        }
    }
    let mut session = SlamSession::new(world.clone(), config, seed)?;
    let mut estimate = vec![TimedPose {
        t: 0.0,
        pose: session.slam.estimate,
    }];
    let mut ground_truth = vec![TimedPose {
        t: 0.0,
        pose: session.gt.pose,
    }];
    let mut factors = Vec::new();
    let (mut resamples, mut neff_sum, mut fused, mut steps) = (0, 0.0, 0, 0);

    while let Some(pending) = session.advance()? {
        let factor = match mode {
            EvalMode::Vanilla => None,
            EvalMode::Constant(a) => Some(a),
            EvalMode::AnalyticBaseline => {
                Some(hessian_detector_points(&pending.snapshot.best_z(), &pending.points, &session.slam.field).factor)
            }
            EvalMode::Doa => {
                let state = build_state_from_snapshot(&pending.snapshot)?;
                Some(policy_forward(params.expect("checked above"), &state)?.mu)
            }
        };
        let rec = session.complete(pending, factor.unwrap_or(0.0))?;
        if let Some(f) = factor {
            factors.push(DetectionFrame {
                t: rec.t,
                factor: f,
                degenerate: rec.degenerate,
            });
        }
        resamples += usize::from(rec.result.resampled);
        neff_sum += rec.result.n_eff;
        fused += usize::from(rec.result.choice == Choice::Fused);
        steps += 1;
        estimate.push(TimedPose {
            t: rec.t,
            pose: rec.result.estimate,
        });
        ground_truth.push(TimedPose { t: rec.t, pose: rec.gt });
    }
    let ate = compute_ate(&estimate, &ground_truth, config.dt)?;
    let detection_success = match mode.threshold() {
        Some(th) if !factors.is_empty() && !world.degenerate_regions.is_empty() => {
            Some(detection_metrics(&factors, th)?.success_ratio)
        }
        _ => None,
    };
    Ok(EvalRun {
        metrics: EvalMetrics {
            seed,
            ate: ate.rmse,
            max_dx: ate.max_dx,
            max_dy: ate.max_dy,
            resample_count: resamples,
            mean_neff: if steps > 0 { neff_sum / steps as f64 } else { 0.0 },
            detection_success,
            fused_steps: fused,
            steps,
        },
        estimate,
        ground_truth,
        factors,
        map: session.slam.map,
    })
}

/// Evaluates every seed and, with `out_dir`, writes `metrics.csv` plus a map,
/// trajectories and a factor plot per seed.
pub fn run_eval(
    world: &WorldModel,
    mode: EvalMode,
    params: Option<&AgentParams>,
    config: &SessionConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<EvalRun>> {
    let runs = seeds
        .iter()
        .map(|&s| run_eval_seed(world, mode, params, config, s))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out_dir {
        write_eval_outputs(&runs, mode, dir)?;
    }
    Ok(runs)
}

pub fn metrics_csv(runs: &[EvalRun]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in runs {
        let _ = writeln!(out, "{}", r.metrics.csv_row());
    }
    out
}

fn factor_csv(frames: &[DetectionFrame]) -> String {
    let mut out = String::from("t,factor,degenerate\n");
    for f in frames {
        let _ = writeln!(out, "{},{},{}", f.t, f.factor, u8::from(f.degenerate));
    }
    out
}

pub fn write_eval_outputs(runs: &[EvalRun], mode: EvalMode, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    write("metrics.csv".into(), metrics_csv(runs))?;
    for r in runs {
        let s = r.metrics.seed;
        r.map.export(dir.join(format!("map_seed{s}.pgm")))?;
        write_trajectory(dir.join(format!("trajectory_seed{s}.txt")), &r.estimate)?;
        write_trajectory(dir.join(format!("ground_truth_seed{s}.txt")), &r.ground_truth)?;
        if !r.factors.is_empty() {
            write(format!("factors_seed{s}.csv"), factor_csv(&r.factors))?;
            let labels = r.factors.iter().map(|f| if f.degenerate { 1.0 } else { 0.0 }).collect();
            let svg = render_svg(
                &format!("degeneracy factor ({mode}, seed {s})"),
                &[
                    PlotSeries::single("factor", r.factors.iter().map(|f| f.factor).collect()),
                    PlotSeries::single("degenerate", labels),
                ],
            )?;
            write(format!("factors_seed{s}.svg"), svg)?;
        }
    }
    Ok(())
}
