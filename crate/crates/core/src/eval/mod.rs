//! Trajectory error, detection scoring, evaluation runs and plotting.

mod ate;
mod detection;
mod plot;
mod run;

pub use ate::{compute_ate, match_by_time, AteReport};
pub use detection::{detection_metrics, DetectionFrame, DetectionMetrics, DETECTION_THRESHOLD};
pub use plot::{render_svg, series_from_csvs, PlotSeries};
pub use run::{
    metrics_csv, run_eval, run_eval_seed, write_eval_outputs, EvalMetrics, EvalMode, EvalRun, BASELINE_THRESHOLD,
    METRICS_HEADER,
};
