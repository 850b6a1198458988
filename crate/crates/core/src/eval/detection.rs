use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default decision threshold on the degeneracy factor.
pub const DETECTION_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub t: f64,
    pub factor: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// Percentage of frames where the thresholded factor agrees with the label.
    pub success_ratio: f64,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub frames: usize,
}

/// A frame is flagged degenerate only when `factor > threshold`.
pub fn detection_metrics(series: &[DetectionFrame], threshold: f64) -> Result<DetectionMetrics> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty detection series".into()));
    }
    if let Some(f) = series.iter().find(|f| !(0.0..=1.0).contains(&f.factor)) {
        return Err(Error::InvalidInput(format!("factor {} outside [0, 1]", f.factor)));
    }
    let mut fp = 0;
    let mut fn_ = 0;
    for f in series {
        match (f.factor > threshold, f.degenerate) {
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let hits = series.len() - fp - fn_;
    Ok(DetectionMetrics {
        success_ratio: 100.0 * hits as f64 / series.len() as f64,
        false_positives: fp,
        false_negatives: fn_,
        frames: series.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frames(f: impl Fn(usize) -> (f64, bool), n: usize) -> Vec<DetectionFrame> {
        (0..n)
            .map(|i| {
                let (factor, degenerate) = f(i);
                DetectionFrame {
                    t: i as f64,
                    factor,
                    degenerate,
                }
            })
            .collect()
    }

    #[test]
    fn perfect_detector() {
        let s = frames(|i| if i % 3 == 0 { (0.9, true) } else { (0.1, false) }, 30);
        assert_eq!(detection_metrics(&s, 0.75).unwrap().success_ratio, 100.0);
    }

    #[test]
    fn threshold_counts_as_healthy() {
        let s = frames(|_| (0.75, false), 10);
        assert_eq!(detection_metrics(&s, 0.75).unwrap().success_ratio, 100.0);
    }

    #[test]
    fn inverted_detector() {
        let s = frames(|i| if i % 2 == 0 { (0.1, true) } else { (0.9, false) }, 10);
        let m = detection_metrics(&s, 0.75).unwrap();
        assert_eq!(m.success_ratio, 0.0);
        assert_eq!((m.false_positives, m.false_negatives), (5, 5));
    }

    #[test]
    fn rejects_empty_and_out_of_range() {
        assert!(detection_metrics(&[], 0.75).is_err());
        assert!(detection_metrics(&frames(|_| (1.5, true), 2), 0.75).is_err());
    }

    proptest! {
        #[test]
        fn success_and_error_sum_to_hundred(v in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..200)) {
            let s: Vec<DetectionFrame> = v.iter().enumerate()
                .map(|(i, &(factor, degenerate))| DetectionFrame { t: i as f64, factor, degenerate }).collect();
            let m = detection_metrics(&s, 0.75).unwrap();
            let err = 100.0 * (m.false_positives + m.false_negatives) as f64 / m.frames as f64;
            prop_assert!((m.success_ratio + err - 100.0).abs() < 1e-9);
        }
    }
}
