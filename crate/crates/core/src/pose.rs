//! Temporal pose prediction.
//!
//! The predictor takes a track's pose history (possibly with missing frames)
//! and returns the expected pose embedding at a target frame up to `c`
//! frames ahead. Requests further out are clamped to the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::location::fit_line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseBackend {
    /// Most recent embedding.
    LastValue,
    /// Per-dimension least-squares line over the window.
    LinearExtrapolation,
    /// Forecast rows shipped with the detection file; falls back to
    /// `LastValue` when a track has none covering the target.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosePredictor {
    pub backend: PoseBackend,
    pub horizon: u32,
    pub window: usize,
}

impl Default for PosePredictor {
    fn default() -> Self {
        PosePredictor {
            backend: PoseBackend::LinearExtrapolation,
            horizon: 12,
            window: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosePrediction {
    pub embedding: Vec<f64>,
    /// The target was beyond the horizon and was clamped to it.
    pub clamped: bool,
}

/// Predicts the pose at `target_frame`. A target equal to the last observed
/// frame yields the smoothed current pose.
pub fn predict_pose(
    history: &[(u64, Vec<f64>)],
    target_frame: u64,
    predictor: &PosePredictor,
    forecast: Option<&(u64, Vec<Vec<f64>>)>,
) -> Result<PosePrediction> {
    let Some((last_frame, last)) = history.last() else {
        return Err(Error::EmptyHistory);
    };
    if target_frame < *last_frame {
        return Err(Error::OutOfOrderFrame {
            last: *last_frame,
            got: target_frame,
        });
    }
    let ahead = target_frame - last_frame;
    let clamped = ahead > predictor.horizon as u64;
    let target = last_frame + ahead.min(predictor.horizon as u64);

    let embedding = match predictor.backend {
        PoseBackend::LastValue => last.clone(),
        PoseBackend::LinearExtrapolation => linear(history, target, predictor.window)?,
        PoseBackend::External => match forecast {
            Some((anchor, rows)) if target > *anchor => {
                let step = (target - anchor) as usize;
                rows.get(step - 1)
                    .or_else(|| rows.last())
                    .cloned()
                    .unwrap_or_else(|| last.clone())
            }
            _ => last.clone(),
        },
    };
    Ok(PosePrediction { embedding, clamped })
}

fn linear(history: &[(u64, Vec<f64>)], target: u64, window: usize) -> Result<Vec<f64>> {
    let used = &history[history.len().saturating_sub(window.max(1))..];
    let dim = used[used.len() - 1].1.len();
    if let Some((_, bad)) = used.iter().find(|(_, p)| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let mut pts: Vec<(u64, f64)> = Vec::with_capacity(used.len());
    (0..dim)
        .map(|k| {
            pts.clear();
            pts.extend(used.iter().map(|(f, p)| (*f, p[k])));
            Ok(fit_line(&pts, pts.len())?.predict(target as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hist(frames: &[u64], f: impl Fn(u64) -> Vec<f64>) -> Vec<(u64, Vec<f64>)> {
        frames.iter().map(|&t| (t, f(t))).collect()
    }

    fn predictor(backend: PoseBackend) -> PosePredictor {
        PosePredictor {
            backend,
            ..PosePredictor::default()
        }
    }

    #[test]
    fn constant_history_any_backend() {
        let v = vec![0.3, -1.0, 2.0];
        let h = hist(&[0, 1, 2, 3], |_| v.clone());
        for b in [PoseBackend::LastValue, PoseBackend::LinearExtrapolation, PoseBackend::External] {
            let p = predict_pose(&h, 5, &predictor(b), None).unwrap();
            for (a, e) in p.embedding.iter().zip(&v) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_ramp() {
        let u = [1.0, -0.5];
        let h = hist(&[0, 1, 2, 3, 4], |t| u.iter().map(|x| x * t as f64).collect());
        let p = predict_pose(&h, 5, &predictor(PoseBackend::LinearExtrapolation), None).unwrap();
        assert!((p.embedding[0] - 5.0).abs() < 1e-12);
        assert!((p.embedding[1] + 2.5).abs() < 1e-12);
        assert!(!p.clamped);
    }

    #[test]
    fn gap_matches_least_squares() {
        let h = vec![(0, vec![0.0]), (1, vec![1.0]), (3, vec![2.0])];
        // normal equations on (0,0),(1,1),(3,2): n=3, st=4, stt=10, sv=3, stv=7
        let det = 3.0 * 10.0 - 16.0;
        let slope = (3.0 * 7.0 - 4.0 * 3.0) / det;
        let intercept = (10.0 * 3.0 - 4.0 * 7.0) / det;
        let oracle = intercept + slope * 4.0;
        let p = predict_pose(&h, 4, &predictor(PoseBackend::LinearExtrapolation), None).unwrap();
        assert!((p.embedding[0] - oracle).abs() < 1e-12);
        let last = predict_pose(&h, 4, &predictor(PoseBackend::LastValue), None).unwrap();
        assert_eq!(last.embedding, vec![2.0]);
    }

    #[test]
    fn clamps_beyond_horizon() {
        let h = hist(&[0, 1], |t| vec![t as f64]);
        let p = predict_pose(&h, 40, &predictor(PoseBackend::LinearExtrapolation), None).unwrap();
        assert!(p.clamped);
        assert!((p.embedding[0] - 13.0).abs() < 1e-12);
    }

    #[test]
    fn external_rows() {
        let h = vec![(10, vec![0.0])];
        let fc = (10, vec![vec![1.0], vec![2.0], vec![3.0]]);
        let pr = predictor(PoseBackend::External);
        assert_eq!(predict_pose(&h, 12, &pr, Some(&fc)).unwrap().embedding, vec![2.0]);
        assert_eq!(predict_pose(&h, 20, &pr, Some(&fc)).unwrap().embedding, vec![3.0]);
        assert_eq!(predict_pose(&h, 11, &pr, None).unwrap().embedding, vec![0.0]);
    }

    #[test]
    fn errors() {
        let pr = PosePredictor::default();
        assert!(matches!(predict_pose(&[], 1, &pr, None), Err(Error::EmptyHistory)));
        let h = vec![(5, vec![0.0])];
        assert!(predict_pose(&h, 4, &pr, None).is_err());
    }

    proptest! {
        #[test]
        fn gap_robust_and_deterministic(
            vals in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 4..10),
            drop in 1usize..3,
        ) {
            let h: Vec<_> = vals.iter().enumerate().map(|(i, v)| (i as u64, v.clone())).collect();
            let mut gapped = h.clone();
            gapped.remove(drop);
            let target = h.len() as u64 + 2;
            for b in [PoseBackend::LastValue, PoseBackend::LinearExtrapolation] {
                let pr = predictor(b);
                let full = predict_pose(&h, target, &pr, None).unwrap();
                let g = predict_pose(&gapped, target, &pr, None).unwrap();
                prop_assert_eq!(full.embedding.len(), 4);
                prop_assert_eq!(g.embedding.len(), 4);
                prop_assert!(g.embedding.iter().all(|v| v.is_finite()));
                if b == PoseBackend::LastValue {
                    prop_assert_eq!(&full.embedding, &g.embedding);
                }
                prop_assert_eq!(predict_pose(&h, target, &pr, None).unwrap(), full);
            }
        }
    }
}
