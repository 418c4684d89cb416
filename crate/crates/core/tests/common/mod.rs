#![allow(dead_code)]

use std::collections::BTreeSet;

use tracklet3d::metrics::{self, GtBox, MetricsReport, PredBox};
use tracklet3d::simulator::{render_detections, Scenario, SimOutput};
use tracklet3d::tracker::TrackOutput;
use tracklet3d::{BetaConfig, TrackerSession};

pub fn gt_boxes(sim: &SimOutput) -> Vec<GtBox> {
    sim.ground_truth
        .iter()
        .filter(|r| r.gt_id >= 0)
        .map(|r| GtBox {
            frame: r.frame,
            gt_id: r.gt_id,
            bbox: r.bbox,
        })
        .collect()
}

pub fn pred_boxes(out: &TrackOutput) -> Vec<PredBox> {
    out.labels
        .iter()
        .map(|l| PredBox {
            frame: l.frame,
            track_id: l.track_id,
            bbox: l.bbox,
        })
        .collect()
}

pub fn track(sim: &SimOutput, cfg: &BetaConfig, with_shots: bool) -> TrackOutput {
    let shots: BTreeSet<u64> = if with_shots {
        sim.shots.iter().copied().collect()
    } else {
        BTreeSet::new()
    };
    TrackerSession::new(cfg.clone())
        .unwrap()
        .with_shot_boundaries(shots)
        .run(&sim.frames)
        .unwrap()
}

/// Simulate, track and score one scenario.
pub fn score(s: &Scenario, cfg: &BetaConfig, with_shots: bool) -> MetricsReport {
    let sim = render_detections(s).unwrap();
    let out = track(&sim, cfg, with_shots);
    metrics::evaluate(&gt_boxes(&sim), &pred_boxes(&out)).unwrap()
}
