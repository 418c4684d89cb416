//! Online tracking loop.
//!
//! Per frame: predict every live tracklet at the current frame, score all
//! track/detection pairs, solve the thresholded assignment, fold matched
//! detections into their tracks, age the rest, spawn tracks for leftover
//! detections and kill tracks that stayed unmatched for `t_max` frames.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::appearance::{detection_embedding, predict_appearance};
use crate::association::{cost_from_distances, pair_distances, solve_assignment, CostMatrix, SENTINEL_COST};
use crate::config::BetaConfig;
use crate::error::{Error, Result};
use crate::location::predict_location;
use crate::pose::predict_pose;
use crate::track_state::{
    age_and_reap, spawn_tracklet, touch_tracklet, BBox, Detection, Tracklet, TrackletPrediction,
};

/// All detections of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: u64,
    pub detections: Vec<Detection>,
}

/// Identity decision for one detection.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabel {
    pub frame: u64,
    pub detection_id: String,
    pub track_id: u64,
    /// Cost of the accepted match; `None` for a newly spawned track.
    pub cost: Option<f64>,
    pub matched: bool,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDiagnostics {
    pub frame: u64,
    pub shot_mode: bool,
    pub num_tracks: usize,
    pub num_detections: usize,
    pub matched_costs: Vec<f64>,
    pub spawned: usize,
    pub killed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSummary {
    pub track_id: u64,
    pub first_frame: u64,
    pub last_frame: u64,
    pub detections: usize,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackOutput {
    pub labels: Vec<FrameLabel>,
    pub tracks: Vec<TrackSummary>,
    pub diagnostics: Vec<FrameDiagnostics>,
}

/// What the tracklet expects to see at `target_frame`.
pub fn predict_tracklet(t: &Tracklet, target_frame: u64, cfg: &BetaConfig) -> Result<TrackletPrediction> {
    let pose = predict_pose(
        t.pose_history(),
        target_frame,
        &cfg.pose_predictor(),
        t.pose_forecast(),
    )?;
    let location = if t.location_history().is_empty() {
        None
    } else {
        Some(predict_location(t, target_frame, cfg)?)
    };
    Ok(TrackletPrediction {
        track_id: t.track_id(),
        appearance_embedding: predict_appearance(t, &cfg.encoder),
        pose_embedding: pose.embedding,
        location,
    })
}

/// Cost matrix between predictions (rows) and detections (columns).
pub fn build_cost_matrix(
    preds: &[TrackletPrediction],
    detections: &[Detection],
    cfg: &BetaConfig,
    shot_mode: bool,
) -> CostMatrix {
    let embeddings: Vec<Vec<f64>> = detections
        .iter()
        .map(|d| detection_embedding(d, &cfg.encoder))
        .collect();
    CostMatrix::from_fn(preds.len(), detections.len(), shot_mode, |r, c| {
        pair_distances(&preds[r], &embeddings[c], &detections[c])
            .map(|pd| cost_from_distances(&pd, cfg, shot_mode))
            .unwrap_or(SENTINEL_COST)
    })
}

/// Tracking state of one video.
#[derive(Debug, Clone)]
pub struct TrackerSession {
    cfg: BetaConfig,
    tracklets: Vec<Tracklet>,
    next_id: u64,
    frame_cursor: Option<u64>,
    shot_boundaries: BTreeSet<u64>,
    pending_shot: bool,
    summaries: BTreeMap<u64, TrackSummary>,
}

impl TrackerSession {
    pub fn new(cfg: BetaConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(TrackerSession {
            cfg,
            tracklets: Vec::new(),
            next_id: 0,
            frame_cursor: None,
            shot_boundaries: BTreeSet::new(),
            pending_shot: false,
            summaries: BTreeMap::new(),
        })
    }

    /// Frames at which a new shot starts. The first frame processed at or
    /// after each boundary is associated without location terms.
    pub fn with_shot_boundaries(mut self, frames: impl IntoIterator<Item = u64>) -> Self {
        self.shot_boundaries.extend(frames);
        self
    }

    pub fn add_shot_boundary(&mut self, frame: u64) {
        self.shot_boundaries.insert(frame);
    }

    pub fn config(&self) -> &BetaConfig {
        &self.cfg
    }

    pub fn tracklets(&self) -> &[Tracklet] {
        &self.tracklets
    }

    pub fn frame_cursor(&self) -> Option<u64> {
        self.frame_cursor
    }

    fn age_all(&mut self) -> usize {
        let tracks = std::mem::take(&mut self.tracklets);
        let (alive, killed) = age_and_reap(tracks, self.cfg.t_max);
        self.tracklets = alive;
        self.mark_killed(&killed);
        killed.len()
    }

    fn mark_killed(&mut self, killed: &[Tracklet]) {
        for t in killed {
            if let Some(s) = self.summaries.get_mut(&t.track_id()) {
                s.alive = false;
            }
        }
    }

    /// Processes one frame and labels each detection with a track id, in
    /// input order.
    pub fn step(&mut self, frame_index: u64, detections: &[Detection]) -> Result<(Vec<FrameLabel>, FrameDiagnostics)> {
        if let Some(last) = self.frame_cursor {
            if frame_index <= last {
                return Err(Error::OutOfOrderFrame {
                    last,
                    got: frame_index,
                });
            }
        }
        let mut seen = HashSet::new();
        for d in detections {
            if d.frame_index != frame_index {
                return Err(Error::invalid(format!(
                    "detection {} carries frame {} inside frame {frame_index}",
                    d.detection_id, d.frame_index
                )));
            }
            if !seen.insert(d.detection_id.as_str()) {
                return Err(Error::invalid(format!(
                    "duplicate detection id {} in frame {frame_index}",
                    d.detection_id
                )));
            }
            d.validate()?;
        }

        // frames absent from the stream are empty frames
        let mut killed = 0;
        if let Some(last) = self.frame_cursor {
            for skipped in last + 1..frame_index {
                self.pending_shot |= self.shot_boundaries.contains(&skipped);
                killed += self.age_all();
            }
        }
        self.frame_cursor = Some(frame_index);
        let shot_mode = self.pending_shot || self.shot_boundaries.contains(&frame_index);
        self.pending_shot = false;

        let preds = self
            .tracklets
            .iter()
            .map(|t| predict_tracklet(t, frame_index, &self.cfg))
            .collect::<Result<Vec<_>>>()?;
        let costs = build_cost_matrix(&preds, detections, &self.cfg, shot_mode);
        let assignment = solve_assignment(&costs, self.cfg.beta_th);

        if shot_mode {
            // pixel coordinates from the previous shot are meaningless now
            for t in &mut self.tracklets {
                t.clear_location();
            }
        }

        let mut labels: Vec<Option<FrameLabel>> = vec![None; detections.len()];
        let mut matched_track = vec![false; self.tracklets.len()];
        let mut matched_costs = Vec::with_capacity(assignment.matches.len());
        for &(r, k) in &assignment.matches {
            let d = &detections[k];
            let c = costs.get(r, k);
            let t = &mut self.tracklets[r];
            touch_tracklet(t, d, &self.cfg)?;
            matched_track[r] = true;
            matched_costs.push(c);
            let summary = self
                .summaries
                .get_mut(&t.track_id())
                .ok_or_else(|| Error::Invariant(format!("no summary for track {}", t.track_id())))?;
            summary.last_frame = frame_index;
            summary.detections += 1;
            labels[k] = Some(FrameLabel {
                frame: frame_index,
                detection_id: d.detection_id.clone(),
                track_id: t.track_id(),
                cost: Some(c),
                matched: true,
                bbox: d.bbox,
            });
        }

        let num_tracks = self.tracklets.len();
        let (matched, unmatched): (Vec<_>, Vec<_>) = std::mem::take(&mut self.tracklets)
            .into_iter()
            .zip(matched_track)
            .partition(|(_, m)| *m);
        let (mut alive, dead) = age_and_reap(unmatched.into_iter().map(|(t, _)| t).collect(), self.cfg.t_max);
        killed += dead.len();
        self.mark_killed(&dead);
        alive.extend(matched.into_iter().map(|(t, _)| t));
        alive.sort_by_key(|t| t.track_id());
        self.tracklets = alive;

        let mut spawned = 0;
        for &k in &assignment.unmatched_detections {
            let d = &detections[k];
            let id = self.next_id;
            self.next_id += 1;
            spawned += 1;
            self.tracklets.push(spawn_tracklet(d, id));
            self.summaries.insert(
                id,
                TrackSummary {
                    track_id: id,
                    first_frame: frame_index,
                    last_frame: frame_index,
                    detections: 1,
                    alive: true,
                },
            );
            labels[k] = Some(FrameLabel {
                frame: frame_index,
                detection_id: d.detection_id.clone(),
                track_id: id,
                cost: None,
                matched: false,
                bbox: d.bbox,
            });
        }

        let labels = labels
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Invariant(format!("unlabeled detection in frame {frame_index}")))?;
        let diag = FrameDiagnostics {
            frame: frame_index,
            shot_mode,
            num_tracks,
            num_detections: detections.len(),
            matched_costs,
            spawned,
            killed,
        };
        Ok((labels, diag))
    }

    /// Runs the whole stream. Frames must be strictly increasing.
    pub fn run(mut self, frames: &[Frame]) -> Result<TrackOutput> {
        let mut out = TrackOutput::default();
        for frame in frames {
            let (labels, diag) = self.step(frame.index, &frame.detections)?;
            out.labels.extend(labels);
            out.diagnostics.push(diag);
        }
        out.tracks = self.summaries.into_values().collect();
        Ok(out)
    }
}
