//! Shared domain types and tracklet lifecycle bookkeeping.

use serde::{Deserialize, Serialize};

use crate::appearance::{self, AppearanceMap};
use crate::config::BetaConfig;
use crate::error::{Error, Result};
use crate::location::{self, LocationForecast};

/// Axis-aligned box in pixels, `(x_min, y_min, width, height)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.width, b.height]
    }
}

impl BBox {
    pub const fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Self {
        BBox {
            x_min,
            y_min,
            width,
            height,
        }
    }

    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        BBox::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0.0
            && self.height > 0.0
            && self.x_min.is_finite()
            && self.y_min.is_finite()
            && self.width.is_finite()
            && self.height.is_finite()
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x_min + self.width).min(other.x_min + other.width) - self.x_min.max(other.x_min);
        let iy =
            (self.y_min + self.height).min(other.y_min + other.height) - self.y_min.max(other.y_min);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.area() + other.area() - inter)
    }
}

/// Root-joint location: pixel position plus nearness `n = ln(1/z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location3D {
    pub x: f64,
    pub y: f64,
    pub n: f64,
    pub z: f64,
}

impl Location3D {
    pub fn from_depth(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = location::to_nearness(z)?;
        Ok(Location3D { x, y, n, z })
    }

    pub fn from_nearness(x: f64, y: f64, n: f64) -> Self {
        Location3D {
            x,
            y,
            n,
            z: (-n).exp(),
        }
    }

    pub(crate) fn is_consistent(&self) -> bool {
        self.z > 0.0 && (self.n + self.z.ln()).abs() <= 1e-9 * self.n.abs().max(1.0)
    }
}

/// One person observed in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: u64,
    pub detection_id: String,
    pub bbox: BBox,
    pub location: Location3D,
    pub pose_embedding: Vec<f64>,
    pub appearance_map: Option<AppearanceMap>,
    pub appearance_embedding: Option<Vec<f64>>,
    /// Externally predicted poses for the next `c` frames, one row per frame.
    pub pose_forecast: Option<Vec<Vec<f64>>>,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        if !self.bbox.is_valid() {
            return Err(Error::invalid(format!(
                "detection {}: bbox must have positive width and height",
                self.detection_id
            )));
        }
        if self.appearance_map.is_none() && self.appearance_embedding.is_none() {
            return Err(Error::invalid(format!(
                "detection {}: needs an appearance map or embedding",
                self.detection_id
            )));
        }
        if !self.location.is_consistent() {
            return Err(Error::invalid(format!(
                "detection {}: nearness and depth disagree",
                self.detection_id
            )));
        }
        if let Some(rows) = &self.pose_forecast {
            let dim = self.pose_embedding.len();
            if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: bad.len(),
                });
            }
        }
        Ok(())
    }
}

/// What a tracklet expects to see at a given frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackletPrediction {
    pub track_id: u64,
    pub appearance_embedding: Vec<f64>,
    pub pose_embedding: Vec<f64>,
    /// `None` while the track has no usable location history (after a cut).
    pub location: Option<LocationForecast>,
}

/// Aggregated appearance of a tracklet.
#[derive(Debug, Clone, PartialEq)]
pub enum AppearanceState {
    Map(AppearanceMap),
    /// Running embedding for detections that come pre-encoded. `visible` is
    /// the whole-vector visibility flag used by the blend rule.
    Embedding { vector: Vec<f64>, visible: bool },
}

impl AppearanceState {
    fn from_detection(d: &Detection) -> Self {
        match (&d.appearance_map, &d.appearance_embedding) {
            (Some(map), _) => AppearanceState::Map(map.clone()),
            (None, Some(e)) => AppearanceState::Embedding {
                vector: e.clone(),
                visible: true,
            },
            (None, None) => AppearanceState::Embedding {
                vector: Vec::new(),
                visible: false,
            },
        }
    }
}

/// Evolving state of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    track_id: u64,
    appearance: AppearanceState,
    location_history: Vec<(u64, Location3D)>,
    pose_history: Vec<(u64, Vec<f64>)>,
    pose_forecast: Option<(u64, Vec<Vec<f64>>)>,
    last_frame: u64,
    age: u32,
    alive: bool,
}

impl Tracklet {
    pub fn track_id(&self) -> u64 {
        self.track_id
    }

    pub fn appearance(&self) -> &AppearanceState {
        &self.appearance
    }

    pub fn location_history(&self) -> &[(u64, Location3D)] {
        &self.location_history
    }

    pub fn pose_history(&self) -> &[(u64, Vec<f64>)] {
        &self.pose_history
    }

    /// Frame of the detection the external forecast was attached to, and
    /// the forecast rows.
    pub fn pose_forecast(&self) -> Option<&(u64, Vec<Vec<f64>>)> {
        self.pose_forecast.as_ref()
    }

    /// Frame of the last matched detection.
    pub fn last_frame(&self) -> u64 {
        self.last_frame
    }

    pub fn age(&self) -> u32 {
        self.age
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    /// Drops all location observations, e.g. after a camera cut invalidates
    /// pixel coordinates. Appearance and pose are kept.
    pub fn clear_location(&mut self) {
        self.location_history.clear();
    }
}

pub fn spawn_tracklet(d: &Detection, next_id: u64) -> Tracklet {
    Tracklet {
        track_id: next_id,
        appearance: AppearanceState::from_detection(d),
        location_history: vec![(d.frame_index, d.location)],
        pose_history: vec![(d.frame_index, d.pose_embedding.clone())],
        pose_forecast: d.pose_forecast.clone().map(|f| (d.frame_index, f)),
        last_frame: d.frame_index,
        age: 0,
        alive: true,
    }
}

fn push_bounded<T>(v: &mut Vec<T>, item: T, cap: usize) {
    v.push(item);
    if v.len() > cap {
        let excess = v.len() - cap;
        v.drain(..excess);
    }
}

/// Folds a matched detection into the tracklet.
pub fn touch_tracklet(t: &mut Tracklet, d: &Detection, cfg: &BetaConfig) -> Result<()> {
    let last_seen = t
        .location_history
        .last()
        .map(|(f, _)| *f)
        .into_iter()
        .chain(t.pose_history.last().map(|(f, _)| *f))
        .max()
        .unwrap_or(t.last_frame)
        .max(t.last_frame);
    if d.frame_index <= last_seen {
        return Err(Error::OutOfOrderFrame {
            last: last_seen,
            got: d.frame_index,
        });
    }

    match (&mut t.appearance, &d.appearance_map, &d.appearance_embedding) {
        (AppearanceState::Map(prev), Some(obs), _) => {
            *prev = appearance::aggregate(prev, obs, cfg.alpha_0, cfg.visibility_threshold)?;
        }
        (AppearanceState::Embedding { vector, visible }, map, emb) => {
            let obs = match (emb, map) {
                (Some(e), _) => Some(e.clone()),
                (None, Some(m)) => Some(appearance::encode(m, &cfg.encoder)),
                (None, None) => None,
            };
            if let Some(obs) = obs {
                let (v, vis) = appearance::aggregate_embedding(vector, *visible, &obs, true, cfg.alpha_0)?;
                *vector = v;
                *visible = vis;
            }
        }
        // A map state cannot absorb a bare embedding; the aggregate is kept.
        (AppearanceState::Map(_), None, _) => {}
    }

    push_bounded(&mut t.location_history, (d.frame_index, d.location), cfg.w);
    push_bounded(
        &mut t.pose_history,
        (d.frame_index, d.pose_embedding.clone()),
        cfg.pose_capacity(),
    );
    if let Some(f) = &d.pose_forecast {
        t.pose_forecast = Some((d.frame_index, f.clone()));
    }
    t.last_frame = d.frame_index;
    t.age = 0;
    t.alive = true;
    Ok(())
}

/// Ages every given (unmatched) track by one frame and splits off those that
/// reached `t_max`.
pub fn age_and_reap(tracks: Vec<Tracklet>, t_max: u32) -> (Vec<Tracklet>, Vec<Tracklet>) {
    tracks
        .into_iter()
        .map(|mut t| {
            t.age += 1;
            t.alive = t.age < t_max;
            t
        })
        .partition(|t| t.alive)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn detection(frame: u64, id: &str, x: f64, y: f64, z: f64) -> Detection {
        Detection {
            frame_index: frame,
            detection_id: id.to_string(),
            bbox: BBox::centered(x, y, 20.0, 60.0),
            location: Location3D::from_depth(x, y, z).unwrap(),
            pose_embedding: vec![0.0; 4],
            appearance_map: None,
            appearance_embedding: Some(vec![0.5; 4]),
            pose_forecast: None,
        }
    }
}
