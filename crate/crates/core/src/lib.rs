//! Online multi-person tracking from per-frame 3D detections.
//!
//! Each tracklet aggregates appearance, location and pose over time and
//! predicts them forward; detections are associated to predictions through
//! a probabilistic cost and a thresholded Hungarian assignment.

pub mod appearance;
pub mod association;
pub mod cli;
pub mod config;
pub mod error;
pub mod hungarian;
pub mod io;
pub mod location;
pub mod metrics;
pub mod nelder_mead;
pub mod pose;
pub mod simulator;
pub mod track_state;
pub mod tracker;
pub mod tuning;

pub use config::{BetaConfig, Cues};
pub use error::{Error, Result};
pub use track_state::{BBox, Detection, Location3D, Tracklet, TrackletPrediction};
pub use tracker::{Frame, TrackOutput, TrackerSession};
