//! Association parameters and tracker settings.
//!
//! The five tuned scalars (`beta_a`, `beta_p`, `beta_xy`, `beta_n`,
//! `beta_th`) live next to the fixed settings that shape prediction. A
//! config file must name only fields declared here; missing fields take the
//! defaults below.

use serde::{Deserialize, Serialize};

use crate::appearance::EncoderMode;
use crate::error::{Error, Result};
use crate::pose::{PoseBackend, PosePredictor};

/// Which cost terms participate in association. Used for cue ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Cues {
    pub appearance: bool,
    pub pose: bool,
    pub xy: bool,
    pub nearness: bool,
}

impl Default for Cues {
    fn default() -> Self {
        Cues {
            appearance: true,
            pose: true,
            xy: true,
            nearness: true,
        }
    }
}

impl Cues {
    pub fn without_appearance() -> Self {
        Cues {
            appearance: false,
            ..Cues::default()
        }
    }

    pub fn without_pose() -> Self {
        Cues {
            pose: false,
            ..Cues::default()
        }
    }

    /// Drops both the 2D location and the nearness terms.
    pub fn without_location() -> Self {
        Cues {
            xy: false,
            nearness: false,
            ..Cues::default()
        }
    }

    pub fn without_nearness() -> Self {
        Cues {
            nearness: false,
            ..Cues::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaConfig {
    pub beta_a: f64,
    pub beta_p: f64,
    pub beta_xy: f64,
    pub beta_n: f64,
    /// Cost above which a track and a detection are never matched.
    pub beta_th: f64,
    /// Blend rate for appearance where both the aggregate and the new
    /// observation are visible.
    pub alpha_0: f64,
    /// Regression window for location prediction, in observations.
    pub w: usize,
    /// Two-sided confidence of the location prediction interval.
    pub confidence: f64,
    /// Tracks unmatched for this many frames are killed.
    pub t_max: u32,
    /// Pose prediction horizon in frames.
    pub c: u32,
    /// Number of most recent pose observations the pose predictor fits.
    pub pose_window: usize,
    pub pose_backend: PoseBackend,
    /// Per-pixel visibility threshold for the appearance blend cases.
    pub visibility_threshold: f64,
    pub encoder: EncoderMode,
    /// Interval for x and y when the window has no residual degrees of
    /// freedom; also the lower bound of every x and y forecast interval.
    pub delta_floor_xy: f64,
    /// Same as `delta_floor_xy`, for nearness.
    pub delta_floor_n: f64,
    /// Keep the per-pair `log(beta * delta)` terms of the location densities.
    pub normalized_cost: bool,
    pub cues: Cues,
}

impl Default for BetaConfig {
    fn default() -> Self {
        BetaConfig {
            beta_a: 10.0,
            beta_p: 10.0,
            beta_xy: 1.0,
            beta_n: 1.0,
            beta_th: 12.0,
            alpha_0: 0.1,
            w: 20,
            confidence: 0.95,
            t_max: 24,
            c: 12,
            pose_window: 12,
            pose_backend: PoseBackend::LinearExtrapolation,
            visibility_threshold: 0.5,
            encoder: EncoderMode::DownsampleFlatten { grid: 8 },
            delta_floor_xy: 5.0,
            delta_floor_n: 0.1,
            normalized_cost: true,
            cues: Cues::default(),
        }
    }
}

impl BetaConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta_a", self.beta_a),
            ("beta_p", self.beta_p),
            ("beta_xy", self.beta_xy),
            ("beta_n", self.beta_n),
            ("beta_th", self.beta_th),
            ("delta_floor_xy", self.delta_floor_xy),
            ("delta_floor_n", self.delta_floor_n),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha_0 > 0.0 && self.alpha_0 <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha_0 must be in (0, 1], got {}",
                self.alpha_0
            )));
        }
        if self.w < 2 {
            return Err(Error::invalid(format!("w must be at least 2, got {}", self.w)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.t_max < 1 {
            return Err(Error::invalid("t_max must be at least 1"));
        }
        if self.c < 1 {
            return Err(Error::invalid("c must be at least 1"));
        }
        if self.pose_window < 1 {
            return Err(Error::invalid("pose_window must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.visibility_threshold) {
            return Err(Error::invalid("visibility_threshold must be in [0, 1]"));
        }
        if let EncoderMode::DownsampleFlatten { grid } = self.encoder {
            if grid == 0 {
                return Err(Error::invalid("encoder grid must be at least 1"));
            }
        }
        Ok(())
    }

    /// Pose history retained per track: enough for the predictor window and
    /// the regression window, and at least two horizons.
    pub fn pose_capacity(&self) -> usize {
        (2 * self.c as usize).max(self.w).max(self.pose_window)
    }

    pub fn pose_predictor(&self) -> PosePredictor {
        PosePredictor {
            backend: self.pose_backend,
            horizon: self.c,
            window: self.pose_window,
        }
    }

    /// The tuned parameters as a 5-vector `[a, p, xy, n, th]`.
    pub fn betas(&self) -> [f64; 5] {
        [self.beta_a, self.beta_p, self.beta_xy, self.beta_n, self.beta_th]
    }

    pub fn with_betas(&self, b: [f64; 5]) -> Self {
        BetaConfig {
            beta_a: b[0],
            beta_p: b[1],
            beta_xy: b[2],
            beta_n: b[3],
            beta_th: b[4],
            ..self.clone()
        }
    }
}
