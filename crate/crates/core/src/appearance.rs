//! Appearance aggregation over UV texture maps.
//!
//! A track keeps one aggregated map. Each matched observation is blended in
//! per pixel, using binarized visibility to pick the blend rate:
//!
//! | aggregate visible | observation visible | rate      |
//! |-------------------|---------------------|-----------|
//! | yes               | yes                 | `alpha_0` |
//! | no                | yes                 | 1         |
//! | yes               | no                  | 0         |
//! | no                | no                  | 0         |
//!
//! The aggregate itself is the appearance prediction for future frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track_state::{AppearanceState, Tracklet};

/// UV texture `[3 x size x size]` plus visibility `[size x size]`, both
/// row-major, channel-major for the texture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppearanceMap {
    size: usize,
    texture: Vec<f64>,
    visibility: Vec<f64>,
}

pub const DEFAULT_MAP_SIZE: usize = 64;

impl AppearanceMap {
    pub fn new(size: usize, texture: Vec<f64>, visibility: Vec<f64>) -> Result<Self> {
        let map = AppearanceMap {
            size,
            texture,
            visibility,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let px = self.size * self.size;
        if self.size == 0 {
            return Err(Error::invalid("appearance map size must be positive"));
        }
        if self.texture.len() != 3 * px {
            return Err(Error::DimensionMismatch {
                expected: 3 * px,
                found: self.texture.len(),
            });
        }
        if self.visibility.len() != px {
            return Err(Error::DimensionMismatch {
                expected: px,
                found: self.visibility.len(),
            });
        }
        if self.visibility.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("visibility must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn uniform(size: usize, value: f64, visibility: f64) -> Self {
        AppearanceMap {
            size,
            texture: vec![value; 3 * size * size],
            visibility: vec![visibility; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn texture(&self) -> &[f64] {
        &self.texture
    }

    pub fn visibility(&self) -> &[f64] {
        &self.visibility
    }

    pub fn texel(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.texture[(channel * self.size + row) * self.size + col]
    }

    pub fn set_texel(&mut self, channel: usize, row: usize, col: usize, v: f64) {
        self.texture[(channel * self.size + row) * self.size + col] = v;
    }

    pub fn visibility_at(&self, row: usize, col: usize) -> f64 {
        self.visibility[row * self.size + col]
    }

    pub fn set_visibility(&mut self, row: usize, col: usize, v: f64) {
        self.visibility[row * self.size + col] = v;
    }
}

/// Blends an observation into the aggregate.
pub fn aggregate(
    prev: &AppearanceMap,
    obs: &AppearanceMap,
    alpha_0: f64,
    visibility_threshold: f64,
) -> Result<AppearanceMap> {
    if prev.size != obs.size {
        return Err(Error::DimensionMismatch {
            expected: prev.size,
            found: obs.size,
        });
    }
    if !(alpha_0 > 0.0 && alpha_0 <= 1.0) {
        return Err(Error::invalid(format!("alpha_0 must be in (0, 1], got {alpha_0}")));
    }
    let px = prev.size * prev.size;
    let mut out = prev.clone();
    for p in 0..px {
        let prev_vis = prev.visibility[p] >= visibility_threshold;
        let obs_vis = obs.visibility[p] >= visibility_threshold;
        let alpha = match (prev_vis, obs_vis) {
            (true, true) => alpha_0,
            (false, true) => 1.0,
            _ => 0.0,
        };
        if alpha > 0.0 {
            for c in 0..3 {
                let i = c * px + p;
                out.texture[i] = if alpha == 1.0 {
                    obs.texture[i]
                } else {
                    (1.0 - alpha) * prev.texture[i] + alpha * obs.texture[i]
                };
            }
        }
        out.visibility[p] = prev.visibility[p].max(obs.visibility[p]);
    }
    Ok(out)
}

/// Whole-vector version of [`aggregate`] for pre-encoded appearance.
pub fn aggregate_embedding(
    prev: &[f64],
    prev_visible: bool,
    obs: &[f64],
    obs_visible: bool,
    alpha_0: f64,
) -> Result<(Vec<f64>, bool)> {
    let alpha = match (prev_visible, obs_visible) {
        (true, true) => alpha_0,
        (false, true) => 1.0,
        _ => 0.0,
    };
    if alpha == 1.0 {
        return Ok((obs.to_vec(), true));
    }
    if alpha == 0.0 {
        return Ok((prev.to_vec(), prev_visible));
    }
    if prev.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: prev.len(),
            found: obs.len(),
        });
    }
    let v = prev
        .iter()
        .zip(obs)
        .map(|(p, o)| (1.0 - alpha) * p + alpha * o)
        .collect();
    Ok((v, true))
}

/// Stand-in for a learned appearance encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderMode {
    /// Every texel, masked by visibility.
    Passthrough,
    /// Visibility-weighted average of each channel over a `grid x grid`
    /// partition of the map.
    DownsampleFlatten { grid: usize },
}

impl EncoderMode {
    pub fn output_dim(&self, map_size: usize) -> usize {
        match *self {
            EncoderMode::Passthrough => 3 * map_size * map_size,
            EncoderMode::DownsampleFlatten { grid } => 3 * grid * grid,
        }
    }
}

/// Encodes a map into a fixed-length vector. Cells with no visible pixels
/// encode to zero.
pub fn encode(a: &AppearanceMap, mode: &EncoderMode) -> Vec<f64> {
    let grid = match *mode {
        EncoderMode::Passthrough => a.size,
        EncoderMode::DownsampleFlatten { grid } => grid,
    };
    let size = a.size;
    let px = size * size;
    let mut out = vec![0.0; 3 * grid * grid];
    // cell bounds by integer partition, so a grid that does not divide the
    // map still covers every pixel exactly once
    let bounds = |k: usize| (k * size / grid, (k + 1) * size / grid);
    for gr in 0..grid {
        let (r0, r1) = bounds(gr);
        for gc in 0..grid {
            let (c0, c1) = bounds(gc);
            let mut weight = 0.0;
            let mut sums = [0.0; 3];
            for r in r0..r1 {
                for c in c0..c1 {
                    let p = r * size + c;
                    let v = a.visibility[p];
                    weight += v;
                    for (ch, s) in sums.iter_mut().enumerate() {
                        *s += v * a.texture[ch * px + p];
                    }
                }
            }
            if weight > 0.0 {
                for (ch, s) in sums.iter().enumerate() {
                    out[(ch * grid + gr) * grid + gc] = s / weight;
                }
            }
        }
    }
    out
}

/// Appearance the tracklet is expected to show next: its current aggregate.
pub fn predict_appearance(t: &Tracklet, mode: &EncoderMode) -> Vec<f64> {
    match t.appearance() {
        AppearanceState::Map(m) => encode(m, mode),
        AppearanceState::Embedding { vector, .. } => vector.clone(),
    }
}

/// Appearance embedding of a single detection under the same encoder.
pub fn detection_embedding(d: &crate::track_state::Detection, mode: &EncoderMode) -> Vec<f64> {
    match (&d.appearance_map, &d.appearance_embedding) {
        (Some(m), _) => encode(m, mode),
        (None, Some(e)) => e.clone(),
        (None, None) => Vec::new(),
    }
}
