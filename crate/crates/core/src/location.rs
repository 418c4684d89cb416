//! Location forecasting by per-coordinate linear regression.
//!
//! Each of `x`, `y` and nearness `n` is fit independently against the true
//! frame index over the last `w` observations, so occlusion gaps simply
//! leave holes in the abscissa. The forecast carries a Student-t prediction
//! interval:
//!
//! ```text
//! delta(t') = t_{1-a/2, w-2} * sqrt(MSE * (1 + 1/w + (t' - t_mean)^2 / sxx))
//! ```

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::BetaConfig;
use crate::error::{Error, Result};
use crate::track_state::Tracklet;

/// `n = ln(1/z)`.
pub fn to_nearness(z: f64) -> Result<f64> {
    if z.is_nan() || z <= 0.0 || z.is_infinite() {
        return Err(Error::NonPositiveDepth(z));
    }
    Ok(-z.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// `SSE / (w_used - 2)`; zero when there are no residual degrees of freedom.
    pub mse: f64,
    pub t_mean: f64,
    /// Sum of squared abscissa deviations.
    pub sxx: f64,
    pub w_used: usize,
    /// Fewer than two distinct abscissae: the fit is the constant mean.
    pub degenerate: bool,
}

impl RegressionFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Least-squares line through the last `w` points.
pub fn fit_line(points: &[(u64, f64)], w: usize) -> Result<RegressionFit> {
    if points.is_empty() || w == 0 {
        return Err(Error::EmptyHistory);
    }
    let used = &points[points.len().saturating_sub(w)..];
    let n = used.len();
    let nf = n as f64;
    let t_mean = used.iter().map(|(t, _)| *t as f64).sum::<f64>() / nf;
    let v_mean = used.iter().map(|(_, v)| *v).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, v) in used {
        let dt = *t as f64 - t_mean;
        sxx += dt * dt;
        sxy += dt * (v - v_mean);
    }
    if sxx == 0.0 {
        return Ok(RegressionFit {
            slope: 0.0,
            intercept: v_mean,
            mse: 0.0,
            t_mean,
            sxx: 0.0,
            w_used: n,
            degenerate: true,
        });
    }
    let slope = sxy / sxx;
    let intercept = v_mean - slope * t_mean;
    let mse = if n > 2 {
        let sse: f64 = used
            .iter()
            .map(|(t, v)| {
                let r = v - (intercept + slope * *t as f64);
                r * r
            })
            .sum();
        sse / (n - 2) as f64
    } else {
        0.0
    };
    Ok(RegressionFit {
        slope,
        intercept,
        mse,
        t_mean,
        sxx,
        w_used: n,
        degenerate: false,
    })
}

/// Two-sided Student-t critical value `t_{1 - (1 - confidence)/2, df}`.
pub fn student_t_critical(confidence: f64, df: f64) -> f64 {
    let p = 1.0 - (1.0 - confidence) / 2.0;
    StudentsT::new(0.0, 1.0, df)
        .map(|d| d.inverse_cdf(p))
        .unwrap_or(f64::INFINITY)
}

/// Half-width of the prediction interval at `target`. Windows with no
/// residual degrees of freedom get `floor`; an exact fit gets zero.
pub fn prediction_interval(fit: &RegressionFit, target: f64, confidence: f64, floor: f64) -> f64 {
    if fit.degenerate || fit.w_used <= 2 {
        return floor;
    }
    if fit.mse == 0.0 {
        return 0.0;
    }
    let w = fit.w_used as f64;
    let dt = target - fit.t_mean;
    let q = student_t_critical(confidence, w - 2.0);
    q * (fit.mse * (1.0 + 1.0 / w + dt * dt / fit.sxx)).sqrt()
}

/// Forecast location with per-coordinate intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationForecast {
    pub x: f64,
    pub y: f64,
    pub n: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_n: f64,
}

impl LocationForecast {
    pub fn delta_xy(&self) -> f64 {
        self.delta_x.hypot(self.delta_y)
    }
}

/// Extrapolates the tracklet's location to `target_frame`. Intervals are
/// floored at the configured minimum so the location densities stay proper.
pub fn predict_location(t: &Tracklet, target_frame: u64, cfg: &BetaConfig) -> Result<LocationForecast> {
    let hist = t.location_history();
    let Some(&(last, _)) = hist.last() else {
        return Err(Error::EmptyHistory);
    };
    if target_frame <= last {
        return Err(Error::OutOfOrderFrame {
            last,
            got: target_frame,
        });
    }
    let target = target_frame as f64;
    let coord = |f: fn(&crate::track_state::Location3D) -> f64, floor: f64| -> Result<(f64, f64)> {
        let pts: Vec<(u64, f64)> = hist.iter().map(|(fr, l)| (*fr, f(l))).collect();
        let fit = fit_line(&pts, cfg.w)?;
        Ok((
            fit.predict(target),
            prediction_interval(&fit, target, cfg.confidence, floor).max(floor),
        ))
    };
    let (x, delta_x) = coord(|l| l.x, cfg.delta_floor_xy)?;
    let (y, delta_y) = coord(|l| l.y, cfg.delta_floor_xy)?;
    let (n, delta_n) = coord(|l| l.n, cfg.delta_floor_n)?;
    Ok(LocationForecast {
        x,
        y,
        n,
        delta_x,
        delta_y,
        delta_n,
    })
}
