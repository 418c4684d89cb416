//! Track-to-detection cost and thresholded assignment.
//!
//! Each cue contributes an independent posterior term:
//!
//! * appearance and pose: Cauchy-shaped, `1 / (1 + beta * d)` with `d` the
//!   squared L2 distance between embeddings;
//! * 2D position and nearness: exponential in the distance scaled by the
//!   prediction interval, `(1 / beta) * exp(-d / (beta * delta))`.
//!
//! The cost is the negative log of their product. In normalized mode the
//! location terms use the proper density `1 / (beta * delta)` so that pairs
//! with different intervals are comparable.

use crate::appearance::detection_embedding;
use crate::config::BetaConfig;
use crate::hungarian;
use crate::track_state::{Detection, TrackletPrediction};

/// Stand-in for an impossible pairing (e.g. mismatched embedding sizes).
pub const SENTINEL_COST: f64 = 1e12;

pub fn posterior_appearance(delta_a: f64, beta_a: f64) -> f64 {
    1.0 / (1.0 + beta_a * delta_a)
}

pub fn posterior_pose(delta_p: f64, beta_p: f64) -> f64 {
    1.0 / (1.0 + beta_p * delta_p)
}

pub fn posterior_xy(delta_xy: f64, interval_xy: f64, beta_xy: f64) -> f64 {
    (-delta_xy / (beta_xy * interval_xy)).exp() / beta_xy
}

pub fn posterior_nearness(delta_n: f64, interval_n: f64, beta_n: f64) -> f64 {
    (-delta_n / (beta_n * interval_n)).exp() / beta_n
}

/// Location part of a pair's distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationDistances {
    /// Euclidean pixel distance.
    pub xy: f64,
    /// `sqrt(delta_x^2 + delta_y^2)` of the forecast.
    pub interval_xy: f64,
    /// Absolute nearness difference.
    pub nearness: f64,
    pub interval_n: f64,
}

/// Raw per-cue distances between a prediction and a detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDistances {
    pub appearance: f64,
    pub pose: f64,
    pub location: Option<LocationDistances>,
}

fn squared_l2(a: &[f64], b: &[f64]) -> Option<f64> {
    (a.len() == b.len()).then(|| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Distances for one pair; `None` when the embeddings are not comparable.
pub fn pair_distances(
    pred: &TrackletPrediction,
    det_appearance: &[f64],
    det: &Detection,
) -> Option<PairDistances> {
    let appearance = squared_l2(&pred.appearance_embedding, det_appearance)?;
    let pose = squared_l2(&pred.pose_embedding, &det.pose_embedding)?;
    let location = pred.location.map(|l| LocationDistances {
        xy: (l.x - det.location.x).hypot(l.y - det.location.y),
        interval_xy: l.delta_xy(),
        nearness: (l.n - det.location.n).abs(),
        interval_n: l.delta_n,
    });
    Some(PairDistances {
        appearance,
        pose,
        location,
    })
}

/// Cost of a pair from its distances. Location terms are skipped in shot
/// mode and when the prediction has no location.
pub fn cost_from_distances(d: &PairDistances, cfg: &BetaConfig, shot_mode: bool) -> f64 {
    let cues = cfg.cues;
    let mut cost = 0.0;
    if cues.appearance {
        cost += (cfg.beta_a * d.appearance).ln_1p();
    }
    if cues.pose {
        cost += (cfg.beta_p * d.pose).ln_1p();
    }
    if shot_mode {
        return cost;
    }
    if let Some(loc) = d.location {
        let norm = |beta: f64, interval: f64| {
            if cfg.normalized_cost {
                (beta * interval).ln()
            } else {
                beta.ln()
            }
        };
        if cues.xy {
            cost += loc.xy / (cfg.beta_xy * loc.interval_xy) + norm(cfg.beta_xy, loc.interval_xy);
        }
        if cues.nearness {
            cost += loc.nearness / (cfg.beta_n * loc.interval_n) + norm(cfg.beta_n, loc.interval_n);
        }
    }
    cost
}

pub fn cost(pred: &TrackletPrediction, d: &Detection, cfg: &BetaConfig, shot_mode: bool) -> f64 {
    let emb = detection_embedding(d, &cfg.encoder);
    pair_distances(pred, &emb, d)
        .map(|pd| cost_from_distances(&pd, cfg, shot_mode))
        .unwrap_or(SENTINEL_COST)
}

/// Costs between the tracks (rows) and detections (columns) of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    costs: Vec<f64>,
    rows: usize,
    cols: usize,
    pub shot_mode: bool,
}

impl CostMatrix {
    pub fn new(costs: Vec<f64>, rows: usize, cols: usize, shot_mode: bool) -> Self {
        assert_eq!(costs.len(), rows * cols, "cost matrix shape");
        let costs = costs
            .into_iter()
            .map(|c| if c.is_finite() { c.min(SENTINEL_COST) } else { SENTINEL_COST })
            .collect();
        CostMatrix {
            costs,
            rows,
            cols,
            shot_mode,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, shot_mode: bool, f: impl Fn(usize, usize) -> f64) -> Self {
        let costs = (0..rows * cols).map(|k| f(k / cols.max(1), k % cols.max(1))).collect();
        CostMatrix::new(costs, rows, cols, shot_mode)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.costs[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    /// Objective of the threshold-augmented problem: matched costs plus
    /// `beta_th / 2` for every track and every detection left unmatched, so
    /// leaving a pair apart costs exactly `beta_th`.
    pub fn augmented_cost(&self, c: &CostMatrix, beta_th: f64) -> f64 {
        let matched: f64 = self.matches.iter().map(|&(r, k)| c.get(r, k)).sum();
        let unmatched = (self.unmatched_tracks.len() + self.unmatched_detections.len()) as f64;
        matched + 0.5 * beta_th * unmatched
    }
}

/// Optimal matching where any pair may instead stay unmatched at total cost
/// `beta_th`. Every returned match has cost strictly below `beta_th`.
///
/// Solved as a plain rectangular assignment on `min(c - beta_th, 0)`: a
/// zero entry marks a pairing that is no better than leaving both sides
/// unmatched, and such pairs are dropped after solving.
pub fn solve_assignment(c: &CostMatrix, beta_th: f64) -> Assignment {
    let gains: Vec<f64> = c.costs.iter().map(|&x| (x - beta_th).min(0.0)).collect();
    let by_row = hungarian::minimize(&gains, c.rows, c.cols);
    let mut det_used = vec![false; c.cols];
    let mut out = Assignment::default();
    for (r, col) in by_row.into_iter().enumerate() {
        match col {
            Some(k) if c.get(r, k) < beta_th => {
                det_used[k] = true;
                out.matches.push((r, k));
            }
            _ => out.unmatched_tracks.push(r),
        }
    }
    out.unmatched_detections = (0..c.cols).filter(|&k| !det_used[k]).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::location::LocationForecast;

    fn cfg_unit() -> BetaConfig {
        BetaConfig {
            beta_a: 1.0,
            beta_p: 1.0,
            beta_xy: 1.0,
            beta_n: 1.0,
            ..BetaConfig::default()
        }
    }

    fn dist(a: f64, p: f64, xy: f64, dxy: f64, n: f64, dn: f64) -> PairDistances {
        PairDistances {
            appearance: a,
            pose: p,
            location: Some(LocationDistances {
                xy,
                interval_xy: dxy,
                nearness: n,
                interval_n: dn,
            }),
        }
    }

    #[test]
    fn cauchy_posteriors() {
        assert_eq!(posterior_appearance(0.0, 3.0), 1.0);
        assert_eq!(posterior_appearance(0.5, 2.0), 0.5);
        assert!((posterior_appearance(3.0, 2.0) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(posterior_pose(0.0, 3.0), 1.0);
        assert_eq!(posterior_pose(2.0, 0.5), 0.5);
        assert!((posterior_pose(4.0, 0.5) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_posteriors() {
        assert_eq!(posterior_xy(0.0, 3.0, 4.0), 0.25);
        assert!((posterior_xy(12.0, 3.0, 4.0) - (-1.0f64).exp() / 4.0).abs() < 1e-15);
        assert!((posterior_xy(12.0, 3.0, 2.0) - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(posterior_nearness(0.0, 0.1, 2.0), 0.5);
        assert!((posterior_nearness(0.2, 0.1, 2.0) - (-1.0f64).exp() / 2.0).abs() < 1e-15);
        assert!((posterior_nearness(0.2, 0.1, 1.0) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn cost_worked_examples() {
        let cfg = cfg_unit();
        assert_eq!(cost_from_distances(&dist(0.0, 0.0, 0.0, 1.0, 0.0, 1.0), &cfg, false), 0.0);
        assert_eq!(cost_from_distances(&dist(0.0, 0.0, 50.0, 1.0, 3.0, 0.2), &cfg, true), 0.0);
        // ln2 + ln2 + 2/1 + ln1 + 0.5/0.5 + ln0.5
        let expected = 3.0 + std::f64::consts::LN_2;
        let got = cost_from_distances(&dist(1.0, 1.0, 2.0, 1.0, 0.5, 0.5), &cfg, false);
        assert!((got - expected).abs() < 1e-12, "{got}");
    }

    #[test]
    fn unnormalized_cost_matches_literal_product() {
        let cfg = BetaConfig {
            normalized_cost: false,
            ..BetaConfig::default()
        };
        let d = dist(0.3, 0.7, 4.0, 6.0, 0.05, 0.12);
        let loc = d.location.unwrap();
        let product = posterior_appearance(d.appearance, cfg.beta_a)
            * posterior_pose(d.pose, cfg.beta_p)
            * posterior_xy(loc.xy, loc.interval_xy, cfg.beta_xy)
            * posterior_nearness(loc.nearness, loc.interval_n, cfg.beta_n);
        let c = cost_from_distances(&d, &cfg, false);
        assert!(((-c).exp() - product).abs() <= 1e-12 * product);
    }

    #[test]
    fn cue_ablation_drops_terms() {
        let d = dist(1.0, 1.0, 2.0, 1.0, 0.5, 0.5);
        let mut cfg = cfg_unit();
        cfg.cues = crate::config::Cues::without_location();
        assert!((cost_from_distances(&d, &cfg, false) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        cfg.cues = crate::config::Cues::without_appearance();
        let full = cost_from_distances(&d, &cfg_unit(), false);
        assert!((full - cost_from_distances(&d, &cfg, false) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn cost_from_prediction() {
        let cfg = cfg_unit();
        let pred = TrackletPrediction {
            track_id: 0,
            appearance_embedding: vec![1.0, 0.0],
            pose_embedding: vec![0.0],
            location: Some(LocationForecast {
                x: 10.0,
                y: 10.0,
                n: 0.0,
                delta_x: 0.6,
                delta_y: 0.8,
                delta_n: 1.0,
            }),
        };
        let mut det = crate::track_state::testing::detection(1, "d", 10.0, 10.0, 1.0);
        det.appearance_embedding = Some(vec![1.0, 0.0]);
        det.pose_embedding = vec![0.0];
        assert_eq!(cost(&pred, &det, &cfg, false), 0.0);
        det.pose_embedding = vec![0.0, 1.0];
        assert_eq!(cost(&pred, &det, &cfg, false), SENTINEL_COST);
    }

    #[test]
    fn assignment_examples() {
        let c = CostMatrix::new(vec![1.0, 2.0, 2.0, 4.0], 2, 2, false);
        let a = solve_assignment(&c, 10.0);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
        let total: f64 = a.matches.iter().map(|&(r, k)| c.get(r, k)).sum();
        assert_eq!(total, 4.0);

        let c = CostMatrix::new(vec![0.1], 1, 1, false);
        let a = solve_assignment(&c, 0.05);
        assert!(a.matches.is_empty());
        assert_eq!((a.unmatched_tracks, a.unmatched_detections), (vec![0], vec![0]));

        let c = CostMatrix::new(Vec::new(), 0, 2, false);
        let a = solve_assignment(&c, 1.0);
        assert_eq!(a.unmatched_detections, vec![0, 1]);
        assert!(a.matches.is_empty() && a.unmatched_tracks.is_empty());
    }

    #[test]
    fn threshold_prefers_cheaper_pairing() {
        // (0,0)+(1,1) = 10 vs (0,1)+(1,0) = 4 vs (0,0) alone = 1 + 5
        let c = CostMatrix::new(vec![1.0, 2.0, 2.0, 9.0], 2, 2, false);
        let a = solve_assignment(&c, 5.0);
        assert_eq!(a.matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn non_finite_entries_become_sentinel() {
        let c = CostMatrix::new(vec![f64::INFINITY, f64::NAN], 1, 2, false);
        assert_eq!(c.get(0, 0), SENTINEL_COST);
        assert_eq!(c.get(0, 1), SENTINEL_COST);
        assert!(solve_assignment(&c, 3.0).matches.is_empty());
    }
}
