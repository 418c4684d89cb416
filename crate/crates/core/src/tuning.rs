//! Fitting the five cost parameters from ground-truth-labeled streams.
//!
//! A labeling pass replays the stream with ground-truth association and
//! records every track/detection distance per frame. Those records seed the
//! parameters from the inlier distributions and then serve as the data set
//! for a simplex search on the frame-level association error.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::appearance::detection_embedding;
use crate::association::{cost_from_distances, pair_distances, solve_assignment, CostMatrix, PairDistances, SENTINEL_COST};
use crate::config::BetaConfig;
use crate::error::{Error, Result};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::track_state::{spawn_tracklet, touch_tracklet, Tracklet};
use crate::tracker::{predict_tracklet, Frame};

pub const BETA_MIN: f64 = 1e-6;
pub const BETA_MAX: f64 = 1e6;
pub const MIN_INLIERS: usize = 100;

/// Ground-truth view of one frame: every live track against every detection.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame: u64,
    pub shot: bool,
    /// Ground-truth identity of each live track (rows).
    pub track_gt: Vec<i64>,
    /// Location observations behind each track's forecast.
    pub track_history: Vec<usize>,
    /// Ground-truth identity of each detection (columns); `-1` for clutter.
    pub detection_gt: Vec<i64>,
    /// Row-major; `None` where the embeddings are not comparable.
    pub pairs: Vec<Option<PairDistances>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPair {
    pub distances: PairDistances,
    pub inlier: bool,
    pub shot: bool,
    pub history: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDistances {
    pub pairs: Vec<LabeledPair>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cue {
    Appearance,
    Pose,
    Xy,
    Nearness,
}

impl Cue {
    pub const ALL: [Cue; 4] = [Cue::Appearance, Cue::Pose, Cue::Xy, Cue::Nearness];

    pub fn name(self) -> &'static str {
        match self {
            Cue::Appearance => "appearance",
            Cue::Pose => "pose",
            Cue::Xy => "xy",
            Cue::Nearness => "nearness",
        }
    }
}

impl LabeledDistances {
    /// `(distance, is_inlier)` samples of one cue. Location distances are
    /// divided by the prediction interval and only reported outside shot
    /// frames.
    pub fn cue(&self, cue: Cue) -> Vec<(f64, bool)> {
        self.pairs
            .iter()
            .filter_map(|p| {
                let d = &p.distances;
                let v = match cue {
                    Cue::Appearance => d.appearance,
                    Cue::Pose => d.pose,
                    Cue::Xy if !p.shot => {
                        let l = d.location?;
                        l.xy / l.interval_xy
                    }
                    Cue::Nearness if !p.shot => {
                        let l = d.location?;
                        l.nearness / l.interval_n
                    }
                    _ => return None,
                };
                Some((v, p.inlier))
            })
            .collect()
    }

    pub fn inliers(&self, cue: Cue) -> Vec<f64> {
        self.cue(cue).into_iter().filter(|s| s.1).map(|s| s.0).collect()
    }
}

/// Replays `frames` with ground-truth association and records, before each
/// update, the distances from every live track to every detection.
///
/// Detections mapped to `-1` (or absent from `gt`) never form tracks.
pub fn label_frames(
    frames: &[Frame],
    gt: &HashMap<String, i64>,
    shots: &BTreeSet<u64>,
    cfg: &BetaConfig,
) -> Result<Vec<LabeledFrame>> {
    cfg.validate()?;
    let mut tracks: BTreeMap<i64, Tracklet> = BTreeMap::new();
    let mut next_id = 0;
    let mut prev: Option<u64> = None;
    let mut pending_shot = false;
    let mut out = Vec::with_capacity(frames.len());
    for fr in frames {
        if let Some(p) = prev {
            if fr.index <= p {
                return Err(Error::OutOfOrderFrame { last: p, got: fr.index });
            }
            pending_shot |= shots.range(p + 1..fr.index).next().is_some();
        }
        prev = Some(fr.index);
        let shot = pending_shot || shots.contains(&fr.index);
        pending_shot = false;
        // a track last seen at L survives unmatched frames up to L + t_max
        tracks.retain(|_, t| fr.index - t.last_frame() <= cfg.t_max as u64);

        let dets = &fr.detections;
        let det_gt: Vec<i64> = dets
            .iter()
            .map(|d| gt.get(&d.detection_id).copied().unwrap_or(-1))
            .collect();
        let embeddings: Vec<Vec<f64>> = dets.iter().map(|d| detection_embedding(d, &cfg.encoder)).collect();
        let mut pairs = Vec::with_capacity(tracks.len() * dets.len());
        let mut track_gt = Vec::with_capacity(tracks.len());
        let mut track_history = Vec::with_capacity(tracks.len());
        for (&g, t) in &tracks {
            let pred = predict_tracklet(t, fr.index, cfg)?;
            track_gt.push(g);
            track_history.push(t.location_history().len());
            for (d, e) in dets.iter().zip(&embeddings) {
                pairs.push(pair_distances(&pred, e, d));
            }
        }
        if shot {
            for t in tracks.values_mut() {
                t.clear_location();
            }
        }
        let mut seen = BTreeSet::new();
        for (d, &g) in dets.iter().zip(&det_gt) {
            if g < 0 {
                continue;
            }
            if !seen.insert(g) {
                return Err(Error::invalid(format!(
                    "ground-truth id {g} appears twice in frame {}",
                    fr.index
                )));
            }
            match tracks.get_mut(&g) {
                Some(t) => touch_tracklet(t, d, cfg)?,
                None => {
                    tracks.insert(g, spawn_tracklet(d, next_id));
                    next_id += 1;
                }
            }
        }
        out.push(LabeledFrame {
            frame: fr.index,
            shot,
            track_gt,
            track_history,
            detection_gt: det_gt,
            pairs,
        });
    }
    Ok(out)
}

/// Flattens labeled frames into per-pair samples.
pub fn harvest_distances(frames: &[LabeledFrame]) -> LabeledDistances {
    let mut pairs = Vec::new();
    for f in frames {
        let cols = f.detection_gt.len();
        for (r, &tg) in f.track_gt.iter().enumerate() {
            for (c, &dg) in f.detection_gt.iter().enumerate() {
                if let Some(d) = f.pairs[r * cols + c] {
                    pairs.push(LabeledPair {
                        distances: d,
                        inlier: tg == dg,
                        shot: f.shot,
                        history: f.track_history[r],
                    });
                }
            }
        }
    }
    LabeledDistances { pairs }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn clamp_beta(b: f64) -> f64 {
    if b.is_nan() {
        BETA_MIN
    } else {
        b.clamp(BETA_MIN, BETA_MAX)
    }
}

/// Nearest-rank percentile, `q` in `[0, 1]`.
fn percentile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Parameters read off the inlier distributions. Appearance and pose take
/// the reciprocal of the median distance, 2D location and nearness the mean
/// normalized distance, and the threshold the 99th percentile of inlier
/// cost under those four. Settings other than the five parameters come from
/// `base`.
pub fn init_betas(d: &LabeledDistances, base: &BetaConfig) -> Result<BetaConfig> {
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(4);
    for cue in Cue::ALL {
        let s = d.inliers(cue);
        if s.len() < MIN_INLIERS {
            return Err(Error::InsufficientSamples {
                cue: cue.name(),
                needed: MIN_INLIERS,
                found: s.len(),
            });
        }
        samples.push(s);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let beta_a = clamp_beta(1.0 / median(&mut samples[0]));
    let beta_p = clamp_beta(1.0 / median(&mut samples[1]));
    let beta_xy = clamp_beta(mean(&samples[2]));
    let beta_n = clamp_beta(mean(&samples[3]));
    let mut cfg = base.with_betas([beta_a, beta_p, beta_xy, beta_n, base.beta_th]);
    let mut costs: Vec<f64> = d
        .pairs
        .iter()
        .filter(|p| p.inlier)
        .map(|p| cost_from_distances(&p.distances, &cfg, p.shot))
        .collect();
    cfg.beta_th = clamp_beta(percentile(&mut costs, 0.99));
    Ok(cfg)
}

/// Tally of association decisions against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecisionCount {
    pub wrong: usize,
    pub total: usize,
}

impl DecisionCount {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.wrong as f64 / self.total as f64
        }
    }
}

/// Decisions of one frame under `cfg`. Every track contributes one decision
/// (its match or non-match); every detection whose identity has no live
/// track contributes one more (it should spawn, not match).
pub fn frame_decisions(f: &LabeledFrame, cfg: &BetaConfig) -> DecisionCount {
    let rows = f.track_gt.len();
    let cols = f.detection_gt.len();
    let costs: Vec<f64> = f
        .pairs
        .iter()
        .map(|p| p.map_or(SENTINEL_COST, |d| cost_from_distances(&d, cfg, f.shot)))
        .collect();
    let m = CostMatrix::new(costs, rows, cols, f.shot);
    let a = solve_assignment(&m, cfg.beta_th);
    let mut track_match: Vec<Option<usize>> = vec![None; rows];
    let mut det_match: Vec<Option<usize>> = vec![None; cols];
    for &(r, c) in &a.matches {
        track_match[r] = Some(c);
        det_match[c] = Some(r);
    }
    let mut count = DecisionCount::default();
    for (r, got) in track_match.iter().enumerate() {
        let want = f.detection_gt.iter().position(|&g| g == f.track_gt[r]);
        count.total += 1;
        if *got != want {
            count.wrong += 1;
        }
    }
    for (g, m) in f.detection_gt.iter().zip(&det_match) {
        if f.track_gt.contains(g) {
            continue;
        }
        count.total += 1;
        if m.is_some() {
            count.wrong += 1;
        }
    }
    count
}

/// Fraction of association decisions that disagree with ground truth.
pub fn association_error(cfg: &BetaConfig, frames: &[LabeledFrame]) -> f64 {
    let mut total = DecisionCount::default();
    for f in frames {
        let c = frame_decisions(f, cfg);
        total.wrong += c.wrong;
        total.total += c.total;
    }
    total.rate()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub config: BetaConfig,
    pub error: f64,
    pub initial_error: f64,
    pub iterations: usize,
}

/// Simplex search over the logarithms of the five parameters. Returns `init`
/// untouched when its error is already zero.
pub fn optimize_betas(init: &BetaConfig, frames: &[LabeledFrame], opts: &NelderMeadOptions) -> Result<TuneResult> {
    init.validate()?;
    let initial_error = association_error(init, frames);
    if initial_error == 0.0 {
        return Ok(TuneResult {
            config: init.clone(),
            error: 0.0,
            initial_error,
            iterations: 0,
        });
    }
    let to_cfg = |x: &[f64]| init.with_betas(std::array::from_fn(|k| x[k].exp()));
    let x0: Vec<f64> = init.betas().iter().map(|b| b.ln()).collect();
    let m = nelder_mead::minimize(|x| association_error(&to_cfg(x), frames), &x0, opts);
    let (config, error) = if m.value < initial_error {
        (to_cfg(&m.x), m.value)
    } else {
        (init.clone(), initial_error)
    };
    Ok(TuneResult {
        config,
        error,
        initial_error,
        iterations: m.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::LocationDistances;
    use crate::simulator::{crossing, id_map, render_detections};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    fn pair(a: f64, p: f64, xy: f64, n: f64) -> LabeledPair {
        LabeledPair {
            distances: PairDistances {
                appearance: a,
                pose: p,
                location: Some(LocationDistances {
                    xy,
                    interval_xy: 1.0,
                    nearness: n,
                    interval_n: 1.0,
                }),
            },
            inlier: true,
            shot: false,
            history: 20,
        }
    }

    #[test]
    fn median_rule() {
        let d = LabeledDistances {
            pairs: (0..200).map(|_| pair(2.0, 4.0, 1.0, 1.0)).collect(),
        };
        let cfg = init_betas(&d, &BetaConfig::default()).unwrap();
        assert_eq!(cfg.beta_a, 0.5);
        assert_eq!(cfg.beta_p, 0.25);
    }

    #[test]
    fn exponential_mean_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Exp::new(1.0 / 3.0).unwrap();
        let d = LabeledDistances {
            pairs: (0..10_000).map(|_| pair(1.0, 1.0, e.sample(&mut rng), 1.0)).collect(),
        };
        let cfg = init_betas(&d, &BetaConfig::default()).unwrap();
        assert!((cfg.beta_xy - 3.0).abs() / 3.0 < 0.05, "{}", cfg.beta_xy);
    }

    #[test]
    fn degenerate_zero_distances_clamp() {
        let d = LabeledDistances {
            pairs: (0..150).map(|_| pair(0.0, 0.0, 0.0, 0.0)).collect(),
        };
        let cfg = init_betas(&d, &BetaConfig::default()).unwrap();
        assert_eq!(cfg.beta_xy, BETA_MIN);
        assert_eq!(cfg.beta_n, BETA_MIN);
        assert!(cfg.betas().iter().all(|b| *b > 0.0 && b.is_finite()));
    }

    #[test]
    fn too_few_inliers() {
        let d = LabeledDistances {
            pairs: (0..99).map(|_| pair(1.0, 1.0, 1.0, 1.0)).collect(),
        };
        assert!(matches!(
            init_betas(&d, &BetaConfig::default()),
            Err(Error::InsufficientSamples { found: 99, .. })
        ));
    }

    #[test]
    fn nearest_rank_percentile() {
        let mut v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&mut v, 0.99), 99.0);
        assert_eq!(percentile(&mut v, 1.0), 100.0);
    }

    fn labeled(frames: &[Frame], gt: &HashMap<String, i64>) -> Vec<LabeledFrame> {
        label_frames(frames, gt, &BTreeSet::new(), &BetaConfig::default()).unwrap()
    }

    #[test]
    fn noise_free_separates_inliers() {
        let out = render_detections(&crossing(2)).unwrap();
        let lf = labeled(&out.frames, &id_map(&out.ground_truth));
        let d = harvest_distances(&lf);
        let mut inliers = 0;
        for p in d.pairs.iter().filter(|p| p.history >= 2) {
            let l = p.distances.location.unwrap();
            let total = p.distances.appearance + p.distances.pose + l.xy + l.nearness;
            if p.inlier {
                inliers += 1;
                assert!(total < 1e-9, "{p:?}");
            } else {
                assert!(p.distances.appearance > 0.0 && total > 0.0);
            }
        }
        assert!(inliers > 100);
    }

    #[test]
    fn lone_track_has_no_outliers() {
        let mut s = crossing(1);
        s.agents.truncate(1);
        let out = render_detections(&s).unwrap();
        let d = harvest_distances(&labeled(&out.frames, &id_map(&out.ground_truth)));
        assert!(!d.pairs.is_empty());
        assert!(d.pairs.iter().all(|p| p.inlier));
    }

    #[test]
    fn inlier_xy_mean_matches_noise_model() {
        // Constant depth keeps pixel motion linear, so the residual is the
        // detection noise plus the regression's forecast error.
        let sigma = 2.0;
        let w = 20.0f64;
        let t_bar_gap = (w + 1.0) / 2.0;
        let sxx = (w * w * w - w) / 12.0;
        let scale = sigma * (1.0 + 1.0 / w + t_bar_gap * t_bar_gap / sxx).sqrt();
        let rayleigh_mean = scale * (std::f64::consts::PI / 2.0).sqrt();
        let mut samples = Vec::new();
        for seed in 0..4 {
            let mut s = crossing(seed);
            s.num_frames = 200;
            for a in &mut s.agents {
                a.waypoints[1].frame = 199;
            }
            s.noise.sigma_xy = sigma;
            let out = render_detections(&s).unwrap();
            let d = harvest_distances(&labeled(&out.frames, &id_map(&out.ground_truth)));
            samples.extend(
                d.pairs
                    .iter()
                    .filter(|p| p.inlier && p.history == 20)
                    .map(|p| p.distances.location.unwrap().xy),
            );
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        assert!(samples.len() > 1000);
        assert!((mean - rayleigh_mean).abs() / rayleigh_mean < 0.1, "{mean} vs {rayleigh_mean}");
    }

    fn frame(track_gt: Vec<i64>, detection_gt: Vec<i64>, cost: impl Fn(i64, i64) -> f64) -> LabeledFrame {
        let pairs = track_gt
            .iter()
            .flat_map(|&t| {
                detection_gt.iter().map(move |&d| (t, d))
            })
            .map(|(t, d)| {
                Some(PairDistances {
                    appearance: cost(t, d),
                    pose: 0.0,
                    location: None,
                })
            })
            .collect();
        LabeledFrame {
            frame: 0,
            shot: false,
            track_history: vec![1; track_gt.len()],
            track_gt,
            detection_gt,
            pairs,
        }
    }

    fn appearance_only() -> BetaConfig {
        BetaConfig {
            beta_a: 1.0,
            beta_th: 1.0,
            ..BetaConfig::default()
        }
    }

    #[test]
    fn error_counts() {
        let cfg = appearance_only();
        let right = frame(vec![0, 1], vec![0, 1], |t, d| if t == d { 0.0 } else { 10.0 });
        assert_eq!(association_error(&cfg, std::slice::from_ref(&right)), 0.0);
        let swapped = frame(vec![0, 1], vec![0, 1], |t, d| if t == d { 10.0 } else { 0.0 });
        assert_eq!(association_error(&cfg, std::slice::from_ref(&swapped)), 1.0);
        // 25 frames of two decisions each, one frame swapped: 2 wrong / 50
        let mut frames = vec![right; 24];
        frames.push(swapped);
        assert!((association_error(&cfg, &frames) - 2.0 / 50.0).abs() < 1e-15);
    }

    #[test]
    fn one_wrong_in_fifty() {
        let cfg = appearance_only();
        // the track rejects its own detection once
        let mut frames = vec![frame(vec![0], vec![0], |_, _| 0.0); 49];
        frames.push(frame(vec![0], vec![0], |_, _| 10.0));
        assert!((association_error(&cfg, &frames) - 0.02).abs() < 1e-15);
    }

    #[test]
    fn zero_error_returns_init() {
        let cfg = appearance_only();
        let frames = vec![frame(vec![0, 1], vec![0, 1], |t, d| if t == d { 0.0 } else { 10.0 }); 3];
        let r = optimize_betas(&cfg, &frames, &NelderMeadOptions::default()).unwrap();
        assert_eq!(r.config, cfg);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn optimizer_never_regresses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<LabeledFrame> = (0..30)
            .map(|_| {
                let noise: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
                frame(vec![0, 1], vec![0, 1], move |t, d| {
                    let k = (t * 2 + d) as usize;
                    if t == d { noise[k] } else { 0.5 + noise[k] }
                })
            })
            .collect();
        let init = BetaConfig {
            beta_a: 40.0,
            beta_th: 0.05,
            ..BetaConfig::default()
        };
        let r = optimize_betas(&init, &frames, &NelderMeadOptions::default()).unwrap();
        assert!(r.error <= r.initial_error);
        assert!(r.config.betas().iter().all(|b| *b > 0.0));
        assert_eq!(r.error, association_error(&r.config, &frames));
    }
}
