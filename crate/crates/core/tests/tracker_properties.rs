mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use tracklet3d::association::{solve_assignment, CostMatrix};
use tracklet3d::simulator::{crowd, render_detections, Preset};
use tracklet3d::tracker::Frame;
use tracklet3d::{BetaConfig, TrackerSession};

#[test]
fn crossing_keeps_identities() {
    for seed in 0..5 {
        let r = common::score(&tracklet3d::simulator::crossing(seed), &BetaConfig::default(), false);
        assert_eq!(r.id_switches, 0);
        assert_eq!(r.idf1, 1.0);
    }
}

#[test]
fn single_frame_run_equals_step() {
    let sim = render_detections(&crowd(5, 1)).unwrap();
    let first = &sim.frames[0];
    let (labels, _) = TrackerSession::new(BetaConfig::default())
        .unwrap()
        .step(first.index, &first.detections)
        .unwrap();
    let out = TrackerSession::new(BetaConfig::default())
        .unwrap()
        .run(std::slice::from_ref(first))
        .unwrap();
    assert_eq!(out.labels, labels);
}

fn presets() -> impl Strategy<Value = (Preset, u64)> {
    (
        prop_oneof![
            Just(Preset::Crossing),
            Just(Preset::AppearanceTwins),
            Just(Preset::ShotCut),
            (3u64..30).prop_map(|gap| Preset::Occlusion { gap }),
            (1usize..7).prop_map(Preset::Crowd),
        ],
        0u64..1000,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_detection_labelled_once((preset, seed) in presets(), keep_every in 1usize..4) {
        let sim = render_detections(&preset.build(seed)).unwrap();
        // thin the stream so some frame indices are skipped
        let frames: Vec<Frame> = sim.frames.iter().step_by(keep_every).cloned().collect();
        let out = TrackerSession::new(BetaConfig::default()).unwrap().run(&frames).unwrap();
        let mut ids: Vec<(u64, &str)> = frames
            .iter()
            .flat_map(|f| f.detections.iter().map(move |d| (f.index, d.detection_id.as_str())))
            .collect();
        let mut labelled: Vec<(u64, &str)> = out.labels.iter().map(|l| (l.frame, l.detection_id.as_str())).collect();
        ids.sort();
        labelled.sort();
        prop_assert_eq!(ids, labelled);
        // within a frame no track takes two detections
        for f in &frames {
            let tracks: BTreeSet<u64> = out.labels.iter().filter(|l| l.frame == f.index).map(|l| l.track_id).collect();
            prop_assert_eq!(tracks.len(), f.detections.len());
        }
    }

    #[test]
    fn runs_are_deterministic((preset, seed) in presets()) {
        let sim = render_detections(&preset.build(seed)).unwrap();
        let a = common::track(&sim, &BetaConfig::default(), true);
        let b = common::track(&sim, &BetaConfig::default(), true);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn online_prefix_property((preset, seed) in presets(), cut in 1usize..40) {
        // labels up to frame t do not depend on anything after t
        let sim = render_detections(&preset.build(seed)).unwrap();
        let cut = cut.min(sim.frames.len());
        let full = common::track(&sim, &BetaConfig::default(), true);
        let prefix = TrackerSession::new(BetaConfig::default())
            .unwrap()
            .with_shot_boundaries(sim.shots.iter().copied())
            .run(&sim.frames[..cut])
            .unwrap();
        let last = sim.frames[cut - 1].index;
        let head: Vec<_> = full.labels.iter().filter(|l| l.frame <= last).cloned().collect();
        prop_assert_eq!(head, prefix.labels);
    }

    #[test]
    fn accepted_costs_below_threshold((preset, seed) in presets()) {
        let cfg = BetaConfig::default();
        let sim = render_detections(&preset.build(seed)).unwrap();
        let out = common::track(&sim, &cfg, true);
        for l in &out.labels {
            prop_assert_eq!(l.matched, l.cost.is_some());
            if let Some(c) = l.cost {
                prop_assert!(c < cfg.beta_th);
            }
        }
    }

    #[test]
    fn assignment_respects_threshold(
        rows in 0usize..6,
        cols in 0usize..6,
        seed in any::<u64>(),
        beta_th in 0.5f64..20.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let costs: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-5.0..30.0)).collect();
        let m = CostMatrix::new(costs, rows, cols, false);
        let a = solve_assignment(&m, beta_th);
        prop_assert_eq!(a.matches.len() + a.unmatched_tracks.len(), rows);
        prop_assert_eq!(a.matches.len() + a.unmatched_detections.len(), cols);
        for &(r, c) in &a.matches {
            prop_assert!(m.get(r, c) < beta_th);
        }
    }
}
