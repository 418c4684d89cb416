//! Synthetic ground-truth worlds for exercising the tracker.
//!
//! Agents move along piecewise-linear 3D paths in front of a pinhole camera.
//! Each visible agent emits one detection per frame with Gaussian noise on
//! pixel position, nearness, appearance and pose; detections may be dropped
//! and clutter may be injected. The camera can jump at scripted cut frames.
//!
//! Randomness is ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64(seed)`),
//! stream 0 for rendering noise and stream 1 for preset layout. Per frame the
//! render draws, for each visible agent in id order: miss coin, x, y and n
//! noise, appearance noise, pose noise; then the clutter count and, per
//! clutter detection, x, y, depth, appearance, pose; then the emission order
//! shuffle. [`RNG_HEADER`] records this in emitted files.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::track_state::{BBox, Detection, Location3D};
use crate::tracker::Frame;

pub const RNG_HEADER: &str = "generator=ChaCha8 seed_from_u64(seed) stream0=render stream1=layout \
order=frame>agent[miss,x,y,n,appearance,pose]>clutter[count,x,y,z,appearance,pose]>shuffle";

const BODY_HEIGHT: f64 = 1.7;
const BODY_WIDTH: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            focal: 1000.0,
            cx: 960.0,
            cy: 540.0,
            width: 1920.0,
            height: 1080.0,
        }
    }
}

impl Camera {
    /// Projects a camera-frame point to pixels and nearness.
    pub fn project(&self, p: [f64; 3]) -> Result<Location3D> {
        let [x, y, z] = p;
        if z.is_nan() || z <= 0.0 {
            return Err(Error::invalid(format!("point behind camera (Z = {z})")));
        }
        Location3D::from_depth(self.focal * x / z + self.cx, self.focal * y / z + self.cy, z)
    }

    /// Inverse of [`Camera::project`].
    pub fn back_project(&self, l: &Location3D) -> [f64; 3] {
        let z = (-l.n).exp();
        [(l.x - self.cx) * z / self.focal, (l.y - self.cy) * z / self.focal, z]
    }

    pub fn body_box(&self, l: &Location3D) -> BBox {
        BBox::centered(
            l.x,
            l.y,
            self.focal * BODY_WIDTH / l.z,
            self.focal * BODY_HEIGHT / l.z,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub frame: u64,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: i64,
    /// Sorted by frame. The agent exists from the first to the last waypoint.
    pub waypoints: Vec<Waypoint>,
    pub appearance: Vec<f64>,
    pub pose_start: Vec<f64>,
    /// Per-frame drift of the pose signature.
    pub pose_velocity: Vec<f64>,
    /// Half-open `[start, end)` frame ranges where the agent is hidden.
    pub occlusions: Vec<(u64, u64)>,
}

impl Agent {
    pub fn position(&self, frame: u64) -> Option<[f64; 3]> {
        let first = self.waypoints.first()?;
        let last = self.waypoints.last()?;
        if frame < first.frame || frame > last.frame {
            return None;
        }
        let seg = self.waypoints.windows(2).find(|w| frame <= w[1].frame);
        let Some(seg) = seg else {
            return Some(first.position);
        };
        let (a, b) = (seg[0], seg[1]);
        let span = (b.frame - a.frame) as f64;
        let s = if span == 0.0 { 0.0 } else { (frame - a.frame) as f64 / span };
        Some(std::array::from_fn(|k| a.position[k] + s * (b.position[k] - a.position[k])))
    }

    pub fn pose(&self, frame: u64) -> Vec<f64> {
        self.pose_start
            .iter()
            .zip(&self.pose_velocity)
            .map(|(p, v)| p + v * frame as f64)
            .collect()
    }

    pub fn is_visible(&self, frame: u64) -> bool {
        self.position(frame).is_some() && !self.occlusions.iter().any(|&(s, e)| frame >= s && frame < e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_xy: f64,
    pub sigma_n: f64,
    pub sigma_a: f64,
    pub sigma_p: f64,
    pub p_miss: f64,
    /// Mean number of clutter detections per frame.
    pub clutter_rate: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        sigma_xy: 0.0,
        sigma_n: 0.0,
        sigma_a: 0.0,
        sigma_p: 0.0,
        p_miss: 0.0,
        clutter_rate: 0.0,
    };
}

/// Camera re-pose: from `frame` on, the camera sits at `camera_position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotCut {
    pub frame: u64,
    pub camera_position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub num_frames: u64,
    pub camera: Camera,
    pub agents: Vec<Agent>,
    pub shot_cuts: Vec<ShotCut>,
    pub noise: NoiseModel,
    pub seed: u64,
}

/// Ground truth for one agent (or clutter detection) in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub frame: u64,
    /// Agent id; `-1` for clutter.
    pub gt_id: i64,
    pub bbox: BBox,
    pub location: Location3D,
    /// Emitted detection, `None` when the detector missed the agent.
    pub detection_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub frames: Vec<Frame>,
    pub ground_truth: Vec<GroundTruthRecord>,
    pub shots: Vec<u64>,
}

impl Scenario {
    fn camera_position(&self, frame: u64) -> [f64; 3] {
        self.shot_cuts
            .iter()
            .filter(|c| c.frame <= frame)
            .max_by_key(|c| c.frame)
            .map(|c| c.camera_position)
            .unwrap_or([0.0; 3])
    }

    fn to_camera(&self, frame: u64, p: [f64; 3]) -> [f64; 3] {
        let c = self.camera_position(frame);
        [p[0] - c[0], p[1] - c[1], p[2] - c[2]]
    }

    pub fn appearance_dim(&self) -> usize {
        self.agents.first().map_or(0, |a| a.appearance.len())
    }

    pub fn pose_dim(&self) -> usize {
        self.agents.first().map_or(0, |a| a.pose_start.len())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
    } else {
        // keep the draw so the stream layout does not depend on sigma
        let _: f64 = rng.random();
        0.0
    }
}

pub fn render_detections(s: &Scenario) -> Result<SimOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(0);
    let da = s.appearance_dim();
    let dp = s.pose_dim();
    if s.agents.iter().any(|a| a.appearance.len() != da || a.pose_start.len() != dp || a.pose_velocity.len() != dp) {
        return Err(Error::invalid("agents must share appearance and pose dimensions"));
    }
    let clutter = if s.noise.clutter_rate > 0.0 {
        Some(Poisson::new(s.noise.clutter_rate).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };

    let mut frames = Vec::with_capacity(s.num_frames as usize);
    let mut ground_truth = Vec::new();
    for f in 0..s.num_frames {
        // (detection, gt index) before shuffling
        let mut emitted: Vec<(Detection, usize)> = Vec::new();
        for agent in &s.agents {
            if !agent.is_visible(f) {
                continue;
            }
            let world = agent.position(f).expect("visible implies positioned");
            let cam = s.to_camera(f, world);
            if cam[2].is_nan() || cam[2] <= 0.0 {
                return Err(Error::invalid(format!(
                    "agent {} is behind the camera at frame {f}",
                    agent.id
                )));
            }
            let truth = s.camera.project(cam)?;
            let missed = rng.random::<f64>() < s.noise.p_miss;
            let dx = gaussian(&mut rng, s.noise.sigma_xy);
            let dy = gaussian(&mut rng, s.noise.sigma_xy);
            let dn = gaussian(&mut rng, s.noise.sigma_n);
            let appearance: Vec<f64> = agent
                .appearance
                .iter()
                .map(|v| v + gaussian(&mut rng, s.noise.sigma_a))
                .collect();
            let pose: Vec<f64> = agent
                .pose(f)
                .iter()
                .map(|v| v + gaussian(&mut rng, s.noise.sigma_p))
                .collect();
            ground_truth.push(GroundTruthRecord {
                frame: f,
                gt_id: agent.id,
                bbox: s.camera.body_box(&truth),
                location: truth,
                detection_id: None,
            });
            if missed {
                continue;
            }
            let loc = Location3D::from_nearness(truth.x + dx, truth.y + dy, truth.n + dn);
            let bbox = BBox::centered(loc.x, loc.y, truth_box_w(s, &truth), truth_box_h(s, &truth));
            emitted.push((
                Detection {
                    frame_index: f,
                    detection_id: String::new(),
                    bbox,
                    location: loc,
                    pose_embedding: pose,
                    appearance_map: None,
                    appearance_embedding: Some(appearance),
                    pose_forecast: None,
                },
                ground_truth.len() - 1,
            ));
        }
        let n_clutter = clutter.map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_clutter {
            let x = rng.random::<f64>() * s.camera.width;
            let y = rng.random::<f64>() * s.camera.height;
            let z = 2.0 + 10.0 * rng.random::<f64>();
            let appearance: Vec<f64> = (0..da).map(|_| rng.random::<f64>()).collect();
            let pose: Vec<f64> = (0..dp).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let loc = Location3D::from_depth(x, y, z)?;
            let bbox = s.camera.body_box(&loc);
            ground_truth.push(GroundTruthRecord {
                frame: f,
                gt_id: -1,
                bbox,
                location: loc,
                detection_id: None,
            });
            emitted.push((
                Detection {
                    frame_index: f,
                    detection_id: String::new(),
                    bbox,
                    location: loc,
                    pose_embedding: pose,
                    appearance_map: None,
                    appearance_embedding: Some(appearance),
                    pose_forecast: None,
                },
                ground_truth.len() - 1,
            ));
        }
        emitted.shuffle(&mut rng);
        let mut detections = Vec::with_capacity(emitted.len());
        for (k, (mut d, gt)) in emitted.into_iter().enumerate() {
            d.detection_id = format!("{f}:{k}");
            ground_truth[gt].detection_id = Some(d.detection_id.clone());
            detections.push(d);
        }
        frames.push(Frame { index: f, detections });
    }
    let mut shots: Vec<u64> = s.shot_cuts.iter().map(|c| c.frame).collect();
    shots.sort_unstable();
    Ok(SimOutput {
        frames,
        ground_truth,
        shots,
    })
}

fn truth_box_w(s: &Scenario, l: &Location3D) -> f64 {
    s.camera.focal * BODY_WIDTH / l.z
}

fn truth_box_h(s: &Scenario, l: &Location3D) -> f64 {
    s.camera.focal * BODY_HEIGHT / l.z
}

/// Maps detection ids to ground-truth agent ids (`-1` for clutter).
pub fn id_map(gt: &[GroundTruthRecord]) -> std::collections::HashMap<String, i64> {
    gt.iter()
        .filter_map(|r| r.detection_id.clone().map(|d| (d, r.gt_id)))
        .collect()
}

pub const APPEARANCE_DIM: usize = 16;
pub const POSE_DIM: usize = 8;

fn layout_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn random_signature(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

fn random_pose(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let start = (0..POSE_DIM).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let vel = (0..POSE_DIM).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * 0.002).collect();
    (start, vel)
}

fn straight(id: i64, from: [f64; 3], to: [f64; 3], frames: u64, rng: &mut ChaCha8Rng) -> Agent {
    let (pose_start, pose_velocity) = random_pose(rng);
    Agent {
        id,
        waypoints: vec![
            Waypoint {
                frame: 0,
                position: from,
            },
            Waypoint {
                frame: frames - 1,
                position: to,
            },
        ],
        appearance: random_signature(rng, APPEARANCE_DIM),
        pose_start,
        pose_velocity,
        occlusions: Vec::new(),
    }
}

/// Named scenario constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Two agents crossing paths. Noise-free.
    Crossing,
    /// One agent hidden for `gap` frames mid-walk while approaching the
    /// camera; probes track persistence through occlusion.
    Occlusion { gap: u64 },
    /// Two agents with identical appearance walking past each other;
    /// probes the location and pose cues.
    AppearanceTwins,
    /// Three agents and one camera cut at frame 30; probes shot handling.
    ShotCut,
    /// `k` agents with appearance twins, crossings, occlusions, missed
    /// detections and clutter.
    Crowd(usize),
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("crowd") {
            let k = rest.trim_start_matches(['(', ':']).trim_end_matches(')');
            let k = if k.is_empty() { 6 } else { k.parse().map_err(|_| Error::invalid(format!("bad crowd size in {s:?}")))? };
            return Ok(Preset::Crowd(k));
        }
        if let Some(rest) = s.strip_prefix("occlusion") {
            let g = rest.trim_start_matches(['(', ':']).trim_end_matches(')');
            let gap = if g.is_empty() { 23 } else { g.parse().map_err(|_| Error::invalid(format!("bad gap in {s:?}")))? };
            return Ok(Preset::Occlusion { gap });
        }
        match s {
            "crossing" => Ok(Preset::Crossing),
            "appearance_twins" => Ok(Preset::AppearanceTwins),
            "shot_cut" => Ok(Preset::ShotCut),
            _ => Err(Error::invalid(format!("unknown preset {s:?}"))),
        }
    }
}

impl Preset {
    pub fn build(self, seed: u64) -> Scenario {
        match self {
            Preset::Crossing => crossing(seed),
            Preset::Occlusion { gap } => occlusion(seed, gap),
            Preset::AppearanceTwins => appearance_twins(seed),
            Preset::ShotCut => shot_cut(seed),
            Preset::Crowd(k) => crowd(k, seed),
        }
    }
}

pub fn crossing(seed: u64) -> Scenario {
    let mut rng = layout_rng(seed);
    let n = 60;
    let agents = vec![
        straight(0, [-2.0, 0.2, 6.0], [2.0, 0.2, 6.0], n, &mut rng),
        straight(1, [2.0, 0.1, 6.5], [-2.0, 0.1, 6.5], n, &mut rng),
    ];
    Scenario {
        name: "crossing".into(),
        num_frames: n,
        camera: Camera::default(),
        agents,
        shot_cuts: Vec::new(),
        noise: NoiseModel::NONE,
        seed,
    }
}

pub fn occlusion(seed: u64, gap: u64) -> Scenario {
    let mut rng = layout_rng(seed);
    let start = 25;
    let n = start + gap + 25;
    let mut walker = straight(0, [-3.0, 0.2, 9.0], [3.0, 0.2, 6.0], n, &mut rng);
    walker.occlusions.push((start, start + gap));
    let bystander = straight(1, [-1.0, 0.3, 12.0], [-0.5, 0.3, 11.0], n, &mut rng);
    Scenario {
        name: format!("occlusion({gap})"),
        num_frames: n,
        camera: Camera::default(),
        agents: vec![walker, bystander],
        shot_cuts: Vec::new(),
        noise: NoiseModel {
            sigma_xy: 0.5,
            sigma_n: 0.005,
            sigma_a: 0.02,
            sigma_p: 0.02,
            p_miss: 0.0,
            clutter_rate: 0.0,
        },
        seed,
    }
}

pub fn appearance_twins(seed: u64) -> Scenario {
    let mut rng = layout_rng(seed);
    let n = 60;
    let a = straight(0, [-2.0, 0.2, 6.0], [2.0, 0.2, 7.0], n, &mut rng);
    let mut b = straight(1, [2.0, 0.2, 8.0], [-2.0, 0.2, 6.5], n, &mut rng);
    b.appearance = a.appearance.clone();
    Scenario {
        name: "appearance_twins".into(),
        num_frames: n,
        camera: Camera::default(),
        agents: vec![a, b],
        shot_cuts: Vec::new(),
        noise: NoiseModel {
            sigma_xy: 1.0,
            sigma_n: 0.01,
            sigma_a: 0.02,
            sigma_p: 0.02,
            p_miss: 0.0,
            clutter_rate: 0.0,
        },
        seed,
    }
}

pub fn shot_cut(seed: u64) -> Scenario {
    let mut rng = layout_rng(seed);
    let n = 60;
    let agents = vec![
        straight(0, [-2.5, 0.2, 7.0], [-1.0, 0.2, 6.0], n, &mut rng),
        straight(1, [0.0, 0.3, 8.0], [1.0, 0.3, 8.5], n, &mut rng),
        straight(2, [2.5, 0.1, 6.0], [1.5, 0.1, 7.0], n, &mut rng),
    ];
    Scenario {
        name: "shot_cut".into(),
        num_frames: n,
        camera: Camera::default(),
        agents,
        // the new viewpoint moves right and back, so every agent lands
        // near where another one used to be
        shot_cuts: vec![ShotCut {
            frame: 30,
            camera_position: [2.4, 0.0, -1.0],
        }],
        noise: NoiseModel {
            sigma_xy: 1.0,
            sigma_n: 0.01,
            sigma_a: 0.02,
            sigma_p: 0.02,
            p_miss: 0.0,
            clutter_rate: 0.0,
        },
        seed,
    }
}

pub fn crowd(k: usize, seed: u64) -> Scenario {
    let mut rng = layout_rng(seed);
    let n = 120u64;
    // poses vary little between people, so pose alone separates them poorly
    let pose_base: Vec<f64> = (0..POSE_DIM).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let mut agents = Vec::with_capacity(k);
    for i in 0..k {
        // alternate walking direction so paths cross
        let dir = if i % 2 == 0 { 1.0 } else { -1.0 };
        let z0 = 4.0 + 6.0 * rng.random::<f64>();
        let z1 = (z0 + (rng.random::<f64>() - 0.5) * 3.0).max(3.0);
        let x0 = -dir * (1.5 + 1.5 * rng.random::<f64>());
        let x1 = dir * (1.5 + 1.5 * rng.random::<f64>());
        let y = 0.1 + 0.3 * rng.random::<f64>();
        let mut a = straight(i as i64, [x0, y, z0], [x1, y, z1], n, &mut rng);
        for (p, b) in a.pose_start.iter_mut().zip(&pose_base) {
            *p = b + (*p) * CROWD_POSE_SPREAD;
        }
        if rng.random::<f64>() < 0.5 {
            let start = 20 + (rng.random::<f64>() * 70.0) as u64;
            let len = 3 + (rng.random::<f64>() * 10.0) as u64;
            a.occlusions.push((start, start + len));
        }
        if i % 2 == 1 {
            // pairs share a look
            a.appearance = agents
                .last()
                .map(|p: &Agent| p.appearance.clone())
                .unwrap_or(a.appearance);
        }
        agents.push(a);
    }
    Scenario {
        name: format!("crowd({k})"),
        num_frames: n,
        camera: Camera::default(),
        agents,
        shot_cuts: Vec::new(),
        noise: NoiseModel {
            sigma_xy: 2.0,
            sigma_n: 0.02,
            sigma_a: 0.05,
            sigma_p: 0.1,
            p_miss: 0.05,
            clutter_rate: 0.1,
        },
        seed,
    }
}

const CROWD_POSE_SPREAD: f64 = 0.15;
