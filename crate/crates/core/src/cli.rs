//! Command-line front end.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::BetaConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::metrics;
use crate::nelder_mead::NelderMeadOptions;
use crate::simulator::{self, Preset, RNG_HEADER};
use crate::tracker::TrackerSession;
use crate::tuning::{self, Cue};

#[derive(Debug, Parser)]
#[command(name = "tracklet3d", version, about = "Online multi-person tracking from 3D detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track a detection file.
    Track {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Shot boundary frames, one per line.
        #[arg(long)]
        shots: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-frame diagnostics (shot mode, accepted costs, spawns, kills).
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Render a synthetic scenario.
    Simulate {
        /// crossing, occlusion[(gap)], appearance_twins, shot_cut or crowd[(k)]
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the cost parameters against ground truth.
    Tune {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Settings other than the five parameters are taken from here.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        shots: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Score tracker output against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Inlier and outlier distance distributions per cue.
    Distances {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        shots: Option<PathBuf>,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<BetaConfig> {
    match path {
        Some(p) => io::read_config(p),
        None => Ok(BetaConfig::default()),
    }
}

fn load_shots(path: Option<&Path>) -> Result<BTreeSet<u64>> {
    match path {
        Some(p) => io::read_shots(p),
        None => Ok(BTreeSet::new()),
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Track {
            detections,
            config,
            shots,
            out,
            diagnostics,
        } => {
            let cfg = load_config(config.as_deref())?;
            let shots = load_shots(shots.as_deref())?;
            let mut session = TrackerSession::new(cfg)?.with_shot_boundaries(shots);
            let mut labels = Vec::new();
            let mut diags = Vec::new();
            let file = std::fs::File::open(&detections).map_err(|e| Error::io(&detections, e))?;
            for frame in io::DetectionReader::new(&detections, std::io::BufReader::new(file)) {
                let frame = frame?;
                let (l, d) = session.step(frame.index, &frame.detections)?;
                if l.len() != frame.detections.len() {
                    return Err(Error::Invariant(format!(
                        "frame {}: {} labels for {} detections",
                        frame.index,
                        l.len(),
                        frame.detections.len()
                    )));
                }
                labels.extend(l);
                diags.push(d);
            }
            io::write_track_output(&out, &labels)?;
            if let Some(p) = diagnostics {
                io::write_diagnostics(&p, &diags)?;
            }
            Ok(())
        }
        Command::Simulate { preset, seed, out } => {
            let preset: Preset = preset.parse()?;
            let scenario = preset.build(seed);
            let sim = simulator::render_detections(&scenario)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let header = format!("scenario={} seed={seed}\n{RNG_HEADER}", scenario.name);
            io::write_detections(&out.join("detections.jsonl"), &sim.frames, Some(&header))?;
            io::write_ground_truth(&out.join("ground_truth.jsonl"), &sim.ground_truth)?;
            io::write_shots(&out.join("shots.txt"), &sim.shots)?;
            let path = out.join("scenario.json");
            let text = serde_json::to_string_pretty(&scenario)? + "\n";
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
        }
        Command::Tune {
            detections,
            gt,
            out,
            config,
            shots,
            max_iter,
        } => {
            let base = load_config(config.as_deref())?;
            let labeled = label(&detections, &gt, shots.as_deref(), &base)?;
            let init = tuning::init_betas(&tuning::harvest_distances(&labeled), &base)?;
            let opts = NelderMeadOptions {
                max_iter,
                ..NelderMeadOptions::default()
            };
            let r = tuning::optimize_betas(&init, &labeled, &opts)?;
            eprintln!(
                "association error {:.6} -> {:.6} in {} iterations",
                r.initial_error, r.error, r.iterations
            );
            io::write_config(&out, &r.config)
        }
        Command::Evaluate { pred, gt, report } => {
            let p = io::pred_boxes(&io::read_track_output(&pred)?);
            let g = io::gt_boxes(&io::read_ground_truth(&gt)?);
            io::write_report(&report, &metrics::evaluate(&g, &p)?)
        }
        Command::Distances {
            detections,
            gt,
            out,
            config,
            shots,
        } => {
            let cfg = load_config(config.as_deref())?;
            let labeled = label(&detections, &gt, shots.as_deref(), &cfg)?;
            let d = tuning::harvest_distances(&labeled);
            let summary: Vec<CueDistribution> = Cue::ALL.iter().map(|&c| CueDistribution::new(c, &d.cue(c))).collect();
            let text = serde_json::to_string_pretty(&summary)? + "\n";
            std::fs::write(&out, text).map_err(|e| Error::io(&out, e))
        }
    }
}

fn label(detections: &Path, gt: &Path, shots: Option<&Path>, cfg: &BetaConfig) -> Result<Vec<tuning::LabeledFrame>> {
    let frames = io::parse_detections(detections)?;
    let ids = io::gt_id_map(&io::read_ground_truth(gt)?);
    tuning::label_frames(&frames, &ids, &load_shots(shots)?, cfg)
}

const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Serialize)]
struct Histogram {
    count: usize,
    mean: Option<f64>,
    median: Option<f64>,
    counts: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct CueDistribution {
    cue: &'static str,
    /// Bin edges shared by both histograms; the last bin is open-ended.
    edges: Vec<f64>,
    inlier: Histogram,
    outlier: Histogram,
}

impl CueDistribution {
    fn new(cue: Cue, samples: &[(f64, bool)]) -> Self {
        let mut inl: Vec<f64> = samples.iter().filter(|s| s.1).map(|s| s.0).collect();
        let mut out: Vec<f64> = samples.iter().filter(|s| !s.1).map(|s| s.0).collect();
        inl.sort_by(f64::total_cmp);
        out.sort_by(f64::total_cmp);
        // range covers the bulk of both populations
        let q = |v: &[f64]| v.get((v.len() * 95 / 100).min(v.len().saturating_sub(1))).copied().unwrap_or(0.0);
        let hi = q(&inl).max(q(&out)).max(f64::MIN_POSITIVE);
        let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| io::round9(hi * i as f64 / HISTOGRAM_BINS as f64)).collect();
        let hist = |v: &[f64]| {
            let mut counts = vec![0; HISTOGRAM_BINS];
            for &x in v {
                let b = ((x / hi) * HISTOGRAM_BINS as f64) as usize;
                counts[b.min(HISTOGRAM_BINS - 1)] += 1;
            }
            Histogram {
                count: v.len(),
                mean: (!v.is_empty()).then(|| io::round9(v.iter().sum::<f64>() / v.len() as f64)),
                median: (!v.is_empty()).then(|| io::round9(v[v.len() / 2])),
                counts,
            }
        };
        CueDistribution {
            cue: cue.name(),
            edges,
            inlier: hist(&inl),
            outlier: hist(&out),
        }
    }
}
