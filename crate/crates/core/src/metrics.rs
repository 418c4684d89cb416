//! Identity tracking metrics: MOTA, IDF1 and identity switches.
//!
//! Boxes are matched per frame greedily by descending IoU with a 0.5
//! threshold. IDF1 uses one global gt-id to pred-id matching that maximizes
//! the number of co-occurring frames with IoU at or above the threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hungarian;
use crate::track_state::BBox;

pub const IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtBox {
    pub frame: u64,
    pub gt_id: i64,
    pub bbox: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredBox {
    pub frame: u64,
    pub track_id: u64,
    pub bbox: BBox,
}

/// Outcome of matching one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatching {
    pub frame: u64,
    /// `(gt_id, track_id)` pairs.
    pub matches: Vec<(i64, u64)>,
    pub misses: usize,
    pub false_positives: usize,
    pub switches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub mota: f64,
    pub idf1: f64,
    pub id_switches: usize,
    pub num_gt: usize,
    pub num_pred: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub idtp: usize,
    /// Not computed; kept so the schema is stable.
    pub hota: Option<f64>,
}

/// Index pairs `(gt, pred)` chosen by greedy descending IoU.
pub fn greedy_match(gt: &[BBox], pred: &[BBox]) -> Vec<(usize, usize)> {
    let mut cand = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let iou = g.iou(p);
            if iou >= IOU_THRESHOLD {
                cand.push((iou, i, j));
            }
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_g = vec![false; gt.len()];
    let mut used_p = vec![false; pred.len()];
    let mut out = Vec::new();
    for (_, i, j) in cand {
        if !used_g[i] && !used_p[j] {
            used_g[i] = true;
            used_p[j] = true;
            out.push((i, j));
        }
    }
    out
}

fn by_frame<T: Copy>(items: &[T], frame: impl Fn(&T) -> u64) -> BTreeMap<u64, Vec<T>> {
    let mut m: BTreeMap<u64, Vec<T>> = BTreeMap::new();
    for it in items {
        m.entry(frame(it)).or_default().push(*it);
    }
    m
}

/// Per-frame matching with switches counted against each gt identity's most
/// recent matched track.
pub fn match_frames(gt: &[GtBox], pred: &[PredBox]) -> Vec<FrameMatching> {
    let gt_f = by_frame(gt, |g| g.frame);
    let pr_f = by_frame(pred, |p| p.frame);
    let frames: BTreeSet<u64> = gt_f.keys().chain(pr_f.keys()).copied().collect();
    let mut last: HashMap<i64, u64> = HashMap::new();
    let empty_g = Vec::new();
    let empty_p = Vec::new();
    frames
        .into_iter()
        .map(|f| {
            let g = gt_f.get(&f).unwrap_or(&empty_g);
            let p = pr_f.get(&f).unwrap_or(&empty_p);
            let gb: Vec<BBox> = g.iter().map(|x| x.bbox).collect();
            let pb: Vec<BBox> = p.iter().map(|x| x.bbox).collect();
            let pairs = greedy_match(&gb, &pb);
            let mut switches = 0;
            let matches: Vec<(i64, u64)> = pairs
                .iter()
                .map(|&(i, j)| {
                    let (gid, tid) = (g[i].gt_id, p[j].track_id);
                    if let Some(prev) = last.insert(gid, tid) {
                        if prev != tid {
                            switches += 1;
                        }
                    }
                    (gid, tid)
                })
                .collect();
            FrameMatching {
                frame: f,
                misses: g.len() - matches.len(),
                false_positives: p.len() - matches.len(),
                matches,
                switches,
            }
        })
        .collect()
}

fn require_gt(gt: &[GtBox]) -> Result<()> {
    if gt.is_empty() {
        Err(Error::ZeroGroundTruth)
    } else {
        Ok(())
    }
}

pub fn mota(gt: &[GtBox], pred: &[PredBox]) -> Result<f64> {
    require_gt(gt)?;
    let m = match_frames(gt, pred);
    let errors: usize = m.iter().map(|f| f.misses + f.false_positives + f.switches).sum();
    Ok(1.0 - errors as f64 / gt.len() as f64)
}

pub fn id_switches(gt: &[GtBox], pred: &[PredBox]) -> usize {
    match_frames(gt, pred).iter().map(|f| f.switches).sum()
}

/// Frames in which gt identity `g` and track `p` overlap with IoU at or
/// above the threshold, keyed by `(g, p)`.
pub fn cooccurrence(gt: &[GtBox], pred: &[PredBox]) -> BTreeMap<(i64, u64), usize> {
    let pr_f = by_frame(pred, |p| p.frame);
    let mut counts = BTreeMap::new();
    for g in gt {
        if let Some(ps) = pr_f.get(&g.frame) {
            for p in ps {
                if g.bbox.iou(&p.bbox) >= IOU_THRESHOLD {
                    *counts.entry((g.gt_id, p.track_id)).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

/// Maximum total co-occurrence over one-to-one gt/track pairings.
pub fn idtp(gt: &[GtBox], pred: &[PredBox]) -> usize {
    let counts = cooccurrence(gt, pred);
    let gids: Vec<i64> = gt.iter().map(|g| g.gt_id).collect::<BTreeSet<_>>().into_iter().collect();
    let pids: Vec<u64> = pred.iter().map(|p| p.track_id).collect::<BTreeSet<_>>().into_iter().collect();
    if gids.is_empty() || pids.is_empty() {
        return 0;
    }
    let mut cost = Vec::with_capacity(gids.len() * pids.len());
    for g in &gids {
        for p in &pids {
            cost.push(-(counts.get(&(*g, *p)).copied().unwrap_or(0) as f64));
        }
    }
    hungarian::minimize(&cost, gids.len(), pids.len())
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| counts.get(&(gids[r], pids[c])).copied().unwrap_or(0)))
        .sum()
}

pub fn idf1(gt: &[GtBox], pred: &[PredBox]) -> Result<f64> {
    require_gt(gt)?;
    Ok(2.0 * idtp(gt, pred) as f64 / (gt.len() + pred.len()) as f64)
}

pub fn evaluate(gt: &[GtBox], pred: &[PredBox]) -> Result<MetricsReport> {
    require_gt(gt)?;
    let m = match_frames(gt, pred);
    let fn_: usize = m.iter().map(|f| f.misses).sum();
    let fp: usize = m.iter().map(|f| f.false_positives).sum();
    let sw: usize = m.iter().map(|f| f.switches).sum();
    let tp = idtp(gt, pred);
    Ok(MetricsReport {
        mota: 1.0 - (fn_ + fp + sw) as f64 / gt.len() as f64,
        idf1: 2.0 * tp as f64 / (gt.len() + pred.len()) as f64,
        id_switches: sw,
        num_gt: gt.len(),
        num_pred: pred.len(),
        false_negatives: fn_,
        false_positives: fp,
        idtp: tp,
        hota: None,
    })
}
