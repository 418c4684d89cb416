//! Line-delimited JSON file formats.
//!
//! Every data file holds one JSON object per line. Blank lines and lines
//! starting with `#` are skipped. Floats are written with 9 significant
//! digits.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::appearance::AppearanceMap;
use crate::config::BetaConfig;
use crate::error::{Error, Result};
use crate::metrics::{GtBox, MetricsReport, PredBox};
use crate::simulator::GroundTruthRecord;
use crate::track_state::{BBox, Detection, Location3D};
use crate::tracker::{Frame, FrameDiagnostics, FrameLabel};

/// Rounds to 9 significant digits.
pub fn round9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn round_all(v: &[f64]) -> Vec<f64> {
    v.iter().copied().map(round9).collect()
}

fn round_box(b: &BBox) -> BBox {
    BBox::new(round9(b.x_min), round9(b.y_min), round9(b.width), round9(b.height))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub frame: u64,
    pub id: String,
    pub bbox: BBox,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    pub pose: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appearance: Option<Vec<f64>>,
    /// Path to a JSON appearance map, relative to the detection file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uv_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_pose: Option<Vec<Vec<f64>>>,
}

impl DetectionRecord {
    /// Converts to a detection; `base` resolves `uv_ref`.
    pub fn into_detection(self, base: &Path) -> Result<Detection> {
        let location = match (self.z, self.n) {
            (Some(z), None) => Location3D::from_depth(self.x, self.y, z)?,
            (None, Some(n)) => {
                if !n.is_finite() {
                    return Err(Error::invalid(format!("nearness must be finite, got {n}")));
                }
                Location3D::from_nearness(self.x, self.y, n)
            }
            _ => return Err(Error::invalid("exactly one of z and n must be given")),
        };
        let (appearance_map, appearance_embedding) = match (self.appearance, self.uv_ref) {
            (Some(a), None) => (None, Some(a)),
            (None, Some(r)) => (Some(read_appearance_map(&base.join(r))?), None),
            _ => return Err(Error::invalid("exactly one of appearance and uv_ref must be given")),
        };
        let d = Detection {
            frame_index: self.frame,
            detection_id: self.id,
            bbox: self.bbox,
            location,
            pose_embedding: self.pose,
            appearance_map,
            appearance_embedding,
            pose_forecast: self.pred_pose,
        };
        d.validate()?;
        Ok(d)
    }

    /// Record for an in-memory detection. Appearance maps cannot be inlined;
    /// such detections need `uv_ref` set by the caller.
    pub fn from_detection(d: &Detection) -> Self {
        DetectionRecord {
            frame: d.frame_index,
            id: d.detection_id.clone(),
            bbox: round_box(&d.bbox),
            x: round9(d.location.x),
            y: round9(d.location.y),
            z: None,
            n: Some(round9(d.location.n)),
            pose: round_all(&d.pose_embedding),
            appearance: d.appearance_embedding.as_deref().map(round_all),
            uv_ref: None,
            pred_pose: d
                .pose_forecast
                .as_ref()
                .map(|rows| rows.iter().map(|r| round_all(r)).collect()),
        }
    }
}

pub fn read_appearance_map(path: &Path) -> Result<AppearanceMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let map: AppearanceMap = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    map.validate()?;
    Ok(map)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Parses each non-comment line of a JSON-lines source. Yields
/// `(line_number, value)`.
fn json_lines<'a, T: for<'de> Deserialize<'de>>(
    path: &'a Path,
    reader: impl BufRead + 'a,
) -> impl Iterator<Item = Result<(usize, T)>> + 'a {
    reader.lines().enumerate().filter_map(move |(i, line)| {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(Error::io(path, e))),
        };
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            return None;
        }
        Some(
            serde_json::from_str(t)
                .map(|v| (line_no, v))
                .map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                }),
        )
    })
}

fn at_line(path: &Path, line: usize, e: Error) -> Error {
    match e {
        Error::Parse { .. } | Error::Io { .. } => e,
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: other.to_string(),
        },
    }
}

/// Frame-grouped streaming reader over a detection file. Frames come out in
/// file order; a frame index lower than its predecessor is an error.
pub struct DetectionReader<R: BufRead> {
    path: PathBuf,
    base: PathBuf,
    lines: std::io::Lines<R>,
    line_no: usize,
    peeked: Option<(usize, DetectionRecord)>,
    last: Option<u64>,
}

impl<R: BufRead> DetectionReader<R> {
    pub fn new(path: &Path, reader: R) -> Self {
        DetectionReader {
            path: path.to_path_buf(),
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            lines: reader.lines(),
            line_no: 0,
            peeked: None,
            last: None,
        }
    }

    fn next_record(&mut self) -> Option<Result<(usize, DetectionRecord)>> {
        if let Some(r) = self.peeked.take() {
            return Some(Ok(r));
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some(
                serde_json::from_str(t)
                    .map(|v| (self.line_no, v))
                    .map_err(|e| Error::Parse {
                        path: self.path.clone(),
                        line: self.line_no,
                        message: e.to_string(),
                    }),
            );
        }
    }
}

impl<R: BufRead> Iterator for DetectionReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Result<Frame>> {
        let (line, rec) = match self.next_record()? {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let index = rec.frame;
        if let Some(last) = self.last {
            if index <= last {
                return Some(Err(Error::Parse {
                    path: self.path.clone(),
                    line,
                    message: format!("frame {index} follows frame {last}; rows must be sorted by frame"),
                }));
            }
        }
        self.last = Some(index);
        let mut pending = Some((line, rec));
        let mut detections = Vec::new();
        loop {
            let (line, rec) = match pending.take() {
                Some(r) => r,
                None => match self.next_record() {
                    None => break,
                    Some(Err(e)) => return Some(Err(e)),
                    Some(Ok(r)) if r.1.frame != index => {
                        self.peeked = Some(r);
                        break;
                    }
                    Some(Ok(r)) => r,
                },
            };
            match rec.into_detection(&self.base) {
                Ok(d) => detections.push(d),
                Err(e) => return Some(Err(at_line(&self.path, line, e))),
            }
        }
        Some(Ok(Frame { index, detections }))
    }
}

pub fn parse_detections(path: &Path) -> Result<Vec<Frame>> {
    DetectionReader::new(path, open(path)?).collect()
}

pub fn write_detections(path: &Path, frames: &[Frame], header: Option<&str>) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::new();
    if let Some(h) = header {
        for l in h.lines() {
            body.push_str("# ");
            body.push_str(l);
            body.push('\n');
        }
    }
    for f in frames {
        for d in &f.detections {
            if d.appearance_embedding.is_none() {
                return Err(Error::invalid(format!(
                    "detection {} has only an appearance map; write it with uv_ref",
                    d.detection_id
                )));
            }
            body.push_str(&serde_json::to_string(&DetectionRecord::from_detection(d))?);
            body.push('\n');
        }
    }
    w.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRow {
    pub frame: u64,
    pub gt_id: i64,
    /// Emitted detection, `null` when the detector missed the agent.
    pub id: Option<String>,
    pub bbox: BBox,
    pub x: f64,
    pub y: f64,
    pub n: f64,
}

impl From<&GroundTruthRecord> for GroundTruthRow {
    fn from(r: &GroundTruthRecord) -> Self {
        GroundTruthRow {
            frame: r.frame,
            gt_id: r.gt_id,
            id: r.detection_id.clone(),
            bbox: round_box(&r.bbox),
            x: round9(r.location.x),
            y: round9(r.location.y),
            n: round9(r.location.n),
        }
    }
}

pub fn write_ground_truth(path: &Path, rows: &[GroundTruthRecord]) -> Result<()> {
    write_rows(path, rows.iter().map(GroundTruthRow::from))
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthRow>> {
    json_lines(path, open(path)?).map(|r| r.map(|(_, v)| v)).collect()
}

/// Boxes of real agents (clutter rows excluded).
pub fn gt_boxes(rows: &[GroundTruthRow]) -> Vec<GtBox> {
    rows.iter()
        .filter(|r| r.gt_id >= 0)
        .map(|r| GtBox {
            frame: r.frame,
            gt_id: r.gt_id,
            bbox: r.bbox,
        })
        .collect()
}

/// Detection id to ground-truth identity.
pub fn gt_id_map(rows: &[GroundTruthRow]) -> std::collections::HashMap<String, i64> {
    rows.iter()
        .filter_map(|r| r.id.clone().map(|d| (d, r.gt_id)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackOutputRecord {
    pub frame: u64,
    pub detection_id: String,
    pub track_id: u64,
    /// Cost of the accepted match; `null` when the detection started a track.
    pub cost: Option<f64>,
    pub matched: bool,
    pub bbox: BBox,
}

impl From<&FrameLabel> for TrackOutputRecord {
    fn from(l: &FrameLabel) -> Self {
        TrackOutputRecord {
            frame: l.frame,
            detection_id: l.detection_id.clone(),
            track_id: l.track_id,
            cost: l.cost.map(round9),
            matched: l.matched,
            bbox: round_box(&l.bbox),
        }
    }
}

pub fn write_track_output(path: &Path, labels: &[FrameLabel]) -> Result<()> {
    write_rows(path, labels.iter().map(TrackOutputRecord::from))
}

pub fn read_track_output(path: &Path) -> Result<Vec<TrackOutputRecord>> {
    json_lines(path, open(path)?).map(|r| r.map(|(_, v)| v)).collect()
}

pub fn pred_boxes(rows: &[TrackOutputRecord]) -> Vec<PredBox> {
    rows.iter()
        .map(|r| PredBox {
            frame: r.frame,
            track_id: r.track_id,
            bbox: r.bbox,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsRecord {
    pub frame: u64,
    pub shot_mode: bool,
    pub num_tracks: usize,
    pub num_detections: usize,
    pub matched_costs: Vec<f64>,
    pub spawned: usize,
    pub killed: usize,
}

impl From<&FrameDiagnostics> for DiagnosticsRecord {
    fn from(d: &FrameDiagnostics) -> Self {
        DiagnosticsRecord {
            frame: d.frame,
            shot_mode: d.shot_mode,
            num_tracks: d.num_tracks,
            num_detections: d.num_detections,
            matched_costs: round_all(&d.matched_costs),
            spawned: d.spawned,
            killed: d.killed,
        }
    }
}

pub fn write_diagnostics(path: &Path, diags: &[FrameDiagnostics]) -> Result<()> {
    write_rows(path, diags.iter().map(DiagnosticsRecord::from))
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    json_lines(path, open(path)?).map(|r| r.map(|(_, v)| v)).collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_config(path: &Path) -> Result<BetaConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: BetaConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_config(path: &Path, cfg: &BetaConfig) -> Result<()> {
    let mut text = serde_json::to_string_pretty(cfg)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One frame index per line; blank lines and `#` comments are ignored.
pub fn read_shots(path: &Path) -> Result<BTreeSet<u64>> {
    let mut out = BTreeSet::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v = t.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected a frame index, got {t:?}"),
        })?;
        out.insert(v);
    }
    Ok(out)
}

pub fn write_shots(path: &Path, shots: &[u64]) -> Result<()> {
    let text: String = shots.iter().map(|s| format!("{s}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_report(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut r = report.clone();
    r.mota = round9(r.mota);
    r.idf1 = round9(r.idf1);
    let mut text = serde_json::to_string_pretty(&r)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    const ROW: &str = r#"{"frame":0,"id":"a","bbox":[0,0,10,20],"x":5,"y":10,"z":1.0,"pose":[0.1],"appearance":[0.5]}"#;

    #[test]
    fn depth_one_is_zero_nearness() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "d.jsonl", ROW);
        let frames = parse_detections(&p).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].detections[0].location.n, 0.0);
    }

    #[test]
    fn empty_file_is_empty_stream() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "d.jsonl", "");
        assert!(parse_detections(&p).unwrap().is_empty());
    }

    #[test]
    fn exclusive_fields() {
        let dir = tempdir().unwrap();
        let both = ROW.replace(r#""z":1.0"#, r#""z":1.0,"n":0.0"#);
        let p = write(dir.path(), "d.jsonl", &both);
        let err = parse_detections(&p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let neither = ROW.replace(r#""z":1.0,"#, "");
        let p = write(dir.path(), "d.jsonl", &neither);
        assert!(parse_detections(&p).is_err());
        let two_looks = ROW.replace(r#""appearance":[0.5]"#, r#""appearance":[0.5],"uv_ref":"m.json""#);
        let p = write(dir.path(), "d.jsonl", &two_looks);
        assert!(parse_detections(&p).is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let dir = tempdir().unwrap();
        let text = format!("# header\n{ROW}\n{{\"frame\": 1, \"id\": \"b\"}}\n");
        let p = write(dir.path(), "d.jsonl", &text);
        match parse_detections(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
        let unknown = ROW.replace(r#""frame":0"#, r#""frame":0,"colour":1"#);
        let p = write(dir.path(), "d.jsonl", &unknown);
        assert!(parse_detections(&p).is_err());
    }

    #[test]
    fn unsorted_frames_rejected() {
        let dir = tempdir().unwrap();
        let later = ROW.replace(r#""frame":0"#, r#""frame":3"#);
        let text = format!("{later}\n{ROW}\n");
        let p = write(dir.path(), "d.jsonl", &text);
        assert!(matches!(parse_detections(&p).unwrap_err(), Error::Parse { line: 2, .. }));
        // a frame may not reappear after another one
        let text = format!("{ROW}\n{later}\n{}\n", ROW.replace("\"a\"", "\"c\""));
        let p = write(dir.path(), "d.jsonl", &text);
        assert!(parse_detections(&p).is_err());
    }

    #[test]
    fn uv_ref_loads_map() {
        let dir = tempdir().unwrap();
        let map = AppearanceMap::uniform(4, 0.25, 1.0);
        std::fs::write(dir.path().join("m.json"), serde_json::to_string(&map).unwrap()).unwrap();
        let row = ROW.replace(r#""appearance":[0.5]"#, r#""uv_ref":"m.json""#);
        let p = write(dir.path(), "d.jsonl", &row);
        let frames = parse_detections(&p).unwrap();
        assert_eq!(frames[0].detections[0].appearance_map.as_ref(), Some(&map));
        let row = ROW.replace(r#""appearance":[0.5]"#, r#""uv_ref":"missing.json""#);
        let p = write(dir.path(), "d.jsonl", &row);
        assert!(parse_detections(&p).is_err());
    }

    #[test]
    fn shots_file() {
        let dir = tempdir().unwrap();
        let p = write(dir.path(), "s.txt", "10\n\n# cut\n3\n");
        assert_eq!(read_shots(&p).unwrap().into_iter().collect::<Vec<_>>(), vec![3, 10]);
        let p = write(dir.path(), "s.txt", "10\nten\n");
        assert!(matches!(read_shots(&p).unwrap_err(), Error::Parse { line: 2, .. }));
    }

    #[test]
    fn config_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.json");
        let cfg = BetaConfig::default().with_betas([1.5, 2.5, 0.5, 0.25, 7.0]);
        write_config(&p, &cfg).unwrap();
        assert_eq!(read_config(&p).unwrap(), cfg);
        let p = write(dir.path(), "bad.json", r#"{"beta_a": 1, "gamma": 2}"#);
        assert!(read_config(&p).is_err());
    }

    #[test]
    fn nine_digits() {
        assert_eq!(round9(1.0 / 3.0), 0.333333333);
        assert_eq!(round9(123456789012.0), 123456789000.0);
        assert_eq!(round9(0.0), 0.0);
    }

    fn nine(v: f64) -> f64 {
        round9(v)
    }

    fn detection_strategy() -> impl Strategy<Value = (u64, Vec<f64>, Vec<f64>, [f64; 6], bool)> {
        (
            0u64..4,
            prop::collection::vec(-10.0f64..10.0, 3),
            prop::collection::vec(0.0f64..1.0, 5),
            [-1e3f64..1e3, -1e3..1e3, 1.0..100.0, 1.0..300.0, -3.0..3.0, -1e4..1e4],
            any::<bool>(),
        )
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(rows in prop::collection::vec(detection_strategy(), 0..20)) {
            let mut frames: Vec<Frame> = Vec::new();
            for (k, (gap, pose, app, v, forecast)) in rows.into_iter().enumerate() {
                let index = frames.last().map_or(0, |f| f.index) + gap;
                let d = Detection {
                    frame_index: index,
                    detection_id: format!("d{k}"),
                    bbox: BBox::new(nine(v[0]), nine(v[1]), nine(v[2]), nine(v[3])),
                    location: Location3D::from_nearness(nine(v[0]), nine(v[5]), nine(v[4])),
                    pose_embedding: pose.iter().copied().map(nine).collect(),
                    appearance_map: None,
                    appearance_embedding: Some(app.iter().copied().map(nine).collect()),
                    pose_forecast: forecast.then(|| vec![pose.iter().copied().map(nine).collect(); 2]),
                };
                match frames.last_mut() {
                    Some(f) if f.index == index => f.detections.push(d),
                    _ => frames.push(Frame { index, detections: vec![d] }),
                }
            }
            let dir = tempdir().unwrap();
            let p = dir.path().join("d.jsonl");
            write_detections(&p, &frames, Some("hello")).unwrap();
            prop_assert_eq!(parse_detections(&p).unwrap(), frames);
        }
    }
}
