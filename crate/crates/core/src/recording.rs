//! Object-list recordings: parsing, validation and batch ingestion.
//!
//! A recording file is JSON Lines. An optional first line
//! `{"recording_id": "...", "meta": {...}}` names the recording (default: file
//! stem); every other line is one frame:
//!
//! ```text
//! {"t": 0.1, "actors": [{"id": "ego", "class": "car", "x": 1.0, "y": 0.0,
//!   "heading": 0.0, "speed": "50mph", "length": 4.5, "width": 1.8, "ego": true}]}
//! ```
//!
//! `heading`, `speed`, `length`, `width` and `ego` are optional. Missing
//! headings and speeds are derived from positions by finite differences,
//! missing dimensions default per actor class.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Point};
use crate::par::Execution;
use crate::units::{parse_speed, SpeedParseError};

/// Gaps larger than this multiple of the median frame interval split a file.
pub const GAP_SPLIT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorClass {
    Car,
    Truck,
    Bicycle,
    Pedestrian,
    Other,
}

impl ActorClass {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "car" | "vehicle" => ActorClass::Car,
            "truck" => ActorClass::Truck,
            "bicycle" | "cyclist" => ActorClass::Bicycle,
            "pedestrian" => ActorClass::Pedestrian,
            "other" => ActorClass::Other,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActorClass::Car => "car",
            ActorClass::Truck => "truck",
            ActorClass::Bicycle => "bicycle",
            ActorClass::Pedestrian => "pedestrian",
            ActorClass::Other => "other",
        }
    }

    /// Default (length, width) in meters.
    pub fn default_dimensions(self) -> (f64, f64) {
        match self {
            ActorClass::Car => (4.5, 1.8),
            ActorClass::Truck => (10.0, 2.5),
            ActorClass::Bicycle => (1.8, 0.6),
            ActorClass::Pedestrian => (0.5, 0.5),
            ActorClass::Other => (4.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub actor_id: String,
    pub actor_class: ActorClass,
    pub x: f64,
    pub y: f64,
    /// Radians in `[-pi, pi)`, counterclockwise from +x.
    pub heading: f64,
    /// m/s, non-negative.
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub is_ego: bool,
}

impl ActorState {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Point {
        let (s, c) = self.heading.sin_cos();
        Point::new(self.speed * c, self.speed * s)
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub actors: Vec<ActorState>,
}

impl Frame {
    pub fn ego(&self) -> Option<&ActorState> {
        self.actors.iter().find(|a| a.is_ego)
    }

    pub fn actor(&self, id: &str) -> Option<&ActorState> {
        self.actors.iter().find(|a| a.actor_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub recording_id: String,
    pub frames: Vec<Frame>,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub source_meta: BTreeMap<String, serde_json::Value>,
}

/// Time series of one actor, the shape every detector works on.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub actor_id: String,
    pub actor_class: ActorClass,
    pub is_ego: bool,
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
    pub headings: Vec<f64>,
    pub speeds: Vec<f64>,
    pub length: f64,
    pub width: f64,
}

impl Track {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl Recording {
    /// Validates frames and derives the sample rate. Does not split on gaps.
    pub fn new(
        recording_id: impl Into<String>,
        frames: Vec<Frame>,
        source_meta: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self, IngestError> {
        if frames.is_empty() {
            return Err(IngestError::Empty);
        }
        for (i, f) in frames.iter().enumerate() {
            validate_frame(f, i + 1)?;
            if i > 0 && f.t <= frames[i - 1].t {
                return Err(IngestError::NonMonotoneTime { line: i + 1 });
            }
        }
        let sample_rate_hz = median_gap(&frames).map_or(0.0, |g| 1.0 / g);
        Ok(Recording {
            recording_id: recording_id.into(),
            frames,
            sample_rate_hz,
            source_meta,
        })
    }

    pub fn time_range(&self) -> (f64, f64) {
        (
            self.frames.first().map_or(0.0, |f| f.t),
            self.frames.last().map_or(0.0, |f| f.t),
        )
    }

    pub fn duration(&self) -> f64 {
        let (a, b) = self.time_range();
        b - a
    }

    /// Actor ids in first-appearance order.
    pub fn actor_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for f in &self.frames {
            for a in &f.actors {
                if seen.insert(a.actor_id.as_str()) {
                    out.push(a.actor_id.clone());
                }
            }
        }
        out
    }

    pub fn ego_id(&self) -> Option<&str> {
        self.frames
            .first()
            .and_then(|f| f.ego())
            .map(|a| a.actor_id.as_str())
    }

    pub fn track(&self, actor_id: &str) -> Option<Track> {
        let mut track: Option<Track> = None;
        for f in &self.frames {
            if let Some(a) = f.actor(actor_id) {
                let tr = track.get_or_insert_with(|| Track {
                    actor_id: a.actor_id.clone(),
                    actor_class: a.actor_class,
                    is_ego: a.is_ego,
                    times: Vec::new(),
                    positions: Vec::new(),
                    headings: Vec::new(),
                    speeds: Vec::new(),
                    length: a.length,
                    width: a.width,
                });
                tr.times.push(f.t);
                tr.positions.push(a.position());
                tr.headings.push(a.heading);
                tr.speeds.push(a.speed);
            }
        }
        track
    }

    pub fn bytes_estimate(&self) -> usize {
        self.frames.iter().map(|f| 16 + f.actors.len() * 120).sum()
    }
}

fn median_gap(frames: &[Frame]) -> Option<f64> {
    if frames.len() < 2 {
        return None;
    }
    let mut gaps: Vec<f64> = frames.windows(2).map(|w| w[1].t - w[0].t).collect();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    Some(if n % 2 == 1 {
        gaps[n / 2]
    } else {
        0.5 * (gaps[n / 2 - 1] + gaps[n / 2])
    })
}

fn validate_frame(f: &Frame, line: usize) -> Result<(), IngestError> {
    if !f.t.is_finite() {
        return Err(IngestError::InvalidValue {
            line,
            msg: "non-finite time".into(),
        });
    }
    let mut ids = HashSet::new();
    let mut egos = 0;
    for a in &f.actors {
        if !ids.insert(a.actor_id.as_str()) {
            return Err(IngestError::DuplicateActor {
                line,
                actor_id: a.actor_id.clone(),
            });
        }
        egos += a.is_ego as usize;
        let finite = [a.x, a.y, a.heading, a.speed, a.length, a.width]
            .iter()
            .all(|v| v.is_finite());
        if !finite || a.speed < 0.0 || a.length <= 0.0 || a.width <= 0.0 {
            return Err(IngestError::InvalidValue {
                line,
                msg: format!("actor `{}` has invalid kinematics or dimensions", a.actor_id),
            });
        }
    }
    match egos {
        0 => Err(IngestError::MissingEgo { line }),
        1 => Ok(()),
        _ => Err(IngestError::MultipleEgo { line }),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: missing ego actor")]
    MissingEgo { line: usize },
    #[error("line {line}: more than one ego actor")]
    MultipleEgo { line: usize },
    #[error("line {line}: non-monotone time")]
    NonMonotoneTime { line: usize },
    #[error("line {line}: unknown unit `{unit}`")]
    UnknownUnit { line: usize, unit: String },
    #[error("line {line}: duplicate actor `{actor_id}`")]
    DuplicateActor { line: usize, actor_id: String },
    #[error("line {line}: unknown actor class `{class}`")]
    UnknownClass { line: usize, class: String },
    #[error("line {line}: {msg}")]
    InvalidValue { line: usize, msg: String },
    #[error("recording has no frames")]
    Empty,
}

#[derive(Deserialize)]
struct RawHeader {
    recording_id: String,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct RawFrame {
    t: f64,
    actors: Vec<RawActor>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSpeed {
    Num(f64),
    Text(String),
}

#[derive(Deserialize)]
struct RawActor {
    id: String,
    class: String,
    x: f64,
    y: f64,
    heading: Option<f64>,
    speed: Option<RawSpeed>,
    length: Option<f64>,
    width: Option<f64>,
    #[serde(default)]
    ego: bool,
}

/// Per-actor values that were absent in the input and must be derived.
struct Pending {
    frame: usize,
    actor: usize,
    heading: bool,
    speed: bool,
}

pub fn parse_recording(path: &Path) -> Result<Vec<Recording>, IngestError> {
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let default_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recording".to_string());
    parse_recording_str(&text, &default_id)
}

/// Parses one JSON Lines document. Returns more than one recording when the
/// stream contains dropouts longer than [`GAP_SPLIT_FACTOR`] median intervals.
pub fn parse_recording_str(text: &str, default_id: &str) -> Result<Vec<Recording>, IngestError> {
    let mut recording_id = default_id.to_string();
    let mut meta = BTreeMap::new();
    let mut frames: Vec<Frame> = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut seen_content = false;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let first = !seen_content;
        seen_content = true;
        if first && !trimmed.contains("\"t\"") {
            if let Ok(h) = serde_json::from_str::<RawHeader>(trimmed) {
                recording_id = h.recording_id;
                meta = h.meta;
                continue;
            }
        }
        let raw: RawFrame = serde_json::from_str(trimmed).map_err(|e| IngestError::Malformed {
            line: line_no,
            msg: e.to_string(),
        })?;
        if let Some(prev) = frames.last() {
            if !(raw.t > prev.t) {
                return Err(IngestError::NonMonotoneTime { line: line_no });
            }
        }
        let frame_idx = frames.len();
        let mut actors = Vec::with_capacity(raw.actors.len());
        for (ai, ra) in raw.actors.into_iter().enumerate() {
            let class = ActorClass::parse(&ra.class).ok_or_else(|| IngestError::UnknownClass {
                line: line_no,
                class: ra.class.clone(),
            })?;
            let speed = match ra.speed {
                None => None,
                Some(RawSpeed::Num(v)) => Some(v),
                Some(RawSpeed::Text(s)) => Some(parse_speed(&s).map_err(|e| match e {
                    SpeedParseError::Unit(u) => IngestError::UnknownUnit {
                        line: line_no,
                        unit: u.0,
                    },
                    SpeedParseError::NotANumber(v) => IngestError::InvalidValue {
                        line: line_no,
                        msg: format!("bad speed `{v}`"),
                    },
                })?),
            };
            let (dl, dw) = class.default_dimensions();
            if ra.heading.is_none() || speed.is_none() {
                pending.push(Pending {
                    frame: frame_idx,
                    actor: ai,
                    heading: ra.heading.is_none(),
                    speed: speed.is_none(),
                });
            }
            actors.push(ActorState {
                actor_id: ra.id,
                actor_class: class,
                x: ra.x,
                y: ra.y,
                heading: normalize_angle(ra.heading.unwrap_or(0.0)),
                speed: speed.unwrap_or(0.0),
                length: ra.length.unwrap_or(dl),
                width: ra.width.unwrap_or(dw),
                is_ego: ra.ego,
            });
        }
        let frame = Frame { t: raw.t, actors };
        validate_frame(&frame, line_no)?;
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(IngestError::Empty);
    }

    let pieces = split_on_gaps(frames);
    let n_pieces = pieces.len();
    let mut offset = 0;
    let mut out = Vec::with_capacity(n_pieces);
    for (k, mut piece) in pieces.into_iter().enumerate() {
        let len = piece.len();
        let local: Vec<&Pending> = pending
            .iter()
            .filter(|p| p.frame >= offset && p.frame < offset + len)
            .collect();
        derive_missing(&mut piece, offset, &local);
        offset += len;
        let id = if n_pieces == 1 {
            recording_id.clone()
        } else {
            format!("{}.{}", recording_id, k + 1)
        };
        out.push(Recording::new(id, piece, meta.clone())?);
    }
    Ok(out)
}

fn split_on_gaps(frames: Vec<Frame>) -> Vec<Vec<Frame>> {
    let Some(median) = median_gap(&frames) else {
        return vec![frames];
    };
    let limit = GAP_SPLIT_FACTOR * median;
    let mut pieces = vec![Vec::new()];
    let mut last_t: Option<f64> = None;
    for f in frames {
        if let Some(t0) = last_t {
            if f.t - t0 > limit {
                pieces.push(Vec::new());
            }
        }
        last_t = Some(f.t);
        pieces.last_mut().expect("non-empty").push(f);
    }
    pieces
}

fn derive_missing(frames: &mut [Frame], offset: usize, pending: &[&Pending]) {
    if pending.is_empty() {
        return;
    }
    let needed: HashSet<String> = pending
        .iter()
        .map(|p| frames[p.frame - offset].actors[p.actor].actor_id.clone())
        .collect();
    for id in needed {
        // (frame index, actor index) of every appearance
        let apps: Vec<(usize, usize)> = frames
            .iter()
            .enumerate()
            .filter_map(|(fi, f)| f.actors.iter().position(|a| a.actor_id == id).map(|ai| (fi, ai)))
            .collect();
        let mut last_heading = 0.0;
        let mut derived = Vec::with_capacity(apps.len());
        for k in 0..apps.len() {
            let (a, b) = match apps.len() {
                1 => (k, k),
                _ if k == 0 => (0, 1),
                n if k == n - 1 => (n - 2, n - 1),
                _ => (k - 1, k + 1),
            };
            let (fa, aa) = apps[a];
            let (fb, ab) = apps[b];
            let pa = frames[fa].actors[aa].position();
            let pb = frames[fb].actors[ab].position();
            let dt = frames[fb].t - frames[fa].t;
            let d = pb.sub(pa);
            let dist = d.norm();
            let heading = if dist > 1e-6 {
                d.y.atan2(d.x)
            } else {
                last_heading
            };
            last_heading = heading;
            let speed = if dt > 0.0 { dist / dt } else { 0.0 };
            derived.push((heading, speed));
        }
        for (k, &(fi, ai)) in apps.iter().enumerate() {
            let global = fi + offset;
            if let Some(p) = pending.iter().find(|p| p.frame == global && p.actor == ai) {
                let actor = &mut frames[fi].actors[ai];
                if p.heading {
                    actor.heading = normalize_angle(derived[k].0);
                }
                if p.speed {
                    actor.speed = derived[k].1;
                }
            }
        }
    }
}

/// Writes a recording in the canonical JSON Lines form (header + all fields).
pub fn write_recording<W: Write>(rec: &Recording, out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    let header = serde_json::json!({"recording_id": rec.recording_id, "meta": rec.source_meta});
    writeln!(w, "{header}")?;
    for f in &rec.frames {
        let actors: Vec<serde_json::Value> = f
            .actors
            .iter()
            .map(|a| {
                serde_json::json!({
                    "id": a.actor_id, "class": a.actor_class.as_str(), "x": a.x, "y": a.y,
                    "heading": a.heading, "speed": a.speed, "length": a.length,
                    "width": a.width, "ego": a.is_ego,
                })
            })
            .collect();
        writeln!(w, "{}", serde_json::json!({"t": f.t, "actors": actors}))?;
    }
    w.flush()
}

pub fn write_recording_file(rec: &Recording, path: &Path) -> io::Result<()> {
    write_recording(rec, fs::File::create(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FileStatus {
    Ok { recordings: Vec<String> },
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileOutcome {
    pub path: PathBuf,
    pub bytes: u64,
    #[serde(flatten)]
    pub status: FileStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub bytes_ingested: u64,
    pub wall_time: f64,
    /// bytes per second; 0 when no time elapsed
    pub throughput: f64,
    pub recordings_ok: usize,
    pub recordings_rejected: usize,
    pub files: Vec<FileOutcome>,
}

impl IngestReport {
    pub fn rejections(&self) -> impl Iterator<Item = (&Path, &str)> {
        self.files.iter().filter_map(|f| match &f.status {
            FileStatus::Rejected { reason } => Some((f.path.as_path(), reason.as_str())),
            FileStatus::Ok { .. } => None,
        })
    }
}

/// Parses every file, collecting per-file failures instead of aborting.
/// Output order follows `paths` regardless of `workers`.
pub fn ingest_batch(paths: &[PathBuf], workers: usize) -> (Vec<Recording>, IngestReport) {
    let workers = workers.max(1);
    let start = Instant::now();
    let results = Execution::with_workers(workers).map(paths, |p| {
        let bytes = fs::metadata(p).map(|m| m.len()).unwrap_or(0);
        (bytes, parse_recording(p))
    });
    let wall_time = start.elapsed().as_secs_f64();

    let mut recordings = Vec::new();
    let mut files = Vec::with_capacity(paths.len());
    let mut bytes_ingested = 0;
    let mut rejected = 0;
    for (path, (bytes, result)) in paths.iter().zip(results) {
        bytes_ingested += bytes;
        let status = match result {
            Ok(recs) => {
                let ids = recs.iter().map(|r| r.recording_id.clone()).collect();
                recordings.extend(recs);
                FileStatus::Ok { recordings: ids }
            }
            Err(e) => {
                rejected += 1;
                FileStatus::Rejected {
                    reason: e.to_string(),
                }
            }
        };
        files.push(FileOutcome {
            path: path.clone(),
            bytes,
            status,
        });
    }
    let report = IngestReport {
        bytes_ingested,
        wall_time,
        throughput: if wall_time > 0.0 {
            bytes_ingested as f64 / wall_time
        } else {
            0.0
        },
        recordings_ok: recordings.len(),
        recordings_rejected: rejected,
        files,
    };
    (recordings, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub bytes: u64,
    pub throughput: f64,
}

/// Generates a synthetic corpus of roughly each requested size under
/// `work_dir` and measures ingest throughput on it.
pub fn throughput_curve(
    corpus_sizes: &[u64],
    workers: usize,
    work_dir: &Path,
    seed: u64,
) -> io::Result<Vec<ThroughputSample>> {
    let mut out = Vec::with_capacity(corpus_sizes.len());
    for (i, &size) in corpus_sizes.iter().enumerate() {
        let dir = work_dir.join(format!("corpus_{i}_{size}"));
        let paths = crate::synth::write_corpus(&dir, size, seed.wrapping_add(i as u64))?;
        let (_, report) = ingest_batch(&paths, workers);
        out.push(ThroughputSample {
            bytes: report.bytes_ingested,
            throughput: report.throughput,
        });
        fs::remove_dir_all(&dir)?;
    }
    Ok(out)
}

pub fn throughput_csv(samples: &[ThroughputSample]) -> String {
    let mut s = String::from("bytes,throughput_bytes_per_s\n");
    for x in samples {
        s.push_str(&format!("{},{}\n", x.bytes, x.throughput));
    }
    s
}

/// Heading from `a` to `b`; used by fixtures that only know positions.
pub fn bearing(a: Point, b: Point) -> f64 {
    let d = b.sub(a);
    if d.norm() == 0.0 {
        0.0
    } else {
        normalize_angle(d.y.atan2(d.x))
    }
}
