//! Interval metadata index, query language and evaluation.

use serde::{Deserialize, Serialize};

/// Field value. Each field has one fixed type (see [`Schema`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Str(String),
}

impl Value {
    pub fn kind(&self) -> FieldType {
        match self {
            Value::Num(_) => FieldType::Numeric,
            Value::Str(_) => FieldType::String,
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    String,
    Numeric,
}

/// One labeled interval: `field = value` holds on `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub recording_id: String,
    pub t_start: f64,
    pub t_end: f64,
    pub field: String,
    pub value: Value,
}

impl MetadataRecord {
    pub fn new(recording_id: &str, t_start: f64, t_end: f64, field: &str, value: impl Into<Value>) -> Self {
        MetadataRecord {
            recording_id: recording_id.to_string(),
            t_start,
            t_end,
            field: field.to_string(),
            value: value.into(),
        }
    }
}

pub mod query;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Cursor, Read};
use std::path::Path;
use std::time::Instant;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use query::{canonical_field, parse_query, parse_query_with, print_query, Atom, Op, Query, QueryError};

use crate::tagger::{EventKind, EventTag};

/// Default co-occurrence slack for conjunctions, seconds.
pub const DEFAULT_SLACK: f64 = 2.0;

pub const INDEX_VERSION: u32 = 1;

/// Field name → value type. Each field is indexed with exactly one type.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schema {
    pub fields: BTreeMap<String, FieldType>,
}

impl Schema {
    pub fn builtin() -> Self {
        let mut s = Schema::default();
        for f in [
            "event",
            "turn",
            "lane_change",
            "ego_vehicle_event",
            "junction_id",
            "ODD.roadway_type",
            "ODD.intersection",
            "ODD.signage",
            "ODD.traffic_signal",
        ] {
            s.fields.insert(f.to_string(), FieldType::String);
        }
        for f in ["speed", "min_accel", "turning_angle", "turning_radius", "gap"] {
            s.fields.insert(f.to_string(), FieldType::Numeric);
        }
        s
    }

    pub fn get(&self, field: &str) -> Option<FieldType> {
        self.fields.get(field).copied()
    }

    /// Registers `field` with type `ty`; conflicting re-registration fails.
    pub fn register(&mut self, field: &str, ty: FieldType) -> Result<(), IndexError> {
        if field.is_empty() {
            return Err(IndexError::EmptyField);
        }
        match self.fields.get(field) {
            Some(&existing) if existing != ty => Err(IndexError::SchemaConflict {
                field: field.to_string(),
                existing,
                found: ty,
            }),
            _ => {
                self.fields.insert(field.to_string(), ty);
                Ok(())
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("schema conflict on field '{field}': indexed as {existing:?}, got {found:?}")]
    SchemaConflict {
        field: String,
        existing: FieldType,
        found: FieldType,
    },
    #[error("metadata record with empty field path")]
    EmptyField,
    #[error("record interval [{0}, {1}] is empty or not finite")]
    BadInterval(f64, f64),
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error("unsupported index version {0}")]
    Version(u32),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("no accuracy given for field '{0}'")]
    MissingAccuracy(String),
    #[error("no queries")]
    NoQueries,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IndexError + '_ {
    move |source| IndexError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------- lowering

/// Flattens event tags into metadata records.
///
/// | kind | records |
/// |---|---|
/// | turn_left/right | event=turn, turn=left/right, speed, turning_angle (deg), turning_radius |
/// | lane_change_left/right | event=lane_change, lane_change=left/right, speed |
/// | merge | event=merge, speed |
/// | cut_in, cut_out | event=cut_in/cut_out, gap |
/// | rapid_decel | event=rapid_decel, min_accel, speed |
/// | stop | event=stop |
/// | intersection_presence | event=intersection, junction_id |
///
/// Tags on the ego vehicle also get `ego_vehicle_event` with the `event` value.
pub fn lower_tag(tag: &EventTag, ego_id: Option<&str>) -> Vec<MetadataRecord> {
    let rec = |field: &str, value: Value| MetadataRecord {
        recording_id: tag.recording_id.clone(),
        t_start: tag.t_start,
        t_end: tag.t_end,
        field: field.to_string(),
        value,
    };
    let (event, detail): (&str, Option<(&str, &str)>) = match tag.kind {
        EventKind::TurnLeft => ("turn", Some(("turn", "left"))),
        EventKind::TurnRight => ("turn", Some(("turn", "right"))),
        EventKind::LaneChangeLeft => ("lane_change", Some(("lane_change", "left"))),
        EventKind::LaneChangeRight => ("lane_change", Some(("lane_change", "right"))),
        EventKind::CutIn => ("cut_in", None),
        EventKind::CutOut => ("cut_out", None),
        EventKind::RapidDecel => ("rapid_decel", None),
        EventKind::Merge => ("merge", None),
        EventKind::Stop => ("stop", None),
        EventKind::IntersectionPresence => ("intersection", None),
    };
    let mut out = vec![rec("event", event.into())];
    if let Some((f, v)) = detail {
        out.push(rec(f, v.into()));
    }
    if ego_id == Some(tag.actor_id.as_str()) {
        out.push(rec("ego_vehicle_event", event.into()));
    }
    let numeric = [
        ("mean_speed", "speed", 1.0),
        ("min_accel", "min_accel", 1.0),
        ("net_heading_change", "turning_angle", 180.0 / std::f64::consts::PI),
        ("min_turn_radius", "turning_radius", 1.0),
        ("gap", "gap", 1.0),
    ];
    for (attr, field, scale) in numeric {
        if let Some(v) = tag.num(attr) {
            let v = if field == "turning_angle" { v.abs() * scale } else { v * scale };
            if v.is_finite() {
                out.push(rec(field, Value::Num(v)));
            }
        }
    }
    if let Some(j) = tag.text("junction_id") {
        out.push(rec("junction_id", j.into()));
    }
    out
}

/// `ego_ids` maps recording id → ego actor id.
pub fn lower_tags(tags: &[EventTag], ego_ids: &BTreeMap<String, String>) -> Vec<MetadataRecord> {
    tags.iter()
        .flat_map(|t| lower_tag(t, ego_ids.get(&t.recording_id).map(String::as_str)))
        .collect()
}

// ---------------------------------------------------------------- storage

#[derive(Debug, Clone, Copy, PartialEq)]
struct Posting {
    rec: u32,
    s: f64,
    e: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum FieldData {
    /// value → postings sorted by (rec, s, e)
    Str(BTreeMap<String, Vec<Posting>>),
    /// (value, posting) sorted by value then posting
    Num(Vec<(f64, Posting)>),
}

impl FieldData {
    fn len(&self) -> usize {
        match self {
            FieldData::Str(m) => m.values().map(Vec::len).sum(),
            FieldData::Num(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    #[serde(rename = "type")]
    pub ty: FieldType,
    pub offset: u64,
    pub length: u64,
    pub records: u64,
    /// Distinct values (string fields only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub version: u32,
    pub schema: Schema,
    pub recordings: Vec<String>,
    pub record_count: u64,
    pub postings_file: String,
    pub fields: BTreeMap<String, FieldEntry>,
}

/// A matched time span in one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSegment {
    pub recording_id: String,
    pub t_start: f64,
    pub t_end: f64,
    pub matched_fields: Vec<String>,
}

/// Stable id of a segment: the first 16 hex digits of the SHA-256 of
/// `recording_id`, `t_start` and `t_end` (millisecond precision), so ids
/// survive re-indexing.
pub fn segment_id(seg: &ScenarioSegment) -> String {
    use sha2::{Digest, Sha256};
    let key = format!("{}\u{1f}{:.3}\u{1f}{:.3}", seg.recording_id, seg.t_start, seg.t_end);
    Sha256::digest(key.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    schema: Schema,
    recordings: Vec<String>,
    fields: BTreeMap<String, FieldData>,
}

impl Index {
    /// Builds an in-memory index. The schema starts from the built-in one;
    /// unknown fields are registered on first use.
    pub fn from_records(records: &[MetadataRecord]) -> Result<Index, IndexError> {
        let mut schema = Schema::builtin();
        let mut ids: Vec<&str> = Vec::new();
        for r in records {
            schema.register(&r.field, r.value.kind())?;
            if !(r.t_start.is_finite() && r.t_end.is_finite() && r.t_start < r.t_end) {
                return Err(IndexError::BadInterval(r.t_start, r.t_end));
            }
            ids.push(&r.recording_id);
        }
        ids.sort_unstable();
        ids.dedup();
        let rec_idx: HashMap<&str, u32> = ids.iter().enumerate().map(|(i, id)| (*id, i as u32)).collect();
        let mut fields: BTreeMap<String, FieldData> = BTreeMap::new();
        for r in records {
            let p = Posting {
                rec: rec_idx[r.recording_id.as_str()],
                s: r.t_start,
                e: r.t_end,
            };
            let entry = fields.entry(r.field.clone()).or_insert_with(|| match r.value {
                Value::Str(_) => FieldData::Str(BTreeMap::new()),
                Value::Num(_) => FieldData::Num(Vec::new()),
            });
            match (entry, &r.value) {
                (FieldData::Str(m), Value::Str(v)) => m.entry(v.clone()).or_default().push(p),
                (FieldData::Num(col), Value::Num(v)) => col.push((*v, p)),
                _ => unreachable!("schema registration rejects mixed types"),
            }
        }
        for data in fields.values_mut() {
            match data {
                FieldData::Str(m) => m.values_mut().for_each(|ps| ps.sort_by(cmp_posting)),
                FieldData::Num(col) => col.sort_by(|a, b| a.0.total_cmp(&b.0).then(cmp_posting(&a.1, &b.1))),
            }
        }
        Ok(Index {
            schema,
            recordings: ids.into_iter().map(str::to_string).collect(),
            fields,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn recordings(&self) -> &[String] {
        &self.recordings
    }

    pub fn record_count(&self) -> usize {
        self.fields.values().map(FieldData::len).sum()
    }

    /// Writes `manifest.json` and `postings.bin` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<IndexManifest, IndexError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut buf: Vec<u8> = Vec::new();
        let mut entries = BTreeMap::new();
        for (name, data) in &self.fields {
            let offset = buf.len() as u64;
            let (ty, values) = match data {
                FieldData::Str(m) => {
                    buf.write_u32::<LittleEndian>(m.len() as u32).unwrap();
                    for (v, ps) in m {
                        buf.write_u32::<LittleEndian>(v.len() as u32).unwrap();
                        buf.extend_from_slice(v.as_bytes());
                        buf.write_u32::<LittleEndian>(ps.len() as u32).unwrap();
                        ps.iter().for_each(|p| write_posting(&mut buf, p));
                    }
                    (FieldType::String, Some(m.len() as u64))
                }
                FieldData::Num(col) => {
                    buf.write_u32::<LittleEndian>(col.len() as u32).unwrap();
                    for (v, p) in col {
                        buf.write_f64::<LittleEndian>(*v).unwrap();
                        write_posting(&mut buf, p);
                    }
                    (FieldType::Numeric, None)
                }
            };
            entries.insert(
                name.clone(),
                FieldEntry {
                    ty,
                    offset,
                    length: buf.len() as u64 - offset,
                    records: data.len() as u64,
                    values,
                },
            );
        }
        let manifest = IndexManifest {
            version: INDEX_VERSION,
            schema: self.schema.clone(),
            recordings: self.recordings.clone(),
            record_count: self.record_count() as u64,
            postings_file: "postings.bin".to_string(),
            fields: entries,
        };
        let pf = dir.join(&manifest.postings_file);
        fs::write(&pf, &buf).map_err(io_err(&pf))?;
        let mf = dir.join("manifest.json");
        fs::write(&mf, serde_json::to_string_pretty(&manifest)?).map_err(io_err(&mf))?;
        Ok(manifest)
    }

    pub fn open(dir: &Path) -> Result<Index, IndexError> {
        let mf = dir.join("manifest.json");
        let manifest: IndexManifest = serde_json::from_str(&fs::read_to_string(&mf).map_err(io_err(&mf))?)?;
        if manifest.version != INDEX_VERSION {
            return Err(IndexError::Version(manifest.version));
        }
        let pf = dir.join(&manifest.postings_file);
        let bytes = fs::read(&pf).map_err(io_err(&pf))?;
        let corrupt = |m: String| IndexError::Corrupt(m);
        let mut fields = BTreeMap::new();
        let mut total = 0u64;
        for (name, entry) in &manifest.fields {
            if manifest.schema.get(name) != Some(entry.ty) {
                return Err(corrupt(format!("field '{name}' type disagrees with schema")));
            }
            let end = entry.offset.checked_add(entry.length).filter(|&e| e <= bytes.len() as u64);
            let Some(end) = end else {
                return Err(corrupt(format!("field '{name}' extends past postings file")));
            };
            let mut cur = Cursor::new(&bytes[entry.offset as usize..end as usize]);
            let data = read_field(&mut cur, entry.ty, manifest.recordings.len())
                .map_err(|e| corrupt(format!("field '{name}': {e}")))?;
            if data.len() as u64 != entry.records {
                return Err(corrupt(format!(
                    "field '{name}': manifest says {} records, postings hold {}",
                    entry.records,
                    data.len()
                )));
            }
            total += entry.records;
            fields.insert(name.clone(), data);
        }
        if total != manifest.record_count {
            return Err(corrupt(format!("record count {} != {}", manifest.record_count, total)));
        }
        Ok(Index {
            schema: manifest.schema,
            recordings: manifest.recordings,
            fields,
        })
    }

    pub fn parse(&self, text: &str) -> Result<Query, IndexError> {
        Ok(parse_query_with(text, &self.schema)?)
    }

    /// Parses and evaluates with the default slack.
    pub fn search(&self, text: &str) -> Result<Vec<ScenarioSegment>, IndexError> {
        self.evaluate(&self.parse(text)?, DEFAULT_SLACK)
    }

    pub fn evaluate(&self, q: &Query, slack: f64) -> Result<Vec<ScenarioSegment>, IndexError> {
        let mut bits: Vec<String> = Vec::new();
        for a in q.atoms() {
            if self.schema.get(&a.field).is_none() {
                return Err(QueryError::UnknownField { pos: 0, field: a.field.clone() }.into());
            }
            if !bits.contains(&a.field) {
                bits.push(a.field.clone());
            }
        }
        let spans = self.eval_node(q, slack, &bits)?;
        Ok(spans
            .into_iter()
            .map(|s| ScenarioSegment {
                recording_id: self.recordings[s.rec as usize].clone(),
                t_start: s.s,
                t_end: s.e,
                matched_fields: field_names(s.fields, &bits),
            })
            .collect())
    }

    fn eval_node(&self, q: &Query, slack: f64, bits: &[String]) -> Result<Vec<Span>, IndexError> {
        Ok(match q {
            Query::Atom(a) => self.eval_atom(a, bits)?,
            Query::Or(children) => {
                let mut all = Vec::new();
                for c in children {
                    all.extend(self.eval_node(c, slack, bits)?);
                }
                normalize(all)
            }
            Query::And(children) => {
                let mut acc: Option<Vec<Span>> = None;
                for c in children {
                    let next = self.eval_node(c, slack, bits)?;
                    acc = Some(match acc {
                        None => next,
                        Some(prev) => conjoin(&prev, &next, slack),
                    });
                }
                acc.unwrap_or_default()
            }
        })
    }

    fn eval_atom(&self, a: &Atom, bits: &[String]) -> Result<Vec<Span>, IndexError> {
        let bit = 1u128 << bits.iter().position(|b| b == &a.field).expect("atom field registered");
        let span = |p: &Posting| Span { rec: p.rec, s: p.s, e: p.e, fields: bit };
        let Some(data) = self.fields.get(&a.field) else {
            return Ok(Vec::new());
        };
        Ok(match (data, &a.value) {
            (FieldData::Str(m), Value::Str(v)) if a.op == Op::Eq => {
                m.get(v).map(|ps| normalize_sorted(ps.iter().map(span))).unwrap_or_default()
            }
            (FieldData::Num(col), Value::Num(x)) => {
                let lo = col.partition_point(|(v, _)| *v < *x);
                let hi = col.partition_point(|(v, _)| *v <= *x);
                let range = match a.op {
                    Op::Eq => lo..hi,
                    Op::Gt => hi..col.len(),
                    Op::Ge => lo..col.len(),
                    Op::Lt => 0..lo,
                    Op::Le => 0..hi,
                };
                normalize(col[range].iter().map(|(_, p)| span(p)).collect())
            }
            _ => {
                return Err(QueryError::Syntax {
                    pos: 0,
                    msg: format!("'{}{}' does not type-check", a.field, a.op.as_str()),
                }
                .into())
            }
        })
    }
}

fn field_names(mask: u128, bits: &[String]) -> Vec<String> {
    let mut out: Vec<String> = (0..bits.len())
        .filter(|i| mask & (1u128 << i) != 0)
        .map(|i| bits[i].clone())
        .collect();
    out.sort();
    out
}

fn cmp_posting(a: &Posting, b: &Posting) -> std::cmp::Ordering {
    a.rec.cmp(&b.rec).then(a.s.total_cmp(&b.s)).then(a.e.total_cmp(&b.e))
}

fn write_posting(buf: &mut Vec<u8>, p: &Posting) {
    buf.write_u32::<LittleEndian>(p.rec).unwrap();
    buf.write_f64::<LittleEndian>(p.s).unwrap();
    buf.write_f64::<LittleEndian>(p.e).unwrap();
}

fn read_posting(cur: &mut Cursor<&[u8]>, n_recs: usize) -> io::Result<Posting> {
    let rec = cur.read_u32::<LittleEndian>()?;
    if rec as usize >= n_recs {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "recording index out of range"));
    }
    Ok(Posting {
        rec,
        s: cur.read_f64::<LittleEndian>()?,
        e: cur.read_f64::<LittleEndian>()?,
    })
}

fn read_field(cur: &mut Cursor<&[u8]>, ty: FieldType, n_recs: usize) -> io::Result<FieldData> {
    let n = cur.read_u32::<LittleEndian>()? as usize;
    let data = match ty {
        FieldType::String => {
            let mut m = BTreeMap::new();
            for _ in 0..n {
                let len = cur.read_u32::<LittleEndian>()? as usize;
                let mut raw = vec![0u8; len];
                cur.read_exact(&mut raw)?;
                let v = String::from_utf8(raw).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
                let k = cur.read_u32::<LittleEndian>()? as usize;
                let ps = (0..k).map(|_| read_posting(cur, n_recs)).collect::<io::Result<Vec<_>>>()?;
                m.insert(v, ps);
            }
            FieldData::Str(m)
        }
        FieldType::Numeric => {
            let col = (0..n)
                .map(|_| Ok((cur.read_f64::<LittleEndian>()?, read_posting(cur, n_recs)?)))
                .collect::<io::Result<Vec<_>>>()?;
            FieldData::Num(col)
        }
    };
    if (cur.position() as usize) != cur.get_ref().len() {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "trailing bytes"));
    }
    Ok(data)
}

/// Lowers tags, merges ODD records, writes the index into `dir`.
pub fn build_index(
    tags: &[EventTag],
    ego_ids: &BTreeMap<String, String>,
    odd_records: &[MetadataRecord],
    dir: &Path,
) -> Result<IndexManifest, IndexError> {
    let mut records = lower_tags(tags, ego_ids);
    records.extend_from_slice(odd_records);
    Index::from_records(&records)?.write(dir)
}

// ---------------------------------------------------------------- interval algebra

/// Working interval: recording index, bounds, bitmask of matched fields.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Span {
    rec: u32,
    s: f64,
    e: f64,
    fields: u128,
}

/// Sorts by (recording, start) and merges overlapping or touching spans.
fn normalize(mut v: Vec<Span>) -> Vec<Span> {
    v.sort_by(|a, b| a.rec.cmp(&b.rec).then(a.s.total_cmp(&b.s)).then(a.e.total_cmp(&b.e)));
    normalize_sorted(v.into_iter())
}

fn normalize_sorted(it: impl Iterator<Item = Span>) -> Vec<Span> {
    let mut out: Vec<Span> = Vec::new();
    for sp in it {
        match out.last_mut() {
            Some(last) if last.rec == sp.rec && sp.s <= last.e => {
                last.e = last.e.max(sp.e);
                last.fields |= sp.fields;
            }
            _ => out.push(sp),
        }
    }
    out
}

/// Two spans co-occur when the gap between them is at most `slack`:
/// `max(starts) - min(ends) <= slack`.
fn cooccur(x: &Span, y: &Span, slack: f64) -> bool {
    x.s.max(y.s) - x.e.min(y.e) <= slack
}

/// Conjunction of two normalized span lists. Overlapping pairs yield their
/// intersection. A disjoint pair within `slack` yields the part of the left
/// span lying within `slack` of the right one, so results always stay inside
/// the left operand.
fn conjoin(a: &[Span], b: &[Span], slack: f64) -> Vec<Span> {
    let mut out = Vec::new();
    let mut lo = 0;
    for x in a {
        // b is sorted by (rec, s) and disjoint, so ends increase too
        while lo < b.len() && (b[lo].rec < x.rec || (b[lo].rec == x.rec && b[lo].e < x.s && x.s - b[lo].e > slack)) {
            lo += 1;
        }
        let mut k = lo;
        while k < b.len() && b[k].rec == x.rec && !(b[k].s > x.e && b[k].s - x.e > slack) {
            if cooccur(x, &b[k], slack) {
                out.extend(pair(x, &b[k], slack));
            }
            k += 1;
        }
    }
    normalize(out)
}

fn pair(x: &Span, y: &Span, slack: f64) -> Option<Span> {
    let fields = x.fields | y.fields;
    let (mut s, mut e) = (x.s.max(y.s), x.e.min(y.e));
    if s >= e {
        s = x.s.max(y.s - slack);
        e = x.e.min(y.e + slack);
    }
    (s < e).then_some(Span { rec: x.rec, s, e, fields })
}

// ---------------------------------------------------------------- accuracy, latency

/// Product of per-field accuracies over every atom (for both `&` and `||`).
pub fn estimate_query_accuracy(q: &Query, per_field: &BTreeMap<String, f64>) -> Result<f64, IndexError> {
    q.atoms().iter().try_fold(1.0, |acc, a| {
        per_field
            .get(&a.field)
            .map(|v| acc * v)
            .ok_or_else(|| IndexError::MissingAccuracy(a.field.clone()))
    })
}

/// Random metadata with realistic field mix: `n` records over `n / 50`
/// recordings.
pub fn synthetic_records(n: usize, seed: u64) -> Vec<MetadataRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_recs = (n / 50).max(1);
    let strings: [(&str, &[&str]); 8] = [
        ("event", &["turn", "lane_change", "merge", "cut_in", "cut_out", "rapid_decel", "stop", "intersection"]),
        ("turn", &["left", "right"]),
        ("lane_change", &["left", "right"]),
        ("ego_vehicle_event", &["turn", "lane_change", "merge", "stop"]),
        ("ODD.roadway_type", &["freeway", "freeway_ramp", "arterial", "local", "parking"]),
        ("ODD.intersection", &["3-way", "4-way", "5-way"]),
        ("ODD.signage", &["stop", "yield", "speed_limit"]),
        ("ODD.traffic_signal", &["red", "amber", "green"]),
    ];
    (0..n)
        .map(|_| {
            let rec = format!("rec-{:06}", rng.gen_range(0..n_recs));
            let s = rng.gen_range(0.0..600.0);
            let e = s + rng.gen_range(0.5..20.0);
            if rng.gen_bool(0.25) {
                MetadataRecord::new(&rec, s, e, "speed", rng.gen_range(0.0..40.0))
            } else {
                let (field, values) = strings[rng.gen_range(0..strings.len())];
                MetadataRecord::new(&rec, s, e, field, values[rng.gen_range(0..values.len())])
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub n: usize,
    pub mean_seconds: f64,
    pub max_seconds: f64,
}

/// Mean and max response time of `queries` over synthetic indexes of each
/// size. Each query runs `repeats` times.
pub fn latency_probe(sizes: &[usize], queries: &[&str], repeats: usize, seed: u64) -> Result<Vec<LatencySample>, IndexError> {
    if queries.is_empty() {
        return Err(IndexError::NoQueries);
    }
    let parsed: Vec<Query> = queries.iter().map(|q| parse_query(q)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for &n in sizes {
        let index = Index::from_records(&synthetic_records(n, seed))?;
        let mut total = 0.0;
        let mut max: f64 = 0.0;
        let mut runs = 0;
        for q in &parsed {
            for _ in 0..repeats.max(1) {
                let t0 = Instant::now();
                let segs = index.evaluate(q, DEFAULT_SLACK)?;
                let dt = t0.elapsed().as_secs_f64();
                std::hint::black_box(segs);
                total += dt;
                max = max.max(dt);
                runs += 1;
            }
        }
        out.push(LatencySample {
            n,
            mean_seconds: total / runs as f64,
            max_seconds: max,
        });
    }
    Ok(out)
}

pub fn latency_csv(samples: &[LatencySample]) -> String {
    let mut s = String::from("records,mean_seconds,max_seconds\n");
    for x in samples {
        s.push_str(&format!("{},{:.6},{:.6}\n", x.n, x.mean_seconds, x.max_seconds));
    }
    s
}
