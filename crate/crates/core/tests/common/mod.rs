//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safr_core::index::{MetadataRecord, Op, Query, ScenarioSegment, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpan {
    pub rec: String,
    pub s: f64,
    pub e: f64,
    pub fields: BTreeSet<String>,
}

fn oracle_normalize(mut v: Vec<OracleSpan>) -> Vec<OracleSpan> {
    v.sort_by(|a, b| a.rec.cmp(&b.rec).then(a.s.total_cmp(&b.s)).then(a.e.total_cmp(&b.e)));
    let mut out: Vec<OracleSpan> = Vec::new();
    for sp in v {
        if let Some(last) = out.last_mut() {
            if last.rec == sp.rec && sp.s <= last.e {
                last.e = last.e.max(sp.e);
                last.fields.extend(sp.fields);
                continue;
            }
        }
        out.push(sp);
    }
    out
}

fn atom_matches(r: &MetadataRecord, field: &str, op: Op, value: &Value) -> bool {
    if r.field != field {
        return false;
    }
    match (&r.value, value) {
        (Value::Str(a), Value::Str(b)) => op == Op::Eq && a == b,
        (Value::Num(a), Value::Num(b)) => match op {
            Op::Eq => a == b,
            Op::Gt => a > b,
            Op::Lt => a < b,
            Op::Ge => a >= b,
            Op::Le => a <= b,
        },
        _ => false,
    }
}

/// Linear scan over every record; quadratic pairing for conjunctions.
pub fn brute_force(records: &[MetadataRecord], q: &Query, slack: f64) -> Vec<OracleSpan> {
    match q {
        Query::Atom(a) => oracle_normalize(
            records
                .iter()
                .filter(|r| atom_matches(r, &a.field, a.op, &a.value))
                .map(|r| OracleSpan {
                    rec: r.recording_id.clone(),
                    s: r.t_start,
                    e: r.t_end,
                    fields: BTreeSet::from([a.field.clone()]),
                })
                .collect(),
        ),
        Query::Or(children) => oracle_normalize(children.iter().flat_map(|c| brute_force(records, c, slack)).collect()),
        Query::And(children) => {
            let mut acc = brute_force(records, &children[0], slack);
            for c in &children[1..] {
                let next = brute_force(records, c, slack);
                let mut out = Vec::new();
                for x in &acc {
                    for y in &next {
                        if x.rec != y.rec || x.s.max(y.s) - x.e.min(y.e) > slack {
                            continue;
                        }
                        let fields: BTreeSet<String> = x.fields.union(&y.fields).cloned().collect();
                        let overlap = (x.s.max(y.s), x.e.min(y.e));
                        // near misses keep the left span's part close to the right one
                        let (s, e) = if overlap.0 < overlap.1 {
                            overlap
                        } else {
                            (x.s.max(y.s - slack), x.e.min(y.e + slack))
                        };
                        if s < e {
                            out.push(OracleSpan { rec: x.rec.clone(), s, e, fields });
                        }
                    }
                }
                acc = oracle_normalize(out);
            }
            acc
        }
    }
}

pub fn same_segments(got: &[ScenarioSegment], want: &[OracleSpan]) -> bool {
    got.len() == want.len()
        && got.iter().zip(want).all(|(g, w)| {
            g.recording_id == w.rec
                && g.t_start == w.s
                && g.t_end == w.e
                && g.matched_fields.iter().cloned().collect::<BTreeSet<_>>() == w.fields
        })
}

pub const STRING_FIELDS: &[(&str, &[&str])] = &[
    ("event", &["turn", "lane_change", "merge", "stop"]),
    ("turn", &["left", "right"]),
    ("ODD.intersection", &["3-way", "4-way"]),
    ("ODD.signage", &["stop", "yield"]),
];
pub const NUMERIC_FIELDS: &[&str] = &["speed", "turning_angle"];

pub fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<MetadataRecord> {
    let n_recs = rng.gen_range(1..8);
    (0..n)
        .map(|_| {
            let rec = format!("r{}", rng.gen_range(0..n_recs));
            // quarter-second grid keeps ties frequent
            let s = rng.gen_range(0..400) as f64 * 0.25;
            let e = s + rng.gen_range(1..40) as f64 * 0.25;
            if rng.gen_bool(0.3) {
                let f = NUMERIC_FIELDS[rng.gen_range(0..NUMERIC_FIELDS.len())];
                MetadataRecord::new(&rec, s, e, f, rng.gen_range(0..30) as f64)
            } else {
                let (f, vals) = STRING_FIELDS[rng.gen_range(0..STRING_FIELDS.len())];
                MetadataRecord::new(&rec, s, e, f, vals[rng.gen_range(0..vals.len())])
            }
        })
        .collect()
}

pub fn random_query(rng: &mut ChaCha8Rng, depth: u32) -> Query {
    if depth == 0 || rng.gen_bool(0.4) {
        return if rng.gen_bool(0.3) {
            let f = NUMERIC_FIELDS[rng.gen_range(0..NUMERIC_FIELDS.len())];
            let op = [Op::Eq, Op::Gt, Op::Lt, Op::Ge, Op::Le][rng.gen_range(0..5)];
            Query::atom(f, op, rng.gen_range(0..30) as f64)
        } else {
            let (f, vals) = STRING_FIELDS[rng.gen_range(0..STRING_FIELDS.len())];
            Query::atom(f, Op::Eq, vals[rng.gen_range(0..vals.len())])
        };
    }
    let n = rng.gen_range(2..4);
    let children = (0..n).map(|_| random_query(rng, depth - 1)).collect();
    if rng.gen_bool(0.5) {
        Query::And(children)
    } else {
        Query::Or(children)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Precision and recall of `got` against labeled spans, each label matched at
/// most once at temporal IoU >= `iou_min`.
pub fn precision_recall(got: &[ScenarioSegment], labels: &[(String, f64, f64)], iou_min: f64) -> (f64, f64) {
    let iou = |a: (f64, f64), b: (f64, f64)| {
        let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
        inter / ((a.1 - a.0) + (b.1 - b.0) - inter)
    };
    let mut used = vec![false; labels.len()];
    let mut tp = 0usize;
    for g in got {
        let hit = labels
            .iter()
            .enumerate()
            .find(|(i, (r, s, e))| !used[*i] && *r == g.recording_id && iou((g.t_start, g.t_end), (*s, *e)) >= iou_min);
        if let Some((i, _)) = hit {
            used[i] = true;
            tp += 1;
        }
    }
    let p = if got.is_empty() { 1.0 } else { tp as f64 / got.len() as f64 };
    let r = if labels.is_empty() { 1.0 } else { tp as f64 / labels.len() as f64 };
    (p, r)
}
