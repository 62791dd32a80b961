//! Twin-fidelity metrics: box IoU, grid Jaccard, label-set F1, MOTA.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geom::Point;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Aabb {
            min: Point::new(x0.min(x1), y0.min(y1)),
            max: Point::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    fn covers(&self, x: f64, y: f64) -> bool {
        self.min.x <= x && x <= self.max.x && self.min.y <= y && y <= self.max.y
    }
}

/// Area of (union of `a`) ∩ (union of `b`) over area of the union of all,
/// by coordinate compression. 1 when both sets are empty (or zero-area),
/// 0 when exactly one is.
pub fn iou_boxes(a: &[Aabb], b: &[Aabb]) -> f64 {
    let area_a: f64 = a.iter().map(Aabb::area).sum();
    let area_b: f64 = b.iter().map(Aabb::area).sum();
    match (area_a > 0.0, area_b > 0.0) {
        (false, false) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut xs: Vec<f64> = a.iter().chain(b).flat_map(|r| [r.min.x, r.max.x]).collect();
    let mut ys: Vec<f64> = a.iter().chain(b).flat_map(|r| [r.min.y, r.max.y]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let (mut inter, mut union) = (0.0, 0.0);
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let (cx, cy) = ((xs[i] + xs[i + 1]) / 2.0, (ys[j] + ys[j + 1]) / 2.0);
            let cell = (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            let in_a = a.iter().any(|r| r.covers(cx, cy));
            let in_b = b.iter().any(|r| r.covers(cx, cy));
            if in_a && in_b {
                inter += cell;
            }
            if in_a || in_b {
                union += cell;
            }
        }
    }
    inter / union
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize) -> Self {
        OccupancyGrid {
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.cells[y * self.width + x] = v;
    }
}

/// |A ∩ B| / |A ∪ B| over occupied cells; `None` on shape mismatch.
pub fn jaccard(a: &OccupancyGrid, b: &OccupancyGrid) -> Option<f64> {
    if a.width != b.width || a.height != b.height || a.cells.len() != b.cells.len() {
        return None;
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.cells.iter().zip(&b.cells) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Some(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// F1 of predicted labels against truth labels.
pub fn f1_labels(predicted: &BTreeSet<String>, truth: &BTreeSet<String>) -> f64 {
    match (predicted.is_empty(), truth.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let hits = predicted.intersection(truth).count() as f64;
    if hits == 0.0 {
        return 0.0;
    }
    let p = hits / predicted.len() as f64;
    let r = hits / truth.len() as f64;
    2.0 * p * r / (p + r)
}

/// Static scene description compared element class by element class.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StaticScene {
    pub buildings: Vec<Aabb>,
    pub furniture: Vec<Aabb>,
    pub drivable: Option<OccupancyGrid>,
    pub weather: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEntry {
    pub element: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FidelityReport {
    pub entries: Vec<FidelityEntry>,
}

impl FidelityReport {
    pub fn get(&self, element: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.element == element).map(|e| e.value)
    }

    fn push(&mut self, element: &str, metric: &str, value: f64) {
        self.entries.push(FidelityEntry {
            element: element.to_string(),
            metric: metric.to_string(),
            value,
        });
    }
}

pub fn fidelity_static(twin: &StaticScene, truth: &StaticScene) -> FidelityReport {
    let mut r = FidelityReport::default();
    r.push("buildings", "iou", iou_boxes(&twin.buildings, &truth.buildings));
    r.push("furniture", "iou", iou_boxes(&twin.furniture, &truth.furniture));
    let j = match (&twin.drivable, &truth.drivable) {
        (None, None) => Some(1.0),
        (Some(a), Some(b)) => jaccard(a, b),
        _ => Some(0.0),
    };
    if let Some(j) = j {
        r.push("drivable_surface", "jaccard", j);
    }
    r.push("weather", "f1", f1_labels(&twin.weather, &truth.weather));
    r
}

/// One object observation in a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub id: String,
    pub position: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotaBreakdown {
    pub gt: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    pub mota: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MotaError {
    #[error("MOTA undefined: ground truth has no objects")]
    NoGroundTruth,
    #[error("twin has {0} frames, truth has {1}")]
    FrameMismatch(usize, usize),
}

pub fn mota_from_counts(gt: usize, fneg: usize, fpos: usize, idsw: usize) -> Result<f64, MotaError> {
    if gt == 0 {
        return Err(MotaError::NoGroundTruth);
    }
    Ok(1.0 - (fneg + fpos + idsw) as f64 / gt as f64)
}

/// Per-frame greedy nearest matching within `dist_max`; an identity switch
/// is counted when a truth object is matched to a different twin id than at
/// its previous match.
pub fn fidelity_tracking(
    twin: &[Vec<TrackedObject>],
    truth: &[Vec<TrackedObject>],
    dist_max: f64,
) -> Result<MotaBreakdown, MotaError> {
    if twin.len() != truth.len() {
        return Err(MotaError::FrameMismatch(twin.len(), truth.len()));
    }
    let (mut gt, mut fneg, mut fpos, mut idsw) = (0, 0, 0, 0);
    let mut last: BTreeMap<&str, &str> = BTreeMap::new();
    for (hyp, gts) in twin.iter().zip(truth) {
        gt += gts.len();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, g) in gts.iter().enumerate() {
            for (j, h) in hyp.iter().enumerate() {
                let d = g.position.dist(h.position);
                if d <= dist_max {
                    pairs.push((d, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_g = vec![false; gts.len()];
        let mut used_h = vec![false; hyp.len()];
        for (_, i, j) in pairs {
            if used_g[i] || used_h[j] {
                continue;
            }
            used_g[i] = true;
            used_h[j] = true;
            let (gid, hid) = (gts[i].id.as_str(), hyp[j].id.as_str());
            if let Some(prev) = last.insert(gid, hid) {
                if prev != hid {
                    idsw += 1;
                }
            }
        }
        fneg += used_g.iter().filter(|u| !**u).count();
        fpos += used_h.iter().filter(|u| !**u).count();
    }
    let mota = mota_from_counts(gt, fneg, fpos, idsw)?;
    Ok(MotaBreakdown {
        gt,
        false_negatives: fneg,
        false_positives: fpos,
        id_switches: idsw,
        mota,
    })
}
