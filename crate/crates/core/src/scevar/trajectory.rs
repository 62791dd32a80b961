//! Statistically normal turning paths per (direction, angle bucket).

use serde::{Deserialize, Serialize};

use crate::geom::{resample_by_arc_length, Point};
use crate::recording::Recording;
use crate::tagger::{EventKind, EventTag};

pub const PATH_POINTS: usize = 50;
pub const MIN_TURNS_PER_BUCKET: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

/// Bucket edges on |net heading change|, degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleBuckets {
    pub edges: Vec<f64>,
}

impl Default for AngleBuckets {
    fn default() -> Self {
        AngleBuckets {
            edges: vec![0.0, 135.0, 360.0],
        }
    }
}

impl AngleBuckets {
    fn bucket(&self, deg: f64) -> Option<usize> {
        (0..self.edges.len().saturating_sub(1)).find(|&i| deg >= self.edges[i] && deg < self.edges[i + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnTrajectoryModel {
    pub direction: TurnDirection,
    pub angle_range_deg: (f64, f64),
    pub count: usize,
    pub mean: Vec<Point>,
    /// Pointwise RMS distance of the member paths from the mean.
    pub band: Vec<f64>,
}

/// Path of the tagged actor over the tag window, moved to the origin and
/// rotated so the entry heading points along +x, then resampled to
/// [`PATH_POINTS`] points by arc length.
pub fn normalized_turn_path(rec: &Recording, tag: &EventTag) -> Option<Vec<Point>> {
    let track = rec.track(&tag.actor_id)?;
    let idx: Vec<usize> = (0..track.len())
        .filter(|&i| track.times[i] >= tag.t_start - 1e-9 && track.times[i] <= tag.t_end + 1e-9)
        .collect();
    if idx.len() < 2 {
        return None;
    }
    let origin = track.positions[idx[0]];
    let h0 = track.headings[idx[0]];
    let pts: Vec<Point> = idx.iter().map(|&i| track.positions[i].sub(origin).rotate(-h0)).collect();
    Some(resample_by_arc_length(&pts, PATH_POINTS))
}

/// Buckets turn tags by direction and |net heading change| and averages the
/// normalized paths. Buckets with fewer than [`MIN_TURNS_PER_BUCKET`] turns
/// are skipped and reported in the second return value.
pub fn learn_turn_trajectories(recs: &[Recording], tags: &[EventTag], buckets: &AngleBuckets) -> (Vec<TurnTrajectoryModel>, Vec<String>) {
    let mut groups: std::collections::BTreeMap<(TurnDirection, usize), Vec<Vec<Point>>> = Default::default();
    let mut warnings = Vec::new();
    for tag in tags {
        let dir = match tag.kind {
            EventKind::TurnLeft => TurnDirection::Left,
            EventKind::TurnRight => TurnDirection::Right,
            _ => continue,
        };
        let Some(rec) = recs.iter().find(|r| r.recording_id == tag.recording_id) else {
            warnings.push(format!("{}: recording not loaded", tag.recording_id));
            continue;
        };
        let deg = match tag.num("net_heading_change") {
            Some(a) => a.abs().to_degrees(),
            None => {
                let Some(track) = rec.track(&tag.actor_id) else { continue };
                let hs: Vec<f64> = (0..track.len())
                    .filter(|&i| track.times[i] >= tag.t_start && track.times[i] <= tag.t_end)
                    .map(|i| track.headings[i])
                    .collect();
                let un = crate::geom::unwrap_angles(&hs);
                (un.last().copied().unwrap_or(0.0) - un.first().copied().unwrap_or(0.0)).abs().to_degrees()
            }
        };
        let Some(b) = buckets.bucket(deg) else { continue };
        if let Some(p) = normalized_turn_path(rec, tag) {
            groups.entry((dir, b)).or_default().push(p);
        }
    }
    let mut models = Vec::new();
    for ((direction, b), paths) in groups {
        let range = (buckets.edges[b], buckets.edges[b + 1]);
        if paths.len() < MIN_TURNS_PER_BUCKET {
            let msg = format!(
                "{direction:?} turns {}-{} deg: {} path(s), need {MIN_TURNS_PER_BUCKET}; bucket skipped",
                range.0,
                range.1,
                paths.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        let n = paths.len() as f64;
        let mean: Vec<Point> = (0..PATH_POINTS)
            .map(|k| paths.iter().fold(Point::default(), |acc, p| acc.add(p[k])).scale(1.0 / n))
            .collect();
        let band: Vec<f64> = (0..PATH_POINTS)
            .map(|k| (paths.iter().map(|p| p[k].sub(mean[k]).dot(p[k].sub(mean[k]))).sum::<f64>() / n).sqrt())
            .collect();
        models.push(TurnTrajectoryModel {
            direction,
            angle_range_deg: range,
            count: paths.len(),
            mean,
            band,
        });
    }
    (models, warnings)
}
