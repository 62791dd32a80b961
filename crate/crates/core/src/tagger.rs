//! Event and ODD tagging of recordings against a map, plus tagger evaluation.
//!
//! Every detector works on one actor's [`Track`]. Headings are unwrapped and
//! smoothed by a centered moving average before differencing; the thresholds
//! live in [`TaggerConfig`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{central_diff, moving_average, unwrap_angles, Point};
use crate::index::{MetadataRecord, Value};
use crate::map::{LaneAssignment, MapModel, RoadwayType};
use crate::par::Execution;
use crate::recording::{Recording, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TurnLeft,
    TurnRight,
    LaneChangeLeft,
    LaneChangeRight,
    CutIn,
    CutOut,
    RapidDecel,
    Merge,
    Stop,
    IntersectionPresence,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::TurnLeft,
        EventKind::TurnRight,
        EventKind::LaneChangeLeft,
        EventKind::LaneChangeRight,
        EventKind::CutIn,
        EventKind::CutOut,
        EventKind::RapidDecel,
        EventKind::Merge,
        EventKind::Stop,
        EventKind::IntersectionPresence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::TurnLeft => "turn_left",
            EventKind::TurnRight => "turn_right",
            EventKind::LaneChangeLeft => "lane_change_left",
            EventKind::LaneChangeRight => "lane_change_right",
            EventKind::CutIn => "cut_in",
            EventKind::CutOut => "cut_out",
            EventKind::RapidDecel => "rapid_decel",
            EventKind::Merge => "merge",
            EventKind::Stop => "stop",
            EventKind::IntersectionPresence => "intersection_presence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_turn(self) -> bool {
        matches!(self, EventKind::TurnLeft | EventKind::TurnRight)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTag {
    pub recording_id: String,
    pub actor_id: String,
    pub kind: EventKind,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default)]
    pub attributes: BTreeMap<String, Value>,
}

impl EventTag {
    pub fn new(recording_id: &str, actor_id: &str, kind: EventKind, t_start: f64, t_end: f64) -> Self {
        EventTag {
            recording_id: recording_id.to_string(),
            actor_id: actor_id.to_string(),
            kind,
            t_start,
            t_end,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.attributes.insert(key.to_string(), value.into());
        self
    }

    pub fn num(&self, key: &str) -> Option<f64> {
        match self.attributes.get(key) {
            Some(Value::Num(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.attributes.get(key) {
            Some(Value::Str(s)) => Some(s),
            _ => None,
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Detector thresholds. Angles in radians, times in seconds, SI otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub turn_angle: f64,
    pub turn_window: f64,
    /// Yaw rate above which a frame counts as turning.
    pub min_yaw_rate: f64,
    pub turn_min_speed: f64,
    /// Full width of the centered heading/speed smoothing window.
    pub smoothing: f64,
    pub decel_threshold: f64,
    pub decel_sustain: f64,
    pub cut_gap: f64,
    pub lane_change_heading_cap: f64,
    /// Runs separated by less than this merge.
    pub merge_gap: f64,
    pub min_lateral_speed: f64,
    pub min_lane_coverage: f64,
    pub junction_buffer: f64,
    pub stop_speed: f64,
    pub stop_min_duration: f64,
    pub moving_speed: f64,
    pub signage_radius: f64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            turn_angle: 45f64.to_radians(),
            turn_window: 12.0,
            min_yaw_rate: 0.05,
            turn_min_speed: 0.5,
            smoothing: 0.5,
            decel_threshold: -3.5,
            decel_sustain: 0.5,
            cut_gap: 50.0,
            lane_change_heading_cap: 30f64.to_radians(),
            merge_gap: 1.0,
            min_lateral_speed: 0.2,
            min_lane_coverage: 0.8,
            junction_buffer: 10.0,
            stop_speed: 0.3,
            stop_min_duration: 1.0,
            moving_speed: 1.0,
            signage_radius: 30.0,
        }
    }
}

/// Inclusive index ranges where `mask` holds.
fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len() - 1));
    }
    out
}

fn merge_runs(runs: Vec<(usize, usize)>, times: &[f64], gap: f64) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        match out.last_mut() {
            Some(last) if times[r.0] - times[last.1] < gap => last.1 = r.1,
            _ => out.push(r),
        }
    }
    out
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn smoothed_heading(track: &Track, cfg: &TaggerConfig) -> Vec<f64> {
    let h = unwrap_angles(&track.headings);
    moving_average(&track.times, &h, cfg.smoothing / 2.0)
}

pub fn detect_turns(rec: &Recording, actor_id: &str, cfg: &TaggerConfig) -> Vec<EventTag> {
    rec.track(actor_id)
        .map(|t| turns_on_track(&rec.recording_id, &t, cfg))
        .unwrap_or_default()
}

pub fn turns_on_track(recording_id: &str, track: &Track, cfg: &TaggerConfig) -> Vec<EventTag> {
    let n = track.len();
    if n < 3 {
        return Vec::new();
    }
    let times = &track.times;
    let hs = smoothed_heading(track, cfg);
    let yaw = central_diff(times, &hs);
    let mut tags = Vec::new();
    for sign in [1.0, -1.0] {
        let mask: Vec<bool> = (0..n)
            .map(|i| sign * yaw[i] >= cfg.min_yaw_rate && track.speeds[i] >= cfg.turn_min_speed)
            .collect();
        for (a, b) in merge_runs(runs(&mask), times, cfg.merge_gap) {
            if times[b] <= times[a] {
                continue;
            }
            // the smoothing tails reach one window width beyond the active run
            let j0 = (0..=a).rev().find(|&j| times[a] - times[j] >= cfg.smoothing).unwrap_or(0);
            let j1 = (b..n).find(|&j| times[j] - times[b] >= cfg.smoothing).unwrap_or(n - 1);
            let net = hs[j1] - hs[j0];
            if sign * net < cfg.turn_angle || !window_reaches(times, &hs, j0, j1, cfg) {
                continue;
            }
            let min_radius = (a..=b)
                .filter(|&i| yaw[i].abs() > 1e-9)
                .map(|i| track.speeds[i] / yaw[i].abs())
                .fold(f64::INFINITY, f64::min);
            let kind = if sign > 0.0 { EventKind::TurnLeft } else { EventKind::TurnRight };
            tags.push(
                EventTag::new(recording_id, &track.actor_id, kind, times[a], times[b])
                    .with("net_heading_change", net)
                    .with("mean_speed", mean(&track.speeds[a..=b]))
                    .with("min_turn_radius", min_radius),
            );
        }
    }
    tags
}

/// Does some sub-window no longer than `turn_window` accumulate the turn angle?
fn window_reaches(times: &[f64], hs: &[f64], j0: usize, j1: usize, cfg: &TaggerConfig) -> bool {
    let mut q = j0;
    for p in j0..=j1 {
        q = q.max(p);
        while q < j1 && times[q + 1] - times[p] <= cfg.turn_window + 1e-9 {
            q += 1;
        }
        if (p..=q).any(|k| (hs[k] - hs[p]).abs() >= cfg.turn_angle) {
            return true;
        }
    }
    false
}

pub fn detect_rapid_decel(rec: &Recording, actor_id: &str, cfg: &TaggerConfig) -> Vec<EventTag> {
    rec.track(actor_id)
        .map(|t| decel_on_track(&rec.recording_id, &t, cfg))
        .unwrap_or_default()
}

pub fn decel_on_track(recording_id: &str, track: &Track, cfg: &TaggerConfig) -> Vec<EventTag> {
    if track.len() < 3 {
        return Vec::new();
    }
    let times = &track.times;
    let v = moving_average(times, &track.speeds, cfg.smoothing / 2.0);
    let acc = central_diff(times, &v);
    let mask: Vec<bool> = acc.iter().map(|&a| a <= cfg.decel_threshold).collect();
    runs(&mask)
        .into_iter()
        .filter(|&(a, b)| times[b] - times[a] >= cfg.decel_sustain - 1e-9 && times[b] > times[a])
        .map(|(a, b)| {
            let min = acc[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
            EventTag::new(recording_id, &track.actor_id, EventKind::RapidDecel, times[a], times[b])
                .with("min_accel", min)
                .with("mean_speed", mean(&track.speeds[a..=b]))
        })
        .collect()
}

pub fn stops_on_track(recording_id: &str, track: &Track, cfg: &TaggerConfig) -> Vec<EventTag> {
    let times = &track.times;
    let mask: Vec<bool> = track.speeds.iter().map(|&s| s < cfg.stop_speed).collect();
    runs(&mask)
        .into_iter()
        .filter(|&(a, b)| {
            times[b] - times[a] >= cfg.stop_min_duration - 1e-9
                && times[b] > times[a]
                && track.speeds[..a].iter().any(|&s| s > cfg.moving_speed)
        })
        .map(|(a, b)| EventTag::new(recording_id, &track.actor_id, EventKind::Stop, times[a], times[b]))
        .collect()
}

pub fn detect_intersection_presence(rec: &Recording, map: &MapModel, actor_id: &str, cfg: &TaggerConfig) -> Vec<EventTag> {
    rec.track(actor_id)
        .map(|t| intersections_on_track(&rec.recording_id, &t, map, cfg))
        .unwrap_or_default()
}

pub fn intersections_on_track(recording_id: &str, track: &Track, map: &MapModel, cfg: &TaggerConfig) -> Vec<EventTag> {
    let times = &track.times;
    let near: Vec<Option<usize>> = track
        .positions
        .iter()
        .map(|p| {
            map.junctions
                .iter()
                .enumerate()
                .map(|(k, j)| (k, j.center.dist(*p) - j.radius))
                .filter(|&(_, d)| d <= cfg.junction_buffer)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| k)
        })
        .collect();
    let mut tags = Vec::new();
    for (k, j) in map.junctions.iter().enumerate() {
        let mask: Vec<bool> = near.iter().map(|n| *n == Some(k)).collect();
        for (a, b) in merge_runs(runs(&mask), times, cfg.merge_gap) {
            if times[b] > times[a] {
                tags.push(
                    EventTag::new(recording_id, &track.actor_id, EventKind::IntersectionPresence, times[a], times[b])
                        .with("junction_id", j.junction_id.as_str())
                        .with("arity", j.arity as f64),
                );
            }
        }
    }
    tags
}

/// Per-frame lane assignment and junction-core flags for one track.
struct LaneTrack {
    lanes: Vec<Option<LaneAssignment>>,
    in_junction: Vec<bool>,
}

impl LaneTrack {
    fn new(track: &Track, map: &MapModel) -> Self {
        let lanes = track
            .positions
            .iter()
            .zip(&track.headings)
            .map(|(p, &h)| map.assign_lane_hint(p.x, p.y, Some(h)))
            .collect();
        let in_junction = track
            .positions
            .iter()
            .map(|p| map.junctions.iter().any(|j| j.center.dist(*p) <= j.radius))
            .collect();
        LaneTrack { lanes, in_junction }
    }

    fn coverage(&self) -> f64 {
        if self.lanes.is_empty() {
            return 0.0;
        }
        self.lanes.iter().filter(|l| l.is_some()).count() as f64 / self.lanes.len() as f64
    }

    fn lateral_speed(&self, track: &Track, i: usize) -> f64 {
        match &self.lanes[i] {
            Some(l) => track.speeds[i] * (track.headings[i] - l.road_heading).sin(),
            None => 0.0,
        }
    }

    /// Frames around the boundary crossing between `p` and `i` during which
    /// the actor moves sideways.
    fn lateral_window(&self, track: &Track, p: usize, i: usize, cfg: &TaggerConfig) -> (usize, usize) {
        let moving = |k: usize| self.lateral_speed(track, k).abs() >= cfg.min_lateral_speed;
        let mut a = p;
        while a > 0 && moving(a - 1) {
            a -= 1;
        }
        let mut b = i;
        while b + 1 < track.len() && moving(b + 1) {
            b += 1;
        }
        (a, b)
    }
}

fn merge_overlapping(mut tags: Vec<EventTag>) -> Vec<EventTag> {
    tags.sort_by(|a, b| {
        (a.kind, &a.actor_id)
            .cmp(&(b.kind, &b.actor_id))
            .then(a.t_start.total_cmp(&b.t_start))
    });
    let mut out: Vec<EventTag> = Vec::new();
    for t in tags {
        match out.last_mut() {
            Some(last) if last.kind == t.kind && last.actor_id == t.actor_id && t.t_start <= last.t_end => {
                last.t_end = last.t_end.max(t.t_end);
            }
            _ => out.push(t),
        }
    }
    out
}

pub fn detect_lane_changes(rec: &Recording, map: &MapModel, actor_id: &str, cfg: &TaggerConfig) -> Vec<EventTag> {
    rec.track(actor_id)
        .map(|t| {
            lane_changes_on_track(&rec.recording_id, &t, &LaneTrack::new(&t, map), map, cfg)
                .into_iter()
                .filter(|t| !matches!(t.kind, EventKind::Merge))
                .collect()
        })
        .unwrap_or_default()
}

pub fn detect_merge(rec: &Recording, map: &MapModel, actor_id: &str, cfg: &TaggerConfig) -> Vec<EventTag> {
    rec.track(actor_id)
        .map(|t| {
            lane_changes_on_track(&rec.recording_id, &t, &LaneTrack::new(&t, map), map, cfg)
                .into_iter()
                .filter(|t| matches!(t.kind, EventKind::Merge))
                .collect()
        })
        .unwrap_or_default()
}

/// Lane changes on one road plus ramp-to-road merges.
fn lane_changes_on_track(
    recording_id: &str,
    track: &Track,
    lt: &LaneTrack,
    map: &MapModel,
    cfg: &TaggerConfig,
) -> Vec<EventTag> {
    if track.len() < 3 || lt.coverage() < cfg.min_lane_coverage {
        return Vec::new();
    }
    let hs = smoothed_heading(track, cfg);
    let mut tags = Vec::new();
    let mut prev: Option<usize> = None;
    for i in 0..track.len() {
        let Some(cur) = &lt.lanes[i] else { continue };
        if let Some(p) = prev {
            let old = lt.lanes[p].as_ref().expect("prev is assigned");
            let suppressed = lt.in_junction[p] || lt.in_junction[i];
            let same_road = old.road_id == cur.road_id;
            let from_ramp = !same_road
                && map
                    .road(&old.road_id)
                    .is_some_and(|r| r.roadway_type == RoadwayType::FreewayRamp);
            if !suppressed && ((same_road && old.lane_id != cur.lane_id) || from_ramp) {
                let (a, b) = lt.lateral_window(track, p, i, cfg);
                let (a, b) = if track.times[b] > track.times[a] { (a, b) } else { (p, i) };
                if (hs[b] - hs[a]).abs() < cfg.lane_change_heading_cap {
                    let kind = if from_ramp {
                        EventKind::Merge
                    } else {
                        // left is the direction of increasing offset when
                        // driving along the reference line
                        let along = (track.headings[i] - cur.road_heading).cos().signum();
                        if (cur.offset - old.offset) * along > 0.0 {
                            EventKind::LaneChangeLeft
                        } else {
                            EventKind::LaneChangeRight
                        }
                    };
                    let mut tag = EventTag::new(recording_id, &track.actor_id, kind, track.times[a], track.times[b])
                        .with("mean_speed", mean(&track.speeds[a..=b]))
                        .with("road_id", cur.road_id.as_str());
                    if from_ramp {
                        tag = tag.with("from_road", old.road_id.as_str());
                    }
                    tags.push(tag);
                }
            }
        }
        prev = Some(i);
    }
    merge_overlapping(tags)
}

pub fn detect_cut_in_out(rec: &Recording, map: &MapModel, cfg: &TaggerConfig) -> Vec<EventTag> {
    let Some(ego_id) = rec.ego_id() else {
        return Vec::new();
    };
    let Some(ego) = rec.track(ego_id) else {
        return Vec::new();
    };
    let ego_lanes = LaneTrack::new(&ego, map);
    let mut tags = Vec::new();
    for id in rec.actor_ids() {
        if id == ego_id {
            continue;
        }
        if let Some(track) = rec.track(&id) {
            let lt = LaneTrack::new(&track, map);
            tags.extend(cuts_on_track(&rec.recording_id, &ego, &ego_lanes, &track, &lt, cfg));
        }
    }
    tags
}

fn cuts_on_track(
    recording_id: &str,
    ego: &Track,
    ego_lanes: &LaneTrack,
    track: &Track,
    lt: &LaneTrack,
    cfg: &TaggerConfig,
) -> Vec<EventTag> {
    if ego_lanes.coverage() < cfg.min_lane_coverage || track.len() < 2 {
        return Vec::new();
    }
    // (in ego lane, longitudinal gap ahead of ego) per actor sample
    let state: Vec<Option<(bool, f64)>> = (0..track.len())
        .map(|k| {
            let e = ego.times.binary_search_by(|t| t.total_cmp(&track.times[k])).ok()?;
            let el = ego_lanes.lanes[e].as_ref()?;
            let al = lt.lanes[k].as_ref()?;
            if ego_lanes.in_junction[e] || lt.in_junction[k] {
                return None;
            }
            let dir = Point::new(ego.headings[e].cos(), ego.headings[e].sin());
            let gap = track.positions[k].sub(ego.positions[e]).dot(dir);
            Some((el.road_id == al.road_id && el.lane_id == al.lane_id, gap))
        })
        .collect();
    let near = |gap: f64| gap > 0.0 && gap < cfg.cut_gap;
    let mut tags = Vec::new();
    for k in 1..track.len() {
        let (Some((was, g0)), Some((now, g1))) = (state[k - 1], state[k]) else {
            continue;
        };
        let kind = match (was, now) {
            (false, true) if near(g1) => EventKind::CutIn,
            (true, false) if near(g0) => EventKind::CutOut,
            _ => continue,
        };
        let (a, b) = lt.lateral_window(track, k - 1, k, cfg);
        tags.push(
            EventTag::new(recording_id, &track.actor_id, kind, track.times[a], track.times[b])
                .with("gap", if now { g1 } else { g0 }),
        );
    }
    merge_overlapping(tags)
}

fn sort_tags(tags: &mut [EventTag]) {
    tags.sort_by(|a, b| {
        a.t_start
            .total_cmp(&b.t_start)
            .then(a.t_end.total_cmp(&b.t_end))
            .then_with(|| a.actor_id.cmp(&b.actor_id))
            .then(a.kind.cmp(&b.kind))
    });
}

/// Every detector over every actor, sorted by start time. Map-dependent
/// detectors are skipped when `map` is `None`.
pub fn tag_recording(rec: &Recording, map: Option<&MapModel>, cfg: &TaggerConfig) -> Vec<EventTag> {
    let rid = rec.recording_id.as_str();
    let ego_id = rec.ego_id().map(str::to_string);
    let ego = ego_id.as_deref().and_then(|id| rec.track(id));
    let ego_lanes = match (map, &ego) {
        (Some(m), Some(e)) => Some(LaneTrack::new(e, m)),
        _ => None,
    };
    let mut tags = Vec::new();
    for id in rec.actor_ids() {
        let Some(track) = rec.track(&id) else { continue };
        if track.len() < 3 {
            continue;
        }
        tags.extend(turns_on_track(rid, &track, cfg));
        tags.extend(decel_on_track(rid, &track, cfg));
        tags.extend(stops_on_track(rid, &track, cfg));
        if let Some(m) = map {
            let lt = LaneTrack::new(&track, m);
            tags.extend(lane_changes_on_track(rid, &track, &lt, m, cfg));
            tags.extend(intersections_on_track(rid, &track, m, cfg));
            if let (Some(e), Some(el)) = (&ego, &ego_lanes) {
                if Some(&id) != ego_id.as_ref() {
                    tags.extend(cuts_on_track(rid, e, el, &track, &lt, cfg));
                }
            }
        }
    }
    sort_tags(&mut tags);
    tags
}

pub fn tag_recordings(
    recs: &[Recording],
    map: Option<&MapModel>,
    cfg: &TaggerConfig,
    exec: Execution,
) -> Vec<Vec<EventTag>> {
    exec.map(recs, |r| tag_recording(r, map, cfg))
}

/// Ego-centric ODD attributes as metadata intervals: roadway type,
/// intersection arity, applicable signage and signal state.
///
/// A sign or signal applies while the ego is on its road, within
/// `signage_radius` of it, and not driving away from the nearest junction.
pub fn derive_odd_records(rec: &Recording, map: &MapModel, cfg: &TaggerConfig) -> Vec<MetadataRecord> {
    let Some(ego) = rec.ego_id().and_then(|id| rec.track(id)) else {
        return Vec::new();
    };
    let lt = LaneTrack::new(&ego, map);
    let n = ego.len();
    let mut series: BTreeMap<&'static str, Vec<Option<String>>> = BTreeMap::new();
    for field in ["ODD.roadway_type", "ODD.intersection", "ODD.signage", "ODD.traffic_signal"] {
        series.insert(field, vec![None; n]);
    }
    for i in 0..n {
        let p = ego.positions[i];
        let road = lt.lanes[i].as_ref().map(|l| l.road_id.as_str());
        if let Some(r) = road.and_then(|id| map.road(id)) {
            series.get_mut("ODD.roadway_type").unwrap()[i] = Some(r.roadway_type.as_str().to_string());
        }
        if let Some(j) = map
            .junctions
            .iter()
            .filter(|j| j.center.dist(p) <= j.radius + cfg.junction_buffer)
            .min_by(|a, b| a.center.dist(p).total_cmp(&b.center.dist(p)))
        {
            series.get_mut("ODD.intersection").unwrap()[i] = Some(format!("{}-way", j.arity));
        }
        let leaving = map
            .junction_distance(p.x, p.y)
            .is_some_and(|(j, _)| {
                let dir = Point::new(ego.headings[i].cos(), ego.headings[i].sin());
                j.center.sub(p).dot(dir) < 0.0
            });
        let applies = |applies_to: &str, pos: Point| {
            !leaving && road.map_or(true, |r| r == applies_to) && pos.dist(p) <= cfg.signage_radius
        };
        if let Some(s) = map
            .signage
            .iter()
            .filter(|s| applies(&s.applies_to, s.position))
            .min_by(|a, b| a.position.dist(p).total_cmp(&b.position.dist(p)))
        {
            series.get_mut("ODD.signage").unwrap()[i] = Some(s.kind.as_str().to_string());
        }
        if let Some(state) = map
            .signals
            .iter()
            .filter(|s| applies(&s.applies_to, s.position))
            .min_by(|a, b| a.position.dist(p).total_cmp(&b.position.dist(p)))
            .and_then(|s| s.state_at(ego.times[i]))
        {
            series.get_mut("ODD.traffic_signal").unwrap()[i] = Some(state.as_str().to_string());
        }
    }
    let mut out = Vec::new();
    for (field, values) in series {
        let mut i = 0;
        while i < n {
            let Some(v) = &values[i] else {
                i += 1;
                continue;
            };
            let mut j = i;
            while j + 1 < n && values[j + 1].as_ref() == Some(v) {
                j += 1;
            }
            if ego.times[j] > ego.times[i] {
                out.push(MetadataRecord::new(&rec.recording_id, ego.times[i], ego.times[j], field, v.as_str()));
            }
            i = j + 1;
        }
    }
    out
}

pub fn tags_to_jsonl(tags: &[EventTag]) -> String {
    let mut s = String::new();
    for t in tags {
        s.push_str(&serde_json::to_string(t).expect("tag serializes"));
        s.push('\n');
    }
    s
}

pub fn tags_from_jsonl(text: &str) -> Result<Vec<EventTag>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

// ---------------------------------------------------------------- evaluation

pub fn temporal_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    if union <= 0.0 {
        if a == b {
            1.0
        } else {
            0.0
        }
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagEvalReport {
    pub iou_min: f64,
    pub per_kind: BTreeMap<EventKind, KindMetrics>,
}

impl TagEvalReport {
    pub fn get(&self, kind: EventKind) -> Option<&KindMetrics> {
        self.per_kind.get(&kind)
    }
}

/// Greedy one-to-one matching by descending temporal IoU among tags that
/// share recording, actor and kind.
pub fn evaluate_tagger(predicted: &[EventTag], truth: &[EventTag], iou_min: f64) -> TagEvalReport {
    let mut pairs = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            if p.kind == t.kind && p.actor_id == t.actor_id && p.recording_id == t.recording_id {
                let iou = temporal_iou((p.t_start, p.t_end), (t.t_start, t.t_end));
                if iou >= iou_min {
                    pairs.push((iou, i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_t = vec![false; truth.len()];
    let mut tp: BTreeMap<EventKind, usize> = BTreeMap::new();
    for (_, i, j) in pairs {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            *tp.entry(predicted[i].kind).or_default() += 1;
        }
    }
    let mut per_kind = BTreeMap::new();
    for kind in EventKind::ALL {
        let n_pred = predicted.iter().filter(|t| t.kind == kind).count();
        let n_truth = truth.iter().filter(|t| t.kind == kind).count();
        if n_pred == 0 && n_truth == 0 {
            continue;
        }
        let hits = tp.get(&kind).copied().unwrap_or(0);
        let precision = if n_pred == 0 { 1.0 } else { hits as f64 / n_pred as f64 };
        let recall = if n_truth == 0 { 1.0 } else { hits as f64 / n_truth as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_kind.insert(
            kind,
            KindMetrics {
                true_positives: hits,
                false_positives: n_pred - hits,
                false_negatives: n_truth - hits,
                precision,
                recall,
                f1,
            },
        );
    }
    TagEvalReport { iou_min, per_kind }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_and_merging() {
        let mask = [false, true, true, false, true, false, false, false, true];
        assert_eq!(runs(&mask), vec![(1, 2), (4, 4), (8, 8)]);
        let times: Vec<f64> = (0..9).map(|i| i as f64 * 0.5).collect();
        assert_eq!(merge_runs(runs(&mask), &times, 1.1), vec![(1, 4), (8, 8)]);
    }

    #[test]
    fn iou_basics() {
        assert_eq!(temporal_iou((0.0, 2.0), (1.0, 3.0)), 1.0 / 3.0);
        assert_eq!(temporal_iou((0.0, 1.0), (2.0, 3.0)), 0.0);
        assert_eq!(temporal_iou((0.0, 1.0), (0.0, 1.0)), 1.0);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(EventKind::parse(k.as_str()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.as_str()));
        }
    }

    #[test]
    fn spurious_tag_lowers_precision() {
        let truth: Vec<EventTag> = (0..5)
            .map(|i| EventTag::new("r", "ego", EventKind::TurnLeft, i as f64 * 10.0, i as f64 * 10.0 + 4.0))
            .collect();
        let mut pred = truth.clone();
        pred.push(EventTag::new("r", "ego", EventKind::TurnLeft, 100.0, 104.0));
        let rep = evaluate_tagger(&pred, &truth, 0.5);
        let m = rep.get(EventKind::TurnLeft).unwrap();
        assert!((m.precision - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(m.recall, 1.0);
    }
}
