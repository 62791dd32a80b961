//! Synthetic drives and fixtures: bulk corpora for throughput runs, scripted
//! scenarios with known ground truth for tagger, search and safety checks.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geom::{normalize_angle, Point};
use crate::map::{
    Junction, Lane, MapModel, Road, RoadwayType, SignFeature, SignKind, SignalFeature, SignalPhase,
    SignalState,
};
use crate::recording::{write_recording_file, ActorClass, ActorState, Frame, Recording};

/// Path primitive, consumed in order along arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Straight(f64),
    /// Signed angle: positive turns left.
    Arc { radius: f64, angle: f64 },
    /// Half-cosine lateral shift over `length` meters of forward travel;
    /// positive `lateral` moves left.
    LaneShift { length: f64, lateral: f64 },
}

impl Segment {
    fn length(&self) -> f64 {
        match *self {
            Segment::Straight(l) => l,
            Segment::Arc { radius, angle } => radius * angle.abs(),
            Segment::LaneShift { length, .. } => length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub start: Point,
    pub heading: f64,
    pub segments: Vec<Segment>,
}

impl PathSpec {
    pub fn new(start: Point, heading: f64) -> Self {
        PathSpec {
            start,
            heading,
            segments: Vec::new(),
        }
    }

    pub fn then(mut self, s: Segment) -> Self {
        self.segments.push(s);
        self
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Pose at progress `s` (beyond the end the last heading is extended).
    /// Returns position, heading and the ratio of true path speed to
    /// progress rate (above 1 only inside lane shifts).
    pub fn pose_at(&self, s: f64) -> (Point, f64, f64) {
        let mut p = self.start;
        let mut h = self.heading;
        let mut rem = s.max(0.0);
        for seg in &self.segments {
            let len = seg.length();
            let take = rem.min(len);
            let dir = Point::new(h.cos(), h.sin());
            let left = Point::new(-h.sin(), h.cos());
            match *seg {
                Segment::Straight(_) => {
                    if rem <= len {
                        return (p.add(dir.scale(take)), h, 1.0);
                    }
                    p = p.add(dir.scale(len));
                }
                Segment::Arc { radius, angle } => {
                    let sign = angle.signum();
                    let center = p.add(left.scale(sign * radius));
                    let phi = take / radius * sign;
                    let pos = center.add(p.sub(center).rotate(phi));
                    if rem <= len {
                        return (pos, h + phi, 1.0);
                    }
                    p = pos;
                    h += angle;
                }
                Segment::LaneShift { length, lateral } => {
                    let u = take / length;
                    let off = lateral * (1.0 - (PI * u).cos()) / 2.0;
                    let slope = lateral * PI / (2.0 * length) * (PI * u).sin();
                    let pos = p.add(dir.scale(take)).add(left.scale(off));
                    if rem <= len {
                        return (pos, h + slope.atan(), slope.hypot(1.0));
                    }
                    p = p.add(dir.scale(length)).add(left.scale(lateral));
                }
            }
            rem -= len;
        }
        let dir = Point::new(h.cos(), h.sin());
        (p.add(dir.scale(rem)), h, 1.0)
    }
}

/// Forward progress rate over time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedProfile {
    Constant(f64),
    /// Hold `v0`, then change speed at `accel` (signed) from `t_change` until
    /// reaching `v1`.
    Ramp { v0: f64, v1: f64, accel: f64, t_change: f64 },
}

impl SpeedProfile {
    pub fn speed(&self, t: f64) -> f64 {
        match *self {
            SpeedProfile::Constant(v) => v,
            SpeedProfile::Ramp { v0, v1, accel, t_change } => {
                if t <= t_change {
                    v0
                } else {
                    let v = v0 + accel * (t - t_change);
                    if accel < 0.0 {
                        v.max(v1)
                    } else {
                        v.min(v1)
                    }
                }
            }
        }
    }

    /// Distance covered since t = 0.
    pub fn distance(&self, t: f64) -> f64 {
        match *self {
            SpeedProfile::Constant(v) => v * t,
            SpeedProfile::Ramp { v0, v1, accel, t_change } => {
                if t <= t_change {
                    return v0 * t;
                }
                let t_ramp = ((v1 - v0) / accel).max(0.0);
                let dt = t - t_change;
                if dt <= t_ramp {
                    v0 * t_change + v0 * dt + 0.5 * accel * dt * dt
                } else {
                    v0 * t_change + v0 * t_ramp + 0.5 * accel * t_ramp * t_ramp + v1 * (dt - t_ramp)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorScript {
    pub id: String,
    pub class: ActorClass,
    pub is_ego: bool,
    pub path: PathSpec,
    pub speed: SpeedProfile,
    /// Present only within this time window (relative to recording start).
    pub window: Option<(f64, f64)>,
}

impl ActorScript {
    pub fn new(id: &str, is_ego: bool, path: PathSpec, speed: SpeedProfile) -> Self {
        ActorScript {
            id: id.to_string(),
            class: ActorClass::Car,
            is_ego,
            path,
            speed,
            window: None,
        }
    }

    pub fn state(&self, t: f64) -> ActorState {
        let (p, h, factor) = self.path.pose_at(self.speed.distance(t));
        let (length, width) = self.class.default_dimensions();
        ActorState {
            actor_id: self.id.clone(),
            actor_class: self.class,
            x: p.x,
            y: p.y,
            heading: normalize_angle(h),
            speed: self.speed.speed(t) * factor,
            length,
            width,
            is_ego: self.is_ego,
        }
    }
}

/// Samples scripted actors on a regular grid. Frame times are `t0 + k*dt`.
pub fn build_recording(id: &str, t0: f64, duration: f64, dt: f64, actors: &[ActorScript]) -> Recording {
    let n = (duration / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    build_recording_at(id, t0, &times, actors)
}

pub fn build_recording_at(id: &str, t0: f64, rel_times: &[f64], actors: &[ActorScript]) -> Recording {
    let frames = rel_times
        .iter()
        .map(|&t| Frame {
            t: t0 + t,
            actors: actors
                .iter()
                .filter(|a| a.window.map_or(true, |(s, e)| t >= s - 1e-9 && t <= e + 1e-9))
                .map(|a| a.state(t))
                .collect(),
        })
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert("dataset".to_string(), serde_json::Value::from("synthetic"));
    Recording::new(id, frames, meta).expect("scripted recording is valid")
}

// ---------------------------------------------------------------- turns

/// Ground truth of one synthesized turn.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnTruth {
    pub recording_id: String,
    pub actor_id: String,
    pub t_start: f64,
    pub t_end: f64,
    pub speed: f64,
    /// Signed, positive left.
    pub angle: f64,
    pub radius: f64,
}

/// Quarter-circle (or any angle) turn with straight lead-in and lead-out at
/// constant speed; returns the recording and the arc's time window.
pub fn turn_recording(
    id: &str,
    start: Point,
    heading: f64,
    speed: f64,
    radius: f64,
    angle: f64,
    lead: f64,
) -> (Recording, TurnTruth) {
    let path = PathSpec::new(start, heading)
        .then(Segment::Straight(lead))
        .then(Segment::Arc { radius, angle })
        .then(Segment::Straight(lead));
    let total = path.length();
    let ego = ActorScript::new("ego", true, path, SpeedProfile::Constant(speed));
    let rec = build_recording(id, 0.0, (total / speed * 10.0).floor() / 10.0, 0.1, &[ego]);
    let truth = TurnTruth {
        recording_id: id.to_string(),
        actor_id: "ego".to_string(),
        t_start: lead / speed,
        t_end: (lead + radius * angle.abs()) / speed,
        speed,
        angle,
        radius,
    };
    (rec, truth)
}

/// `n` single-turn recordings with randomized speed, radius and angle.
pub fn turn_corpus(n: usize, seed: u64) -> Vec<(Recording, TurnTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let speed = rng.gen_range(4.0..12.0);
            let radius = rng.gen_range(10.0..30.0);
            let mag = rng.gen_range(60.0f64..120.0).to_radians();
            let angle = if rng.gen_bool(0.5) { mag } else { -mag };
            let start = Point::new(rng.gen_range(-500.0..500.0), rng.gen_range(-500.0..500.0));
            let heading = rng.gen_range(-PI..PI);
            turn_recording(&format!("turn-{i:03}"), start, heading, speed, radius, angle, 30.0)
        })
        .collect()
}

// ---------------------------------------------------------------- bulk corpus

/// A random multi-actor drive with irregular frame spacing.
pub fn random_recording(id: &str, seed: u64, duration: f64, n_actors: usize) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actors: Vec<ActorScript> = (0..n_actors.max(1))
        .map(|i| {
            let mut path = PathSpec::new(
                Point::new(rng.gen_range(-200.0..200.0), rng.gen_range(-200.0..200.0)),
                rng.gen_range(-PI..PI),
            );
            for _ in 0..4 {
                let seg = match rng.gen_range(0..3) {
                    0 => Segment::Straight(rng.gen_range(10.0..60.0)),
                    1 => Segment::Arc {
                        radius: rng.gen_range(15.0..60.0),
                        angle: rng.gen_range(-FRAC_PI_2..FRAC_PI_2),
                    },
                    _ => Segment::LaneShift {
                        length: rng.gen_range(40.0..80.0),
                        lateral: if rng.gen_bool(0.5) { 3.5 } else { -3.5 },
                    },
                };
                path = path.then(seg);
            }
            let mut a = ActorScript::new(
                &if i == 0 { "ego".to_string() } else { format!("a{i}") },
                i == 0,
                path,
                SpeedProfile::Constant(rng.gen_range(3.0..20.0)),
            );
            if i > 0 && rng.gen_bool(0.3) {
                let s = rng.gen_range(0.0..duration / 2.0);
                a.window = Some((s, s + rng.gen_range(1.0..duration)));
            }
            a
        })
        .collect();
    let mut times = vec![0.0];
    while *times.last().unwrap() < duration {
        let last = *times.last().unwrap();
        times.push(last + rng.gen_range(0.08..0.12));
    }
    build_recording_at(id, 0.0, &times, &actors)
}

/// Writes random recordings into `dir` until about `target_bytes` are on disk.
pub fn write_corpus(dir: &Path, target_bytes: u64, seed: u64) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let per_file = (target_bytes / 16).clamp(64 * 1024, 4 * 1024 * 1024);
    let mut written = 0u64;
    let mut paths = Vec::new();
    let mut k = 0u64;
    while written < target_bytes {
        // roughly 1.2 kB per frame with 8 actors
        let want = per_file.min(target_bytes - written).max(4096);
        let duration = (want as f64 / 1200.0 / 10.0).max(1.0);
        let rec = random_recording(&format!("bulk-{seed}-{k:05}"), seed.wrapping_mul(7919).wrapping_add(k), duration, 8);
        let path = dir.join(format!("{}.jsonl", rec.recording_id));
        write_recording_file(&rec, &path)?;
        written += fs::metadata(&path)?.len();
        paths.push(path);
        k += 1;
    }
    Ok(paths)
}

// ---------------------------------------------------------------- query corpus

fn road(id: &str, from: Point, to: Point, lanes: &[i32], kind: RoadwayType) -> Road {
    Road {
        road_id: id.to_string(),
        centerline: vec![from, to],
        lanes: lanes.iter().map(|&lane_id| Lane { lane_id, width: 3.5 }).collect(),
        roadway_type: kind,
    }
}

/// Map shared by the search corpus: a freeway with an on-ramp, a signalized
/// T junction with a stop sign, and a 4-way junction.
pub fn corpus_map() -> MapModel {
    let p = Point::new;
    MapModel::new(
        vec![
            road("freeway", p(0.0, 0.0), p(3000.0, 0.0), &[-1, -2], RoadwayType::Freeway),
            road("ramp", p(200.0, -7.0), p(700.0, -7.0), &[-1], RoadwayType::FreewayRamp),
            road("a1", p(-300.0, 500.0), p(300.0, 500.0), &[1, -1], RoadwayType::Arterial),
            road("a2", p(0.0, 500.0), p(0.0, 900.0), &[1, -1], RoadwayType::Arterial),
            road("b1", p(700.0, 500.0), p(1300.0, 500.0), &[1, -1], RoadwayType::Arterial),
            road("b2", p(1000.0, 200.0), p(1000.0, 800.0), &[1, -1], RoadwayType::Arterial),
        ],
        vec![
            Junction {
                junction_id: "t1".into(),
                center: p(0.0, 500.0),
                radius: 12.0,
                arity: 3,
                roads: vec!["a1".into(), "a2".into()],
            },
            Junction {
                junction_id: "x1".into(),
                center: p(1000.0, 500.0),
                radius: 12.0,
                arity: 4,
                roads: vec!["b1".into(), "b2".into()],
            },
        ],
        vec![SignFeature {
            sign_id: "stop-a2".into(),
            kind: SignKind::Stop,
            value: None,
            position: p(-5.0, 515.0),
            applies_to: "a2".into(),
        }],
        vec![SignalFeature {
            signal_id: "tl-a2".into(),
            position: p(-5.0, 518.0),
            applies_to: "a2".into(),
            phases: vec![
                SignalPhase { state: SignalState::Red, t_start: 0.0, t_end: 40.0 },
                SignalPhase { state: SignalState::Green, t_start: 40.0, t_end: 400.0 },
            ],
        }],
    )
    .expect("corpus map is valid")
}

/// Hand-labeled answer for one query on the search corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub recording_id: String,
    pub t_start: f64,
    pub t_end: f64,
}

fn label(id: &str, t_start: f64, t_end: f64) -> LabeledSegment {
    LabeledSegment {
        recording_id: id.to_string(),
        t_start,
        t_end,
    }
}

pub const QUERY_LANE_CHANGE: &str = "event=lane_change";
pub const QUERY_STOP_RED: &str = "ODD.signage=stop & ODD.traffic_signal=red";
pub const QUERY_TURN_3WAY: &str = "ODD.intersection=3-way & turn=left||right";
pub const QUERY_MERGE: &str = "ego_vehicle_event=merge & speed>50mph & ODD.roadway_type=freeway";

pub struct SearchCorpus {
    pub map: MapModel,
    pub recordings: Vec<Recording>,
    pub labels: BTreeMap<&'static str, Vec<LabeledSegment>>,
}

/// Ten scripted drives over [`corpus_map`] with hand-labeled answers to the
/// four behavioral-competency queries.
pub fn search_corpus() -> SearchCorpus {
    let p = Point::new;
    let mut recs = Vec::new();
    let mut labels: BTreeMap<&'static str, Vec<LabeledSegment>> = BTreeMap::new();
    let c = SpeedProfile::Constant;

    // r01: ego freeway lane change from lane -2 to -1 at 25 m/s, shift over 100 m
    let path = PathSpec::new(p(50.0, -5.25), 0.0)
        .then(Segment::Straight(100.0))
        .then(Segment::LaneShift { length: 100.0, lateral: 3.5 })
        .then(Segment::Straight(200.0));
    recs.push(build_recording("r01", 0.0, 14.0, 0.1, &[ActorScript::new("ego", true, path, c(25.0))]));
    labels.entry(QUERY_LANE_CHANGE).or_default().push(label("r01", 4.0, 8.0));

    // r02: freeway cruise with a neighbor, nothing to find
    let ego = ActorScript::new("ego", true, PathSpec::new(p(50.0, -1.75), 0.0).then(Segment::Straight(600.0)), c(24.0));
    let npc = ActorScript::new("n1", false, PathSpec::new(p(80.0, -5.25), 0.0).then(Segment::Straight(600.0)), c(22.0));
    recs.push(build_recording("r02", 0.0, 12.0, 0.1, &[ego, npc]));

    // r03: left turn at the T junction, a1 eastbound onto a2 northbound
    let path = PathSpec::new(p(-150.0, 498.25), 0.0)
        .then(Segment::Straight(141.75))
        .then(Segment::Arc { radius: 10.0, angle: FRAC_PI_2 })
        .then(Segment::Straight(100.0));
    recs.push(build_recording("r03", 0.0, 30.0, 0.1, &[ActorScript::new("ego", true, path, c(8.0))]));
    let arc = 10.0 * FRAC_PI_2 / 8.0;
    labels.entry(QUERY_TURN_3WAY).or_default().push(label("r03", 141.75 / 8.0, 141.75 / 8.0 + arc));

    // r04: right turn at the T junction, a1 westbound onto a2 northbound
    let path = PathSpec::new(p(150.0, 501.75), PI)
        .then(Segment::Straight(141.75))
        .then(Segment::Arc { radius: 10.0, angle: -FRAC_PI_2 })
        .then(Segment::Straight(100.0));
    recs.push(build_recording("r04", 0.0, 30.0, 0.1, &[ActorScript::new("ego", true, path, c(8.0))]));
    labels.entry(QUERY_TURN_3WAY).or_default().push(label("r04", 141.75 / 8.0, 141.75 / 8.0 + arc));

    // r05: left turn at the 4-way junction: not a 3-way intersection
    let path = PathSpec::new(p(850.0, 498.25), 0.0)
        .then(Segment::Straight(141.75))
        .then(Segment::Arc { radius: 10.0, angle: FRAC_PI_2 })
        .then(Segment::Straight(100.0));
    recs.push(build_recording("r05", 0.0, 30.0, 0.1, &[ActorScript::new("ego", true, path, c(8.0))]));

    // r06: a2 southbound, brakes to a halt 10 m short of the stop sign while
    // the signal is red; 45 m at 10 m/s then 50 m of braking at 1 m/s^2
    let path = PathSpec::new(p(-1.75, 620.0), -FRAC_PI_2).then(Segment::Straight(300.0));
    let speed = SpeedProfile::Ramp { v0: 10.0, v1: 0.0, accel: -1.0, t_change: 4.5 };
    let r06 = build_recording("r06", 0.0, 30.0, 0.1, &[ActorScript::new("ego", true, path, speed)]);
    let near = |t: f64| {
        let ego = p(-1.75, 620.0 - speed.distance(t));
        ego.dist(p(-5.0, 515.0)) <= 30.0 && ego.dist(p(-5.0, 518.0)) <= 30.0
    };
    let inside: Vec<f64> = r06.frames.iter().map(|f| f.t).filter(|&t| near(t)).collect();
    labels
        .entry(QUERY_STOP_RED)
        .or_default()
        .push(label("r06", inside[0], *inside.last().unwrap()));
    recs.push(r06);

    // r07: fast ramp merge at 26 m/s (above 50 mph)
    let path = PathSpec::new(p(220.0, -8.75), 0.0)
        .then(Segment::Straight(100.0))
        .then(Segment::LaneShift { length: 104.0, lateral: 3.5 })
        .then(Segment::Straight(300.0));
    recs.push(build_recording("r07", 0.0, 12.0, 0.1, &[ActorScript::new("ego", true, path, c(26.0))]));
    labels.entry(QUERY_MERGE).or_default().push(label("r07", (100.0 + 52.0) / 26.0, (100.0 + 104.0) / 26.0));

    // r08: slow ramp merge at 15 m/s
    let path = PathSpec::new(p(220.0, -8.75), 0.0)
        .then(Segment::Straight(100.0))
        .then(Segment::LaneShift { length: 60.0, lateral: 3.5 })
        .then(Segment::Straight(200.0));
    recs.push(build_recording("r08", 0.0, 14.0, 0.1, &[ActorScript::new("ego", true, path, c(15.0))]));

    // r09: ego cruises while a car far ahead changes lanes
    let ego = ActorScript::new("ego", true, PathSpec::new(p(1000.0, -5.25), 0.0).then(Segment::Straight(600.0)), c(20.0));
    let npc_path = PathSpec::new(p(1150.0, -1.75), 0.0)
        .then(Segment::Straight(80.0))
        .then(Segment::LaneShift { length: 80.0, lateral: -3.5 })
        .then(Segment::Straight(300.0));
    let npc = ActorScript::new("n1", false, npc_path, c(20.0));
    recs.push(build_recording("r09", 0.0, 14.0, 0.1, &[ego, npc]));
    labels.entry(QUERY_LANE_CHANGE).or_default().push(label("r09", 4.0, 8.0));

    // r10: starts at t = 100 (signal green), turns right from a2 southbound onto a1 westbound
    let path = PathSpec::new(p(-1.75, 650.0), -FRAC_PI_2)
        .then(Segment::Straight(138.25))
        .then(Segment::Arc { radius: 10.0, angle: -FRAC_PI_2 })
        .then(Segment::Straight(100.0));
    recs.push(build_recording("r10", 100.0, 30.0, 0.1, &[ActorScript::new("ego", true, path, c(8.0))]));
    labels
        .entry(QUERY_TURN_3WAY)
        .or_default()
        .push(label("r10", 100.0 + 138.25 / 8.0, 100.0 + 138.25 / 8.0 + arc));

    SearchCorpus {
        map: corpus_map(),
        recordings: recs,
        labels,
    }
}

// ---------------------------------------------------------------- safety fixture

/// Time windows of the three-phase lane-change safety fixture.
pub const FIG16_PHASE_APPROACH: (f64, f64) = (0.0, 0.4);
pub const FIG16_PHASE_SETTLED: (f64, f64) = (3.0, 3.8);

/// Ego closes on two vehicles (ID_8 ahead, ID_9 in the left lane), changes to
/// the right lane while braking, then closes on a slow ID_12.
pub fn fig16_recording(id: &str, origin: Point) -> Recording {
    let p = |x: f64, y: f64| origin.add(Point::new(x, y));
    let ego_path = PathSpec::new(p(0.0, 0.0), 0.0)
        .then(Segment::Straight(6.75))
        .then(Segment::LaneShift { length: 20.0, lateral: -3.5 })
        .then(Segment::Straight(200.0));
    // 14 m/s braking at 4 m/s^2 to 8 m/s from t = 0; x(0.5) = 6.5
    let ego_speed = SpeedProfile::Ramp { v0: 14.0, v1: 8.0, accel: -4.0, t_change: 0.0 };
    let mut ego = ActorScript::new("ego", true, ego_path, ego_speed);
    ego.class = ActorClass::Car;
    let actors = [
        ego,
        ActorScript::new("ID_8", false, PathSpec::new(p(13.0, 0.0), 0.0).then(Segment::Straight(200.0)), SpeedProfile::Constant(8.0)),
        ActorScript::new("ID_9", false, PathSpec::new(p(11.0, 3.5), 0.0).then(Segment::Straight(200.0)), SpeedProfile::Constant(8.0)),
        ActorScript::new("ID_12", false, PathSpec::new(p(29.5, -3.5), 0.0).then(Segment::Straight(200.0)), SpeedProfile::Constant(3.0)),
    ];
    build_recording(id, 0.0, 3.8, 0.1, &actors)
}

/// Every fixture used by the end-to-end pipeline, as recordings: the search
/// corpus, the three-phase lane change, and 20 isolated turns (well away
/// from every mapped road) so there is enough to fit distributions to.
pub fn pipeline_corpus() -> (MapModel, Vec<Recording>) {
    let c = search_corpus();
    let mut recs = c.recordings;
    recs.push(fig16_recording("fig16", Point::new(5000.0, -3000.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for i in 0..20 {
        let speed = rng.gen_range(5.0..11.0);
        let radius = rng.gen_range(10.0..25.0);
        let angle = rng.gen_range(70.0f64..110.0).to_radians() * if i % 2 == 0 { 1.0 } else { -1.0 };
        let start = Point::new(-5000.0 + 400.0 * i as f64, -5000.0);
        recs.push(turn_recording(&format!("t{i:02}"), start, 0.0, speed, radius, angle, 20.0).0);
    }
    (c.map, recs)
}
