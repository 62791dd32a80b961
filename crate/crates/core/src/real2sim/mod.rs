//! Digital twins: scenario documents built from recorded segments, their
//! OpenSCENARIO 1.1 form, kinematic replay and twin-fidelity metrics.

pub mod fidelity;
pub mod replay;
pub mod xosc;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::{interp, normalize_angle, unwrap_angles};
use crate::index::ScenarioSegment;
use crate::recording::{ActorClass, Recording};

pub use fidelity::{
    f1_labels, fidelity_static, fidelity_tracking, iou_boxes, jaccard, mota_from_counts, Aabb, FidelityReport,
    MotaBreakdown, OccupancyGrid, StaticScene, TrackedObject,
};
pub use replay::{replay_scenario, Replay};
pub use xosc::{read_openscenario, read_openscenario_str, scenario_xml, validate_structure, write_openscenario};

/// Replay and export sampling interval.
pub const TICK: f64 = 0.1;

pub const EGO_NAME: &str = "Ego";

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("segment [{0}, {1}] holds no frames")]
    EmptySegment(f64, f64),
    #[error("segment belongs to '{segment}', recording is '{recording}'")]
    WrongRecording { segment: String, recording: String },
    #[error("ego actor '{0}' has fewer than 2 frames in the segment")]
    EgoTooShort(String),
    #[error("no actor has 2 or more frames in the segment")]
    NoActors,
    #[error("unknown entity '{0}'")]
    UnknownEntity(String),
    #[error("unknown event '{0}'")]
    UnknownEvent(String),
    #[error("trigger threshold must be > 0, got {0}")]
    BadThreshold(f64),
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Xml(#[from] crate::xml::XmlError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A literal or a `$name` parameter reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scalar {
    Value(f64),
    Param(String),
}

impl Scalar {
    pub fn resolve(&self, params: &[ParameterDecl]) -> Option<f64> {
        match self {
            Scalar::Value(v) => Some(*v),
            Scalar::Param(name) => params.iter().find(|p| &p.name == name).map(|p| p.value),
        }
    }

    pub fn to_attr(&self) -> String {
        match self {
            Scalar::Value(v) => format!("{v}"),
            Scalar::Param(p) => format!("${p}"),
        }
    }

    pub fn from_attr(s: &str) -> Option<Scalar> {
        match s.strip_prefix('$') {
            Some(p) if !p.is_empty() => Some(Scalar::Param(p.to_string())),
            Some(_) => None,
            None => s.trim().parse().ok().map(Scalar::Value),
        }
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDecl {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub name: String,
    pub actor_class: ActorClass,
    pub length: f64,
    pub width: f64,
    /// Actor id in the source recording.
    pub source_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitPose {
    pub entity: String,
    pub x: Scalar,
    pub y: Scalar,
    pub heading: Scalar,
    pub speed: Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    LessThan,
    GreaterThan,
    LessOrEqual,
    GreaterOrEqual,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::LessThan => "lessThan",
            Rule::GreaterThan => "greaterThan",
            Rule::LessOrEqual => "lessOrEqual",
            Rule::GreaterOrEqual => "greaterOrEqual",
        }
    }

    pub fn parse(s: &str) -> Option<Rule> {
        Some(match s {
            "lessThan" | "<" => Rule::LessThan,
            "greaterThan" | ">" => Rule::GreaterThan,
            "lessOrEqual" | "<=" => Rule::LessOrEqual,
            "greaterOrEqual" | ">=" => Rule::GreaterOrEqual,
            _ => return None,
        })
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Rule::LessThan => lhs < rhs,
            Rule::GreaterThan => lhs > rhs,
            Rule::LessOrEqual => lhs <= rhs,
            Rule::GreaterOrEqual => lhs >= rhs,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TriggerCondition {
    SimulationTime {
        t: f64,
        rule: Rule,
    },
    /// Center distance between `entity_a` (triggering) and `entity_b`.
    RelativeDistance {
        entity_a: String,
        entity_b: String,
        threshold: f64,
        rule: Rule,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeDomain {
    /// Vertex times are simulation times.
    Absolute,
    /// Vertex times count from the moment the event starts.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Position-time polyline following.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryAction {
    pub name: String,
    pub entity: String,
    pub domain: TimeDomain,
    pub vertices: Vec<Vertex>,
}

impl TrajectoryAction {
    /// Pose at trajectory time `t`, clamped to the first/last vertex.
    pub fn pose(&self, t: f64) -> (f64, f64, f64) {
        let v = &self.vertices;
        if t <= v[0].t {
            return (v[0].x, v[0].y, v[0].heading);
        }
        let last = v[v.len() - 1];
        if t >= last.t {
            return (last.x, last.y, last.heading);
        }
        let i = v.partition_point(|p| p.t <= t);
        let (a, b) = (v[i - 1], v[i]);
        let u = (t - a.t) / (b.t - a.t);
        let h = a.heading + normalize_angle(b.heading - a.heading) * u;
        (a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u, normalize_angle(h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub name: String,
    pub action: TrajectoryAction,
    pub start: TriggerCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub name: String,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManeuverGroup {
    pub name: String,
    pub actor: String,
    pub maneuvers: Vec<Maneuver>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Act {
    pub name: String,
    pub groups: Vec<ManeuverGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Story {
    pub name: String,
    pub acts: Vec<Act>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub description: String,
    pub map_ref: String,
    pub parameters: Vec<ParameterDecl>,
    pub entities: Vec<Entity>,
    pub init: Vec<InitPose>,
    pub stories: Vec<Story>,
    pub stop_time: f64,
}

impl ScenarioDocument {
    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.name == name)
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.stories
            .iter()
            .flat_map(|s| &s.acts)
            .flat_map(|a| &a.groups)
            .flat_map(|g| &g.maneuvers)
            .flat_map(|m| &m.events)
    }

    fn events_mut(&mut self) -> impl Iterator<Item = &mut Event> {
        self.stories
            .iter_mut()
            .flat_map(|s| &mut s.acts)
            .flat_map(|a| &mut a.groups)
            .flat_map(|g| &mut g.maneuvers)
            .flat_map(|m| &mut m.events)
    }

    pub fn groups(&self) -> impl Iterator<Item = &ManeuverGroup> {
        self.stories.iter().flat_map(|s| &s.acts).flat_map(|a| &a.groups)
    }

    /// Referential and structural checks.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        let mut names = std::collections::BTreeSet::new();
        for e in &self.entities {
            if !names.insert(e.name.as_str()) {
                return bad(format!("duplicate entity '{}'", e.name));
            }
        }
        for g in self.groups() {
            if !names.contains(g.actor.as_str()) {
                return bad(format!("maneuver group '{}' references undeclared entity '{}'", g.name, g.actor));
            }
        }
        for i in &self.init {
            if !names.contains(i.entity.as_str()) {
                return bad(format!("init references undeclared entity '{}'", i.entity));
            }
            for s in [&i.x, &i.y, &i.heading, &i.speed] {
                if s.resolve(&self.parameters).is_none() {
                    return bad(format!("undeclared parameter {}", s.to_attr()));
                }
            }
        }
        for ev in self.events() {
            if !names.contains(ev.action.entity.as_str()) {
                return bad(format!("event '{}' moves undeclared entity '{}'", ev.name, ev.action.entity));
            }
            if ev.action.vertices.is_empty() {
                return bad(format!("event '{}' has an empty trajectory", ev.name));
            }
            if ev.action.vertices.windows(2).any(|w| w[1].t <= w[0].t) {
                return bad(format!("event '{}': vertex times not strictly increasing", ev.name));
            }
            if let TriggerCondition::RelativeDistance { entity_a, entity_b, threshold, .. } = &ev.start {
                if *threshold <= 0.0 {
                    return Err(ScenarioError::BadThreshold(*threshold));
                }
                for e in [entity_a, entity_b] {
                    if !names.contains(e.as_str()) {
                        return bad(format!("trigger of '{}' references undeclared entity '{e}'", ev.name));
                    }
                }
            }
        }
        Ok(())
    }
}

fn sanitize_name(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "actor".to_string()
    } else {
        s
    }
}

/// Builds the digital twin of `segment`: one entity and one maneuver group per
/// actor with at least two frames in the segment, trajectories resampled on
/// the 10 Hz segment grid (plus the exact first/last observation), times
/// rebased to the segment start.
pub fn build_scenario(rec: &Recording, segment: &ScenarioSegment, map_ref: &str) -> Result<ScenarioDocument, ScenarioError> {
    if segment.recording_id != rec.recording_id {
        return Err(ScenarioError::WrongRecording {
            segment: segment.recording_id.clone(),
            recording: rec.recording_id.clone(),
        });
    }
    let (t0, t1) = (segment.t_start, segment.t_end);
    let inside = |t: f64| t >= t0 - 1e-9 && t <= t1 + 1e-9;
    if !rec.frames.iter().any(|f| inside(f.t)) {
        return Err(ScenarioError::EmptySegment(t0, t1));
    }
    let ego_id = rec.ego_id().map(str::to_string);
    let mut entities = Vec::new();
    let mut init = Vec::new();
    let mut groups = Vec::new();
    let mut taken = std::collections::BTreeSet::from([EGO_NAME.to_string()]);
    let mut ids = rec.actor_ids();
    // ego first
    ids.sort_by_key(|id| Some(id) != ego_id.as_ref());
    for id in ids {
        let Some(track) = rec.track(&id) else { continue };
        let keep: Vec<usize> = (0..track.len()).filter(|&i| inside(track.times[i])).collect();
        let is_ego = Some(&id) == ego_id.as_ref();
        if keep.len() < 2 {
            if is_ego {
                return Err(ScenarioError::EgoTooShort(id));
            }
            log::warn!("actor '{id}' has {} frame(s) in segment; dropped", keep.len());
            continue;
        }
        let times: Vec<f64> = keep.iter().map(|&i| track.times[i] - t0).collect();
        let xs: Vec<f64> = keep.iter().map(|&i| track.positions[i].x).collect();
        let ys: Vec<f64> = keep.iter().map(|&i| track.positions[i].y).collect();
        let hs = unwrap_angles(&keep.iter().map(|&i| track.headings[i]).collect::<Vec<_>>());
        let (first, last) = (times[0], times[times.len() - 1]);
        let mut grid: Vec<f64> = Vec::new();
        let k0 = (first / TICK - 1e-6).ceil() as i64;
        let k1 = (last / TICK + 1e-6).floor() as i64;
        if (k0 as f64 * TICK - first).abs() > 1e-6 {
            grid.push(first);
        }
        for k in k0..=k1 {
            grid.push(k as f64 * TICK);
        }
        if (k1 as f64 * TICK - last).abs() > 1e-6 {
            grid.push(last);
        }
        let vertices: Vec<Vertex> = grid
            .iter()
            .map(|&t| Vertex {
                t,
                x: interp(&times, &xs, t),
                y: interp(&times, &ys, t),
                heading: normalize_angle(interp(&times, &hs, t)),
            })
            .collect();
        let name = if is_ego {
            EGO_NAME.to_string()
        } else {
            let mut n = sanitize_name(&id);
            while taken.contains(&n) {
                n.push('_');
            }
            n
        };
        taken.insert(name.clone());
        entities.push(Entity {
            name: name.clone(),
            actor_class: track.actor_class,
            length: track.length,
            width: track.width,
            source_id: id.clone(),
        });
        let v0 = vertices[0];
        init.push(InitPose {
            entity: name.clone(),
            x: v0.x.into(),
            y: v0.y.into(),
            heading: v0.heading.into(),
            speed: track.speeds[keep[0]].into(),
        });
        // start on the tick at or before the first observation; before the
        // first vertex the trajectory holds its first pose
        let start_tick = (first / TICK + 1e-6).floor() * TICK;
        groups.push(ManeuverGroup {
            name: format!("{name}Group"),
            actor: name.clone(),
            maneuvers: vec![Maneuver {
                name: format!("{name}Maneuver"),
                events: vec![Event {
                    name: format!("{name}Event"),
                    action: TrajectoryAction {
                        name: format!("{name}Trajectory"),
                        entity: name.clone(),
                        domain: TimeDomain::Absolute,
                        vertices,
                    },
                    start: TriggerCondition::SimulationTime {
                        t: start_tick.max(0.0),
                        rule: Rule::GreaterOrEqual,
                    },
                }],
            }],
        });
    }
    if entities.is_empty() {
        return Err(ScenarioError::NoActors);
    }
    let doc = ScenarioDocument {
        description: format!("{} [{t0}, {t1}]", rec.recording_id),
        map_ref: map_ref.to_string(),
        parameters: Vec::new(),
        entities,
        init,
        stories: vec![Story {
            name: "Story".to_string(),
            acts: vec![Act {
                name: "Act".to_string(),
                groups,
            }],
        }],
        stop_time: t1 - t0,
    };
    doc.validate()?;
    Ok(doc)
}

/// Makes `event` start when the distance from the ego to `entity` satisfies
/// `rule` against `distance`. The event's trajectory switches to relative
/// timing so it plays from the moment the trigger fires.
pub fn add_relative_distance_trigger(
    mut doc: ScenarioDocument,
    entity: &str,
    distance: f64,
    rule: Rule,
    event: &str,
) -> Result<ScenarioDocument, ScenarioError> {
    if !(distance > 0.0) {
        return Err(ScenarioError::BadThreshold(distance));
    }
    if doc.entity(entity).is_none() {
        return Err(ScenarioError::UnknownEntity(entity.to_string()));
    }
    if doc.entity(EGO_NAME).is_none() {
        return Err(ScenarioError::UnknownEntity(EGO_NAME.to_string()));
    }
    let ev = doc
        .events_mut()
        .find(|e| e.name == event)
        .ok_or_else(|| ScenarioError::UnknownEvent(event.to_string()))?;
    ev.start = TriggerCondition::RelativeDistance {
        entity_a: EGO_NAME.to_string(),
        entity_b: entity.to_string(),
        threshold: distance,
        rule,
    };
    if ev.action.domain == TimeDomain::Absolute {
        let t0 = ev.action.vertices[0].t;
        ev.action.vertices.iter_mut().for_each(|v| v.t -= t0);
        ev.action.domain = TimeDomain::Relative;
    }
    doc.validate()?;
    Ok(doc)
}
