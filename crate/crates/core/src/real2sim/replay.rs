//! Fixed-step kinematic replay of a scenario document.
//!
//! Each tick: poses are computed from the events fired so far, every pending
//! start trigger is evaluated against those poses, newly fired events start
//! at this tick. An entity with no running event holds its initial pose.

use std::collections::BTreeMap;

use super::{Event, ScenarioDocument, ScenarioError, TimeDomain, TriggerCondition, TICK};

pub type Pose = (f64, f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub times: Vec<f64>,
    /// Entity name → pose per tick.
    pub poses: BTreeMap<String, Vec<Pose>>,
    /// Event name → simulation time it started.
    pub fired: BTreeMap<String, f64>,
    init: BTreeMap<String, Pose>,
    events: Vec<Event>,
}

impl Replay {
    /// Pose of `entity` at an arbitrary time under the recorded firing times.
    pub fn pose_at(&self, entity: &str, t: f64) -> Option<Pose> {
        let init = *self.init.get(entity)?;
        Some(pose_with(&self.events, &self.fired, &init, entity, t))
    }
}

fn pose_with(events: &[Event], fired: &BTreeMap<String, f64>, init: &Pose, entity: &str, t: f64) -> Pose {
    let running = events
        .iter()
        .filter(|e| e.action.entity == entity)
        .filter_map(|e| fired.get(&e.name).map(|&ft| (ft, e)))
        .filter(|(ft, _)| *ft <= t + 1e-9)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match running {
        None => *init,
        Some((ft, e)) => match e.action.domain {
            TimeDomain::Absolute => e.action.pose(t),
            TimeDomain::Relative => e.action.pose(t - ft),
        },
    }
}

pub fn replay_scenario(doc: &ScenarioDocument) -> Result<Replay, ScenarioError> {
    doc.validate()?;
    let mut init = BTreeMap::new();
    for e in &doc.entities {
        let p = doc.init.iter().find(|i| i.entity == e.name);
        let pose = match p {
            Some(i) => (
                i.x.resolve(&doc.parameters).unwrap_or(0.0),
                i.y.resolve(&doc.parameters).unwrap_or(0.0),
                i.heading.resolve(&doc.parameters).unwrap_or(0.0),
            ),
            None => (0.0, 0.0, 0.0),
        };
        init.insert(e.name.clone(), pose);
    }
    let events: Vec<Event> = doc.events().cloned().collect();
    let n = (doc.stop_time / TICK - 1e-6).ceil().max(0.0) as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * TICK).collect();
    let mut fired: BTreeMap<String, f64> = BTreeMap::new();
    let mut poses: BTreeMap<String, Vec<Pose>> = init.keys().map(|k| (k.clone(), Vec::new())).collect();
    for &t in &times {
        let current: BTreeMap<&str, Pose> = init
            .iter()
            .map(|(name, p)| (name.as_str(), pose_with(&events, &fired, p, name, t)))
            .collect();
        let mut newly = Vec::new();
        for e in &events {
            if fired.contains_key(&e.name) {
                continue;
            }
            let go = match &e.start {
                TriggerCondition::SimulationTime { t: at, rule } => rule.holds(t + 1e-9 * rule_bias(*rule), *at),
                TriggerCondition::RelativeDistance { entity_a, entity_b, threshold, rule } => {
                    match (current.get(entity_a.as_str()), current.get(entity_b.as_str())) {
                        (Some(a), Some(b)) => rule.holds((a.0 - b.0).hypot(a.1 - b.1), *threshold),
                        _ => false,
                    }
                }
            };
            if go {
                newly.push(e.name.clone());
            }
        }
        for name in newly {
            fired.insert(name, t);
        }
        for (name, p) in &init {
            poses.get_mut(name).unwrap().push(pose_with(&events, &fired, p, name, t));
        }
    }
    Ok(Replay {
        times,
        poses,
        fired,
        init,
        events,
    })
}

/// Tick times are multiples of 0.1 with rounding noise; nudge toward firing
/// for inclusive rules so `t >= 2.0` holds at the tick labeled 2.0.
fn rule_bias(rule: super::Rule) -> f64 {
    match rule {
        super::Rule::GreaterOrEqual => 1.0,
        super::Rule::LessOrEqual => -1.0,
        _ => 0.0,
    }
}
