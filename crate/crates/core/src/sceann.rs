//! Time-to-collision safety scoring: per-pair TTC, per-scene labels and a
//! scenario-level verdict.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geom::{normalize_angle, Point};
use crate::par::Execution;
use crate::real2sim::{Replay, ScenarioDocument};
use crate::recording::{ActorState, Frame, Recording};

/// Smallest `t >= 0` with `|dp + t*dv| = radius_sum`, where `dp`, `dv` are the
/// position and velocity of `b` relative to `a`. Zero when the footprints
/// already touch, infinite when they never will.
pub fn compute_ttc(a: &ActorState, b: &ActorState, radius_sum: f64) -> f64 {
    ttc_relative(b.position().sub(a.position()), b.velocity().sub(a.velocity()), radius_sum)
}

pub fn ttc_relative(dp: Point, dv: Point, radius_sum: f64) -> f64 {
    let c = dp.dot(dp) - radius_sum * radius_sum;
    if c <= 0.0 {
        return 0.0;
    }
    let a = dv.dot(dv);
    let half_b = dp.dot(dv);
    if a == 0.0 || half_b >= 0.0 {
        return f64::INFINITY;
    }
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    // smaller root of a t^2 + 2 half_b t + c, in the cancellation-free form
    c / (-half_b + disc.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairScope {
    #[default]
    EgoVsAll,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SafetyLabel {
    Safe,
    Unsafe,
}

fn ser_ttc<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_ttc<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionScore {
    pub t: f64,
    pub actor_a: String,
    pub actor_b: String,
    /// Seconds; `null` in JSON when infinite.
    #[serde(serialize_with = "ser_ttc", deserialize_with = "de_ttc")]
    pub ttc: f64,
    pub label: SafetyLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    pub ttc_threshold: f64,
    pub hard_floor: f64,
    pub fraction_max: f64,
    pub pair_scope: PairScope,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            ttc_threshold: 1.5,
            hard_floor: 0.5,
            fraction_max: 0.1,
            pair_scope: PairScope::EgoVsAll,
        }
    }
}

/// Scores every in-scope pair of one frame. Ego pairs put the ego first.
pub fn classify_scene(frame: &Frame, ttc_threshold: f64, scope: PairScope) -> Vec<InteractionScore> {
    let score = |a: &ActorState, b: &ActorState| {
        let ttc = compute_ttc(a, b, a.half_diagonal() + b.half_diagonal());
        InteractionScore {
            t: frame.t,
            actor_a: a.actor_id.clone(),
            actor_b: b.actor_id.clone(),
            ttc,
            label: if ttc < ttc_threshold { SafetyLabel::Unsafe } else { SafetyLabel::Safe },
        }
    };
    match scope {
        PairScope::EgoVsAll => match frame.ego() {
            Some(ego) => frame
                .actors
                .iter()
                .filter(|o| !o.is_ego)
                .map(|o| score(ego, o))
                .collect(),
            None => Vec::new(),
        },
        PairScope::AllPairs => {
            let mut actors: Vec<&ActorState> = frame.actors.iter().collect();
            actors.sort_by_key(|a| !a.is_ego);
            let mut out = Vec::new();
            for i in 0..actors.len() {
                for j in i + 1..actors.len() {
                    out.push(score(actors[i], actors[j]));
                }
            }
            out
        }
    }
}

pub fn score_recording(rec: &Recording, cfg: &SafetyConfig, exec: Execution) -> Vec<InteractionScore> {
    exec.map(&rec.frames, |f| classify_scene(f, cfg.ttc_threshold, cfg.pair_scope))
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub actor_a: String,
    pub actor_b: String,
    pub frames: usize,
    pub unsafe_frames: usize,
    #[serde(serialize_with = "ser_ttc", deserialize_with = "de_ttc")]
    pub min_ttc: f64,
    pub unsafe_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSafetyReport {
    pub scenario: String,
    pub config: SafetyConfig,
    pub pairs: Vec<PairSummary>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    pub series: Vec<InteractionScore>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SafetyError {
    #[error("no interaction scores to aggregate")]
    EmptySeries,
}

pub fn aggregate_safety(scenario: &str, scores: &[InteractionScore], cfg: &SafetyConfig) -> Result<ScenarioSafetyReport, SafetyError> {
    if scores.is_empty() {
        return Err(SafetyError::EmptySeries);
    }
    let mut by_pair: BTreeMap<(&str, &str), PairSummary> = BTreeMap::new();
    for s in scores {
        let p = by_pair.entry((&s.actor_a, &s.actor_b)).or_insert_with(|| PairSummary {
            actor_a: s.actor_a.clone(),
            actor_b: s.actor_b.clone(),
            frames: 0,
            unsafe_frames: 0,
            min_ttc: f64::INFINITY,
            unsafe_fraction: 0.0,
        });
        p.frames += 1;
        p.unsafe_frames += (s.label == SafetyLabel::Unsafe) as usize;
        p.min_ttc = p.min_ttc.min(s.ttc);
    }
    let mut pairs: Vec<PairSummary> = by_pair.into_values().collect();
    let mut reasons = Vec::new();
    for p in &mut pairs {
        p.unsafe_fraction = p.unsafe_frames as f64 / p.frames as f64;
        if p.unsafe_fraction > cfg.fraction_max {
            reasons.push(format!(
                "{}-{}: unsafe in {:.1}% of frames (max {:.1}%)",
                p.actor_a,
                p.actor_b,
                p.unsafe_fraction * 100.0,
                cfg.fraction_max * 100.0
            ));
        }
        if p.min_ttc < cfg.hard_floor {
            reasons.push(format!("{}-{}: min TTC {:.3} s below floor {} s", p.actor_a, p.actor_b, p.min_ttc, cfg.hard_floor));
        }
    }
    Ok(ScenarioSafetyReport {
        scenario: scenario.to_string(),
        config: *cfg,
        pairs,
        verdict: if reasons.is_empty() { Verdict::Pass } else { Verdict::Fail },
        reasons,
        series: scores.to_vec(),
    })
}

pub fn analyze_recording(rec: &Recording, cfg: &SafetyConfig, exec: Execution) -> Result<ScenarioSafetyReport, SafetyError> {
    aggregate_safety(&rec.recording_id, &score_recording(rec, cfg, exec), cfg)
}

/// Turns replayed poses into frames. Speed and heading of motion come from
/// central differences of the sampled positions; an entity that does not
/// move keeps its pose heading and zero speed.
pub fn replay_frames(doc: &ScenarioDocument, replay: &Replay) -> Vec<Frame> {
    let n = replay.times.len();
    (0..n)
        .map(|k| {
            let actors = doc
                .entities
                .iter()
                .filter_map(|e| {
                    let poses = replay.poses.get(&e.name)?;
                    let (lo, hi) = (k.saturating_sub(1), (k + 1).min(n - 1));
                    let dt = replay.times[hi] - replay.times[lo];
                    let (dx, dy) = (poses[hi].0 - poses[lo].0, poses[hi].1 - poses[lo].1);
                    let speed = if dt > 0.0 { dx.hypot(dy) / dt } else { 0.0 };
                    let heading = if speed > 1e-9 { dy.atan2(dx) } else { poses[k].2 };
                    Some(ActorState {
                        actor_id: e.name.clone(),
                        actor_class: e.actor_class,
                        x: poses[k].0,
                        y: poses[k].1,
                        heading: normalize_angle(heading),
                        speed,
                        length: e.length,
                        width: e.width,
                        is_ego: e.name == crate::real2sim::EGO_NAME,
                    })
                })
                .collect();
            Frame { t: replay.times[k], actors }
        })
        .collect()
}

pub fn analyze_scenario(doc: &ScenarioDocument, replay: &Replay, cfg: &SafetyConfig, exec: Execution) -> Result<ScenarioSafetyReport, SafetyError> {
    let frames = replay_frames(doc, replay);
    let scores: Vec<InteractionScore> = exec
        .map(&frames, |f| classify_scene(f, cfg.ttc_threshold, cfg.pair_scope))
        .into_iter()
        .flatten()
        .collect();
    aggregate_safety(&doc.description, &scores, cfg)
}

pub fn scores_csv(scores: &[InteractionScore]) -> String {
    let mut out = String::from("t,actor_a,actor_b,ttc,label\n");
    for s in scores {
        let ttc = if s.ttc.is_finite() { format!("{:.6}", s.ttc) } else { "inf".to_string() };
        let label = if s.label == SafetyLabel::Safe { "safe" } else { "unsafe" };
        let _ = writeln!(out, "{:.3},{},{},{},{}", s.t, s.actor_a, s.actor_b, ttc, label);
    }
    out
}
