//! Scenario variation: turn parameter extraction, distribution fitting,
//! normal turning paths, logical scenarios, sampling and coverage.

pub mod coverage;
pub mod dist;
pub mod logical;
pub mod trajectory;

use serde::{Deserialize, Serialize};

use crate::geom::unwrap_angles;
use crate::real2sim::ScenarioError;
use crate::recording::Recording;
use crate::tagger::EventTag;
use crate::xml::XmlError;

pub use coverage::{compute_coverage, coverage_csv, BinCoverage, CoverageReport, ParameterSpace};
pub use dist::{fit_joint, fit_univariate, FitConfig, FitKind, Joint, JointDistribution, Univariate, UnivariateDistribution};
pub use logical::{
    bind_init_speed, declare_parameter, instantiate, sample_assignments, sample_variations, write_logical_scenario, ConcreteVariation,
    LogicalFiles, LogicalScenario, ParameterGroup, SamplingMode,
};
pub use trajectory::{learn_turn_trajectories, normalized_turn_path, AngleBuckets, TurnDirection, TurnTrajectoryModel};

#[derive(Debug, thiserror::Error)]
pub enum ScevarError {
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("bad samples: {0}")]
    BadSamples(String),
    #[error("sample {index} has {got} values, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("bad distribution: {0}")]
    BadDistribution(String),
    #[error("tag {tag} lacks attribute '{attr}'")]
    MissingAttribute { tag: String, attr: String },
    #[error("parameter '{0}' has a distribution but is not declared in the template")]
    UndeclaredParameter(String),
    #[error("template parameter '{0}' has no distribution")]
    MissingDistribution(String),
    #[error("parameter '{0}' has more than one distribution")]
    DuplicateDistribution(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnParameters {
    pub recording_id: String,
    pub actor_id: String,
    pub t_start: f64,
    pub t_end: f64,
    /// m/s, mean over the turn window.
    pub turning_speed: f64,
    /// rad, signed net heading change (positive left).
    pub turning_angle: f64,
    /// m, minimum over the turn window.
    pub turning_radius: f64,
}

impl TurnParameters {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "turning_speed" => Some(self.turning_speed),
            "turning_angle" => Some(self.turning_angle),
            "turning_radius" => Some(self.turning_radius),
            _ => None,
        }
    }
}

pub const TURN_PARAMETERS: [&str; 3] = ["turning_speed", "turning_angle", "turning_radius"];

/// Heading-change measurement reaches this far outside the tag window so
/// the ends of the arc are not cut off.
const ANGLE_PAD: f64 = 0.5;

fn required(tag: &EventTag, attr: &str) -> Result<f64, ScevarError> {
    tag.num(attr).ok_or_else(|| ScevarError::MissingAttribute {
        tag: format!("{}/{}/{}@{}", tag.recording_id, tag.actor_id, tag.kind, tag.t_start),
        attr: attr.to_string(),
    })
}

/// One parameter set per turn tag. Values are re-measured on the raw track
/// when the tag's recording is present; the tag attributes are used
/// otherwise. Non-turn tags are ignored.
pub fn extract_turn_parameters(recs: &[Recording], tags: &[EventTag]) -> Result<Vec<TurnParameters>, ScevarError> {
    let mut out = Vec::new();
    for tag in tags.iter().filter(|t| t.kind.is_turn()) {
        let mut p = TurnParameters {
            recording_id: tag.recording_id.clone(),
            actor_id: tag.actor_id.clone(),
            t_start: tag.t_start,
            t_end: tag.t_end,
            turning_speed: required(tag, "mean_speed")?,
            turning_angle: required(tag, "net_heading_change")?,
            turning_radius: required(tag, "min_turn_radius")?,
        };
        let track = recs
            .iter()
            .find(|r| r.recording_id == tag.recording_id)
            .and_then(|r| r.track(&tag.actor_id));
        if let Some(tr) = track {
            let inside: Vec<usize> = (0..tr.len()).filter(|&i| tr.times[i] >= tag.t_start && tr.times[i] <= tag.t_end).collect();
            let padded: Vec<usize> = (0..tr.len())
                .filter(|&i| tr.times[i] >= tag.t_start - ANGLE_PAD && tr.times[i] <= tag.t_end + ANGLE_PAD)
                .collect();
            if inside.len() >= 3 {
                p.turning_speed = inside.iter().map(|&i| tr.speeds[i]).sum::<f64>() / inside.len() as f64;
                let h = unwrap_angles(&padded.iter().map(|&i| tr.headings[i]).collect::<Vec<_>>());
                p.turning_angle = h[h.len() - 1] - h[0];
                let all_h = unwrap_angles(&tr.headings);
                let yaw = crate::geom::central_diff(&tr.times, &all_h);
                p.turning_radius = inside
                    .iter()
                    .filter(|&&i| yaw[i].abs() > 1e-9)
                    .map(|&i| tr.speeds[i] / yaw[i].abs())
                    .fold(f64::INFINITY, f64::min);
            }
        }
        if !(p.turning_speed >= 0.0) || !(p.turning_radius > 0.0) {
            return Err(ScevarError::BadSamples(format!("turn at {}@{}: non-physical parameters", p.recording_id, p.t_start)));
        }
        out.push(p);
    }
    Ok(out)
}
