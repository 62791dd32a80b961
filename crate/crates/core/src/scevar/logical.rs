//! Logical scenarios (template + parameter distributions), their
//! ParameterValueDistribution files, and concrete variation sampling.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::{JointDistribution, Univariate, UnivariateDistribution};
use super::ScevarError;
use crate::par::Execution;
use crate::real2sim::xosc::{file_header, read_parameters};
use crate::real2sim::{scenario_xml, ParameterDecl, Scalar, ScenarioDocument};
use crate::xml::{self, Element, XmlError};

/// Bins used when a KDE has to be written as an OpenSCENARIO histogram.
pub const KDE_EXPORT_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParameterGroup {
    Univariate(UnivariateDistribution),
    Joint(JointDistribution),
    /// Equally likely discrete values.
    Enumeration { name: String, values: Vec<f64> },
}

impl ParameterGroup {
    pub fn names(&self) -> Vec<String> {
        match self {
            ParameterGroup::Univariate(d) => vec![d.name.clone()],
            ParameterGroup::Joint(j) => j.dims.clone(),
            ParameterGroup::Enumeration { name, .. } => vec![name.clone()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalScenario {
    pub template: ScenarioDocument,
    /// File name the distribution file points at.
    pub template_file: String,
    pub groups: Vec<ParameterGroup>,
}

impl LogicalScenario {
    pub fn validate(&self) -> Result<(), ScevarError> {
        self.template.validate()?;
        let declared: Vec<&str> = self.template.parameters.iter().map(|p| p.name.as_str()).collect();
        let mut seen = std::collections::BTreeSet::new();
        for g in &self.groups {
            if let ParameterGroup::Enumeration { name, values } = g {
                if values.is_empty() {
                    return Err(ScevarError::BadDistribution(format!("{name}: empty enumeration")));
                }
            }
            for n in g.names() {
                if !declared.contains(&n.as_str()) {
                    return Err(ScevarError::UndeclaredParameter(n));
                }
                if !seen.insert(n.clone()) {
                    return Err(ScevarError::DuplicateDistribution(n));
                }
            }
        }
        if let Some(p) = declared.iter().find(|p| !seen.contains(**p)) {
            return Err(ScevarError::MissingDistribution(p.to_string()));
        }
        Ok(())
    }
}

/// Declares `name` with a default value; overwrites an existing declaration.
pub fn declare_parameter(doc: &mut ScenarioDocument, name: &str, value: f64) {
    match doc.parameters.iter_mut().find(|p| p.name == name) {
        Some(p) => p.value = value,
        None => doc.parameters.push(ParameterDecl { name: name.to_string(), value }),
    }
}

/// Makes the initial speed of `entity` read from parameter `name`.
pub fn bind_init_speed(doc: &mut ScenarioDocument, entity: &str, name: &str) -> Result<(), ScevarError> {
    let init = doc
        .init
        .iter_mut()
        .find(|i| i.entity == entity)
        .ok_or_else(|| ScevarError::BadDistribution(format!("no init for entity '{entity}'")))?;
    init.speed = Scalar::Param(name.to_string());
    Ok(())
}

fn histogram_element(d: &UnivariateDistribution) -> Element {
    let hist = match &d.kind {
        Univariate::Histogram { .. } => d.clone(),
        Univariate::Kde { .. } => {
            log::warn!("{}: KDE has no OpenSCENARIO encoding; writing a {KDE_EXPORT_BINS}-bin histogram", d.name);
            d.discretize(KDE_EXPORT_BINS)
        }
    };
    let Univariate::Histogram { edges, masses } = &hist.kind else { unreachable!() };
    Element::new("Histogram").children_from(masses.iter().enumerate().map(|(i, m)| {
        Element::new("Bin")
            .attr("weight", m)
            .child(Element::new("Range").attr("lowerLimit", edges[i]).attr("upperLimit", edges[i + 1]))
    }))
}

/// The ParameterValueDistribution document for `logical`.
pub fn distribution_xml(logical: &LogicalScenario, runs: usize, seed: u64) -> Element {
    let pvd = Element::new("ParameterValueDistribution").child(Element::new("ScenarioFile").attr("filepath", &logical.template_file));
    let all_enum = logical.groups.iter().all(|g| matches!(g, ParameterGroup::Enumeration { .. }));
    let body = if all_enum && !logical.groups.is_empty() {
        Element::new("Deterministic").children_from(logical.groups.iter().map(|g| {
            let ParameterGroup::Enumeration { name, values } = g else { unreachable!() };
            Element::new("DeterministicSingleParameterDistribution").attr("parameterName", name).child(
                Element::new("DistributionSet").children_from(values.iter().map(|v| Element::new("Element").attr("value", v))),
            )
        }))
    } else {
        let mut dists = Vec::new();
        for g in &logical.groups {
            match g {
                ParameterGroup::Univariate(d) => dists.push(
                    Element::new("StochasticDistribution").attr("parameterName", &d.name).child(histogram_element(d)),
                ),
                ParameterGroup::Joint(j) => {
                    log::warn!("{:?}: joint dependence has no OpenSCENARIO encoding; writing marginals", j.dims);
                    for k in 0..j.ndims() {
                        dists.push(
                            Element::new("StochasticDistribution")
                                .attr("parameterName", &j.dims[k])
                                .child(histogram_element(&j.marginal(k))),
                        );
                    }
                }
                ParameterGroup::Enumeration { name, values } => {
                    let w = 1.0 / values.len() as f64;
                    dists.push(Element::new("StochasticDistribution").attr("parameterName", name).child(
                        Element::new("ProbabilityDistributionSet")
                            .children_from(values.iter().map(|v| Element::new("Element").attr("value", v).attr("weight", w))),
                    ));
                }
            }
        }
        Element::new("Stochastic")
            .attr("numberOfTestRuns", runs)
            .attr("randomSeed", seed)
            .children_from(dists)
    };
    Element::new("OpenSCENARIO")
        .child(file_header(&format!("parameter distribution for {}", logical.template_file)))
        .child(pvd.child(body))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalFiles {
    pub template: PathBuf,
    pub distribution: PathBuf,
}

/// Writes `<template_file>` and `<stem>.dist.xosc` into `dir`.
pub fn write_logical_scenario(logical: &LogicalScenario, dir: &Path, runs: usize, seed: u64) -> Result<LogicalFiles, ScevarError> {
    logical.validate()?;
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| ScevarError::Io { path: p, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let template = dir.join(&logical.template_file);
    fs::write(&template, scenario_xml(&logical.template).to_document()).map_err(io(&template))?;
    let stem = Path::new(&logical.template_file)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let distribution = dir.join(format!("{stem}.dist.xosc"));
    fs::write(&distribution, distribution_xml(logical, runs, seed).to_document()).map_err(io(&distribution))?;
    Ok(LogicalFiles { template, distribution })
}

/// Parses a ParameterValueDistribution file into the template path and one
/// group per parameter.
pub fn read_distribution_str(text: &str) -> Result<(String, Vec<ParameterGroup>), ScevarError> {
    let root = xml::parse(text)?;
    let pvd = root.req_child("ParameterValueDistribution")?;
    let file = pvd.req_child("ScenarioFile")?.req("filepath")?.to_string();
    let mut groups = Vec::new();
    if let Some(st) = pvd.first("Stochastic") {
        for sd in st.all("StochasticDistribution") {
            let name = sd.req("parameterName")?;
            let inner = sd.children.first().ok_or_else(|| XmlError::MissingElement("StochasticDistribution/*".into()))?;
            match inner.name.as_str() {
                "Histogram" => {
                    let mut edges = Vec::new();
                    let mut masses = Vec::new();
                    for bin in inner.all("Bin") {
                        let r = bin.req_child("Range")?;
                        let (lo, hi) = (r.req_f64("lowerLimit")?, r.req_f64("upperLimit")?);
                        if edges.is_empty() {
                            edges.push(lo);
                        } else if (edges[edges.len() - 1] - lo).abs() > 1e-9 * (1.0 + lo.abs()) {
                            return Err(XmlError::Unsupported("Histogram with non-contiguous bins".into()).into());
                        }
                        edges.push(hi);
                        masses.push(bin.req_f64("weight")?);
                    }
                    groups.push(ParameterGroup::Univariate(UnivariateDistribution::histogram(name, edges, masses)?));
                }
                "ProbabilityDistributionSet" => {
                    let values = inner.all("Element").map(|e| e.req_f64("value")).collect::<Result<_, _>>()?;
                    groups.push(ParameterGroup::Enumeration { name: name.to_string(), values });
                }
                other => return Err(XmlError::Unsupported(other.to_string()).into()),
            }
        }
    } else if let Some(det) = pvd.first("Deterministic") {
        for d in det.all("DeterministicSingleParameterDistribution") {
            let values = d
                .req_child("DistributionSet")?
                .all("Element")
                .map(|e| e.req_f64("value"))
                .collect::<Result<_, _>>()?;
            groups.push(ParameterGroup::Enumeration { name: d.req("parameterName")?.to_string(), values });
        }
    } else {
        return Err(XmlError::MissingElement("ParameterValueDistribution/Stochastic|Deterministic".into()).into());
    }
    Ok((file, groups))
}

/// Declared parameter names of a template file, for validation tooling.
pub fn template_parameters(text: &str) -> Result<Vec<ParameterDecl>, ScevarError> {
    Ok(read_parameters(&xml::parse(text)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Random,
    /// Latin hypercube over the per-dimension CDFs.
    Stratified,
}

impl std::str::FromStr for SamplingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(SamplingMode::Random),
            "stratified" | "lhs" => Ok(SamplingMode::Stratified),
            other => Err(format!("unknown sampling mode '{other}' (random, stratified)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteVariation {
    pub index: usize,
    pub assignment: BTreeMap<String, f64>,
    pub document: ScenarioDocument,
}

/// The template with every parameter set to its assigned value and every
/// `$name` reference resolved.
pub fn instantiate(template: &ScenarioDocument, assignment: &BTreeMap<String, f64>, label: &str) -> ScenarioDocument {
    let mut doc = template.clone();
    for p in &mut doc.parameters {
        if let Some(v) = assignment.get(&p.name) {
            p.value = *v;
        }
    }
    let params = doc.parameters.clone();
    for i in &mut doc.init {
        for s in [&mut i.x, &mut i.y, &mut i.heading, &mut i.speed] {
            if let Some(v) = s.resolve(&params) {
                *s = Scalar::Value(v);
            }
        }
    }
    doc.parameters.clear();
    doc.description = format!("{} ({label})", doc.description);
    doc
}

/// LHS positions: one uniform draw inside each of `n` equal strata, in a
/// random order.
fn lhs_column(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    strata.into_iter().map(|k| (k as f64 + rng.gen::<f64>()) / n as f64).collect()
}

/// Ranks of `xs` (0-based, ties by position).
fn ranks(xs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    let mut r = vec![0; xs.len()];
    for (rank, i) in order.into_iter().enumerate() {
        r[i] = rank;
    }
    r
}

/// Parameter assignments only; see [`sample_variations`].
pub fn sample_assignments(logical: &LogicalScenario, n: usize, mode: SamplingMode, seed: u64) -> Result<Vec<BTreeMap<String, f64>>, ScevarError> {
    if n == 0 {
        return Err(ScevarError::BadSamples("n must be >= 1".into()));
    }
    logical.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![BTreeMap::new(); n];
    for g in &logical.groups {
        match (g, mode) {
            (ParameterGroup::Univariate(d), SamplingMode::Random) => {
                for a in &mut out {
                    a.insert(d.name.clone(), d.sample(&mut rng));
                }
            }
            (ParameterGroup::Univariate(d), SamplingMode::Stratified) => {
                for (a, u) in out.iter_mut().zip(lhs_column(n, &mut rng)) {
                    a.insert(d.name.clone(), d.quantile(u));
                }
            }
            (ParameterGroup::Enumeration { name, values }, SamplingMode::Random) => {
                for a in &mut out {
                    a.insert(name.clone(), values[rng.gen_range(0..values.len())]);
                }
            }
            (ParameterGroup::Enumeration { name, values }, SamplingMode::Stratified) => {
                for (a, u) in out.iter_mut().zip(lhs_column(n, &mut rng)) {
                    let k = ((u * values.len() as f64) as usize).min(values.len() - 1);
                    a.insert(name.clone(), values[k]);
                }
            }
            (ParameterGroup::Joint(j), SamplingMode::Random) => {
                for a in &mut out {
                    for (name, v) in j.dims.iter().zip(j.sample(&mut rng)) {
                        a.insert(name.clone(), v);
                    }
                }
            }
            (ParameterGroup::Joint(j), SamplingMode::Stratified) => {
                // draw from the joint for the dependence structure, then move
                // each column onto LHS marginal quantiles keeping its ranks
                let draws: Vec<Vec<f64>> = (0..n).map(|_| j.sample(&mut rng)).collect();
                for k in 0..j.ndims() {
                    let marginal = j.marginal(k);
                    let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
                    for (a, r) in out.iter_mut().zip(ranks(&col)) {
                        let u = (r as f64 + rng.gen::<f64>()) / n as f64;
                        a.insert(j.dims[k].clone(), marginal.quantile(u));
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn sample_variations(
    logical: &LogicalScenario,
    n: usize,
    mode: SamplingMode,
    seed: u64,
    exec: Execution,
) -> Result<Vec<ConcreteVariation>, ScevarError> {
    let assignments: Vec<(usize, BTreeMap<String, f64>)> = sample_assignments(logical, n, mode, seed)?.into_iter().enumerate().collect();
    Ok(exec.map(&assignments, |(i, a)| ConcreteVariation {
        index: *i,
        document: instantiate(&logical.template, a, &format!("variation {i}")),
        assignment: a.clone(),
    }))
}
