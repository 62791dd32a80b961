//! Subcommand implementations. Each returns the text for stdout.
//!
//! Working files live under `paths.output_dir`:
//!
//! | file | written by |
//! |---|---|
//! | `recordings/*.jsonl`, `ingest_report.json` | ingest |
//! | `tags.jsonl`, `odd.jsonl` | tag |
//! | `search.json` | search |
//! | `scenarios/<segment-id>.xosc`, `scenarios/map.xodr` | export |
//! | `turn_parameters.csv`, `distributions.json`, `fit_<param>.csv`, `turn_trajectories.json` | fit |
//! | `logical/<template>.xosc`, `logical/<stem>.dist.xosc` | logical |
//! | `variations/*.xosc`, `variations/assignments.csv` | sample |
//! | `coverage_<params>.csv` | coverage |
//! | `safety/<name>.json`, `safety/<name>.csv` | analyze |
//! | `bench_ingest.csv`, `bench_search.csv` | bench |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use safr_core::index::{build_index, latency_csv, latency_probe, segment_id, Index, IndexError, MetadataRecord, QueryError, ScenarioSegment};
use safr_core::map::{load_map, write_opendrive, MapModel};
use safr_core::real2sim::{build_scenario, read_openscenario, replay_scenario, write_openscenario, EGO_NAME};
use safr_core::recording::{ingest_batch, parse_recording, throughput_csv, throughput_curve, write_recording_file, Recording};
use safr_core::sceann::{analyze_recording, analyze_scenario, scores_csv, SafetyError, ScenarioSafetyReport, Verdict};
use safr_core::scevar::logical::{read_distribution_str, write_logical_scenario};
use safr_core::scevar::{
    bind_init_speed, compute_coverage, coverage_csv, declare_parameter, extract_turn_parameters, fit_joint, fit_univariate, learn_turn_trajectories,
    sample_variations, AngleBuckets, CoverageReport, FitConfig, LogicalScenario, ParameterGroup, SamplingMode, UnivariateDistribution, TURN_PARAMETERS,
};
use safr_core::synth;
use safr_core::tagger::{derive_odd_records, tag_recordings, tags_from_jsonl, tags_to_jsonl, EventTag};
use safr_core::Execution;

use crate::{internal, user, BenchCommand, Cli, CliError, Command, Config, GenCommand};

type Res<T> = Result<T, CliError>;

pub fn dispatch(cli: &Cli, cfg: &Config) -> Res<String> {
    let ctx = Ctx { cfg, json: cli.json };
    match &cli.command {
        Command::Ingest { files, workers } => ctx.ingest(files, *workers),
        Command::Tag => ctx.tag(),
        Command::Index => ctx.index(),
        Command::Search { query, slack } => ctx.search(query, *slack),
        Command::Export { ids, all } => ctx.export(ids, *all),
        Command::Fit { params, joint } => ctx.fit(params, *joint),
        Command::Logical { template, dist } => ctx.logical(template, dist.as_deref()),
        Command::Sample { n, mode, seed, logical } => ctx.sample(*n, mode.as_deref(), *seed, logical.as_deref()),
        Command::Coverage { dist, points, bins } => ctx.coverage(dist, points, *bins),
        Command::Analyze { inputs } => ctx.analyze(inputs),
        Command::Bench { what } => ctx.bench(what),
        Command::Gen { what } => ctx.gen(what),
    }
}

/// Segment plus its content-hash id, as printed by `search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentHit {
    pub id: String,
    pub recording_id: String,
    pub t_start: f64,
    pub t_end: f64,
    pub matched_fields: Vec<String>,
}

impl SegmentHit {
    fn new(seg: ScenarioSegment) -> Self {
        SegmentHit {
            id: segment_id(&seg),
            recording_id: seg.recording_id,
            t_start: seg.t_start,
            t_end: seg.t_end,
            matched_fields: seg.matched_fields,
        }
    }

    fn segment(&self) -> ScenarioSegment {
        ScenarioSegment {
            recording_id: self.recording_id.clone(),
            t_start: self.t_start,
            t_end: self.t_end,
            matched_fields: self.matched_fields.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SearchResult {
    query: String,
    slack: f64,
    segments: Vec<SegmentHit>,
}

/// Query text with a caret under the error position.
pub fn caret(query: &str, err: &QueryError) -> String {
    let pos = match err {
        QueryError::Syntax { pos, .. }
        | QueryError::UnknownField { pos, .. }
        | QueryError::UnitOnString { pos, .. }
        | QueryError::StringOrder { pos, .. }
        | QueryError::UnknownUnit { pos, .. } => *pos,
    };
    let col = query.get(..pos.min(query.len())).map_or(pos, |s| s.chars().count());
    format!("{err}\n  {query}\n  {}^", " ".repeat(col))
}

/// Recording ids become file names; anything unusual is replaced.
pub fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> CliError {
    internal(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Res<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Replaces a directory this tool owns with an empty one.
fn fresh_dir(dir: &Path) -> Res<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

fn jsonl_files(dir: &Path) -> Res<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| user(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    out.sort();
    Ok(out)
}

struct Ctx<'a> {
    cfg: &'a Config,
    json: bool,
}

impl Ctx<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.paths.output_dir.join(name)
    }

    fn store_dir(&self) -> PathBuf {
        self.out("recordings")
    }

    fn map(&self) -> Res<Option<MapModel>> {
        let p = &self.cfg.paths.map;
        if p.as_os_str().is_empty() {
            return Ok(None);
        }
        if !p.exists() {
            return Err(user(format!("paths.map: {} does not exist", p.display())));
        }
        load_map(p).map(Some).map_err(|e| user(format!("paths.map: {e}")))
    }

    fn store(&self) -> Res<Vec<Recording>> {
        let dir = self.store_dir();
        if !dir.is_dir() {
            return Err(user(format!("no ingested recordings in {}; run `safr ingest` first", dir.display())));
        }
        let mut recs = Vec::new();
        for p in jsonl_files(&dir)? {
            recs.extend(parse_recording(&p).map_err(|e| user(format!("{}: {e}", p.display())))?);
        }
        Ok(recs)
    }

    fn tags(&self) -> Res<Vec<EventTag>> {
        let p = self.out("tags.jsonl");
        if !p.exists() {
            return Err(user(format!("{} not found; run `safr tag` first", p.display())));
        }
        tags_from_jsonl(&read(&p)?).map_err(|e| user(format!("{}: {e}", p.display())))
    }

    fn exec(&self) -> Execution {
        Execution::Auto
    }

    // ------------------------------------------------------------ ingest

    fn ingest(&self, files: &[PathBuf], workers: Option<usize>) -> Res<String> {
        let paths = if files.is_empty() {
            let dir = &self.cfg.paths.data_dir;
            if !dir.is_dir() {
                return Err(user(format!("paths.data_dir: {} is not a directory", dir.display())));
            }
            jsonl_files(dir)?
        } else {
            for f in files {
                if !f.exists() {
                    return Err(user(format!("{}: no such file", f.display())));
                }
            }
            files.to_vec()
        };
        if paths.is_empty() {
            return Err(user("no recording files to ingest"));
        }
        let workers = match workers.unwrap_or(self.cfg.ingest.workers) {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            w => w,
        };
        let (recs, report) = ingest_batch(&paths, workers);
        for (path, reason) in report.rejections() {
            log::warn!("rejected {}: {reason}", path.display());
        }
        if recs.is_empty() {
            let reasons: Vec<String> = report.rejections().map(|(p, r)| format!("{}: {r}", p.display())).collect();
            return Err(user(format!("no recording could be ingested\n{}", reasons.join("\n"))));
        }
        let store = self.store_dir();
        fresh_dir(&store)?;
        for r in &recs {
            let p = store.join(format!("{}.jsonl", file_stem_for(&r.recording_id)));
            write_recording_file(r, &p).map_err(|e| io_fail(&p, e))?;
        }
        write(&self.out("ingest_report.json"), pretty(&report))?;
        if self.json {
            return Ok(pretty(&report));
        }
        Ok(format!(
            "ingested {} recording(s) from {} file(s), {} rejected; {} bytes in {:.3} s ({:.1} MB/s)\n",
            report.recordings_ok,
            paths.len(),
            report.recordings_rejected,
            report.bytes_ingested,
            report.wall_time,
            report.throughput / 1e6
        ))
    }

    // ------------------------------------------------------------ tag, index, search

    fn tag(&self) -> Res<String> {
        let recs = self.store()?;
        let map = self.map()?;
        let tags: Vec<EventTag> = tag_recordings(&recs, map.as_ref(), &self.cfg.tagger, self.exec()).into_iter().flatten().collect();
        let odd: Vec<MetadataRecord> = match &map {
            Some(m) => recs.iter().flat_map(|r| derive_odd_records(r, m, &self.cfg.tagger)).collect(),
            None => Vec::new(),
        };
        write(&self.out("tags.jsonl"), tags_to_jsonl(&tags))?;
        let mut odd_text = String::new();
        for r in &odd {
            odd_text.push_str(&serde_json::to_string(r).expect("record serializes"));
            odd_text.push('\n');
        }
        write(&self.out("odd.jsonl"), odd_text)?;
        let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
        for t in &tags {
            *by_kind.entry(t.kind.as_str()).or_default() += 1;
        }
        if self.json {
            return Ok(pretty(&json!({
                "recordings": recs.len(),
                "tags": tags.len(),
                "by_kind": by_kind,
                "odd_records": odd.len(),
            })));
        }
        let kinds: Vec<String> = by_kind.iter().map(|(k, n)| format!("{k} {n}")).collect();
        Ok(format!(
            "tagged {} recording(s): {} tag(s) ({}), {} ODD record(s)\n",
            recs.len(),
            tags.len(),
            kinds.join(", "),
            odd.len()
        ))
    }

    fn index(&self) -> Res<String> {
        let tags = self.tags()?;
        let odd_path = self.out("odd.jsonl");
        let odd: Vec<MetadataRecord> = if odd_path.exists() {
            read(&odd_path)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(serde_json::from_str)
                .collect::<Result<_, _>>()
                .map_err(|e| user(format!("{}: {e}", odd_path.display())))?
        } else {
            Vec::new()
        };
        let ego_ids: BTreeMap<String, String> = self
            .store()?
            .iter()
            .filter_map(|r| r.ego_id().map(|e| (r.recording_id.clone(), e.to_string())))
            .collect();
        let dir = &self.cfg.paths.index_dir;
        let manifest = build_index(&tags, &ego_ids, &odd, dir).map_err(|e| match e {
            IndexError::Io { .. } => internal(e.to_string()),
            other => user(other.to_string()),
        })?;
        if self.json {
            return Ok(pretty(&manifest));
        }
        Ok(format!(
            "indexed {} record(s) in {} field(s) over {} recording(s) into {}\n",
            manifest.record_count,
            manifest.fields.len(),
            manifest.recordings.len(),
            dir.display()
        ))
    }

    fn search(&self, query: &str, slack: Option<f64>) -> Res<String> {
        let dir = &self.cfg.paths.index_dir;
        if !dir.join("manifest.json").exists() {
            return Err(user(format!("paths.index_dir: no index in {}; run `safr index` first", dir.display())));
        }
        let index = Index::open(dir).map_err(|e| user(format!("{}: {e}", dir.display())))?;
        let q = index.parse(query).map_err(|e| match e {
            IndexError::Query(qe) => user(caret(query, &qe)),
            other => user(other.to_string()),
        })?;
        let slack = slack.unwrap_or(self.cfg.query.slack);
        let segments = index.evaluate(&q, slack).map_err(|e| internal(e.to_string()))?;
        let hits: Vec<SegmentHit> = segments.into_iter().map(SegmentHit::new).collect();
        let result = SearchResult {
            query: query.to_string(),
            slack,
            segments: hits.clone(),
        };
        write(&self.out("search.json"), pretty(&result))?;
        if self.json {
            return Ok(pretty(&hits));
        }
        let mut s = String::new();
        for h in &hits {
            let _ = writeln!(s, "{}  {}  {:.2}-{:.2} s  [{}]", h.id, h.recording_id, h.t_start, h.t_end, h.matched_fields.join(", "));
        }
        let _ = writeln!(s, "{} segment(s)", hits.len());
        Ok(s)
    }

    // ------------------------------------------------------------ export

    fn export(&self, ids: &[String], all: bool) -> Res<String> {
        let p = self.out("search.json");
        if !p.exists() {
            return Err(user("no search results; run `safr search` first"));
        }
        let last: SearchResult = serde_json::from_str(&read(&p)?).map_err(|e| user(format!("{}: {e}", p.display())))?;
        let chosen: Vec<&SegmentHit> = if all {
            last.segments.iter().collect()
        } else {
            if ids.is_empty() {
                return Err(user("give segment ids or --all"));
            }
            ids.iter()
                .map(|id| {
                    last.segments
                        .iter()
                        .find(|h| &h.id == id)
                        .ok_or_else(|| user(format!("segment `{id}` is not in the last search")))
                })
                .collect::<Res<_>>()?
        };
        let dir = self.out("scenarios");
        fs::create_dir_all(&dir).map_err(|e| io_fail(&dir, e))?;
        let map_ref = match self.map()? {
            Some(m) => {
                let p = dir.join("map.xodr");
                write_opendrive(&m, &p).map_err(|e| user(format!("map: {e}")))?;
                "map.xodr"
            }
            None => "",
        };
        let mut written = Vec::new();
        for hit in chosen {
            let rp = self.store_dir().join(format!("{}.jsonl", file_stem_for(&hit.recording_id)));
            let recs = parse_recording(&rp).map_err(|e| user(format!("{}: {e}", rp.display())))?;
            let rec = recs
                .iter()
                .find(|r| r.recording_id == hit.recording_id)
                .ok_or_else(|| user(format!("recording `{}` not in the store", hit.recording_id)))?;
            let doc = build_scenario(rec, &hit.segment(), map_ref).map_err(|e| user(format!("{}: {e}", hit.id)))?;
            let path = dir.join(format!("{}.xosc", hit.id));
            write_openscenario(&doc, &path).map_err(|e| internal(format!("{}: {e}", path.display())))?;
            written.push(json!({
                "id": hit.id,
                "recording_id": hit.recording_id,
                "t_start": hit.t_start,
                "t_end": hit.t_end,
                "entities": doc.entities.len(),
                "path": path,
            }));
        }
        if self.json {
            return Ok(pretty(&written));
        }
        let mut s = String::new();
        for w in &written {
            let _ = writeln!(s, "{}", w["path"].as_str().unwrap_or_default());
        }
        Ok(s)
    }

    // ------------------------------------------------------------ distributions

    fn fit(&self, params: &[String], joint: bool) -> Res<String> {
        for p in params {
            if !TURN_PARAMETERS.contains(&p.as_str()) {
                return Err(user(format!("unknown parameter `{p}` (expected one of {})", TURN_PARAMETERS.join(", "))));
            }
        }
        if params.is_empty() {
            return Err(user("--params is empty"));
        }
        let recs = self.store()?;
        let turns: Vec<EventTag> = self.tags()?.into_iter().filter(|t| t.kind.is_turn()).collect();
        let extracted = extract_turn_parameters(&recs, &turns).map_err(|e| user(e.to_string()))?;
        if extracted.is_empty() {
            return Err(user("no turn events in the tags; nothing to fit"));
        }
        let mut csv = String::from("recording_id,actor_id,t_start,t_end,turning_speed,turning_angle,turning_radius\n");
        for p in &extracted {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                p.recording_id, p.actor_id, p.t_start, p.t_end, p.turning_speed, p.turning_angle, p.turning_radius
            );
        }
        write(&self.out("turn_parameters.csv"), csv)?;

        let fit_cfg = FitConfig {
            kind: self.cfg.fit.kind,
            bins: (self.cfg.fit.bins > 0).then_some(self.cfg.fit.bins),
            bandwidth: None,
        };
        let column = |name: &str| -> Vec<f64> { extracted.iter().filter_map(|p| p.get(name)).collect() };
        let groups: Vec<ParameterGroup> = if joint && params.len() > 1 {
            let dims: Vec<&str> = params.iter().map(String::as_str).collect();
            let rows: Vec<Vec<f64>> = extracted.iter().map(|p| dims.iter().filter_map(|d| p.get(d)).collect()).collect();
            vec![ParameterGroup::Joint(fit_joint(&dims, &rows, &fit_cfg).map_err(|e| user(e.to_string()))?)]
        } else {
            params
                .iter()
                .map(|n| fit_univariate(n, &column(n), &fit_cfg).map(ParameterGroup::Univariate))
                .collect::<Result<_, _>>()
                .map_err(|e| user(e.to_string()))?
        };
        write(&self.out("distributions.json"), pretty(&groups))?;
        for g in &groups {
            let marginals: Vec<UnivariateDistribution> = match g {
                ParameterGroup::Univariate(d) => vec![d.clone()],
                ParameterGroup::Joint(j) => (0..j.ndims()).map(|k| j.marginal(k)).collect(),
                ParameterGroup::Enumeration { .. } => vec![],
            };
            for d in marginals {
                write(&self.out(&format!("fit_{}.csv", d.name)), pdf_csv(&d))?;
            }
        }
        let (models, warnings) = learn_turn_trajectories(&recs, &turns, &AngleBuckets::default());
        for w in &warnings {
            log::warn!("{w}");
        }
        write(&self.out("turn_trajectories.json"), pretty(&models))?;

        let summary: Vec<serde_json::Value> = groups.iter().map(group_summary).collect();
        if self.json {
            return Ok(pretty(&json!({
                "samples": extracted.len(),
                "distributions": self.out("distributions.json"),
                "groups": summary,
                "trajectory_models": models.len(),
            })));
        }
        let mut s = format!("fitted {} turn(s)\n", extracted.len());
        for g in &summary {
            let _ = writeln!(s, "  {}", g);
        }
        Ok(s)
    }

    fn load_groups(&self, path: &Path) -> Res<Vec<ParameterGroup>> {
        let text = read(path)?;
        if path.extension().is_some_and(|e| e == "xosc") {
            return read_distribution_str(&text).map(|(_, g)| g).map_err(|e| user(format!("{}: {e}", path.display())));
        }
        serde_json::from_str(&text).map_err(|e| user(format!("{}: {e}", path.display())))
    }

    fn logical(&self, template: &Path, dist: Option<&Path>) -> Res<String> {
        let mut doc = read_openscenario(template).map_err(|e| user(format!("{}: {e}", template.display())))?;
        let dist = dist.map(Path::to_path_buf).unwrap_or_else(|| self.out("distributions.json"));
        let groups = self.load_groups(&dist)?;
        for g in &groups {
            for (name, value) in nominal_values(g) {
                declare_parameter(&mut doc, &name, value);
            }
        }
        if groups.iter().any(|g| g.names().iter().any(|n| n == "turning_speed")) {
            bind_init_speed(&mut doc, EGO_NAME, "turning_speed").map_err(|e| user(e.to_string()))?;
        }
        let template_file = template
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario.xosc".into());
        let logical = LogicalScenario { template: doc, template_file, groups };
        let files = write_logical_scenario(&logical, &self.out("logical"), self.cfg.sampling.runs, self.cfg.sampling.seed)
            .map_err(|e| user(e.to_string()))?;
        if self.json {
            return Ok(pretty(&json!({"template": files.template, "distribution": files.distribution})));
        }
        Ok(format!("{}\n{}\n", files.template.display(), files.distribution.display()))
    }

    fn sample(&self, n: usize, mode: Option<&str>, seed: Option<u64>, dist: Option<&Path>) -> Res<String> {
        let dist = match dist {
            Some(p) => p.to_path_buf(),
            None => {
                let dir = self.out("logical");
                let found: Vec<PathBuf> = fs::read_dir(&dir)
                    .map_err(|_| user(format!("no logical scenario in {}; run `safr logical` first", dir.display())))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.to_string_lossy().ends_with(".dist.xosc"))
                    .collect();
                match found.as_slice() {
                    [one] => one.clone(),
                    [] => return Err(user(format!("no *.dist.xosc in {}", dir.display()))),
                    _ => return Err(user(format!("several *.dist.xosc in {}; pick one with --logical", dir.display()))),
                }
            }
        };
        let mode: SamplingMode = match mode {
            Some(m) => m.parse().map_err(user)?,
            None => self.cfg.sampling.mode,
        };
        let seed = seed.unwrap_or(self.cfg.sampling.seed);
        let (template_file, groups) = read_distribution_str(&read(&dist)?).map_err(|e| user(format!("{}: {e}", dist.display())))?;
        let template_path = dist.parent().unwrap_or(Path::new(".")).join(&template_file);
        let template = read_openscenario(&template_path).map_err(|e| user(format!("{}: {e}", template_path.display())))?;
        let logical = LogicalScenario { template, template_file: template_file.clone(), groups };
        let variations = sample_variations(&logical, n, mode, seed, self.exec()).map_err(|e| user(e.to_string()))?;

        let dir = self.out("variations");
        fresh_dir(&dir)?;
        let stem = Path::new(&template_file).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let names: Vec<String> = variations.first().map(|v| v.assignment.keys().cloned().collect()).unwrap_or_default();
        let mut csv = format!("index,{}\n", names.join(","));
        let mut files = Vec::new();
        for v in &variations {
            let path = dir.join(format!("{stem}_{:04}.xosc", v.index));
            write_openscenario(&v.document, &path).map_err(|e| internal(format!("{}: {e}", path.display())))?;
            let vals: Vec<String> = names.iter().map(|k| v.assignment[k].to_string()).collect();
            let _ = writeln!(csv, "{},{}", v.index, vals.join(","));
            files.push(path);
        }
        let csv_path = dir.join("assignments.csv");
        write(&csv_path, csv)?;
        if self.json {
            return Ok(pretty(&json!({"n": n, "mode": mode, "seed": seed, "files": files, "assignments": csv_path})));
        }
        Ok(format!("wrote {} variation(s) to {}\n", files.len(), dir.display()))
    }

    fn coverage(&self, dist: &Path, points: &Path, bins: Option<usize>) -> Res<String> {
        let groups = self.load_groups(dist)?;
        let (header, rows) = read_points(points)?;
        let bins = bins.unwrap_or(self.cfg.sampling.coverage_bins);
        let mut reports: Vec<CoverageReport> = Vec::new();
        for g in &groups {
            let names = g.names();
            let Some(cols) = names.iter().map(|n| header.iter().position(|h| h == n)).collect::<Option<Vec<usize>>>() else {
                log::warn!("{}: not in {}; skipped", names.join("+"), points.display());
                continue;
            };
            let pts = numeric_columns(points, &header, &rows, &cols)?;
            let report = match g {
                ParameterGroup::Univariate(d) => compute_coverage(d, &pts, bins),
                ParameterGroup::Joint(j) => compute_coverage(j, &pts, bins),
                ParameterGroup::Enumeration { .. } => continue,
            }
            .map_err(|e| user(e.to_string()))?;
            write(&self.out(&format!("coverage_{}.csv", names.join("+"))), coverage_csv(&report))?;
            reports.push(report);
        }
        if reports.is_empty() {
            return Err(user(format!("no distribution in {} matches the columns of {}", dist.display(), points.display())));
        }
        if self.json {
            return Ok(pretty(&reports));
        }
        let mut s = String::new();
        for r in &reports {
            let _ = writeln!(s, "{}: {:.4} of the mass covered ({} bins per dim, {} points)", r.dims.join("+"), r.covered_mass, r.bins_per_dim, r.points);
        }
        Ok(s)
    }

    // ------------------------------------------------------------ safety

    fn analyze(&self, inputs: &[PathBuf]) -> Res<String> {
        let mut reports: Vec<ScenarioSafetyReport> = Vec::new();
        for input in inputs {
            if !input.exists() {
                return Err(user(format!("{}: no such file", input.display())));
            }
            let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let fail = |e: &dyn std::fmt::Display| user(format!("{}: {e}", input.display()));
            match input.extension().and_then(|e| e.to_str()) {
                Some("xosc") => {
                    let doc = read_openscenario(input).map_err(|e| fail(&e))?;
                    let replay = replay_scenario(&doc).map_err(|e| fail(&e))?;
                    let r = analyze_scenario(&doc, &replay, &self.cfg.safety, self.exec());
                    reports.push(self.no_pairs_is_pass(&stem, r).map_err(|e| fail(&e))?);
                }
                Some("jsonl") => {
                    for rec in parse_recording(input).map_err(|e| fail(&e))? {
                        let r = analyze_recording(&rec, &self.cfg.safety, self.exec());
                        reports.push(self.no_pairs_is_pass(&rec.recording_id, r).map_err(|e| fail(&e))?);
                    }
                }
                _ => return Err(user(format!("{}: expected a .xosc scenario or .jsonl recording", input.display()))),
            }
        }
        let dir = self.out("safety");
        for r in &reports {
            let name = file_stem_for(&r.scenario);
            write(&dir.join(format!("{name}.json")), pretty(r))?;
            write(&dir.join(format!("{name}.csv")), scores_csv(&r.series))?;
        }
        if self.json {
            return Ok(pretty(&reports));
        }
        let mut s = String::new();
        for r in &reports {
            let _ = writeln!(s, "{}: {:?}", r.scenario, r.verdict);
            for p in &r.pairs {
                let ttc = if p.min_ttc.is_finite() { format!("{:.2} s", p.min_ttc) } else { "inf".into() };
                let _ = writeln!(s, "  {} vs {}: min TTC {ttc}, {:.0}% unsafe", p.actor_a, p.actor_b, 100.0 * p.unsafe_fraction);
            }
            for reason in &r.reasons {
                let _ = writeln!(s, "  reason: {reason}");
            }
        }
        Ok(s)
    }

    /// A scene with nobody to collide with passes with an empty report.
    fn no_pairs_is_pass(&self, name: &str, r: Result<ScenarioSafetyReport, SafetyError>) -> Result<ScenarioSafetyReport, SafetyError> {
        match r {
            Ok(mut r) => {
                r.scenario = name.to_string();
                Ok(r)
            }
            Err(SafetyError::EmptySeries) => {
                log::warn!("{name}: no actor pairs in scope; nothing to score");
                Ok(ScenarioSafetyReport {
                    scenario: name.to_string(),
                    config: self.cfg.safety,
                    pairs: Vec::new(),
                    verdict: Verdict::Pass,
                    reasons: Vec::new(),
                    series: Vec::new(),
                })
            }
        }
    }

    // ------------------------------------------------------------ bench, gen

    fn bench(&self, what: &BenchCommand) -> Res<String> {
        let (name, csv, rows) = match what {
            BenchCommand::Ingest { sizes, workers } => {
                let workers = workers.unwrap_or(self.cfg.ingest.workers).max(1);
                let work = self.out("bench_tmp");
                fs::create_dir_all(&work).map_err(|e| io_fail(&work, e))?;
                let samples = throughput_curve(sizes, workers, &work, 0).map_err(|e| io_fail(&work, e))?;
                let _ = fs::remove_dir_all(&work);
                ("bench_ingest.csv", throughput_csv(&samples), serde_json::to_value(&samples))
            }
            BenchCommand::Search { sizes, repeats } => {
                let queries = [synth::QUERY_LANE_CHANGE, synth::QUERY_STOP_RED, synth::QUERY_TURN_3WAY, synth::QUERY_MERGE];
                let samples = latency_probe(sizes, &queries, *repeats, 0).map_err(|e| user(e.to_string()))?;
                ("bench_search.csv", latency_csv(&samples), serde_json::to_value(&samples))
            }
        };
        write(&self.out(name), &csv)?;
        if self.json {
            return Ok(pretty(&rows.expect("samples serialize")));
        }
        Ok(csv)
    }

    fn gen(&self, what: &GenCommand) -> Res<String> {
        let dir = &self.cfg.paths.data_dir;
        fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
        let files = match what {
            GenCommand::Corpus => {
                let (map, recs) = synth::pipeline_corpus();
                let map_path = &self.cfg.paths.map;
                if map_path.as_os_str().is_empty() {
                    return Err(user("paths.map is empty; the corpus needs somewhere to put its map"));
                }
                write(map_path, map.to_json())?;
                let mut files = vec![map_path.clone()];
                for r in &recs {
                    let p = dir.join(format!("{}.jsonl", file_stem_for(&r.recording_id)));
                    write_recording_file(r, &p).map_err(|e| io_fail(&p, e))?;
                    files.push(p);
                }
                files
            }
            GenCommand::Bulk { bytes, seed } => synth::write_corpus(dir, *bytes, *seed).map_err(|e| io_fail(dir, e))?,
        };
        if self.json {
            return Ok(pretty(&files));
        }
        Ok(format!("wrote {} file(s) under {}\n", files.len(), dir.display()))
    }
}

/// Parameter values a template carries before any sampling.
fn nominal_values(g: &ParameterGroup) -> Vec<(String, f64)> {
    match g {
        ParameterGroup::Univariate(d) => vec![(d.name.clone(), d.mean())],
        ParameterGroup::Joint(j) => j.dims.iter().cloned().zip(j.moments().0).collect(),
        ParameterGroup::Enumeration { name, values } => vec![(name.clone(), values[0])],
    }
}

fn group_summary(g: &ParameterGroup) -> serde_json::Value {
    match g {
        ParameterGroup::Univariate(d) => json!({"type": "univariate", "names": [d.name], "mean": d.mean(), "support": [d.support]}),
        ParameterGroup::Joint(j) => {
            let (means, corr) = j.moments();
            json!({"type": "joint", "names": j.dims, "mean": means, "correlation": corr, "support": j.support})
        }
        ParameterGroup::Enumeration { name, values } => json!({"type": "enumeration", "names": [name], "values": values}),
    }
}

fn pdf_csv(d: &UnivariateDistribution) -> String {
    let (lo, hi) = d.support;
    let mut s = String::from("x,pdf\n");
    for k in 0..=200 {
        let x = lo + (hi - lo) * k as f64 / 200.0;
        let _ = writeln!(s, "{x},{}", d.pdf(x));
    }
    s
}

/// CSV with a header row; cells are kept as text until a column is used.
fn read_points(path: &Path) -> Res<(Vec<String>, Vec<Vec<String>>)> {
    let text = read(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| user(format!("{}: empty file", path.display())))?
        .split(',')
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<String> = line.split(',').map(|v| v.trim().to_string()).collect();
        if row.len() != header.len() {
            return Err(user(format!("{}: line {}: expected {} columns", path.display(), i + 2, header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// The given columns of every row as numbers.
fn numeric_columns(path: &Path, header: &[String], rows: &[Vec<String>], cols: &[usize]) -> Res<Vec<Vec<f64>>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            cols.iter()
                .map(|&c| {
                    r[c].parse::<f64>()
                        .map_err(|e| user(format!("{}: line {}, column `{}`: {e}", path.display(), i + 2, header[c])))
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn caret_points_at_the_error() {
        let q = "bad &&& query";
        let e = safr_core::index::parse_query(q).unwrap_err();
        let text = caret(q, &e);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let col = lines[2].find('^').unwrap() - 2;
        assert!(col <= q.len());
        assert!(lines[0].contains("at"));
    }

    #[test]
    fn stems_are_safe() {
        assert_eq!(file_stem_for("a/b c.1"), "a_b_c.1");
    }

    #[test]
    fn event_kinds_used_in_summaries_are_stable() {
        assert_eq!(safr_core::tagger::EventKind::TurnLeft.as_str(), "turn_left");
    }
}
