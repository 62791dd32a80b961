//! Pipeline configuration: one TOML file plus `SAFR_<SECTION>_<KEY>`
//! environment overrides.
//!
//! Every key is optional. Values are checked against the defaults' types so
//! errors name the offending field (`tagger.turn_angle`). Relative paths are
//! resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use safr_core::sceann::SafetyConfig;
use safr_core::scevar::{FitKind, SamplingMode};
use safr_core::tagger::TaggerConfig;
use serde::{Deserialize, Serialize};
use toml::Value;

pub const ENV_PREFIX: &str = "SAFR_";
pub const DEFAULT_FILE: &str = "safr.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw recordings (`*.jsonl`) for `ingest` without arguments.
    pub data_dir: PathBuf,
    /// Native JSON or OpenDRIVE map; empty for none.
    pub map: PathBuf,
    pub index_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            data_dir: "data".into(),
            map: "map.json".into(),
            index_dir: "index".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSettings {
    /// 0 uses every available core.
    pub workers: usize,
}

impl Default for IngestSettings {
    fn default() -> Self {
        IngestSettings { workers: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuerySettings {
    /// Co-occurrence slack for `&`, seconds.
    pub slack: f64,
}

impl Default for QuerySettings {
    fn default() -> Self {
        QuerySettings {
            slack: safr_core::index::DEFAULT_SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSettings {
    pub kind: FitKind,
    /// Histogram bins; 0 picks Freedman-Diaconis.
    pub bins: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings { kind: FitKind::Kde, bins: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSettings {
    pub seed: u64,
    pub mode: SamplingMode,
    /// `numberOfTestRuns` written into distribution files.
    pub runs: usize,
    pub coverage_bins: usize,
}

impl Default for SamplingSettings {
    fn default() -> Self {
        SamplingSettings {
            seed: 0,
            mode: SamplingMode::Stratified,
            runs: 100,
            coverage_bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub paths: Paths,
    pub ingest: IngestSettings,
    pub tagger: TaggerConfig,
    pub query: QuerySettings,
    pub safety: SafetyConfig,
    pub fit: FitSettings,
    pub sampling: SamplingSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

/// Overlays `patch` on `base`, rejecting unknown keys and type changes.
fn merge(base: &mut Value, patch: Value, path: &str) -> Result<(), ConfigError> {
    match (base, patch) {
        (Value::Table(b), Value::Table(p)) => {
            for (k, v) in p {
                let sub = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = b.get_mut(&k).ok_or_else(|| ConfigError(format!("unknown field `{sub}`")))?;
                merge(slot, v, &sub)?;
            }
            Ok(())
        }
        (Value::Float(b), Value::Integer(i)) => {
            *b = i as f64;
            Ok(())
        }
        (b, p) if std::mem::discriminant(b) == std::mem::discriminant(&p) => {
            *b = p;
            Ok(())
        }
        (b, p) => Err(ConfigError(format!(
            "field `{path}`: expected {}, found {}",
            type_name(b),
            type_name(&p)
        ))),
    }
}

/// Parses an environment string into the type of the default at that slot.
fn env_value(like: &Value, raw: &str, var: &str, path: &str) -> Result<Value, ConfigError> {
    let bad = |what: &str| ConfigError(format!("{var}: field `{path}` expects {what}, got `{raw}`"));
    Ok(match like {
        Value::String(_) => Value::String(raw.to_string()),
        Value::Integer(_) => Value::Integer(raw.trim().parse().map_err(|_| bad("an integer"))?),
        Value::Float(_) => Value::Float(raw.trim().parse().map_err(|_| bad("a float"))?),
        Value::Boolean(_) => Value::Boolean(raw.trim().parse().map_err(|_| bad("true or false"))?),
        _ => return Err(bad("a scalar")),
    })
}

fn apply_env(value: &mut Value, vars: &[(String, String)]) -> Result<(), ConfigError> {
    let Value::Table(root) = value else { unreachable!("config root is a table") };
    for (var, raw) in vars {
        let Some(rest) = var.strip_prefix(ENV_PREFIX) else { continue };
        let rest = rest.to_ascii_lowercase();
        let Some(section) = root.keys().find(|s| rest.starts_with(&format!("{s}_"))).cloned() else {
            continue;
        };
        let key = &rest[section.len() + 1..];
        let path = format!("{section}.{key}");
        let Some(Value::Table(t)) = root.get_mut(&section) else { continue };
        let slot = t
            .get_mut(key)
            .ok_or_else(|| ConfigError(format!("{var}: unknown field `{path}`")))?;
        *slot = env_value(slot, raw, var, &path)?;
    }
    Ok(())
}

impl Config {
    /// Defaults, then the file (if any), then environment overrides.
    pub fn load(file: Option<&Path>, vars: &[(String, String)]) -> Result<Config, ConfigError> {
        let mut value = Value::try_from(Config::default()).map_err(|e| ConfigError(e.to_string()))?;
        let mut base_dir = PathBuf::from(".");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            let patch: Value = text
                .parse::<toml::Table>()
                .map(Value::Table)
                .map_err(|e| ConfigError(format!("{}: {}", path.display(), e.message())))?;
            merge(&mut value, patch, "")?;
            if let Some(dir) = path.parent() {
                base_dir = dir.to_path_buf();
            }
        }
        apply_env(&mut value, vars)?;
        let mut cfg: Config = value.try_into().map_err(|e: toml::de::Error| ConfigError(e.message().to_string()))?;
        cfg.resolve_paths(&base_dir);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() && base != Path::new(".") {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.data_dir);
        fix(&mut self.paths.map);
        fix(&mut self.paths.index_dir);
        fix(&mut self.paths.output_dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    fn file(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("safr.toml");
        std::fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = Config::default();
        let (_d, p) = file(&c.to_toml());
        let back = Config::load(Some(&p), &[]).unwrap();
        assert_eq!(back.tagger, c.tagger);
        assert_eq!(back.safety, c.safety);
        assert_eq!(back.paths.output_dir, p.parent().unwrap().join("out"));
    }

    #[test]
    fn file_and_env_layers() {
        let (_d, p) = file("[tagger]\nturn_angle = 1\n[sampling]\nseed = 3\n");
        let c = Config::load(Some(&p), &vars(&[("SAFR_SAMPLING_SEED", "9"), ("SAFR_SAFETY_PAIR_SCOPE", "all-pairs"), ("SAFR_OTHER", "x")])).unwrap();
        assert_eq!(c.tagger.turn_angle, 1.0);
        assert_eq!(c.sampling.seed, 9);
        assert_eq!(c.safety.pair_scope, safr_core::sceann::PairScope::AllPairs);
    }

    #[test]
    fn errors_name_the_field() {
        let (_d, p) = file("[tagger]\nturn_angel = 1.0\n");
        assert!(Config::load(Some(&p), &[]).unwrap_err().0.contains("tagger.turn_angel"));
        let (_d, p) = file("[safety]\nttc_threshold = \"high\"\n");
        let e = Config::load(Some(&p), &[]).unwrap_err().0;
        assert!(e.contains("safety.ttc_threshold") && e.contains("float"), "{e}");
        let e = Config::load(None, &vars(&[("SAFR_QUERY_SLACK", "soon")])).unwrap_err().0;
        assert!(e.contains("SAFR_QUERY_SLACK") && e.contains("query.slack"), "{e}");
        let e = Config::load(None, &vars(&[("SAFR_SAFETY_PAIR_SCOPE", "everyone")])).unwrap_err().0;
        assert!(e.contains("pair_scope") || e.contains("everyone"), "{e}");
    }
}
