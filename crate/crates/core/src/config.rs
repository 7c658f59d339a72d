//! Pipeline configuration: one JSON file, every field overridable by key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::analytics::GeoBox;
use crate::corpus::{default_exclusion_groups, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Mandatory; there is no clock-derived default.
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub crime_inputs: Vec<PathBuf>,
    #[serde(default)]
    pub article_inputs: Vec<PathBuf>,
    #[serde(default)]
    pub crime_rules: Option<PathBuf>,
    #[serde(default)]
    pub dictionary: Option<PathBuf>,
    #[serde(default = "default_exclusion_groups")]
    pub exclusion_groups: Vec<Vec<String>>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub gazetteer_dir: Option<PathBuf>,
    #[serde(default = "defaults::threshold")]
    pub threshold: usize,
    #[serde(default = "defaults::min_df")]
    pub min_df: usize,
    #[serde(default = "defaults::max_df_ratio")]
    pub max_df_ratio: f64,
    #[serde(default = "defaults::max_features")]
    pub max_features: usize,
    #[serde(default = "defaults::k")]
    pub k: usize,
    /// k values for the SSE sweep; accepts a list or text like `2..128`,
    /// `2..128:2` or `2,4,8`.
    #[serde(default, deserialize_with = "sweep_field")]
    pub sweep: Option<Vec<usize>>,
    #[serde(default = "defaults::max_iter")]
    pub kmeans_max_iter: usize,
    #[serde(default = "defaults::tol")]
    pub kmeans_tol: f64,
    #[serde(default = "defaults::eps")]
    pub eps: f64,
    #[serde(default = "defaults::min_samples")]
    pub min_samples: usize,
    #[serde(default = "defaults::lda_topics")]
    pub lda_topics: usize,
    #[serde(default)]
    pub lda_alpha: Option<f64>,
    #[serde(default = "defaults::lda_beta")]
    pub lda_beta: f64,
    #[serde(default = "defaults::lda_iterations")]
    pub lda_iterations: usize,
    #[serde(default = "defaults::top_n")]
    pub top_n: usize,
    #[serde(default = "defaults::outlet_key")]
    pub outlet_key: String,
    #[serde(default = "defaults::word_freq_n")]
    pub word_freq_n: usize,
    #[serde(default)]
    pub geo_box: GeoBox,
}

mod defaults {
    pub fn threshold() -> usize {
        super::DEFAULT_THRESHOLD
    }
    pub fn min_df() -> usize {
        5
    }
    pub fn max_df_ratio() -> f64 {
        0.95
    }
    pub fn max_features() -> usize {
        60
    }
    pub fn k() -> usize {
        64
    }
    pub fn max_iter() -> usize {
        300
    }
    pub fn tol() -> f64 {
        1e-6
    }
    pub fn eps() -> f64 {
        1.0
    }
    pub fn min_samples() -> usize {
        10
    }
    pub fn lda_topics() -> usize {
        50
    }
    pub fn lda_beta() -> f64 {
        0.01
    }
    pub fn lda_iterations() -> usize {
        1000
    }
    pub fn top_n() -> usize {
        10
    }
    pub fn outlet_key() -> String {
        "OutletName".into()
    }
    pub fn word_freq_n() -> usize {
        50
    }
}

/// Parses `a..b` (inclusive), `a..b:step` or a comma list.
pub fn parse_sweep(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse sweep {text:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let ks = if let Some((from, rest)) = text.split_once("..") {
        let (to, step) = match rest.split_once(':') {
            Some((to, step)) => (num(to)?, num(step)?),
            None => (num(rest)?, 1),
        };
        if step == 0 {
            return Err(bad());
        }
        (num(from)?..=to).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if ks.is_empty() {
        return Err(bad());
    }
    Ok(ks)
}

fn sweep_field<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<usize>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        List(Vec<usize>),
        Text(String),
    }
    match Option::<Repr>::deserialize(d)? {
        None => Ok(None),
        Some(Repr::List(v)) => Ok(Some(v)),
        Some(Repr::Text(t)) => parse_sweep(&t).map(Some).map_err(serde::de::Error::custom),
    }
}

const PATH_KEYS: [&str; 7] = [
    "output_dir",
    "crime_inputs",
    "article_inputs",
    "crime_rules",
    "dictionary",
    "stopwords",
    "gazetteer_dir",
];
const PATH_LIST_KEYS: [&str; 2] = ["crime_inputs", "article_inputs"];

/// Collects a raw JSON object plus overrides, then resolves relative paths.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    value: Map<String, Value>,
    base: PathBuf,
}

fn absolute(base: &Path, p: &str) -> String {
    let path = Path::new(p);
    if path.is_absolute() {
        p.to_string()
    } else {
        base.join(path).to_string_lossy().into_owned()
    }
}

impl ConfigBuilder {
    /// Relative paths in the file are taken relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let Value::Object(value) = value else {
            return Err(Error::Config(format!("{}: top level must be a JSON object", path.display())));
        };
        let dir = path.parent().unwrap_or(Path::new("."));
        let base = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
        let base = std::path::absolute(base).map_err(|e| Error::io(base, e))?;
        let mut b = Self { value, base };
        b.resolve_paths();
        Ok(b)
    }

    /// No file: relative paths resolve against `base`.
    pub fn empty(base: &Path) -> Self {
        Self {
            value: Map::new(),
            base: base.to_path_buf(),
        }
    }

    fn resolve_paths(&mut self) {
        for key in PATH_KEYS {
            match self.value.get_mut(key) {
                Some(Value::String(s)) => *s = absolute(&self.base, s),
                Some(Value::Array(items)) => {
                    for item in items {
                        if let Value::String(s) = item {
                            *s = absolute(&self.base, s);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    /// Applies one `--key value` override. Dashes in the key become
    /// underscores; path values resolve against `cwd`; list-of-path values
    /// are comma separated; other values are parsed as JSON when possible
    /// and taken as plain text otherwise.
    pub fn set(&mut self, key: &str, raw: &str, cwd: &Path) {
        let key = key.trim_start_matches('-').replace('-', "_");
        let value = if PATH_LIST_KEYS.contains(&key.as_str()) {
            Value::Array(
                raw.split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| Value::String(absolute(cwd, s)))
                    .collect(),
            )
        } else if PATH_KEYS.contains(&key.as_str()) {
            Value::String(absolute(cwd, raw))
        } else if key == "sweep" {
            Value::String(raw.to_string())
        } else {
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
        };
        self.value.insert(key, value);
    }

    pub fn build(self) -> Result<PipelineConfig> {
        let cfg: PipelineConfig =
            serde_json::from_value(Value::Object(self.value)).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        ConfigBuilder::from_file(path)?.build()
    }

    fn require_file(what: &str, p: &Path) -> Result<()> {
        if p.exists() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} {} does not exist", p.display())))
        }
    }

    /// Checks every referenced path and parameter before any work starts.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: &str| Err(Error::Config(m.to_string()));
        if self.crime_inputs.is_empty() {
            return cfg_err("crime_inputs is empty");
        }
        if self.article_inputs.is_empty() {
            return cfg_err("article_inputs is empty");
        }
        for p in &self.crime_inputs {
            Self::require_file("crime input", p)?;
        }
        for p in &self.article_inputs {
            Self::require_file("article input", p)?;
        }
        for (what, p) in [
            ("crime rules", &self.crime_rules),
            ("dictionary", &self.dictionary),
            ("stopword list", &self.stopwords),
            ("gazetteer directory", &self.gazetteer_dir),
        ] {
            if let Some(p) = p {
                Self::require_file(what, p)?;
            }
        }
        if self.threshold == 0 {
            return cfg_err("threshold must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.max_df_ratio) {
            return cfg_err("max_df_ratio must lie in [0, 1]");
        }
        if self.max_features == 0 || self.k == 0 || self.min_samples == 0 || self.lda_topics == 0 || self.top_n == 0 {
            return cfg_err("max_features, k, min_samples, lda_topics and top_n must be positive");
        }
        if !(self.eps > 0.0) {
            return cfg_err("eps must be positive");
        }
        if !(self.lda_beta > 0.0) || self.lda_alpha.is_some_and(|a| !(a > 0.0)) {
            return cfg_err("LDA alpha and beta must be positive");
        }
        if let Some(s) = &self.sweep {
            if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
                return cfg_err("sweep must be a non-empty strictly increasing list of positive k");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_forms() {
        assert_eq!(parse_sweep("2..6").unwrap(), vec![2, 3, 4, 5, 6]);
        assert_eq!(parse_sweep("2..10:4").unwrap(), vec![2, 6, 10]);
        assert_eq!(parse_sweep("2,4,8").unwrap(), vec![2, 4, 8]);
        assert!(parse_sweep("x").is_err());
        assert!(parse_sweep("2..8:0").is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let mut b = ConfigBuilder::empty(Path::new("/tmp"));
        b.set("--output-dir", "out", Path::new("/tmp"));
        assert!(matches!(b.clone().build(), Err(Error::Config(_))));
        b.set("--seed", "7", Path::new("/tmp"));
        let cfg = b.build().unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.output_dir, Path::new("/tmp/out"));
        assert_eq!((cfg.min_df, cfg.max_features, cfg.k, cfg.min_samples), (5, 60, 64, 10));
        assert_eq!(cfg.lda_topics, 50);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn overrides_and_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"seed": 1, "output_dir": "out", "crime_inputs": ["a.csv"], "sweep": "2..4"}"#).unwrap();
        let mut b = ConfigBuilder::from_file(&path).unwrap();
        b.set("--min-samples", "3", Path::new("/elsewhere"));
        b.set("--article-inputs", "x.csv,y.csv", Path::new("/elsewhere"));
        let cfg = b.build().unwrap();
        let base = std::path::absolute(dir.path()).unwrap();
        assert_eq!(cfg.crime_inputs, vec![base.join("a.csv")]);
        assert_eq!(cfg.article_inputs, vec![PathBuf::from("/elsewhere/x.csv"), PathBuf::from("/elsewhere/y.csv")]);
        assert_eq!(cfg.min_samples, 3);
        assert_eq!(cfg.sweep, Some(vec![2, 3, 4]));
        // inputs are missing on disk
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_key_rejected() {
        let mut b = ConfigBuilder::empty(Path::new("/"));
        b.set("seed", "1", Path::new("/"));
        b.set("output_dir", "o", Path::new("/"));
        b.set("--colour", "red", Path::new("/"));
        assert!(matches!(b.build(), Err(Error::Config(_))));
    }
}
