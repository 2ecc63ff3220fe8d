//! Experiment configuration: a flat `key = value` text file.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `dataset` | required | CSV file, relative to the config file |
//! | `epsilon` | required | DBSCAN radius, `> 0` |
//! | `min_pts` | required | DBSCAN core threshold, `>= 1` |
//! | `k` | 10 | counterfactuals per query |
//! | `samples_per_partition` | 10 | sources drawn from each cluster and from noise |
//! | `strategies` | `greedy` | comma list of selection strategies |
//! | `seed` | 0 | master seed |
//! | `standardize` | true | z-score columns before clustering |
//! | `constraints_file` | none | constraint rules, see [`crate::constraints`] |
//! | `random_non_actionable` | false | freeze 1..=n/2 random columns per query |
//! | `lof_k` | 20 | LOF neighbourhood size, clipped to rows - 1 |
//! | `diversity_distance` | `graph` | `graph` or `euclidean` |
//! | `threads` | 0 | worker threads, 0 = one per CPU |
//! | `record_runtime` | false | write wall-clock seconds per query |
//! | `output_dir` | see below | result directory, relative to the config file |
//!
//! Without `output_dir`, results go to `$EXDBSCAN_OUTPUT_DIR` or, failing
//! that, `exdbscan-out` in the working directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use exdbscan_core::metrics::{DiversityDistance, DEFAULT_LOF_K};
use exdbscan_core::Strategy;

use crate::error::{BenchError, Result};

pub const OUTPUT_DIR_ENV: &str = "EXDBSCAN_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "exdbscan-out";

/// Output directory used when none is configured.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub epsilon: f64,
    pub min_pts: usize,
    pub k: usize,
    pub samples_per_partition: usize,
    pub strategies: Vec<Strategy>,
    pub seed: u64,
    pub standardize: bool,
    pub constraints_file: Option<PathBuf>,
    pub random_non_actionable: bool,
    pub lof_k: usize,
    pub diversity_distance: DiversityDistance,
    pub threads: usize,
    pub record_runtime: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Config with defaults for everything but the required keys.
    pub fn new(dataset_path: impl Into<PathBuf>, epsilon: f64, min_pts: usize) -> Self {
        ExperimentConfig {
            dataset_path: dataset_path.into(),
            epsilon,
            min_pts,
            k: 10,
            samples_per_partition: 10,
            strategies: vec![Strategy::Greedy],
            seed: 0,
            standardize: true,
            constraints_file: None,
            random_non_actionable: false,
            lof_k: DEFAULT_LOF_K,
            diversity_distance: DiversityDistance::Graph,
            threads: 0,
            record_runtime: false,
            output_dir: default_output_dir(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if entries.contains_key(&key) {
                return Err(BenchError::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
            entries.insert(key, (lineno + 1, value.trim().to_string()));
        }

        let mut take = |key: &str| entries.remove(key);
        let required = |v: Option<(usize, String)>, key: &str| {
            v.ok_or_else(|| BenchError::Config(format!("missing required key `{key}`")))
        };
        let dataset = required(take("dataset"), "dataset")?;
        let epsilon = required(take("epsilon"), "epsilon")?;
        let min_pts = required(take("min_pts"), "min_pts")?;
        let mut cfg = ExperimentConfig::new(
            base.join(&dataset.1),
            value("epsilon", &epsilon)?,
            value("min_pts", &min_pts)?,
        );
        if let Some(v) = take("k") {
            cfg.k = value("k", &v)?;
        }
        if let Some(v) = take("samples_per_partition") {
            cfg.samples_per_partition = value("samples_per_partition", &v)?;
        }
        if let Some(v) = take("strategies") {
            cfg.strategies = parse_strategies(&v.1)
                .map_err(|m| BenchError::Config(format!("line {}: {m}", v.0)))?;
        }
        if let Some(v) = take("seed") {
            cfg.seed = value("seed", &v)?;
        }
        if let Some(v) = take("standardize") {
            cfg.standardize = value("standardize", &v)?;
        }
        if let Some(v) = take("constraints_file") {
            cfg.constraints_file = Some(base.join(v.1));
        }
        if let Some(v) = take("random_non_actionable") {
            cfg.random_non_actionable = value("random_non_actionable", &v)?;
        }
        if let Some(v) = take("lof_k") {
            cfg.lof_k = value("lof_k", &v)?;
        }
        if let Some(v) = take("diversity_distance") {
            cfg.diversity_distance = match v.1.as_str() {
                "graph" => DiversityDistance::Graph,
                "euclidean" => DiversityDistance::Euclidean,
                other => {
                    return Err(BenchError::Config(format!(
                        "line {}: diversity_distance must be graph or euclidean, got `{other}`",
                        v.0
                    )))
                }
            };
        }
        if let Some(v) = take("threads") {
            cfg.threads = value("threads", &v)?;
        }
        if let Some(v) = take("record_runtime") {
            cfg.record_runtime = value("record_runtime", &v)?;
        }
        if let Some(v) = take("output_dir") {
            cfg.output_dir = base.join(v.1);
        }
        if let Some((key, (line, _))) = entries.into_iter().next() {
            return Err(BenchError::Config(format!("line {line}: unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(BenchError::Config(m.into()));
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return fail("epsilon must be a finite number > 0");
        }
        if self.min_pts == 0 {
            return fail("min_pts must be >= 1");
        }
        if self.k == 0 {
            return fail("k must be >= 1");
        }
        if self.samples_per_partition == 0 {
            return fail("samples_per_partition must be >= 1");
        }
        if self.strategies.is_empty() {
            return fail("at least one strategy is required");
        }
        if self.lof_k == 0 {
            return fail("lof_k must be >= 1");
        }
        Ok(())
    }
}

fn value<T: FromStr>(key: &str, (line, text): &(usize, String)) -> Result<T> {
    text.parse()
        .map_err(|_| BenchError::Config(format!("line {line}: bad value `{text}` for `{key}`")))
}

pub fn parse_strategies(text: &str) -> std::result::Result<Vec<Strategy>, String> {
    let mut out: Vec<Strategy> = Vec::new();
    for name in text.split(',').map(str::trim) {
        let s: Strategy = name.parse().map_err(|_| format!("unknown strategy `{name}`"))?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}
