//! Running a configured experiment and writing its CSV artifacts.
//!
//! Output files (all comma separated, header row first, floats formatted
//! by [`crate::format::real`]):
//!
//! * `counterfactuals.csv`: `query,strategy,rank,source_row,source_label,target,
//!   reference_row,cluster,distance_to_origin,distance_to_core,<feature columns>`,
//!   coordinates in the clustering feature space.
//! * `metrics.csv`: `query,strategy,source_row,source_label,target,returned,
//!   validity,proximity,diversity,sparsity,plausibility,runtime_seconds,reason`.
//!   Failed queries have validity 0, empty metric cells and a reason;
//!   `runtime_seconds` is empty unless `record_runtime` is set.
//! * `curve_<metric>_<strategy>.csv`: `percentile,value`, one file per
//!   metric in `proximity`, `diversity` (descending), `sparsity`,
//!   `plausibility` and, with `record_runtime`, `runtime`.
//! * `summary.csv`: `strategy,queries,explained,coverage` then
//!   `<metric>_mean,<metric>_sem` for validity, proximity, diversity,
//!   sparsity, plausibility and runtime. Means are over explained queries;
//!   `coverage` is explained / queries.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use exdbscan_core::metrics::{mean_and_sem, percentile_curve, LofModel, QueryMetrics, SortOrder};
use exdbscan_core::{
    explain, fit, ConstraintSpec, CounterfactualSet, DatasetMatrix, DbscanModel, ExplanationQuery,
    GraphSet, MetricSpace, Strategy, Target,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::constraints::read_constraints;
use crate::error::{BenchError, Result};
use crate::format::{opt_real, real};
use crate::model_file::load_dataset;
use crate::plan::{build_query_plan, derive_seed, PlannedQuery, QueryPlan};

/// Everything shared by the queries of one experiment.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: DbscanModel,
    pub graphs: GraphSet,
    pub lof: LofModel,
    pub constraints: ConstraintSpec,
    pub plan: QueryPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Explained(CounterfactualSet),
    Failed { kind: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub query: PlannedQuery,
    pub strategy: Strategy,
    pub constraints: ConstraintSpec,
    pub outcome: Outcome,
    pub metrics: QueryMetrics,
}

impl QueryRecord {
    pub fn set(&self) -> Option<&CounterfactualSet> {
        match &self.outcome {
            Outcome::Explained(s) => Some(s),
            Outcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrategySummary {
    pub strategy: Option<Strategy>,
    pub queries: usize,
    pub explained: usize,
    pub validity: Option<(f64, f64)>,
    pub proximity: Option<(f64, f64)>,
    pub diversity: Option<(f64, f64)>,
    pub sparsity: Option<(f64, f64)>,
    pub plausibility: Option<(f64, f64)>,
    pub runtime: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub records: Vec<QueryRecord>,
    pub summaries: Vec<StrategySummary>,
    pub files: Vec<PathBuf>,
    pub plan: QueryPlan,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (data, _) = load_dataset(&config.dataset_path, config.standardize)?;
        Self::from_data(config, data)
    }

    /// Fits on an in-memory dataset already in the clustering feature space.
    pub fn from_data(config: ExperimentConfig, data: DatasetMatrix) -> Result<Self> {
        config.validate()?;
        let constraints = match &config.constraints_file {
            Some(path) => read_constraints(path, data.column_names())?,
            None => ConstraintSpec::default(),
        };
        let model = fit(Arc::new(data), config.epsilon, config.min_pts, MetricSpace::Euclidean)?;
        let plan = build_query_plan(&model, config.samples_per_partition, config.seed)?;
        let graphs = GraphSet::build(&model)?;
        let lof = LofModel::fit_clipped(model.data(), config.lof_k, MetricSpace::Euclidean)?;
        Ok(Experiment {
            config,
            model,
            graphs,
            lof,
            constraints,
            plan,
        })
    }

    /// Constraints of one query: the configured rules, plus a random frozen
    /// subset of 1..=n/2 columns when `random_non_actionable` is set.
    pub fn constraints_for(&self, query: &PlannedQuery) -> ConstraintSpec {
        let mut spec = self.constraints.clone();
        let n = self.model.dim();
        if !self.config.random_non_actionable || n < 2 {
            return spec;
        }
        let eligible: Vec<usize> = (0..n)
            .filter(|j| !spec.monotonic.contains_key(j) && !spec.non_actionable.contains(j))
            .collect();
        let room = (n - 1).saturating_sub(spec.non_actionable.len()).min(eligible.len());
        if room == 0 {
            return spec;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(query.seed, 1));
        let size = rng.random_range(1..=n / 2).min(room);
        for i in sample(&mut rng, eligible.len(), size) {
            spec.non_actionable.insert(eligible[i]);
        }
        spec
    }

    fn run_one(&self, query: &PlannedQuery, strategy: Strategy) -> Result<QueryRecord> {
        let constraints = self.constraints_for(query);
        let request = ExplanationQuery::new(
            self.model.data().row(query.source_row).to_vec(),
            Target::Cluster(query.target),
            self.config.k,
            strategy,
        )
        .with_constraints(constraints.clone())
        .with_seed(query.seed);
        let started = Instant::now();
        let result = explain(&self.model, &self.graphs, &request);
        let runtime = started.elapsed().as_secs_f64();
        let (outcome, metrics) = match result {
            Ok(set) => {
                let metrics = QueryMetrics::evaluate(
                    &set,
                    &self.model,
                    &self.graphs,
                    &self.lof,
                    self.config.diversity_distance,
                    runtime,
                )?;
                (Outcome::Explained(set), metrics)
            }
            Err(e) if e.is_query_failure() => (
                Outcome::Failed {
                    kind: e.kind(),
                    reason: e.to_string(),
                },
                QueryMetrics::failed(runtime),
            ),
            Err(e) => return Err(e.into()),
        };
        Ok(QueryRecord {
            query: *query,
            strategy,
            constraints,
            outcome,
            metrics,
        })
    }

    /// Runs every (query, strategy) pair, in parallel, returning records in
    /// plan order with strategies in configured order.
    pub fn run(&self) -> Result<Vec<QueryRecord>> {
        let jobs: Vec<(&PlannedQuery, Strategy)> = self
            .plan
            .queries
            .iter()
            .flat_map(|q| self.config.strategies.iter().map(move |&s| (q, s)))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.threads)
            .build()
            .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
        let results: Vec<Result<QueryRecord>> =
            pool.install(|| jobs.par_iter().map(|&(q, s)| self.run_one(q, s)).collect());
        results.into_iter().collect()
    }
}

pub fn summarize(records: &[QueryRecord], strategy: Strategy) -> StrategySummary {
    let mine: Vec<&QueryMetrics> = records
        .iter()
        .filter(|r| r.strategy == strategy)
        .map(|r| &r.metrics)
        .collect();
    let explained: Vec<&QueryMetrics> = mine
        .iter()
        .copied()
        .filter(|m| m.proximity.is_some())
        .collect();
    let stat = |f: &dyn Fn(&QueryMetrics) -> Option<f64>| {
        let vals: Vec<f64> = explained.iter().filter_map(|m| f(m)).collect();
        mean_and_sem(&vals)
    };
    StrategySummary {
        strategy: Some(strategy),
        queries: mine.len(),
        explained: explained.len(),
        validity: stat(&|m| Some(m.validity)),
        proximity: stat(&|m| m.proximity),
        diversity: stat(&|m| m.diversity),
        sparsity: stat(&|m| m.sparsity),
        plausibility: stat(&|m| m.plausibility),
        runtime: stat(&|m| Some(m.runtime_seconds)),
    }
}

fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<std::fs::File>, PathBuf)> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| BenchError::io(&path, e))?;
    Ok((csv::Writer::from_writer(file), path))
}

fn csv_err(path: &Path, e: csv::Error) -> BenchError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BenchError::io(path, io),
        other => BenchError::malformed(path, format!("{other:?}")),
    }
}

fn write_rows(dir: &Path, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
    let (mut w, path) = csv_writer(dir, name)?;
    w.write_record(header).map_err(|e| csv_err(&path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(&path, e))?;
    Ok(path)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Writes every artifact into `dir` and returns the written paths.
pub fn write_outputs(
    exp: &Experiment,
    records: &[QueryRecord],
    summaries: &[StrategySummary],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let record_runtime = exp.config.record_runtime;
    let mut files = Vec::new();

    let mut header = strings(&[
        "query",
        "strategy",
        "rank",
        "source_row",
        "source_label",
        "target",
        "reference_row",
        "cluster",
        "distance_to_origin",
        "distance_to_core",
    ]);
    header.extend(exp.model.data().column_names().iter().cloned());
    let mut rows = Vec::new();
    for r in records {
        let Some(set) = r.set() else { continue };
        for (rank, cf) in set.counterfactuals.iter().enumerate() {
            let mut row = vec![
                r.query.index.to_string(),
                r.strategy.name().to_string(),
                rank.to_string(),
                r.query.source_row.to_string(),
                r.query.source_label.to_string(),
                r.query.target.to_string(),
                cf.reference_row.to_string(),
                cf.cluster.to_string(),
                real(cf.distance_to_origin),
                real(cf.distance_to_core),
            ];
            row.extend(cf.coords.iter().map(|&v| real(v)));
            rows.push(row);
        }
    }
    files.push(write_rows(dir, "counterfactuals.csv", &header, &rows)?);

    let header = strings(&[
        "query",
        "strategy",
        "source_row",
        "source_label",
        "target",
        "returned",
        "validity",
        "proximity",
        "diversity",
        "sparsity",
        "plausibility",
        "runtime_seconds",
        "reason",
    ]);
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let m = &r.metrics;
            vec![
                r.query.index.to_string(),
                r.strategy.name().to_string(),
                r.query.source_row.to_string(),
                r.query.source_label.to_string(),
                r.query.target.to_string(),
                r.set().map_or(0, |s| s.len()).to_string(),
                real(m.validity),
                opt_real(m.proximity),
                opt_real(m.diversity),
                opt_real(m.sparsity),
                opt_real(m.plausibility),
                if record_runtime { real(m.runtime_seconds) } else { String::new() },
                match &r.outcome {
                    Outcome::Explained(_) => String::new(),
                    Outcome::Failed { kind, reason } => format!("{kind}: {reason}"),
                },
            ]
        })
        .collect();
    files.push(write_rows(dir, "metrics.csv", &header, &rows)?);

    type Getter = fn(&QueryMetrics) -> Option<f64>;
    let mut curves: Vec<(&str, Getter, SortOrder)> = vec![
        ("proximity", |m| m.proximity, SortOrder::Ascending),
        ("diversity", |m| m.diversity, SortOrder::Descending),
        ("sparsity", |m| m.sparsity, SortOrder::Ascending),
        ("plausibility", |m| m.plausibility, SortOrder::Ascending),
    ];
    if record_runtime {
        curves.push(("runtime", |m| Some(m.runtime_seconds), SortOrder::Ascending));
    }
    let header = strings(&["percentile", "value"]);
    for &strategy in &exp.config.strategies {
        let mine: Vec<&QueryRecord> = records.iter().filter(|r| r.strategy == strategy).collect();
        for (metric, get, order) in &curves {
            let values: Vec<f64> = mine.iter().filter_map(|r| get(&r.metrics)).collect();
            let curve = percentile_curve(&values, mine.len(), *order)?;
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|&(x, y)| vec![real(x), real(y)])
                .collect();
            let name = format!("curve_{metric}_{}.csv", strategy.name());
            files.push(write_rows(dir, &name, &header, &rows)?);
        }
    }

    let mut header = strings(&["strategy", "queries", "explained", "coverage"]);
    for metric in ["validity", "proximity", "diversity", "sparsity", "plausibility", "runtime"] {
        header.push(format!("{metric}_mean"));
        header.push(format!("{metric}_sem"));
    }
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let coverage = if s.queries == 0 {
                None
            } else {
                Some(s.explained as f64 / s.queries as f64)
            };
            let mut row = vec![
                s.strategy.map(|x| x.name().to_string()).unwrap_or_default(),
                s.queries.to_string(),
                s.explained.to_string(),
                opt_real(coverage),
            ];
            let runtime = if record_runtime { s.runtime } else { None };
            for stat in [s.validity, s.proximity, s.diversity, s.sparsity, s.plausibility, runtime] {
                row.push(opt_real(stat.map(|v| v.0)));
                row.push(opt_real(stat.map(|v| v.1)));
            }
            row
        })
        .collect();
    files.push(write_rows(dir, "summary.csv", &header, &rows)?);
    Ok(files)
}

/// Prepares, runs and writes an experiment to `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let exp = Experiment::prepare(config.clone())?;
    run_prepared(&exp)
}

pub fn run_prepared(exp: &Experiment) -> Result<ExperimentReport> {
    let records = exp.run()?;
    let summaries: Vec<StrategySummary> = exp
        .config
        .strategies
        .iter()
        .map(|&s| summarize(&records, s))
        .collect();
    let files = write_outputs(exp, &records, &summaries, &exp.config.output_dir)?;
    Ok(ExperimentReport {
        records,
        summaries,
        files,
        plan: exp.plan.clone(),
    })
}
