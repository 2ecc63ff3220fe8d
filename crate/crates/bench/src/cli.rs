//! `exdbscan` command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use exdbscan_core::{explain, fit, ExplanationQuery, GraphSet, MetricSpace, Strategy, Target};

use crate::config::{default_output_dir, ExperimentConfig};
use crate::constraints::read_constraints;
use crate::error::{BenchError, Result};
use crate::experiment::run_experiment;
use crate::format::{parse_reals, real};
use crate::model_file::{load_dataset, load_model, save_model};

#[derive(Debug, Parser)]
#[command(name = "exdbscan", version, about = "Counterfactual explanations for DBSCAN clusterings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a CSV dataset and write the model file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        min_pts: usize,
        /// Model file; defaults to `model.txt` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Z-score every column before clustering.
        #[arg(long)]
        standardize: bool,
        /// Also write `graph_<cluster>.csv` edge lists into this directory.
        #[arg(long)]
        export_graphs: Option<PathBuf>,
    },
    /// Print counterfactuals for one point, one CSV line each:
    /// coordinates, reference core row, distance to the point.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated coordinates in the dataset's units.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Target cluster label, or `any`.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value = "greedy")]
        strategy: Strategy,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment described by a config file.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `threads` from the config.
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn parse_target(text: &str) -> Result<Target> {
    if text.eq_ignore_ascii_case("any") {
        return Ok(Target::Any);
    }
    text.parse()
        .map(Target::Cluster)
        .map_err(|_| BenchError::Config(format!("target must be a cluster label or `any`, got `{text}`")))
}

fn fit_command(
    data_path: &Path,
    epsilon: f64,
    min_pts: usize,
    out: Option<PathBuf>,
    standardize: bool,
    export_graphs: Option<PathBuf>,
) -> Result<String> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(BenchError::Config("epsilon must be a finite number > 0".into()));
    }
    if min_pts == 0 {
        return Err(BenchError::Config("min_pts must be >= 1".into()));
    }
    let (data, _) = load_dataset(data_path, standardize)?;
    let model = fit(Arc::new(data), epsilon, min_pts, MetricSpace::Euclidean)?;
    let out = out.unwrap_or_else(|| default_output_dir().join("model.txt"));
    save_model(&model, standardize, data_path, &out)?;
    if let Some(dir) = export_graphs {
        std::fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;
        for graph in GraphSet::build(&model)?.iter() {
            let path = dir.join(format!("graph_{}.csv", graph.cluster()));
            let file = std::fs::File::create(&path).map_err(|e| BenchError::io(&path, e))?;
            graph
                .write_edge_list(std::io::BufWriter::new(file))
                .map_err(|e| BenchError::io(&path, e))?;
        }
    }
    Ok(format!(
        "{} clusters, {} core rows, model written to {}\n",
        model.num_clusters(),
        model.is_core().iter().filter(|&&c| c).count(),
        out.display()
    ))
}

#[allow(clippy::too_many_arguments)]
fn explain_command(
    model_path: &Path,
    point: &str,
    target: &str,
    k: usize,
    strategy: Strategy,
    constraints: Option<PathBuf>,
    seed: u64,
) -> Result<String> {
    let loaded = load_model(model_path)?;
    let raw = parse_reals(point).map_err(BenchError::Config)?;
    if raw.len() != loaded.model.dim() {
        return Err(BenchError::Config(format!(
            "point has {} coordinates, model has {}",
            raw.len(),
            loaded.model.dim()
        )));
    }
    let target = parse_target(target)?;
    let spec = match constraints {
        Some(p) => read_constraints(&p, loaded.model.data().column_names())?,
        None => Default::default(),
    };
    let graphs = GraphSet::build(&loaded.model)?;
    let query = ExplanationQuery::new(loaded.to_model_space(&raw), target, k, strategy)
        .with_constraints(spec.clone())
        .with_seed(seed);
    let set = explain(&loaded.model, &graphs, &query)?;
    let mut out = String::new();
    for cf in &set.counterfactuals {
        let mut coords = loaded.to_raw_space(&cf.coords);
        // Unscaling can perturb frozen values by an ulp; report them verbatim.
        for &j in &spec.non_actionable {
            coords[j] = raw[j];
        }
        let fields: Vec<String> = coords
            .iter()
            .map(|&v| real(v))
            .chain([cf.reference_row.to_string(), real(cf.distance_to_origin)])
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

fn evaluate_command(config: &Path, output_dir: Option<PathBuf>, threads: Option<usize>) -> Result<String> {
    let mut cfg = ExperimentConfig::read(config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if let Some(t) = threads {
        cfg.threads = t;
    }
    let report = run_experiment(&cfg)?;
    let mut msg = String::new();
    for (label, size) in &report.plan.short_partitions {
        msg.push_str(&format!(
            "note: partition {label} has {size} members, fewer than samples_per_partition\n"
        ));
    }
    if report.plan.is_empty() {
        msg.push_str("note: query plan is empty, no partition has another cluster to target\n");
    }
    msg.push_str(&format!(
        "{} queries x {} strategies, results in {}\n",
        report.plan.len(),
        cfg.strategies.len(),
        cfg.output_dir.display()
    ));
    Ok(msg)
}

/// Runs the parsed command, returning text for standard output.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Fit {
            data,
            epsilon,
            min_pts,
            out,
            standardize,
            export_graphs,
        } => fit_command(&data, epsilon, min_pts, out, standardize, export_graphs),
        Command::Explain {
            model,
            point,
            target,
            k,
            strategy,
            constraints,
            seed,
        } => explain_command(&model, &point, &target, k, strategy, constraints, seed),
        Command::Evaluate {
            config,
            output_dir,
            threads,
        } => evaluate_command(&config, output_dir, threads),
    }
}

/// Parses `args`, runs, prints and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
            0
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            e.exit_code()
        }
    }
}
