//! Plain-text serialisation of a fitted clustering.
//!
//! ```text
//! epsilon=0.6,min_pts=2,clusters=1,rows=4,cols=1,standardize=false,dataset=fixture.csv
//! row_index,label,is_core
//! 0,0,1
//! 1,0,1
//! 2,0,1
//! 3,-1,0
//! ```
//!
//! Coordinates are not stored; loading re-reads the dataset (the path is
//! kept verbatim and `dataset` is always the last header field, so it may
//! contain commas), re-applies standardisation and checks every DBSCAN
//! invariant against the stored labels.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use exdbscan_core::{fit_scaling, DatasetMatrix, DbscanModel, MetricSpace, ScalingTransform};

use crate::error::{BenchError, Result};
use crate::format::real;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelHeader {
    pub epsilon: f64,
    pub min_pts: usize,
    pub clusters: usize,
    pub rows: usize,
    pub cols: usize,
    pub standardize: bool,
    pub dataset: PathBuf,
}

/// A fitted clustering together with what is needed to map raw points into
/// its feature space.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: DbscanModel,
    pub scaling: Option<ScalingTransform>,
    pub header: ModelHeader,
}

impl LoadedModel {
    pub fn to_model_space(&self, raw: &[f64]) -> Vec<f64> {
        match &self.scaling {
            Some(s) => s.apply_point(raw),
            None => raw.to_vec(),
        }
    }

    pub fn to_raw_space(&self, p: &[f64]) -> Vec<f64> {
        match &self.scaling {
            Some(s) => s.invert_point(p),
            None => p.to_vec(),
        }
    }
}

/// Reads a dataset and optionally standardises it.
pub fn load_dataset(path: &Path, standardize: bool) -> Result<(DatasetMatrix, Option<ScalingTransform>)> {
    let raw = DatasetMatrix::read_csv(path).map_err(|e| match e {
        exdbscan_core::Error::Io(io) => BenchError::io(path, io),
        other => BenchError::malformed(path, other.to_string()),
    })?;
    if !standardize {
        return Ok((raw, None));
    }
    let scaling = fit_scaling(&raw)?;
    Ok((scaling.apply(&raw), Some(scaling)))
}

pub fn write_model<W: Write>(
    model: &DbscanModel,
    standardize: bool,
    dataset: &Path,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(
        out,
        "epsilon={},min_pts={},clusters={},rows={},cols={},standardize={},dataset={}",
        real(model.epsilon()),
        model.min_pts(),
        model.num_clusters(),
        model.labels().len(),
        model.dim(),
        standardize,
        dataset.display()
    )?;
    writeln!(out, "row_index,label,is_core")?;
    for (r, (label, core)) in model.labels().iter().zip(model.is_core()).enumerate() {
        writeln!(out, "{r},{label},{}", u8::from(*core))?;
    }
    Ok(())
}

pub fn save_model(model: &DbscanModel, standardize: bool, dataset: &Path, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    let mut buf = Vec::new();
    write_model(model, standardize, dataset, &mut buf).map_err(|e| BenchError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| BenchError::io(path, e))
}

pub fn parse_header(line: &str) -> std::result::Result<ModelHeader, String> {
    let (fields, dataset) = line
        .split_once(",dataset=")
        .ok_or("header lacks a dataset field")?;
    let mut map = std::collections::BTreeMap::new();
    for part in fields.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("bad header field `{part}`"))?;
        map.insert(k, v);
    }
    fn get<T: std::str::FromStr>(
        map: &std::collections::BTreeMap<&str, &str>,
        key: &str,
    ) -> std::result::Result<T, String> {
        map.get(key)
            .ok_or_else(|| format!("header lacks `{key}`"))?
            .parse()
            .map_err(|_| format!("bad value for `{key}`"))
    }
    Ok(ModelHeader {
        epsilon: get(&map, "epsilon")?,
        min_pts: get(&map, "min_pts")?,
        clusters: get(&map, "clusters")?,
        rows: get(&map, "rows")?,
        cols: get(&map, "cols")?,
        standardize: get(&map, "standardize")?,
        dataset: PathBuf::from(dataset),
    })
}

type Assignment = (ModelHeader, Vec<i32>, Vec<bool>);

pub fn parse_model(text: &str) -> std::result::Result<Assignment, String> {
    let mut lines = text.lines();
    let header = parse_header(lines.next().ok_or("empty model file")?)?;
    if lines.next() != Some("row_index,label,is_core") {
        return Err("missing `row_index,label,is_core` column line".into());
    }
    let mut labels = Vec::with_capacity(header.rows);
    let mut cores = Vec::with_capacity(header.rows);
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        let [row, label, core] = parts[..] else {
            return Err(format!("bad row line `{line}`"));
        };
        if row.parse::<usize>().ok() != Some(i) {
            return Err(format!("expected row index {i}, got `{row}`"));
        }
        labels.push(label.parse::<i32>().map_err(|_| format!("bad label `{label}`"))?);
        cores.push(match core {
            "0" => false,
            "1" => true,
            _ => return Err(format!("bad core flag `{core}`")),
        });
    }
    if labels.len() != header.rows {
        return Err(format!("header promises {} rows, found {}", header.rows, labels.len()));
    }
    Ok((header, labels, cores))
}

/// Relative dataset paths are tried against the working directory first
/// and then against the model file's directory.
fn locate_dataset(dataset: &Path, model_path: &Path) -> PathBuf {
    if dataset.is_absolute() || dataset.exists() {
        return dataset.to_path_buf();
    }
    match model_path.parent() {
        Some(dir) if dir.join(dataset).exists() => dir.join(dataset),
        _ => dataset.to_path_buf(),
    }
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let (header, labels, cores) = parse_model(&text).map_err(|m| BenchError::malformed(path, m))?;
    let dataset = locate_dataset(&header.dataset, path);
    let (data, scaling) = load_dataset(&dataset, header.standardize)?;
    if data.rows() != header.rows || data.cols() != header.cols {
        return Err(BenchError::malformed(
            path,
            format!(
                "model expects {}x{} data, {} is {}x{}",
                header.rows,
                header.cols,
                dataset.display(),
                data.rows(),
                data.cols()
            ),
        ));
    }
    let model = DbscanModel::from_parts(
        Arc::new(data),
        header.epsilon,
        header.min_pts,
        labels,
        cores,
        MetricSpace::Euclidean,
    )?;
    if model.num_clusters() != header.clusters {
        return Err(BenchError::malformed(
            path,
            format!("header promises {} clusters, labels hold {}", header.clusters, model.num_clusters()),
        ));
    }
    Ok(LoadedModel {
        model,
        scaling,
        header,
    })
}
