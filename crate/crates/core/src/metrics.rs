//! Per-query evaluation metrics and percentile-curve aggregation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::cluster_graph::GraphSet;
use crate::constructor::{Counterfactual, CounterfactualSet};
use crate::data::{DatasetMatrix, MetricSpace};
use crate::dbscan::DbscanModel;
use crate::error::{Error, Result};

/// Relative threshold above which a feature counts as changed.
pub const SPARSITY_TOLERANCE: f64 = 1e-9;
/// Floor on reachability distances so duplicated points keep a finite density.
pub const LOF_DISTANCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_LOF_K: usize = 20;

/// Metrics of one explanation query. Everything but validity and runtime is
/// `None` exactly when no counterfactual was valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryMetrics {
    pub validity: f64,
    pub proximity: Option<f64>,
    pub diversity: Option<f64>,
    pub sparsity: Option<f64>,
    pub plausibility: Option<f64>,
    pub runtime_seconds: f64,
}

impl QueryMetrics {
    /// Metrics of a query that produced nothing.
    pub fn failed(runtime_seconds: f64) -> Self {
        QueryMetrics {
            runtime_seconds,
            ..Default::default()
        }
    }

    /// Computes every metric over the valid members of `set`.
    pub fn evaluate(
        set: &CounterfactualSet,
        model: &DbscanModel,
        graphs: &GraphSet,
        lof: &LofModel,
        diversity_distance: DiversityDistance,
        runtime_seconds: f64,
    ) -> Result<Self> {
        let valid = valid_members(set, model)?;
        let validity = if set.is_empty() {
            0.0
        } else {
            valid.len() as f64 / set.len() as f64
        };
        if valid.is_empty() {
            return Ok(QueryMetrics {
                validity,
                runtime_seconds,
                ..Default::default()
            });
        }
        let origin = &set.origin;
        let plaus = valid
            .iter()
            .map(|cf| lof.score(&cf.coords))
            .collect::<Result<Vec<_>>>()?;
        Ok(QueryMetrics {
            validity,
            proximity: Some(mean_distance(&valid, origin, model.space())),
            diversity: Some(diversity_of(&valid, graphs, diversity_distance)?),
            sparsity: Some(sparsity_of(&valid, origin)),
            plausibility: Some(plaus.iter().sum::<f64>() / plaus.len() as f64),
            runtime_seconds,
        })
    }
}

fn is_valid(cf: &Counterfactual, model: &DbscanModel) -> Result<bool> {
    Ok(model.assign(&cf.coords)? == cf.cluster as i32)
}

fn valid_members<'s>(
    set: &'s CounterfactualSet,
    model: &DbscanModel,
) -> Result<Vec<&'s Counterfactual>> {
    let mut out = Vec::new();
    for cf in &set.counterfactuals {
        if is_valid(cf, model)? {
            out.push(cf);
        }
    }
    Ok(out)
}

/// Fraction of counterfactuals assigned to `target`; 0 for an empty set.
pub fn validity(set: &CounterfactualSet, model: &DbscanModel, target: usize) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for cf in &set.counterfactuals {
        if model.assign(&cf.coords)? == target as i32 {
            hits += 1;
        }
    }
    Ok(hits as f64 / set.len() as f64)
}

fn mean_distance(cfs: &[&Counterfactual], origin: &[f64], space: MetricSpace) -> f64 {
    cfs.iter().map(|cf| space.dist(origin, &cf.coords)).sum::<f64>() / cfs.len() as f64
}

/// Mean distance from `origin` to the counterfactuals, which are all taken as
/// valid.
pub fn proximity(
    cfs: &[Counterfactual],
    origin: &[f64],
    space: MetricSpace,
) -> Result<f64> {
    if cfs.is_empty() {
        return Err(Error::NoValidCounterfactuals);
    }
    let refs: Vec<&Counterfactual> = cfs.iter().collect();
    Ok(mean_distance(&refs, origin, space))
}

/// Distance plugged into the DPP kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiversityDistance {
    /// Unscaled shortest-path distance between the reference cores.
    #[default]
    Graph,
    /// Straight-line distance between the counterfactuals themselves.
    Euclidean,
}

fn kernel_determinant(members: &[&Counterfactual], pair: impl Fn(usize, usize) -> f64) -> f64 {
    let k = members.len();
    let kernel = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            1.0 / (1.0 + pair(i, j))
        }
    });
    kernel.determinant()
}

fn diversity_of(
    cfs: &[&Counterfactual],
    graphs: &GraphSet,
    dist: DiversityDistance,
) -> Result<f64> {
    let mut by_cluster: BTreeMap<usize, Vec<&Counterfactual>> = BTreeMap::new();
    for cf in cfs {
        by_cluster.entry(cf.cluster).or_default().push(cf);
    }
    let mut det = 1.0;
    for (cluster, members) in by_cluster {
        let graph = graphs.get(cluster)?;
        det *= match dist {
            DiversityDistance::Graph => kernel_determinant(&members, |i, j| {
                graph.path_distance(members[i].vertex, members[j].vertex)
            }),
            DiversityDistance::Euclidean => kernel_determinant(&members, |i, j| {
                MetricSpace::Euclidean.dist(&members[i].coords, &members[j].coords)
            }),
        };
    }
    Ok(det)
}

/// Determinant of `K_ij = 1 / (1 + d_ij)` over the counterfactuals.
///
/// With `allow_mixed`, counterfactuals of different clusters are treated as
/// infinitely far apart, so the determinant is the product of per-cluster
/// blocks; otherwise mixed input is an error.
pub fn diversity(
    cfs: &[Counterfactual],
    graphs: &GraphSet,
    dist: DiversityDistance,
    allow_mixed: bool,
) -> Result<f64> {
    if cfs.is_empty() {
        return Err(Error::NoValidCounterfactuals);
    }
    if !allow_mixed && cfs.iter().any(|cf| cf.cluster != cfs[0].cluster) {
        return Err(Error::MixedClusters);
    }
    let refs: Vec<&Counterfactual> = cfs.iter().collect();
    diversity_of(&refs, graphs, dist)
}

fn sparsity_of(cfs: &[&Counterfactual], origin: &[f64]) -> f64 {
    let n = origin.len() as f64;
    cfs.iter()
        .map(|cf| {
            cf.coords
                .iter()
                .zip(origin)
                .filter(|(x, o)| (*x - *o).abs() > SPARSITY_TOLERANCE * o.abs().max(1.0))
                .count() as f64
                / n
        })
        .sum::<f64>()
        / cfs.len() as f64
}

/// Mean fraction of features each counterfactual changes.
pub fn sparsity(cfs: &[Counterfactual], origin: &[f64]) -> Result<f64> {
    if cfs.is_empty() {
        return Err(Error::NoValidCounterfactuals);
    }
    let refs: Vec<&Counterfactual> = cfs.iter().collect();
    Ok(sparsity_of(&refs, origin))
}

/// Local outlier factor against a fixed reference dataset.
///
/// Queries are scored as new points: their neighbours come from the data,
/// which is never modified. k-distances and densities of the data rows are
/// computed once, each row's neighbourhood excluding the row itself.
#[derive(Debug, Clone)]
pub struct LofModel {
    data: DatasetMatrix,
    k: usize,
    space: MetricSpace,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

impl LofModel {
    pub fn fit(data: &DatasetMatrix, k: usize, space: MetricSpace) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("LOF needs k >= 1".into()));
        }
        if data.rows() < k + 1 {
            return Err(Error::InsufficientData {
                rows: data.rows(),
                k,
            });
        }
        let l = data.rows();
        let neighbours: Vec<Vec<(usize, f64)>> = (0..l)
            .map(|i| knn(data, data.row(i), k, space, Some(i)))
            .collect();
        let k_distance: Vec<f64> = neighbours.iter().map(|n| n[k - 1].1).collect();
        let lrd = neighbours
            .iter()
            .map(|n| local_density(n, &k_distance))
            .collect();
        Ok(LofModel {
            data: data.clone(),
            k,
            space,
            k_distance,
            lrd,
        })
    }

    /// Fits with `k` clipped to `rows - 1`.
    pub fn fit_clipped(data: &DatasetMatrix, k: usize, space: MetricSpace) -> Result<Self> {
        let k = k.min(data.rows().saturating_sub(1)).max(1);
        Self::fit(data, k, space)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn score(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.data.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.data.cols(),
                found: point.len(),
            });
        }
        let n = knn(&self.data, point, self.k, self.space, None);
        let own = local_density(&n, &self.k_distance);
        let mean_nbr = n.iter().map(|&(o, _)| self.lrd[o]).sum::<f64>() / n.len() as f64;
        Ok(mean_nbr / own)
    }
}

/// `k` nearest rows to `p` as (row, distance), ties by row index.
fn knn(
    data: &DatasetMatrix,
    p: &[f64],
    k: usize,
    space: MetricSpace,
    exclude: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = (0..data.rows())
        .filter(|&r| Some(r) != exclude)
        .map(|r| (r, space.dist(p, data.row(r))))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn local_density(neighbours: &[(usize, f64)], k_distance: &[f64]) -> f64 {
    let mean_reach = neighbours
        .iter()
        .map(|&(o, d)| d.max(k_distance[o]).max(LOF_DISTANCE_FLOOR))
        .sum::<f64>()
        / neighbours.len() as f64;
    1.0 / mean_reach
}

/// LOF of `point` relative to `data` with `k_neighbors` neighbours.
pub fn lof_score(
    point: &[f64],
    data: &DatasetMatrix,
    k_neighbors: usize,
    space: MetricSpace,
) -> Result<f64> {
    LofModel::fit(data, k_neighbors, space)?.score(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SortOrder {
    #[default]
    Ascending,
    Descending,
}

/// Sorted per-query values with `x = 100 r / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileCurve {
    pub points: Vec<(f64, f64)>,
}

/// Builds the empirical percentile curve of `values` out of `total_queries`
/// queries; failed queries simply contribute no value.
pub fn percentile_curve(
    values: &[f64],
    total_queries: usize,
    order: SortOrder,
) -> Result<PercentileCurve> {
    if values.len() > total_queries {
        return Err(Error::InvalidParameter(format!(
            "{} values for {total_queries} queries",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if order == SortOrder::Descending {
        sorted.reverse();
    }
    let n = total_queries as f64;
    Ok(PercentileCurve {
        points: sorted
            .into_iter()
            .enumerate()
            .map(|(r, y)| (100.0 * (r + 1) as f64 / n, y))
            .collect(),
    })
}

/// Mean and standard error of the mean (sample standard deviation over
/// `sqrt(n)`; zero for a single value).
pub fn mean_and_sem(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}
