//! DBSCAN fitting and the frozen out-of-dataset assignment rule.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::data::{DatasetMatrix, MetricSpace};
use crate::error::{Error, Result};

/// Label of rows (and points) outside every cluster.
pub const NOISE: i32 = -1;

/// A fitted, immutable DBSCAN clustering.
#[derive(Debug, Clone)]
pub struct DbscanModel {
    epsilon: f64,
    min_pts: usize,
    labels: Vec<i32>,
    is_core: Vec<bool>,
    num_clusters: usize,
    data: Arc<DatasetMatrix>,
    space: MetricSpace,
    cores_by_cluster: Vec<Vec<usize>>,
    core_rows: Vec<usize>,
}

fn check_params(epsilon: f64, min_pts: usize) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if min_pts < 1 {
        return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
    }
    Ok(())
}

/// Brute-force epsilon-neighbourhoods; every list contains the row itself.
fn neighbourhoods(data: &DatasetMatrix, epsilon: f64, space: MetricSpace) -> Vec<Vec<usize>> {
    let l = data.rows();
    let mut nbrs = vec![Vec::new(); l];
    for i in 0..l {
        nbrs[i].push(i);
        for j in i + 1..l {
            if space.dist(data.row(i), data.row(j)) <= epsilon {
                nbrs[i].push(j);
                nbrs[j].push(i);
            }
        }
    }
    nbrs.iter_mut().for_each(|n| n.sort_unstable());
    nbrs
}

/// Fits DBSCAN with expansion in ascending row order.
///
/// Cores are rows whose neighbourhood (itself included) has at least
/// `min_pts` members. A border row joins the first cluster whose expansion
/// reaches it. Clusters are finally numbered by their smallest member row.
pub fn fit(
    data: Arc<DatasetMatrix>,
    epsilon: f64,
    min_pts: usize,
    space: MetricSpace,
) -> Result<DbscanModel> {
    check_params(epsilon, min_pts)?;
    let l = data.rows();
    let nbrs = neighbourhoods(&data, epsilon, space);
    let is_core: Vec<bool> = nbrs.iter().map(|n| n.len() >= min_pts).collect();

    let mut labels = vec![NOISE; l];
    let mut next = 0i32;
    let mut queue = VecDeque::new();
    for start in 0..l {
        if labels[start] != NOISE || !is_core[start] {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &nbrs[u] {
                if labels[v] != NOISE {
                    continue;
                }
                labels[v] = next;
                if is_core[v] {
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }

    // Renumber by smallest member row.
    let mut first_member = vec![usize::MAX; next as usize];
    for (r, &lab) in labels.iter().enumerate() {
        if lab >= 0 && first_member[lab as usize] == usize::MAX {
            first_member[lab as usize] = r;
        }
    }
    let mut order: Vec<usize> = (0..next as usize).collect();
    order.sort_by_key(|&c| first_member[c]);
    let mut remap = vec![0i32; next as usize];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new as i32;
    }
    for lab in labels.iter_mut().filter(|l| **l >= 0) {
        *lab = remap[*lab as usize];
    }

    Ok(DbscanModel::assemble(
        data, epsilon, min_pts, labels, is_core, space,
    ))
}

impl DbscanModel {
    fn assemble(
        data: Arc<DatasetMatrix>,
        epsilon: f64,
        min_pts: usize,
        labels: Vec<i32>,
        is_core: Vec<bool>,
        space: MetricSpace,
    ) -> Self {
        let num_clusters = labels.iter().map(|&l| l + 1).max().unwrap_or(0) as usize;
        let mut cores_by_cluster = vec![Vec::new(); num_clusters];
        for (r, (&lab, &core)) in labels.iter().zip(&is_core).enumerate() {
            if core && lab >= 0 {
                cores_by_cluster[lab as usize].push(r);
            }
        }
        let core_rows = (0..labels.len()).filter(|&r| is_core[r]).collect();
        DbscanModel {
            epsilon,
            min_pts,
            labels,
            is_core,
            num_clusters,
            data,
            space,
            cores_by_cluster,
            core_rows,
        }
    }

    /// Rebuilds a model from stored labels and core flags, checking every
    /// DBSCAN invariant against the data.
    pub fn from_parts(
        data: Arc<DatasetMatrix>,
        epsilon: f64,
        min_pts: usize,
        labels: Vec<i32>,
        is_core: Vec<bool>,
        space: MetricSpace,
    ) -> Result<Self> {
        check_params(epsilon, min_pts)?;
        if labels.len() != data.rows() || is_core.len() != data.rows() {
            return Err(Error::InvalidData(format!(
                "{} labels / {} core flags for {} rows",
                labels.len(),
                is_core.len(),
                data.rows()
            )));
        }
        if labels.iter().any(|&l| l < NOISE) {
            return Err(Error::InvalidData("labels must be >= -1".into()));
        }
        let model = Self::assemble(data, epsilon, min_pts, labels, is_core, space);
        model.check_invariants()?;
        Ok(model)
    }

    /// Verifies core counts, border support, noise isolation, label
    /// consistency of neighbouring cores and that no cluster is empty of cores.
    pub fn check_invariants(&self) -> Result<()> {
        let nbrs = neighbourhoods(&self.data, self.epsilon, self.space);
        let bad = |msg: String| Err(Error::InternalInconsistency(msg));
        for (r, n) in nbrs.iter().enumerate() {
            let core_nbrs: Vec<usize> = n.iter().copied().filter(|&v| self.is_core[v]).collect();
            if self.is_core[r] {
                if n.len() < self.min_pts {
                    return bad(format!("row {r} flagged core with {} neighbours", n.len()));
                }
                if self.labels[r] == NOISE {
                    return bad(format!("core row {r} labelled noise"));
                }
                if let Some(&v) = core_nbrs.iter().find(|&&v| self.labels[v] != self.labels[r]) {
                    return bad(format!("neighbouring cores {r} and {v} carry different labels"));
                }
            } else {
                if n.len() >= self.min_pts {
                    return bad(format!("row {r} has {} neighbours but is not core", n.len()));
                }
                let supported = core_nbrs.iter().any(|&v| self.labels[v] == self.labels[r]);
                if self.labels[r] == NOISE && !core_nbrs.is_empty() {
                    return bad(format!("noise row {r} lies within epsilon of a core"));
                }
                if self.labels[r] != NOISE && !supported {
                    return bad(format!("border row {r} has no core of its cluster within epsilon"));
                }
            }
        }
        if let Some(c) = self.cores_by_cluster.iter().position(Vec::is_empty) {
            return bad(format!("cluster {c} has no core points"));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn min_pts(&self) -> usize {
        self.min_pts
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn is_core(&self) -> &[bool] {
        &self.is_core
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn data(&self) -> &DatasetMatrix {
        &self.data
    }

    pub fn data_arc(&self) -> &Arc<DatasetMatrix> {
        &self.data
    }

    pub fn space(&self) -> MetricSpace {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        Ok(())
    }

    /// Nearest core row to `p` and its distance, ties to the smaller label
    /// and then the smaller row.
    pub fn nearest_core(&self, p: &[f64]) -> Result<Option<(usize, f64)>> {
        self.check_dim(p)?;
        let mut best: Option<(usize, f64)> = None;
        for &r in &self.core_rows {
            let d = self.space.dist(p, self.data.row(r));
            let better = match best {
                None => true,
                Some((b, bd)) => d < bd || (d == bd && self.labels[r] < self.labels[b]),
            };
            if better {
                best = Some((r, d));
            }
        }
        Ok(best)
    }

    /// The assignment function: cluster of the nearest core within epsilon,
    /// else [`NOISE`].
    pub fn assign(&self, p: &[f64]) -> Result<i32> {
        Ok(match self.nearest_core(p)? {
            Some((r, d)) if d <= self.epsilon => self.labels[r],
            _ => NOISE,
        })
    }

    /// Core rows of `cluster`, ascending.
    pub fn core_points_of(&self, cluster: i64) -> Result<&[usize]> {
        if cluster < 0 || cluster as usize >= self.num_clusters {
            return Err(Error::UnknownCluster(cluster));
        }
        Ok(&self.cores_by_cluster[cluster as usize])
    }
}
