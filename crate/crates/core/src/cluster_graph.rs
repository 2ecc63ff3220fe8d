//! Per-cluster weighted graphs over core points and their shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use crate::data::{ConstraintSpec, CorrelationSign};
use crate::dbscan::DbscanModel;
use crate::error::{Error, Result};

/// Undirected graph whose vertices are the core points of one cluster and
/// whose edges join cores within epsilon of each other, weighted by their
/// distance.
///
/// Vertices are addressed by local index `0..len()`, in ascending row order.
/// Shortest-path rows are computed on first use and cached.
#[derive(Debug)]
pub struct ClusterGraph {
    cluster: usize,
    epsilon: f64,
    vertices: Vec<usize>,
    dim: usize,
    coords: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
    mean_edge_weight: Option<f64>,
    paths: Vec<OnceLock<Arc<[f64]>>>,
}

/// Single-source shortest-path distances, multiplied by `scale` on read.
#[derive(Debug, Clone)]
pub struct PathDistanceTable {
    pub source: usize,
    pub scale: f64,
    dist: Arc<[f64]>,
}

impl PathDistanceTable {
    pub fn get(&self, v: usize) -> f64 {
        self.dist[v] * self.scale
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|v| self.get(v)).collect()
    }
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, then on vertex index.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn build_graph(model: &DbscanModel, cluster: usize) -> Result<ClusterGraph> {
    let vertices = model.core_points_of(cluster as i64)?.to_vec();
    if vertices.is_empty() {
        return Err(Error::InternalInconsistency(format!(
            "cluster {cluster} has no core points"
        )));
    }
    let data = model.data();
    let dim = data.cols();
    let coords: Vec<f64> = vertices.iter().flat_map(|&r| data.row(r).to_vec()).collect();
    let eps = model.epsilon();
    let space = model.space();
    let n = vertices.len();
    let mut adjacency = vec![Vec::new(); n];
    let mut weight_sum = 0.0;
    let mut edges = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let w = space.dist(&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim]);
            if w <= eps {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
                weight_sum += w;
                edges += 1;
            }
        }
    }
    let graph = ClusterGraph {
        cluster,
        epsilon: eps,
        vertices,
        dim,
        coords,
        adjacency,
        mean_edge_weight: (edges > 0).then(|| weight_sum / edges as f64),
        paths: (0..n).map(|_| OnceLock::new()).collect(),
    };
    if graph.path_row(0).iter().any(|d| d.is_infinite()) {
        return Err(Error::InternalInconsistency(format!(
            "core graph of cluster {cluster} is disconnected"
        )));
    }
    Ok(graph)
}

impl ClusterGraph {
    pub fn cluster(&self) -> usize {
        self.cluster
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Dataset row of local vertex `v`.
    pub fn row_of(&self, v: usize) -> usize {
        self.vertices[v]
    }

    pub fn vertex_rows(&self) -> &[usize] {
        &self.vertices
    }

    pub fn vertex_of_row(&self, row: usize) -> Option<usize> {
        self.vertices.binary_search(&row).ok()
    }

    pub fn coords(&self, v: usize) -> &[f64] {
        &self.coords[v * self.dim..(v + 1) * self.dim]
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn mean_edge_weight(&self) -> Option<f64> {
        self.mean_edge_weight
    }

    fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            vertex: source,
        });
        while let Some(HeapEntry { dist: d, vertex: u }) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapEntry { dist: nd, vertex: v });
                }
            }
        }
        dist
    }

    /// Unscaled shortest-path distances from `source` (cached).
    pub(crate) fn path_row(&self, source: usize) -> &Arc<[f64]> {
        self.paths[source].get_or_init(|| self.dijkstra(source).into())
    }

    /// Unscaled weighted shortest-path distance between two local vertices.
    pub fn path_distance(&self, u: usize, v: usize) -> f64 {
        self.path_row(u)[v]
    }

    pub fn shortest_path_from(&self, source: usize) -> Result<PathDistanceTable> {
        self.scaled_path_from(source, 1.0)
    }

    pub fn scaled_path_from(&self, source: usize, scale: f64) -> Result<PathDistanceTable> {
        if source >= self.len() {
            return Err(Error::UnknownVertex(source));
        }
        Ok(PathDistanceTable {
            source,
            scale,
            dist: self.path_row(source).clone(),
        })
    }

    /// Writes `u,v,weight` lines (dataset rows, `u < v`) for inspection.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, adj) in self.adjacency.iter().enumerate() {
            for &(v, w) in adj.iter().filter(|(v, _)| *v > u) {
                writeln!(out, "{},{},{}", self.vertices[u], self.vertices[v], w)?;
            }
        }
        Ok(())
    }
}

/// Graphs for every cluster of a model, indexed by cluster label.
#[derive(Debug)]
pub struct GraphSet {
    graphs: Vec<ClusterGraph>,
}

impl GraphSet {
    pub fn build(model: &DbscanModel) -> Result<Self> {
        let graphs = (0..model.num_clusters())
            .map(|c| build_graph(model, c))
            .collect::<Result<_>>()?;
        Ok(GraphSet { graphs })
    }

    pub fn get(&self, cluster: usize) -> Result<&ClusterGraph> {
        self.graphs
            .get(cluster)
            .ok_or(Error::UnknownCluster(cluster as i64))
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ClusterGraph> {
        self.graphs.iter()
    }
}

/// Distance from `(a, b)` to the union of the two quadrants allowed by
/// `sign` (same signs for Positive, opposite signs for Negative).
fn quadrant_gap(a: f64, b: f64, sign: CorrelationSign) -> f64 {
    if sign.compatible(a, b) {
        0.0
    } else {
        a.abs().min(b.abs())
    }
}

/// Local vertices whose epsilon-ball can host a counterfactual of `origin`
/// that respects `spec`.
pub fn admissible_vertices(
    graph: &ClusterGraph,
    origin: &[f64],
    spec: &ConstraintSpec,
    epsilon: f64,
) -> Vec<usize> {
    (0..graph.len())
        .filter(|&v| ball_meets_region(graph.coords(v), origin, spec, epsilon))
        .collect()
}

pub(crate) fn ball_meets_region(
    q: &[f64],
    origin: &[f64],
    spec: &ConstraintSpec,
    epsilon: f64,
) -> bool {
    let frozen_gap = spec
        .non_actionable
        .iter()
        .map(|&j| (origin[j] - q[j]).powi(2))
        .sum::<f64>()
        .sqrt();
    if frozen_gap > epsilon {
        return false;
    }
    for (&j, rule) in &spec.monotonic {
        let (lo, hi) = rule.bounds(origin[j]);
        if q[j] + epsilon < lo || q[j] - epsilon > hi {
            return false;
        }
    }
    spec.correlated_groups.iter().all(|g| {
        g.pairs()
            .all(|(a, b)| quadrant_gap(q[a] - origin[a], q[b] - origin[b], g.sign) <= epsilon)
    })
}

/// Factor `d_c / mean_edge_weight` applied to graph distances so that they
/// live on the same scale as distances to the explained point. Edgeless
/// graphs get 1.
pub fn normalization_scale(graph: &ClusterGraph, d_c: f64) -> f64 {
    match graph.mean_edge_weight() {
        Some(w) if w > 0.0 => d_c / w,
        _ => 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetMatrix, MetricSpace, Monotonic};
    use crate::dbscan::fit;
    use proptest::prelude::*;

    fn chord(graph: &ClusterGraph, u: usize, v: usize) -> f64 {
        MetricSpace::Euclidean.dist(graph.coords(u), graph.coords(v))
    }

    fn model_of(rows: Vec<Vec<f64>>, eps: f64, min_pts: usize) -> DbscanModel {
        let data = Arc::new(DatasetMatrix::from_rows(&rows, None).unwrap());
        fit(data, eps, min_pts, MetricSpace::Euclidean).unwrap()
    }

    fn line_fixture() -> DbscanModel {
        model_of(vec![vec![0.0], vec![0.5], vec![1.0], vec![5.0]], 0.6, 2)
    }

    #[test]
    fn line_graph_edges() {
        let g = build_graph(&line_fixture(), 0).unwrap();
        assert_eq!(g.vertex_rows(), &[0, 1, 2]);
        assert_eq!(g.neighbours(0), &[(1, 0.5)]);
        assert_eq!(g.neighbours(1), &[(0, 0.5), (2, 0.5)]);
        assert_eq!(g.edge_count(), 2);
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0,1,0.5\n1,2,0.5\n");
    }

    #[test]
    fn singleton_and_triangle() {
        let m = model_of(vec![vec![0.0], vec![9.0]], 0.6, 1);
        let g = build_graph(&m, 1).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(normalization_scale(&g, 3.0), 1.0);

        let h = 0.5 * 3f64.sqrt() / 2.0;
        let m = model_of(vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.25, h]], 0.6, 3);
        let g = build_graph(&m, 0).unwrap();
        assert_eq!(g.edge_count(), 3);
        for v in 0..3 {
            for &(_, w) in g.neighbours(v) {
                assert!((w - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unknown_cluster_and_vertex() {
        let m = line_fixture();
        assert!(matches!(build_graph(&m, 3), Err(Error::UnknownCluster(3))));
        let g = build_graph(&m, 0).unwrap();
        assert!(matches!(g.shortest_path_from(9), Err(Error::UnknownVertex(9))));
    }

    #[test]
    fn line_shortest_paths() {
        let g = build_graph(&line_fixture(), 0).unwrap();
        let t = g.shortest_path_from(0).unwrap();
        assert_eq!(t.to_vec(), vec![0.0, 0.5, 1.0]);
        let scaled = g.scaled_path_from(0, 8.0).unwrap();
        assert_eq!(scaled.get(1), 4.0);
        assert_eq!(t.get(0), 0.0);
    }

    #[test]
    fn half_circle_path_exceeds_chord() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / 19.0;
                vec![t.cos(), t.sin()]
            })
            .collect();
        // Adjacent spacing 2 sin(pi/38) ~ 0.1652; second neighbours ~ 0.3294.
        let m = model_of(rows, 0.2, 2);
        assert_eq!(m.num_clusters(), 1);
        let g = build_graph(&m, 0).unwrap();
        assert_eq!(g.edge_count(), 19);
        let ratio = g.path_distance(0, 19) / chord(&g, 0, 19);
        let polygon = 19.0 * 2.0 * (std::f64::consts::PI / 38.0).sin() / 2.0;
        assert!((ratio - polygon).abs() < 1e-12);
        assert!(ratio > 1.5);
    }

    #[test]
    fn normalization_examples() {
        let g = build_graph(&line_fixture(), 0).unwrap();
        assert_eq!(normalization_scale(&g, 4.0), 8.0);
        let m = model_of(vec![vec![0.0], vec![1.0]], 1.0, 2);
        let g = build_graph(&m, 0).unwrap();
        assert_eq!(normalization_scale(&g, 1.0), 1.0);
    }

    #[test]
    fn admissibility_examples() {
        let m = model_of(vec![vec![5.0, 0.5], vec![5.0, 2.0]], 1.0, 1);
        let frozen = ConstraintSpec::default().freeze(1);
        let g0 = build_graph(&m, 0).unwrap();
        let g1 = build_graph(&m, 1).unwrap();
        assert_eq!(admissible_vertices(&g0, &[0.0, 0.0], &frozen, 1.0), vec![0]);
        assert!(admissible_vertices(&g1, &[0.0, 0.0], &frozen, 1.0).is_empty());

        let g = build_graph(&line_fixture(), 0).unwrap();
        let inc = ConstraintSpec::default().monotonic(0, Monotonic::IncreaseOnly { slack: 0.0 });
        assert!(admissible_vertices(&g, &[5.0], &inc, 0.6).is_empty());
        assert_eq!(
            admissible_vertices(&g, &[5.0], &ConstraintSpec::default(), 0.6),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn correlation_admissibility() {
        // q - origin = (3, -2): nearest allowed quadrant point is 2 away.
        let q = [3.0, -2.0];
        let pos = ConstraintSpec::default().correlated(vec![0, 1], CorrelationSign::Positive);
        assert!(!ball_meets_region(&q, &[0.0, 0.0], &pos, 1.5));
        assert!(ball_meets_region(&q, &[0.0, 0.0], &pos, 2.0));
        let neg = ConstraintSpec::default().correlated(vec![0, 1], CorrelationSign::Negative);
        assert!(ball_meets_region(&q, &[0.0, 0.0], &neg, 0.1));
    }

    /// Reference all-pairs shortest paths.
    fn floyd_warshall(g: &ClusterGraph) -> Vec<Vec<f64>> {
        let n = g.len();
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (u, row) in d.iter_mut().enumerate() {
            row[u] = 0.0;
            for &(v, w) in g.neighbours(u) {
                row[v] = w;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn paths_match_floyd_warshall(
            pts in proptest::collection::vec(proptest::collection::vec(0.0..3.0f64, 2), 2..30),
            frozen in proptest::option::of(0usize..2),
        ) {
            let m = model_of(pts, 0.9, 1);
            let graphs = GraphSet::build(&m).unwrap();
            for g in graphs.iter() {
                let fw = floyd_warshall(g);
                for u in 0..g.len() {
                    for v in 0..g.len() {
                        let d = g.path_distance(u, v);
                        prop_assert!((d - fw[u][v]).abs() <= 1e-9);
                        prop_assert!(d >= chord(g, u, v) - 1e-12);
                        prop_assert!((d - g.path_distance(v, u)).abs() <= 1e-12);
                        for w in 0..g.len() {
                            prop_assert!(d <= g.path_distance(u, w) + g.path_distance(w, v) + 1e-9);
                        }
                    }
                }
                let origin = [1.5, 1.5];
                let all = admissible_vertices(g, &origin, &ConstraintSpec::default(), 0.9);
                prop_assert_eq!(all.len(), g.len());
                if let Some(j) = frozen {
                    let spec = ConstraintSpec::default().freeze(j);
                    let some = admissible_vertices(g, &origin, &spec, 0.9);
                    prop_assert!(some.iter().all(|v| all.contains(v)));
                    let tighter = spec.monotonic(1 - j, Monotonic::DecreaseOnly { slack: 0.0 });
                    let fewer = admissible_vertices(g, &origin, &tighter, 0.9);
                    prop_assert!(fewer.iter().all(|v| some.contains(v)));
                }
            }
        }
    }
}
