//! Choice of reference core points.
//!
//! A candidate set `S` of cores has energy
//!
//! ```text
//! E(S) = sum_{u < v in S} 1 / D(u, v)  +  sum_{u in S} d(p, u)^2
//! ```
//!
//! where `d` is the feature-space distance to the explained point `p` (a
//! spring pulling toward `p`) and `D` the scaled shortest-path distance in the
//! cluster graph (a charge pushing chosen cores apart). Minimising over
//! `k`-subsets is NP-hard; the greedy builder is the default and the other
//! selectors serve as refinements, oracles and ablations.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster_graph::{admissible_vertices, normalization_scale, GraphSet};
use crate::data::ConstraintSpec;
use crate::dbscan::DbscanModel;
use crate::error::{Error, Result};

/// Upper bound on the number of subsets [`select_exact`] will enumerate.
pub const EXACT_SEARCH_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Greedy,
    GreedyPlusLocalSearch,
    Exact,
    Nearest,
    Furthest,
    Random,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Greedy,
        Strategy::GreedyPlusLocalSearch,
        Strategy::Exact,
        Strategy::Nearest,
        Strategy::Furthest,
        Strategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::GreedyPlusLocalSearch => "local_search",
            Strategy::Exact => "exact",
            Strategy::Nearest => "nearest",
            Strategy::Furthest => "furthest",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == norm)
            .or(match norm.as_str() {
                "greedy_plus_local_search" | "localsearch" => {
                    Some(Strategy::GreedyPlusLocalSearch)
                }
                _ => None,
            })
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy '{s}'")))
    }
}

/// Which terms of the energy are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyTerms {
    #[default]
    Full,
    AttractionOnly,
    RepulsionOnly,
}

impl EnergyTerms {
    fn attraction(self) -> bool {
        !matches!(self, EnergyTerms::RepulsionOnly)
    }

    fn repulsion(self) -> bool {
        !matches!(self, EnergyTerms::AttractionOnly)
    }
}

/// A core point eligible for selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub cluster: usize,
    /// Local vertex index in the cluster graph.
    pub vertex: usize,
    /// Dataset row.
    pub row: usize,
    /// Feature-space distance to the explained point.
    pub spring: f64,
}

#[derive(Debug)]
enum Pairwise<'a> {
    Graphs {
        graphs: &'a GraphSet,
        scales: Vec<f64>,
    },
    Matrix {
        n: usize,
        dist: Vec<f64>,
    },
}

/// Everything a selector needs: the candidates, their spring distances and
/// the scaled graph distance between any two of them.
#[derive(Debug)]
pub struct EnergyContext<'a> {
    origin: Vec<f64>,
    candidates: Vec<Candidate>,
    pairwise: Pairwise<'a>,
    k: usize,
    terms: EnergyTerms,
    d_c: f64,
}

/// Admissible, strictly-outside-epsilon cores of one graph, with coincident
/// cores collapsed onto the lowest row.
fn cluster_candidates(
    model: &DbscanModel,
    graphs: &GraphSet,
    cluster: usize,
    origin: &[f64],
    spec: &ConstraintSpec,
) -> Result<Vec<Candidate>> {
    let graph = graphs.get(cluster)?;
    let eps = model.epsilon();
    let space = model.space();
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut out: Vec<Candidate> = Vec::new();
    for v in admissible_vertices(graph, origin, spec, eps) {
        let spring = space.dist(origin, graph.coords(v));
        if spring <= eps {
            continue;
        }
        let bucket = seen.entry(spring.to_bits()).or_default();
        if bucket
            .iter()
            .any(|&i| graph.coords(out[i].vertex) == graph.coords(v))
        {
            continue;
        }
        bucket.push(out.len());
        out.push(Candidate {
            cluster,
            vertex: v,
            row: graph.row_of(v),
            spring,
        });
    }
    Ok(out)
}

fn check_origin(model: &DbscanModel, origin: &[f64]) -> Result<()> {
    if origin.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: origin.len(),
        });
    }
    Ok(())
}

fn min_spring(candidates: &[Candidate]) -> f64 {
    candidates
        .iter()
        .map(|c| c.spring)
        .fold(f64::INFINITY, f64::min)
}

impl<'a> EnergyContext<'a> {
    /// Context for counterfactuals of `origin` toward `cluster`.
    pub fn for_cluster(
        model: &DbscanModel,
        graphs: &'a GraphSet,
        origin: &[f64],
        spec: &ConstraintSpec,
        cluster: usize,
        k: usize,
    ) -> Result<Self> {
        check_origin(model, origin)?;
        let candidates = cluster_candidates(model, graphs, cluster, origin, spec)?;
        if candidates.is_empty() {
            return Err(Error::NoAdmissibleCore);
        }
        let d_c = min_spring(&candidates);
        let mut scales = vec![1.0; graphs.len()];
        scales[cluster] = normalization_scale(graphs.get(cluster)?, d_c);
        Ok(EnergyContext {
            origin: origin.to_vec(),
            candidates,
            pairwise: Pairwise::Graphs { graphs, scales },
            k,
            terms: EnergyTerms::Full,
            d_c,
        })
    }

    /// Context pooling admissible cores of every cluster other than the
    /// origin's own; cross-cluster pairs exert no repulsion.
    pub fn for_any_cluster(
        model: &DbscanModel,
        graphs: &'a GraphSet,
        origin: &[f64],
        spec: &ConstraintSpec,
        k: usize,
    ) -> Result<Self> {
        check_origin(model, origin)?;
        let own = model.assign(origin)?;
        let mut candidates = Vec::new();
        for c in 0..graphs.len() {
            if c as i32 != own {
                candidates.extend(cluster_candidates(model, graphs, c, origin, spec)?);
            }
        }
        if candidates.is_empty() {
            return Err(Error::NoAdmissibleCore);
        }
        candidates.sort_by_key(|c| c.row);
        let d_c = min_spring(&candidates);
        let scales = graphs
            .iter()
            .map(|g| normalization_scale(g, d_c))
            .collect();
        Ok(EnergyContext {
            origin: origin.to_vec(),
            candidates,
            pairwise: Pairwise::Graphs { graphs, scales },
            k,
            terms: EnergyTerms::Full,
            d_c,
        })
    }

    /// Context over an explicit instance: spring distances and a row-major
    /// `n x n` matrix of (already scaled) graph distances. Infinite entries
    /// mean "no repulsion".
    pub fn from_matrix(springs: Vec<f64>, graph_distances: Vec<f64>, k: usize) -> Result<Self> {
        let n = springs.len();
        if graph_distances.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: graph_distances.len(),
            });
        }
        if n == 0 {
            return Err(Error::NoAdmissibleCore);
        }
        let candidates: Vec<Candidate> = springs
            .iter()
            .enumerate()
            .map(|(i, &spring)| Candidate {
                cluster: 0,
                vertex: i,
                row: i,
                spring,
            })
            .collect();
        Ok(EnergyContext {
            origin: Vec::new(),
            d_c: min_spring(&candidates),
            candidates,
            pairwise: Pairwise::Matrix {
                n,
                dist: graph_distances,
            },
            k,
            terms: EnergyTerms::Full,
        })
    }

    pub fn with_terms(mut self, terms: EnergyTerms) -> Self {
        self.terms = terms;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    /// Drops candidates whose row is in `rows`; scales are kept.
    pub fn without_rows(mut self, rows: &[usize]) -> Self {
        let keep: Vec<usize> = (0..self.candidates.len())
            .filter(|&i| !rows.contains(&self.candidates[i].row))
            .collect();
        if let Pairwise::Matrix { n, dist } = &mut self.pairwise {
            let old = *n;
            *dist = keep
                .iter()
                .flat_map(|&i| keep.iter().map(move |&j| (i, j)))
                .map(|(i, j)| dist[i * old + j])
                .collect();
            *n = keep.len();
        }
        self.candidates = keep.iter().map(|&i| self.candidates[i]).collect();
        self
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> EnergyTerms {
        self.terms
    }

    /// Distance from the origin to the closest candidate.
    pub fn d_c(&self) -> f64 {
        self.d_c
    }

    /// Scale applied to graph distances of `cluster`.
    pub fn scale_of(&self, cluster: usize) -> f64 {
        match &self.pairwise {
            Pairwise::Graphs { scales, .. } => scales[cluster],
            Pairwise::Matrix { .. } => 1.0,
        }
    }

    /// Scaled graph distance between candidates `i` and `j`; infinite across
    /// clusters.
    pub fn graph_distance(&self, i: usize, j: usize) -> f64 {
        match &self.pairwise {
            Pairwise::Matrix { n, dist } => dist[i * n + j],
            Pairwise::Graphs { graphs, scales } => {
                let (a, b) = (&self.candidates[i], &self.candidates[j]);
                if a.cluster != b.cluster {
                    return f64::INFINITY;
                }
                let g = graphs.get(a.cluster).expect("candidate cluster exists");
                g.path_distance(a.vertex, b.vertex) * scales[a.cluster]
            }
        }
    }

    /// Row of scaled graph distances from candidate `i` to every candidate.
    fn distance_row(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|j| self.graph_distance(i, j)).collect()
    }

    #[inline]
    fn attraction(&self, i: usize, terms: EnergyTerms) -> f64 {
        if terms.attraction() {
            self.candidates[i].spring * self.candidates[i].spring
        } else {
            0.0
        }
    }

    fn check_k(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.k > self.len() {
            return Err(Error::InsufficientCores {
                requested: self.k,
                available: self.len(),
            });
        }
        Ok(())
    }
}

#[inline]
fn repulsion(d: f64) -> f64 {
    1.0 / d
}

/// Energy of `subset` (candidate indices) under the context's active terms.
pub fn energy_of(ctx: &EnergyContext<'_>, subset: &[usize]) -> Result<f64> {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateVertex(w[0]));
    }
    if let Some(&bad) = sorted.iter().find(|&&i| i >= ctx.len()) {
        return Err(Error::UnknownVertex(bad));
    }
    let mut energy = 0.0;
    if ctx.terms.repulsion() {
        for (a, &i) in sorted.iter().enumerate() {
            for &j in &sorted[a + 1..] {
                let d = ctx.graph_distance(i, j);
                if d == 0.0 {
                    return Err(Error::ZeroGraphDistance(i, j));
                }
                energy += repulsion(d);
            }
        }
    }
    for &i in &sorted {
        energy += ctx.attraction(i, ctx.terms);
    }
    Ok(energy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Candidate indices in selection order.
    pub chosen: Vec<usize>,
    /// The chosen candidates, same order.
    pub cores: Vec<Candidate>,
    /// Energy of the chosen set under the context's terms.
    pub energy: f64,
    pub strategy: Strategy,
    /// Candidate-energy evaluations performed.
    pub evaluations: u64,
    /// Swaps applied by local search.
    pub swaps: usize,
}

fn finish(
    ctx: &EnergyContext<'_>,
    chosen: Vec<usize>,
    strategy: Strategy,
    evaluations: u64,
    swaps: usize,
) -> Result<SelectionResult> {
    let energy = energy_of(ctx, &chosen)?;
    Ok(SelectionResult {
        cores: chosen.iter().map(|&i| ctx.candidates[i]).collect(),
        chosen,
        energy,
        strategy,
        evaluations,
        swaps,
    })
}

/// Greedy construction under `terms`: each step adds the candidate giving
/// the lowest total energy, ties to the lowest index.
fn greedy_under(ctx: &EnergyContext<'_>, terms: EnergyTerms) -> Result<(Vec<usize>, u64)> {
    ctx.check_k()?;
    let n = ctx.len();
    let mut in_set = vec![false; n];
    let mut rep = vec![0.0; n];
    let mut chosen = Vec::with_capacity(ctx.k);
    let mut current = 0.0;
    let mut evaluations = 0u64;
    for _ in 0..ctx.k {
        let mut best: Option<(usize, f64)> = None;
        for v in (0..n).filter(|&v| !in_set[v]) {
            evaluations += 1;
            let e = current + ctx.attraction(v, terms) + rep[v];
            if best.is_none_or(|(_, be)| e < be) {
                best = Some((v, e));
            }
        }
        let (v, e) = best.expect("k <= number of candidates");
        in_set[v] = true;
        chosen.push(v);
        current = e;
        if terms.repulsion() && chosen.len() < ctx.k {
            for (u, d) in ctx.distance_row(v).into_iter().enumerate() {
                if !in_set[u] {
                    rep[u] += repulsion(d);
                }
            }
        }
    }
    Ok((chosen, evaluations))
}

pub fn select_greedy(ctx: &EnergyContext<'_>) -> Result<SelectionResult> {
    let (chosen, evals) = greedy_under(ctx, ctx.terms)?;
    finish(ctx, chosen, Strategy::Greedy, evals, 0)
}

/// Best-improvement swap search started from the greedy solution.
pub fn select_local_search(ctx: &EnergyContext<'_>) -> Result<SelectionResult> {
    let terms = ctx.terms;
    let (mut chosen, mut evaluations) = greedy_under(ctx, terms)?;
    let n = ctx.len();
    let mut energy = energy_of(ctx, &chosen)?;
    let mut swaps = 0usize;
    let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
    for _ in 0..100 * ctx.k {
        let mut in_set = vec![false; n];
        chosen.iter().for_each(|&s| in_set[s] = true);
        // rep[u] = repulsion between u and every chosen t != u.
        let mut rep = vec![0.0; n];
        if terms.repulsion() {
            for &t in &chosen {
                let row = rows.entry(t).or_insert_with(|| ctx.distance_row(t));
                for (u, &d) in row.iter().enumerate() {
                    if u != t {
                        rep[u] += repulsion(d);
                    }
                }
            }
        }
        let mut best: Option<(usize, usize, f64)> = None;
        for (pos, &s) in chosen.iter().enumerate() {
            for u in (0..n).filter(|&u| !in_set[u]) {
                evaluations += 1;
                let mut delta = ctx.attraction(u, terms) - ctx.attraction(s, terms);
                if terms.repulsion() {
                    let w_us = repulsion(rows[&s][u]);
                    delta += (rep[u] - w_us) - rep[s];
                }
                if best.is_none_or(|(_, _, bd)| delta < bd) {
                    best = Some((pos, u, delta));
                }
            }
        }
        match best {
            Some((pos, u, delta)) if -delta > 1e-12 * energy.abs().max(1.0) => {
                let out = std::mem::replace(&mut chosen[pos], u);
                let next = energy_of(ctx, &chosen)?;
                if next >= energy {
                    // The incremental delta was rounding noise.
                    chosen[pos] = out;
                    break;
                }
                swaps += 1;
                energy = next;
            }
            _ => break,
        }
    }
    finish(ctx, chosen, Strategy::GreedyPlusLocalSearch, evaluations, swaps)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return acc;
        }
    }
    acc
}

/// Global minimiser over all `k`-subsets by pruned enumeration in
/// lexicographic order; the first minimum found wins ties.
pub fn select_exact(ctx: &EnergyContext<'_>) -> Result<SelectionResult> {
    ctx.check_k()?;
    let n = ctx.len();
    let k = ctx.k;
    let combinations = binomial(n, k);
    if combinations > EXACT_SEARCH_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            combinations,
            limit: EXACT_SEARCH_LIMIT,
        });
    }
    let terms = ctx.terms;
    let weights: Vec<f64> = if k >= 2 && terms.repulsion() {
        (0..n)
            .flat_map(|i| ctx.distance_row(i).into_iter().map(repulsion))
            .collect()
    } else {
        Vec::new()
    };
    let attraction: Vec<f64> = (0..n).map(|i| ctx.attraction(i, terms)).collect();

    struct Search<'s> {
        n: usize,
        k: usize,
        weights: &'s [f64],
        attraction: &'s [f64],
        best: f64,
        best_set: Vec<usize>,
        stack: Vec<usize>,
        evaluations: u64,
    }

    impl Search<'_> {
        fn run(&mut self, start: usize, partial: f64) {
            let depth = self.stack.len();
            if depth == self.k {
                if partial < self.best {
                    self.best = partial;
                    self.best_set.clone_from(&self.stack);
                }
                return;
            }
            for v in start..=self.n - (self.k - depth) {
                self.evaluations += 1;
                let mut add = self.attraction[v];
                if !self.weights.is_empty() {
                    add += self
                        .stack
                        .iter()
                        .map(|&t| self.weights[t * self.n + v])
                        .sum::<f64>();
                }
                // Every term is non-negative, so a partial sum that already
                // reaches the incumbent cannot lead to a strict improvement.
                if partial + add >= self.best {
                    continue;
                }
                self.stack.push(v);
                self.run(v + 1, partial + add);
                self.stack.pop();
            }
        }
    }

    let mut search = Search {
        n,
        k,
        weights: &weights,
        attraction: &attraction,
        best: f64::INFINITY,
        best_set: Vec::new(),
        stack: Vec::with_capacity(k),
        evaluations: 0,
    };
    search.run(0, 0.0);
    if search.best_set.len() != k {
        return Err(Error::InternalInconsistency(
            "exhaustive search found no subset".into(),
        ));
    }
    let evals = search.evaluations;
    finish(ctx, search.best_set, Strategy::Exact, evals, 0)
}

/// The `k` candidates closest to the origin (ties by index).
pub fn select_nearest(ctx: &EnergyContext<'_>) -> Result<SelectionResult> {
    ctx.check_k()?;
    let mut order: Vec<usize> = (0..ctx.len()).collect();
    order.sort_by(|&a, &b| {
        ctx.candidates[a]
            .spring
            .total_cmp(&ctx.candidates[b].spring)
            .then(a.cmp(&b))
    });
    order.truncate(ctx.k);
    let evals = ctx.len() as u64;
    finish(ctx, order, Strategy::Nearest, evals, 0)
}

/// Greedy minimisation of the repulsion term alone; the first pick is the
/// lowest-index candidate since a single charge feels no force.
pub fn select_furthest(ctx: &EnergyContext<'_>) -> Result<SelectionResult> {
    let (chosen, evals) = greedy_under(ctx, EnergyTerms::RepulsionOnly)?;
    finish(ctx, chosen, Strategy::Furthest, evals, 0)
}

/// `k` distinct candidates drawn uniformly without replacement.
pub fn select_random(ctx: &EnergyContext<'_>, seed: u64) -> Result<SelectionResult> {
    ctx.check_k()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, ctx.len(), ctx.k).into_vec();
    finish(ctx, chosen, Strategy::Random, ctx.k as u64, 0)
}

pub fn select(ctx: &EnergyContext<'_>, strategy: Strategy, seed: u64) -> Result<SelectionResult> {
    match strategy {
        Strategy::Greedy => select_greedy(ctx),
        Strategy::GreedyPlusLocalSearch => select_local_search(ctx),
        Strategy::Exact => select_exact(ctx),
        Strategy::Nearest => select_nearest(ctx),
        Strategy::Furthest => select_furthest(ctx),
        Strategy::Random => select_random(ctx, seed),
    }
}

/// Selection when no target cluster is given: the candidate pool spans all
/// clusters other than the origin's, and only same-cluster pairs repel.
pub fn select_any_cluster(
    model: &DbscanModel,
    graphs: &GraphSet,
    origin: &[f64],
    spec: &ConstraintSpec,
    k: usize,
    seed: u64,
    strategy: Strategy,
) -> Result<SelectionResult> {
    let ctx = EnergyContext::for_any_cluster(model, graphs, origin, spec, k)?;
    select(&ctx, strategy, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetMatrix, MetricSpace};
    use crate::dbscan::fit;
    use proptest::prelude::*;
    use super::Strategy;
    use rand::Rng;
    use std::sync::Arc;

    fn line_fixture() -> (DbscanModel, GraphSet) {
        let rows: Vec<Vec<f64>> = [0.0, 0.5, 1.0, 5.0].iter().map(|&x| vec![x]).collect();
        let data = Arc::new(DatasetMatrix::from_rows(&rows, None).unwrap());
        let m = fit(data, 0.6, 2, MetricSpace::Euclidean).unwrap();
        let g = GraphSet::build(&m).unwrap();
        (m, g)
    }

    fn rows_of(r: &SelectionResult) -> Vec<usize> {
        r.cores.iter().map(|c| c.row).collect()
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    /// Brute-force minimum over all k-subsets, independent of the pruned
    /// search: returns (energy, lexicographically first minimiser).
    fn brute_force(springs: &[f64], dist: &[f64], k: usize) -> (f64, Vec<usize>) {
        let n = springs.len();
        let mut best = (f64::INFINITY, Vec::new());
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let mut e = 0.0;
            for (a, &i) in set.iter().enumerate() {
                e += springs[i] * springs[i];
                for &j in &set[a + 1..] {
                    e += 1.0 / dist[i * n + j];
                }
            }
            if e < best.0 - 1e-12 || (e <= best.0 + 1e-12 && set < best.1) {
                best = (e, set);
            }
        }
        best
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)])
            .collect();
        let p = [rng.random_range(-6.0..-3.0), rng.random_range(0.0..4.0)];
        let springs = pts
            .iter()
            .map(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt())
            .collect();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] =
                    ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
            }
        }
        (springs, dist)
    }

    #[test]
    fn energy_examples() {
        let ctx = EnergyContext::from_matrix(vec![1.0, 2.0], vec![0.0, 2.0, 2.0, 0.0], 2).unwrap();
        assert_eq!(energy_of(&ctx, &[0, 1]).unwrap(), 5.5);
        assert_eq!(energy_of(&ctx, &[]).unwrap(), 0.0);
        assert!(matches!(energy_of(&ctx, &[1, 1]), Err(Error::DuplicateVertex(1))));

        let zero = EnergyContext::from_matrix(vec![1.0, 1.0], vec![0.0; 4], 2).unwrap();
        assert!(matches!(energy_of(&zero, &[0, 1]), Err(Error::ZeroGraphDistance(0, 1))));
    }

    #[test]
    fn line_fixture_energy_uses_scaled_graph_distance() {
        let (m, g) = line_fixture();
        let ctx =
            EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 2).unwrap();
        assert_eq!(ctx.d_c(), 4.0);
        assert_eq!(ctx.scale_of(0), 8.0);
        // candidates are rows 0, 1, 2
        assert_eq!(ctx.graph_distance(1, 2), 4.0);
        assert_eq!(energy_of(&ctx, &[2, 1]).unwrap(), 36.5);
        assert_eq!(energy_of(&ctx, &[2, 0]).unwrap(), 41.125);
    }

    #[test]
    fn greedy_line_fixture() {
        let (m, g) = line_fixture();
        let ctx =
            EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 2).unwrap();
        let r = select_greedy(&ctx).unwrap();
        assert_eq!(rows_of(&r), vec![2, 1]);
        assert_eq!(r.energy, 36.5);

        let one = EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 1)
            .unwrap();
        assert_eq!(rows_of(&select_greedy(&one).unwrap()), vec![2]);

        let all = EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 3)
            .unwrap();
        assert_eq!(sorted(rows_of(&select_greedy(&all).unwrap())), vec![0, 1, 2]);

        let too_many = EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 4)
            .unwrap();
        assert!(matches!(
            select_greedy(&too_many),
            Err(Error::InsufficientCores { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn exact_line_fixture() {
        let (m, g) = line_fixture();
        let ctx =
            EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 2).unwrap();
        let r = select_exact(&ctx).unwrap();
        assert_eq!(rows_of(&r), vec![1, 2]);
        assert_eq!(r.energy, 36.5);
        let all = ctx.with_k(3);
        assert_eq!(rows_of(&select_exact(&all).unwrap()), vec![0, 1, 2]);
    }

    #[test]
    fn nearest_line_fixture() {
        let (m, g) = line_fixture();
        let ctx =
            EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 2).unwrap();
        assert_eq!(rows_of(&select_nearest(&ctx).unwrap()), vec![2, 1]);
        assert_eq!(rows_of(&select_nearest(&ctx.with_k(1)).unwrap()), vec![2]);
    }

    #[test]
    fn furthest_picks_path_endpoints() {
        let (m, g) = line_fixture();
        let ctx =
            EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 2).unwrap();
        let r = select_furthest(&ctx).unwrap();
        assert_eq!(sorted(rows_of(&r)), vec![0, 2]);
        assert_eq!(rows_of(&select_furthest(&ctx.with_k(1)).unwrap()), vec![0]);
    }

    #[test]
    fn random_is_seeded_and_complete() {
        let (m, g) = line_fixture();
        let ctx =
            EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 2).unwrap();
        let a = select_random(&ctx, 42).unwrap();
        let b = select_random(&ctx, 42).unwrap();
        assert_eq!(a, b);
        let all = ctx.with_k(3);
        assert_eq!(sorted(rows_of(&select_random(&all, 7).unwrap())), vec![0, 1, 2]);
    }

    #[test]
    fn random_is_uniform() {
        let ctx = EnergyContext::from_matrix(vec![1.0; 4], vec![1.0; 16], 1).unwrap();
        let mut counts = [0usize; 4];
        let draws = 10_000;
        for seed in 0..draws {
            counts[select_random(&ctx, seed).unwrap().chosen[0]] += 1;
        }
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - 2500.0).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn local_search_keeps_optimal_greedy() {
        let (m, g) = line_fixture();
        let ctx =
            EnergyContext::for_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 0, 2).unwrap();
        let r = select_local_search(&ctx).unwrap();
        assert_eq!(r.swaps, 0);
        assert_eq!(rows_of(&r), vec![2, 1]);
    }

    #[test]
    fn local_search_fixes_a_greedy_trap() {
        // Candidate 0 is nearest but sits between 1 and 2, which are far apart
        // from each other and only slightly further from the origin.
        let springs = vec![1.0, 1.05, 1.05];
        let inf = f64::INFINITY;
        #[rustfmt::skip]
        let dist = vec![
            0.0, 0.3, 0.3,
            0.3, 0.0, inf,
            0.3, inf, 0.0,
        ];
        let ctx = EnergyContext::from_matrix(springs, dist, 2).unwrap();
        let greedy = select_greedy(&ctx).unwrap();
        let exact = select_exact(&ctx).unwrap();
        assert_eq!(sorted(greedy.chosen.clone()), vec![0, 1]);
        assert_eq!(exact.chosen, vec![1, 2]);
        assert!(greedy.energy > exact.energy);
        let ls = select_local_search(&ctx).unwrap();
        assert_eq!(sorted(ls.chosen.clone()), vec![1, 2]);
        assert_eq!(ls.energy, exact.energy);
        assert_eq!(ls.swaps, 1);
    }

    #[test]
    fn exact_guard() {
        let n = 60;
        let ctx = EnergyContext::from_matrix(vec![1.0; n], vec![1.0; n * n], 10).unwrap();
        assert!(matches!(
            select_exact(&ctx),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
        assert_eq!(binomial(60, 10), 75_394_027_566);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(15, 4), 1365);
    }

    #[test]
    fn any_cluster_ignores_cross_cluster_repulsion() {
        let rows = vec![vec![0.0], vec![10.0], vec![5.0]];
        let data = Arc::new(DatasetMatrix::from_rows(&rows, None).unwrap());
        // min_pts 1: rows 0 and 1 are singleton clusters... and so is row 2.
        let m = fit(data, 0.5, 1, MetricSpace::Euclidean).unwrap();
        let g = GraphSet::build(&m).unwrap();
        // origin 5.0 is itself row 2's cluster; pool = clusters of rows 0 and 1
        let r = select_any_cluster(&m, &g, &[5.0], &ConstraintSpec::default(), 2, 0, Strategy::Greedy)
            .unwrap();
        assert_eq!(sorted(rows_of(&r)), vec![0, 1]);
        assert_eq!(r.energy, 50.0);
        let one = select_any_cluster(&m, &g, &[4.0], &ConstraintSpec::default(), 1, 0, Strategy::Greedy)
            .unwrap();
        assert_eq!(rows_of(&one), vec![2]);
    }

    #[test]
    fn any_cluster_with_one_cluster_matches_single_target() {
        let (m, g) = line_fixture();
        let spec = ConstraintSpec::default();
        let any = select_any_cluster(&m, &g, &[5.0], &spec, 2, 0, Strategy::Greedy).unwrap();
        let ctx = EnergyContext::for_cluster(&m, &g, &[5.0], &spec, 0, 2).unwrap();
        let single = select_greedy(&ctx).unwrap();
        assert_eq!(any.cores, single.cores);
        assert_eq!(any.energy, single.energy);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }

    #[test]
    fn without_rows_shrinks_matrix_context() {
        let (springs, dist) = random_instance(&mut ChaCha8Rng::seed_from_u64(3), 6);
        let ctx = EnergyContext::from_matrix(springs.clone(), dist.clone(), 2).unwrap();
        let smaller = ctx.without_rows(&[1, 4]);
        assert_eq!(smaller.len(), 4);
        assert_eq!(smaller.graph_distance(1, 2), dist[2 * 6 + 3]);
        assert_eq!(smaller.candidates()[3].spring, springs[5]);
    }

    #[test]
    fn exact_matches_brute_force_and_dominates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let n = rng.random_range(4..11);
            let k = rng.random_range(1..=n.min(5));
            let (springs, dist) = random_instance(&mut rng, n);
            let (best, set) = brute_force(&springs, &dist, k);
            let ctx = EnergyContext::from_matrix(springs, dist, k).unwrap();
            let exact = select_exact(&ctx).unwrap();
            assert!((exact.energy - best).abs() <= 1e-9 * best);
            assert_eq!(exact.chosen, set);
            let ls = select_local_search(&ctx).unwrap();
            let greedy = select_greedy(&ctx).unwrap();
            assert!(exact.energy <= ls.energy * (1.0 + 1e-12));
            assert!(ls.energy <= greedy.energy * (1.0 + 1e-12));
            if k == 1 {
                assert_eq!(greedy.chosen, exact.chosen);
            }
        }
    }

    #[test]
    fn greedy_step_is_best_single_extension() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (springs, dist) = random_instance(&mut rng, 12);
        let ctx = EnergyContext::from_matrix(springs, dist, 5).unwrap();
        let r = select_greedy(&ctx).unwrap();
        for t in 1..=r.chosen.len() {
            let prefix = &r.chosen[..t - 1];
            let chosen_e = energy_of(&ctx, &r.chosen[..t]).unwrap();
            for v in (0..ctx.len()).filter(|v| !prefix.contains(v)) {
                let mut ext = prefix.to_vec();
                ext.push(v);
                assert!(chosen_e <= energy_of(&ctx, &ext).unwrap() + 1e-9);
            }
        }
        assert!(r.evaluations <= (ctx.k() * ctx.len()) as u64);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn attraction_only_greedy_is_nearest(seed in any::<u64>(), n in 2usize..20, k in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (springs, dist) = random_instance(&mut rng, n);
            let k = k.min(n);
            let ctx = EnergyContext::from_matrix(springs, dist, k).unwrap()
                .with_terms(EnergyTerms::AttractionOnly);
            let g = select_greedy(&ctx).unwrap();
            let near = select_nearest(&ctx).unwrap();
            prop_assert_eq!(sorted(g.chosen), sorted(near.chosen));
        }

        #[test]
        fn reported_energy_is_recomputable(seed in any::<u64>(), n in 3usize..14) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (springs, dist) = random_instance(&mut rng, n);
            let ctx = EnergyContext::from_matrix(springs, dist, 3.min(n)).unwrap();
            for s in Strategy::ALL {
                let r = select(&ctx, s, seed).unwrap();
                let mut uniq = r.chosen.clone();
                uniq.sort_unstable();
                uniq.dedup();
                prop_assert_eq!(uniq.len(), r.chosen.len());
                let e = energy_of(&ctx, &r.chosen).unwrap();
                prop_assert!((e - r.energy).abs() <= 1e-9 * e.abs().max(1.0));
            }
        }
    }
}
