//! Placement of counterfactuals in the epsilon-ball of their reference cores
//! and the end-to-end explanation pipeline.

use crate::cluster_graph::GraphSet;
use crate::data::{valid_region_contains, ConstraintSpec, CorrelationSign, MetricSpace};
use crate::dbscan::DbscanModel;
use crate::error::{Error, Result};
use crate::selector::{select, EnergyContext, Strategy};

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    MetricSpace::Euclidean.dist(a, b)
}

/// Pulls the free coordinates of `x` toward `q` until `x` is within `eps` of
/// `q` in floating point. Returns false when the fixed coordinates alone
/// already put `x` outside the ball.
fn pull_inside(x: &mut [f64], q: &[f64], eps: f64, fixed: &[bool]) -> bool {
    let (mut fixed_sq, mut free_sq) = (0.0, 0.0);
    for j in 0..x.len() {
        let d = (x[j] - q[j]) * (x[j] - q[j]);
        if fixed[j] {
            fixed_sq += d;
        } else {
            free_sq += d;
        }
    }
    if euclid(x, q) <= eps {
        return true;
    }
    let room = eps * eps - fixed_sq;
    if room <= 0.0 || free_sq == 0.0 {
        return false;
    }
    let t = (room / free_sq).sqrt().min(1.0);
    let start: Vec<f64> = x.to_vec();
    let mut shrink = 0.0;
    for _ in 0..64 {
        let s = t * (1.0 - shrink);
        for j in (0..x.len()).filter(|&j| !fixed[j]) {
            x[j] = q[j] + (start[j] - q[j]) * s;
        }
        if euclid(x, q) <= eps {
            return true;
        }
        shrink = if shrink == 0.0 {
            f64::EPSILON
        } else {
            shrink * 2.0
        };
    }
    false
}

/// Moves from `origin` straight toward `core` and stops `epsilon` short of
/// it. The returned point is never further than `epsilon` from `core`.
pub fn place_unconstrained(origin: &[f64], core: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if origin.len() != core.len() {
        return Err(Error::DimensionMismatch {
            expected: origin.len(),
            found: core.len(),
        });
    }
    let d = euclid(origin, core);
    if !(d > epsilon) {
        return Err(Error::PreconditionViolated(format!(
            "origin is {d} from the core, not beyond epsilon {epsilon}"
        )));
    }
    let step = (d - epsilon) / d;
    let mut x: Vec<f64> = origin
        .iter()
        .zip(core)
        .map(|(p, q)| p + step * (q - p))
        .collect();
    let fixed = vec![false; x.len()];
    if !pull_inside(&mut x, core, epsilon, &fixed) {
        return Err(Error::InternalInconsistency(
            "could not bring the placement inside the core's neighbourhood".into(),
        ));
    }
    Ok(x)
}

/// Zeroes deltas that violate a correlated group and marks them fixed.
/// Returns whether anything changed.
fn repair_correlations(
    x: &mut [f64],
    origin: &[f64],
    spec: &ConstraintSpec,
    fixed: &mut [bool],
) -> bool {
    let mut changed = false;
    for g in &spec.correlated_groups {
        let delta = |x: &[f64], j: usize| x[j] - origin[j];
        if g.pairs().all(|(a, b)| g.sign.compatible(delta(x, a), delta(x, b))) {
            continue;
        }
        let keep: Vec<usize> = match g.sign {
            CorrelationSign::Positive => {
                let pos: f64 = g.columns.iter().map(|&j| delta(x, j).max(0.0)).sum();
                let neg: f64 = g.columns.iter().map(|&j| (-delta(x, j)).max(0.0)).sum();
                g.columns
                    .iter()
                    .copied()
                    .filter(|&j| if pos >= neg { delta(x, j) > 0.0 } else { delta(x, j) < 0.0 })
                    .collect()
            }
            CorrelationSign::Negative => {
                let largest = |positive: bool| {
                    g.columns
                        .iter()
                        .copied()
                        .filter(|&j| if positive { delta(x, j) > 0.0 } else { delta(x, j) < 0.0 })
                        .max_by(|&a, &b| delta(x, a).abs().total_cmp(&delta(x, b).abs()))
                };
                largest(true).into_iter().chain(largest(false)).collect()
            }
        };
        for &j in &g.columns {
            if !keep.contains(&j) && x[j] != origin[j] {
                x[j] = origin[j];
                fixed[j] = true;
                changed = true;
            }
        }
    }
    changed
}

/// Placement that honours `spec`: frozen features stay at the origin's
/// values, monotonic features stay in their halfspaces and correlated
/// groups keep their sign pattern, while the point stays within `epsilon`
/// of `core`.
///
/// The point first moves toward the core in the actionable subspace only,
/// stopping where its full-space distance to the core equals `epsilon`.
/// Out-of-bounds coordinates are then clamped, violating correlation deltas
/// zeroed, and the remaining free coordinates pulled back toward the core
/// until the point is inside its ball again; this repeats until stable.
pub fn place_constrained(
    origin: &[f64],
    core: &[f64],
    epsilon: f64,
    spec: &ConstraintSpec,
    core_row: usize,
) -> Result<Vec<f64>> {
    if origin.len() != core.len() {
        return Err(Error::DimensionMismatch {
            expected: origin.len(),
            found: core.len(),
        });
    }
    let n = origin.len();
    let infeasible = || Error::InfeasiblePlacement { core: core_row };
    let mut fixed = vec![false; n];
    spec.non_actionable.iter().for_each(|&j| fixed[j] = true);

    let frozen_sq: f64 = spec
        .non_actionable
        .iter()
        .map(|&j| (origin[j] - core[j]).powi(2))
        .sum();
    if frozen_sq > epsilon * epsilon {
        return Err(infeasible());
    }
    let radius = (epsilon * epsilon - frozen_sq).sqrt();
    let actionable_dist = (0..n)
        .filter(|&j| !fixed[j])
        .map(|j| (origin[j] - core[j]).powi(2))
        .sum::<f64>()
        .sqrt();
    if !(actionable_dist > radius) {
        return Err(Error::PreconditionViolated(format!(
            "origin is within epsilon {epsilon} of core row {core_row}"
        )));
    }
    let step = (actionable_dist - radius) / actionable_dist;
    let mut x = origin.to_vec();
    for j in (0..n).filter(|&j| !fixed[j]) {
        x[j] = origin[j] + step * (core[j] - origin[j]);
    }

    for _ in 0..=n + 1 {
        let mut changed = false;
        for (&j, rule) in &spec.monotonic {
            let (lo, hi) = rule.bounds(origin[j]);
            if x[j] < lo || x[j] > hi {
                x[j] = x[j].clamp(lo, hi);
                fixed[j] = true;
                changed = true;
            }
        }
        changed |= repair_correlations(&mut x, origin, spec, &mut fixed);
        if euclid(&x, core) > epsilon {
            if !pull_inside(&mut x, core, epsilon, &fixed) {
                return Err(infeasible());
            }
            changed = true;
        }
        if !changed {
            break;
        }
    }
    if euclid(&x, core) <= epsilon && valid_region_contains(&x, origin, spec) {
        Ok(x)
    } else {
        Err(infeasible())
    }
}

/// Requested destination of an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Cluster(usize),
    /// Any cluster other than the point's own.
    Any,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationQuery {
    pub point: Vec<f64>,
    pub target: Target,
    pub k: usize,
    pub strategy: Strategy,
    pub constraints: ConstraintSpec,
    pub seed: u64,
}

impl ExplanationQuery {
    pub fn new(point: Vec<f64>, target: Target, k: usize, strategy: Strategy) -> Self {
        ExplanationQuery {
            point,
            target,
            k,
            strategy,
            constraints: ConstraintSpec::default(),
            seed: 0,
        }
    }

    pub fn with_constraints(mut self, constraints: ConstraintSpec) -> Self {
        self.constraints = constraints;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    pub coords: Vec<f64>,
    /// Dataset row of the reference core.
    pub reference_row: usize,
    pub cluster: usize,
    /// Local vertex of the reference core in its cluster graph.
    pub vertex: usize,
    pub distance_to_origin: f64,
    pub distance_to_core: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualSet {
    pub origin: Vec<f64>,
    pub target: Target,
    pub strategy: Strategy,
    /// Counterfactuals in selection order.
    pub counterfactuals: Vec<Counterfactual>,
    /// Energy of the final selection.
    pub energy: f64,
    /// Core rows dropped because no valid placement existed.
    pub rejected_rows: Vec<usize>,
}

impl CounterfactualSet {
    pub fn len(&self) -> usize {
        self.counterfactuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counterfactuals.is_empty()
    }
}

/// Filters admissible cores, selects `k` of them with the query's strategy
/// and places one counterfactual per selected core.
///
/// Every output is checked against the assignment rule; a core whose
/// placement fails is dropped and the selection rerun without it.
pub fn explain(
    model: &DbscanModel,
    graphs: &GraphSet,
    query: &ExplanationQuery,
) -> Result<CounterfactualSet> {
    let origin = &query.point;
    if origin.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: origin.len(),
        });
    }
    if query.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let spec = &query.constraints;
    spec.validate(model.dim())?;

    let mut ctx = match query.target {
        Target::Cluster(t) => {
            if t >= model.num_clusters() {
                return Err(Error::UnknownCluster(t as i64));
            }
            if model.assign(origin)? == t as i32 {
                return Err(Error::AlreadyInTarget(t));
            }
            EnergyContext::for_cluster(model, graphs, origin, spec, t, query.k)?
        }
        Target::Any => EnergyContext::for_any_cluster(model, graphs, origin, spec, query.k)?,
    };
    let eps = model.epsilon();
    let mut rejected_rows = Vec::new();
    loop {
        let sel = select(&ctx, query.strategy, query.seed)?;
        let mut failed = Vec::new();
        let mut cfs = Vec::with_capacity(sel.cores.len());
        for cand in &sel.cores {
            let core = model.data().row(cand.row);
            let placed = if spec.is_empty() {
                place_unconstrained(origin, core, eps)
            } else {
                place_constrained(origin, core, eps, spec, cand.row)
            };
            let coords = match placed {
                Ok(c) => c,
                Err(Error::InfeasiblePlacement { .. }) => {
                    failed.push(cand.row);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let distance_to_core = euclid(&coords, core);
            let valid = distance_to_core <= eps
                && model.assign(&coords)? == cand.cluster as i32
                && valid_region_contains(&coords, origin, spec);
            if !valid {
                failed.push(cand.row);
                continue;
            }
            cfs.push(Counterfactual {
                distance_to_origin: euclid(&coords, origin),
                distance_to_core,
                coords,
                reference_row: cand.row,
                cluster: cand.cluster,
                vertex: cand.vertex,
            });
        }
        if failed.is_empty() {
            return Ok(CounterfactualSet {
                origin: origin.clone(),
                target: query.target,
                strategy: query.strategy,
                counterfactuals: cfs,
                energy: sel.energy,
                rejected_rows,
            });
        }
        rejected_rows.extend_from_slice(&failed);
        ctx = ctx.without_rows(&failed);
        if ctx.is_empty() {
            return Err(Error::NoAdmissibleCore);
        }
    }
}
