//! Counterfactual explanations for DBSCAN cluster assignments.
//!
//! A fitted clustering is frozen into a [`DbscanModel`], whose assignment
//! rule places any point into the cluster of a core point within `epsilon`.
//! For every cluster a weighted graph over its core points captures the
//! density-connected structure. Reference cores are chosen by minimising a
//! spring/charge energy (attraction toward the explained point, repulsion
//! between chosen cores along graph paths) and each counterfactual is then
//! placed `epsilon` away from its reference core, which makes it valid by
//! construction.
//!
//! ```
//! use std::sync::Arc;
//! use exdbscan_core::{
//!     explain, fit, DatasetMatrix, ExplanationQuery, GraphSet, MetricSpace, Strategy, Target,
//! };
//!
//! let data = DatasetMatrix::from_rows(&[vec![0.0], vec![0.5], vec![1.0], vec![5.0]], None).unwrap();
//! let model = fit(Arc::new(data), 0.6, 2, MetricSpace::Euclidean).unwrap();
//! let graphs = GraphSet::build(&model).unwrap();
//! let query = ExplanationQuery::new(vec![5.0], Target::Cluster(0), 2, Strategy::Greedy);
//! let set = explain(&model, &graphs, &query).unwrap();
//! let coords: Vec<f64> = set.counterfactuals.iter().map(|cf| cf.coords[0]).collect();
//! assert!((coords[0] - 1.6).abs() < 1e-12 && (coords[1] - 1.1).abs() < 1e-12);
//! ```

pub mod cluster_graph;
pub mod constructor;
pub mod data;
pub mod dbscan;
mod error;
pub mod metrics;
pub mod selector;

pub use cluster_graph::{
    admissible_vertices, build_graph, normalization_scale, ClusterGraph, GraphSet,
    PathDistanceTable,
};
pub use constructor::{
    explain, place_constrained, place_unconstrained, Counterfactual, CounterfactualSet,
    ExplanationQuery, Target,
};
pub use data::{
    distance, fit_scaling, valid_region_contains, ConstraintSpec, CorrelatedGroup,
    CorrelationSign, DatasetMatrix, MetricSpace, Monotonic, ScalingTransform,
};
pub use dbscan::{fit, DbscanModel, NOISE};
pub use error::{Error, Result};
pub use metrics::{
    diversity, lof_score, mean_and_sem, percentile_curve, proximity, sparsity, validity,
    DiversityDistance, LofModel, PercentileCurve, QueryMetrics, SortOrder,
};
pub use selector::{
    energy_of, select, select_any_cluster, select_exact, select_furthest, select_greedy,
    select_local_search, select_nearest, select_random, Candidate, EnergyContext, EnergyTerms,
    SelectionResult, Strategy,
};
