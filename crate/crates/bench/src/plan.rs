//! Query sampling.
//!
//! Every row is put in the partition `assign` gives it (a cluster or noise).
//! From each partition `samples_per_partition` sources are drawn without
//! replacement (all members when the partition is smaller). Cluster sources
//! target every other cluster, noise sources target every cluster.
//!
//! Seeds are derived from the master seed with splitmix64:
//! `derive_seed(master, stream) = splitmix64(master ^ splitmix64(stream))`.
//! Partition `p` (clusters `0..m`, then noise as `m`) samples with stream
//! `SAMPLE_STREAM + p`; query `i` of the plan gets `QUERY_STREAM + i`.

use exdbscan_core::{DbscanModel, NOISE};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, Result};

pub const SAMPLE_STREAM: u64 = 0x5341_4d50_0000_0000;
pub const QUERY_STREAM: u64 = 0x5155_4552_0000_0000;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlannedQuery {
    pub index: usize,
    pub source_row: usize,
    /// Partition of the source, `-1` for noise.
    pub source_label: i32,
    pub target: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryPlan {
    pub queries: Vec<PlannedQuery>,
    /// Partitions that held fewer members than requested, as (label, size).
    pub short_partitions: Vec<(i32, usize)>,
}

impl QueryPlan {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

pub fn build_query_plan(model: &DbscanModel, samples: usize, seed: u64) -> Result<QueryPlan> {
    let m = model.num_clusters();
    if m == 0 {
        return Err(BenchError::NoClusters);
    }
    let mut partitions: Vec<Vec<usize>> = vec![Vec::new(); m + 1];
    for (r, row) in model.data().iter_rows().enumerate() {
        let label = model.assign(row)?;
        let slot = if label == NOISE { m } else { label as usize };
        partitions[slot].push(r);
    }

    let mut plan = QueryPlan::default();
    for (p, members) in partitions.iter().enumerate() {
        let label = if p == m { NOISE } else { p as i32 };
        let targets: Vec<usize> = (0..m).filter(|&t| t as i32 != label).collect();
        if members.is_empty() || targets.is_empty() {
            continue;
        }
        if members.len() < samples {
            plan.short_partitions.push((label, members.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SAMPLE_STREAM + p as u64));
        let mut picked: Vec<usize> = sample(&mut rng, members.len(), samples.min(members.len()))
            .into_iter()
            .map(|i| members[i])
            .collect();
        picked.sort_unstable();
        for row in picked {
            for &target in &targets {
                let index = plan.queries.len();
                plan.queries.push(PlannedQuery {
                    index,
                    source_row: row,
                    source_label: label,
                    target,
                    seed: derive_seed(seed, QUERY_STREAM + index as u64),
                });
            }
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use exdbscan_core::{fit, DatasetMatrix, MetricSpace};
    use std::sync::Arc;

    fn two_clusters_with_noise(per: usize, noise: usize) -> DbscanModel {
        let mut rows = Vec::new();
        for i in 0..per {
            rows.push(vec![i as f64 * 0.1]);
            rows.push(vec![100.0 + i as f64 * 0.1]);
        }
        for i in 0..noise {
            rows.push(vec![200.0 + 10.0 * i as f64]);
        }
        let data = DatasetMatrix::from_rows(&rows, None).unwrap();
        fit(Arc::new(data), 0.15, 2, MetricSpace::Euclidean).unwrap()
    }

    #[test]
    fn query_count_formula() {
        let m = two_clusters_with_noise(15, 12);
        assert_eq!(m.num_clusters(), 2);
        let plan = build_query_plan(&m, 10, 1).unwrap();
        assert_eq!(plan.len(), 10 * 2 * 1 + 10 * 2);
        assert!(plan.short_partitions.is_empty());
        for q in &plan.queries {
            assert_ne!(q.source_label, q.target as i32);
            assert_eq!(m.assign(m.data().row(q.source_row)).unwrap(), q.source_label);
        }
        let mut sources: Vec<usize> = plan.queries.iter().map(|q| q.source_row).collect();
        sources.dedup();
        assert_eq!(sources.len(), 30, "sampled without replacement");
    }

    #[test]
    fn small_partitions_use_all_members() {
        let m = two_clusters_with_noise(15, 3);
        let plan = build_query_plan(&m, 10, 1).unwrap();
        assert_eq!(plan.len(), 10 * 2 + 3 * 2);
        assert_eq!(plan.short_partitions, vec![(NOISE, 3)]);
    }

    #[test]
    fn single_cluster_without_noise_is_empty() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.1]).collect();
        let data = DatasetMatrix::from_rows(&rows, None).unwrap();
        let m = fit(Arc::new(data), 0.15, 2, MetricSpace::Euclidean).unwrap();
        assert!(build_query_plan(&m, 10, 0).unwrap().is_empty());
    }

    #[test]
    fn no_clusters_is_an_error() {
        let data = DatasetMatrix::from_rows(&[vec![0.0], vec![5.0]], None).unwrap();
        let m = fit(Arc::new(data), 0.1, 2, MetricSpace::Euclidean).unwrap();
        assert!(matches!(build_query_plan(&m, 10, 0), Err(BenchError::NoClusters)));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let m = two_clusters_with_noise(40, 0);
        let a = build_query_plan(&m, 10, 7).unwrap();
        assert_eq!(a, build_query_plan(&m, 10, 7).unwrap());
        assert_ne!(a, build_query_plan(&m, 10, 8).unwrap());
        let seeds: std::collections::BTreeSet<u64> = a.queries.iter().map(|q| q.seed).collect();
        assert_eq!(seeds.len(), a.len());
    }

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference generator seeded with 0.
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(0x9e37_79b9_7f4a_7c15), 0x6e78_9e6a_a1b9_65f4);
    }
}
