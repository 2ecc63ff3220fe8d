//! Seeded synthetic datasets: Gaussian blobs, interleaved half-moons and
//! concentric rings, with optional uniform background noise.

use std::f64::consts::PI;

use exdbscan_core::{DatasetMatrix, MetricSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `centers` isotropic Gaussians with standard deviation `spread`,
    /// centres drawn uniformly from `[-10, 10]^dim`.
    Blobs { centers: usize, spread: f64 },
    /// Two interleaved half circles in the first two coordinates.
    Moons { jitter: f64 },
    /// Rings of radius 1 and `inner` in the first two coordinates.
    Rings { inner: f64, jitter: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub shape: Shape,
    pub rows: usize,
    pub dim: usize,
    /// Fraction of rows replaced by uniform noise over the data's bounding box.
    pub noise_fraction: f64,
}

impl SyntheticSpec {
    pub fn generate(&self, seed: u64) -> DatasetMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = match self.shape {
            Shape::Blobs { .. } => self.dim.max(1),
            _ => self.dim.max(2),
        };
        let noise_rows = ((self.rows as f64) * self.noise_fraction.clamp(0.0, 1.0)).round() as usize;
        let signal = self.rows - noise_rows;
        let mut rows: Vec<Vec<f64>> = match self.shape {
            Shape::Blobs { centers, spread } => blobs(&mut rng, signal, dim, centers.max(1), spread),
            Shape::Moons { jitter } => moons(&mut rng, signal, dim, jitter),
            Shape::Rings { inner, jitter } => rings(&mut rng, signal, dim, inner, jitter),
        };
        if noise_rows > 0 {
            let (lo, hi) = bounding_box(&rows, dim);
            for _ in 0..noise_rows {
                rows.push((0..dim).map(|j| rng.random_range(lo[j]..=hi[j])).collect());
            }
        }
        DatasetMatrix::from_rows(&rows, None).expect("generated rows are finite and rectangular")
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("positive sd").sample(rng)
}

fn blobs(rng: &mut ChaCha8Rng, n: usize, dim: usize, centers: usize, spread: f64) -> Vec<Vec<f64>> {
    let centres: Vec<Vec<f64>> = (0..centers)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    (0..n)
        .map(|i| {
            let c = &centres[i % centers];
            c.iter().map(|&x| x + gaussian(rng, spread)).collect()
        })
        .collect()
}

fn pad(rng: &mut ChaCha8Rng, mut p: Vec<f64>, dim: usize, jitter: f64) -> Vec<f64> {
    while p.len() < dim {
        p.push(gaussian(rng, jitter));
    }
    p
}

fn moons(rng: &mut ChaCha8Rng, n: usize, dim: usize, jitter: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = rng.random_range(0.0..PI);
            let p = if i % 2 == 0 {
                vec![t.cos(), t.sin()]
            } else {
                vec![1.0 - t.cos(), 0.5 - t.sin()]
            };
            let p = p.into_iter().map(|x| x + gaussian(rng, jitter)).collect();
            pad(rng, p, dim, jitter)
        })
        .collect()
}

fn rings(rng: &mut ChaCha8Rng, n: usize, dim: usize, inner: f64, jitter: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = rng.random_range(0.0..2.0 * PI);
            let r = if i % 2 == 0 { 1.0 } else { inner };
            let p = vec![r * t.cos() + gaussian(rng, jitter), r * t.sin() + gaussian(rng, jitter)];
            pad(rng, p, dim, jitter)
        })
        .collect()
}

fn bounding_box(rows: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![-1.0; dim];
    let mut hi = vec![1.0; dim];
    if let Some(first) = rows.first() {
        lo.clone_from(first);
        hi.clone_from(first);
    }
    for r in rows {
        for j in 0..dim {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    (lo, hi)
}

/// The `quantile` of every row's distance to its `min_pts`-th nearest
/// neighbour (counting the row itself), a common starting point for epsilon.
pub fn kdist_epsilon(data: &DatasetMatrix, min_pts: usize, quantile: f64) -> f64 {
    let l = data.rows();
    let kth = min_pts.clamp(1, l) - 1;
    let mut kd: Vec<f64> = (0..l)
        .map(|i| {
            let mut d: Vec<f64> = (0..l)
                .map(|j| MetricSpace::Euclidean.dist(data.row(i), data.row(j)))
                .collect();
            d.select_nth_unstable_by(kth, f64::total_cmp);
            d[kth]
        })
        .collect();
    kd.sort_by(f64::total_cmp);
    let idx = ((quantile.clamp(0.0, 1.0) * (l - 1) as f64).round()) as usize;
    kd[idx]
}
