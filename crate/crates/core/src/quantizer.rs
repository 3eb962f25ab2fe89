//! Coarse quantizer: Lloyd's k-means with k-means++ seeding.
//!
//! Training assigns by Euclidean distance; index-side assignment uses
//! maximum inner product. On unit-normalized data the two orderings agree,
//! which is the regime everything downstream runs in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dataset::VectorSet;
use crate::error::{Error, Result};
use crate::vecmath;

const RELATIVE_SSE_TOLERANCE: f64 = 1e-6;

/// Cluster centers, plus the training SSE and iteration count that produced
/// them. Centers built from labels or raw vectors report zero for both.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    dim: usize,
    vectors: Vec<f32>,
    train_sse: f64,
    iterations_run: usize,
}

impl Centroids {
    pub fn from_vectors(dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "dim must be at least 2, got {dim}"
            )));
        }
        if vectors.is_empty() || vectors.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "centroid data length {} is not a positive multiple of dim {dim}",
                vectors.len()
            )));
        }
        Ok(Self { dim, vectors, train_sse: 0.0, iterations_run: 0 })
    }

    /// One centroid per label value, at the arithmetic mean of its members.
    /// Labels must be dense in [0, max_label].
    pub fn from_labels(vs: &VectorSet) -> Result<Self> {
        let labels = vs
            .labels()
            .ok_or_else(|| Error::InvalidParameter("vector set has no labels".into()))?;
        let m = match labels.iter().max() {
            Some(&l) => l as usize + 1,
            None => return Err(Error::EmptyInput("label partition over no vectors".into())),
        };
        let dim = vs.dim();
        let mut sums = vec![0.0f64; m * dim];
        let mut counts = vec![0usize; m];
        for i in 0..vs.len() {
            let c = labels[i] as usize;
            counts[c] += 1;
            for (j, &x) in vs.row(i).iter().enumerate() {
                sums[c * dim + j] += x as f64;
            }
        }
        if let Some(hole) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidParameter(format!(
                "label {hole} has no members; labels must be dense"
            )));
        }
        let vectors = sums
            .iter()
            .enumerate()
            .map(|(k, &s)| (s / counts[k / dim] as f64) as f32)
            .collect();
        Ok(Self { dim, vectors, train_sse: 0.0, iterations_run: 0 })
    }

    pub(crate) fn from_parts(
        dim: usize,
        vectors: Vec<f32>,
        train_sse: f64,
        iterations_run: usize,
    ) -> Self {
        Self { dim, vectors, train_sse, iterations_run }
    }

    pub fn m(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub fn train_sse(&self) -> f64 {
        self.train_sse
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }
}

/// State captured after each assignment pass, for auditing convergence.
#[derive(Debug, Clone)]
pub struct KMeansSnapshot {
    pub centroids: Vec<f32>,
    pub assignments: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct KMeansTrace {
    pub sse_per_iteration: Vec<f64>,
    pub snapshots: Vec<KMeansSnapshot>,
}

pub fn train_kmeans(vs: &VectorSet, m: usize, max_iters: usize, seed: u64) -> Result<Centroids> {
    Ok(train_kmeans_traced(vs, m, max_iters, seed, false)?.0)
}

/// Full training loop. With keep_snapshots the trace records the centroids
/// and assignments behind every SSE value, so the SSE sequence can be
/// recomputed independently.
pub fn train_kmeans_traced(
    vs: &VectorSet,
    m: usize,
    max_iters: usize,
    seed: u64,
    keep_snapshots: bool,
) -> Result<(Centroids, KMeansTrace)> {
    let n = vs.len();
    if m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds vector count {n}"
        )));
    }
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }

    let dim = vs.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut centroids = seed_plusplus(vs, m, &mut rng);
    let mut assignments = vec![0u32; n];
    let mut dists = vec![0.0f64; n];
    let mut trace = KMeansTrace::default();
    let mut prev_sse = f64::INFINITY;
    let mut sse;
    let mut iterations_run = 0;

    loop {
        iterations_run += 1;
        sse = assign_pass(vs, &centroids, &mut assignments, &mut dists);
        repair_empty(vs, &mut centroids, &mut assignments, &mut dists, &mut sse, m);
        trace.sse_per_iteration.push(sse);
        if keep_snapshots {
            trace.snapshots.push(KMeansSnapshot {
                centroids: centroids.clone(),
                assignments: assignments.clone(),
            });
        }
        let converged = prev_sse.is_finite() && prev_sse - sse < RELATIVE_SSE_TOLERANCE * prev_sse;
        if iterations_run >= max_iters || converged || sse == 0.0 {
            break;
        }
        update_means(vs, &assignments, &mut centroids, m);
        prev_sse = sse;
    }

    Ok((Centroids::from_parts(dim, centroids, sse, iterations_run), trace))
}

fn seed_plusplus(vs: &VectorSet, m: usize, rng: &mut ChaCha12Rng) -> Vec<f32> {
    let n = vs.len();
    let dim = vs.dim();
    let mut centroids = Vec::with_capacity(m * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(vs.row(first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| vecmath::squared_distance(vs.row(i), vs.row(first)))
        .collect();
    for _ in 1..m {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let row = vs.row(next);
        centroids.extend_from_slice(row);
        for i in 0..n {
            let d = vecmath::squared_distance(vs.row(i), row);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn assign_pass(
    vs: &VectorSet,
    centroids: &[f32],
    assignments: &mut [u32],
    dists: &mut [f64],
) -> f64 {
    let dim = vs.dim();
    let m = centroids.len() / dim;
    let mut sse = 0.0;
    for i in 0..vs.len() {
        let row = vs.row(i);
        let mut best = 0usize;
        let mut best_d = vecmath::squared_distance(row, &centroids[0..dim]);
        for c in 1..m {
            let d = vecmath::squared_distance(row, &centroids[c * dim..(c + 1) * dim]);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        assignments[i] = best as u32;
        dists[i] = best_d;
        sse += best_d;
    }
    sse
}

/// Reseeds every empty cluster onto the not-yet-stolen point farthest from
/// its current centroid. Each steal strictly reduces the SSE, so the
/// monotone convergence argument survives repair.
fn repair_empty(
    vs: &VectorSet,
    centroids: &mut [f32],
    assignments: &mut [u32],
    dists: &mut [f64],
    sse: &mut f64,
    m: usize,
) {
    let dim = vs.dim();
    let mut counts = vec![0usize; m];
    for &a in assignments.iter() {
        counts[a as usize] += 1;
    }
    let mut used = vec![false; vs.len()];
    while let Some(empty) = (0..m).find(|&c| counts[c] == 0) {
        let mut farthest: Option<usize> = None;
        for p in 0..vs.len() {
            if used[p] {
                continue;
            }
            if farthest.map_or(true, |f| dists[p] > dists[f]) {
                farthest = Some(p);
            }
        }
        let p = farthest.expect("m <= n leaves a donor point");
        counts[assignments[p] as usize] -= 1;
        counts[empty] += 1;
        *sse -= dists[p];
        dists[p] = 0.0;
        assignments[p] = empty as u32;
        used[p] = true;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(vs.row(p));
    }
}

fn update_means(vs: &VectorSet, assignments: &[u32], centroids: &mut [f32], m: usize) {
    let dim = vs.dim();
    let mut sums = vec![0.0f64; m * dim];
    let mut counts = vec![0usize; m];
    for i in 0..vs.len() {
        let c = assignments[i] as usize;
        counts[c] += 1;
        for (j, &x) in vs.row(i).iter().enumerate() {
            sums[c * dim + j] += x as f64;
        }
    }
    for c in 0..m {
        if counts[c] == 0 {
            continue;
        }
        for j in 0..dim {
            centroids[c * dim + j] = (sums[c * dim + j] / counts[c] as f64) as f32;
        }
    }
}

/// Cluster id with the maximum inner product against v; ties go to the
/// lowest id.
pub fn assign(c: &Centroids, v: &[f32]) -> Result<usize> {
    if v.len() != c.dim {
        return Err(Error::DimensionMismatch { expected: c.dim, got: v.len() });
    }
    let mut best = 0usize;
    let mut best_score = vecmath::dot(c.row(0), v);
    for i in 1..c.m() {
        let score = vecmath::dot(c.row(i), v);
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}
