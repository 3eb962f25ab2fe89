//! Zipf-skewed, coherence-correlated query stream with exact ground truth.
//!
//! Zipf rank 1 maps to the most coherent nonempty cluster, rank 2 to the
//! next, and so on. A query is a noisy copy of a uniformly chosen member of
//! the sampled cluster, renormalized to the unit sphere. Ground truth is
//! always computed by brute force over the stored vectors, never by the
//! index under test.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::dataset::{self, VectorSet};
use crate::error::{Error, Result};
use crate::index::{self, InvertedIndex};
use crate::stats::ClusterStats;

const QUERY_CSV_HEADER: &str = "query_index,truth_id,source_cluster";

/// Queries with exact nearest-neighbor ids and the cluster each query was
/// sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    dim: usize,
    queries: Vec<f32>,
    truth_ids: Vec<u32>,
    source_clusters: Vec<u32>,
    seed: u64,
}

impl QuerySet {
    pub fn new(
        dim: usize,
        queries: Vec<f32>,
        truth_ids: Vec<u32>,
        source_clusters: Vec<u32>,
        seed: u64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "dim must be at least 2, got {dim}"
            )));
        }
        if queries.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "query data length {} is not a multiple of dim {dim}",
                queries.len()
            )));
        }
        let n = queries.len() / dim;
        if truth_ids.len() != n || source_clusters.len() != n {
            return Err(Error::InvalidParameter(format!(
                "have {n} queries, {} truth ids, {} source clusters",
                truth_ids.len(),
                source_clusters.len()
            )));
        }
        Ok(Self { dim, queries, truth_ids, source_clusters, seed })
    }

    pub fn len(&self) -> usize {
        self.truth_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn query(&self, i: usize) -> &[f32] {
        &self.queries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn truth_ids(&self) -> &[u32] {
        &self.truth_ids
    }

    pub fn source_clusters(&self) -> &[u32] {
        &self.source_clusters
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Normalized Zipf weights over ranks 1..=m: weight(j) proportional to
/// j^(-s).
pub fn zipf_weights(m: usize, s: f64) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidParameter("zipf weights need at least one rank".into()));
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter("zipf exponent must be nonnegative".into()));
    }
    let mut weights: Vec<f64> = (1..=m).map(|j| (j as f64).powf(-s)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(weights)
}

/// Nonempty clusters ordered by coherence descending, ties by id ascending.
/// Clusters with missing coherence sink to the end.
fn coherence_ranking(stats: &ClusterStats) -> Vec<u32> {
    let mut ranked: Vec<u32> = (0..stats.frequencies.len() as u32)
        .filter(|&c| stats.frequencies[c as usize] > 0)
        .collect();
    ranked.sort_by(|&a, &b| {
        match (stats.coherences[a as usize], stats.coherences[b as usize]) {
            (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => a.cmp(&b),
        }
    });
    ranked
}

pub fn sample_queries(
    vs: &VectorSet,
    ix: &InvertedIndex,
    stats: &ClusterStats,
    n_q: usize,
    s: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<QuerySet> {
    if n_q == 0 {
        return Err(Error::InvalidParameter("n_q must be at least 1".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidParameter("noise_sigma must be nonnegative".into()));
    }
    if vs.len() != ix.n_total() {
        return Err(Error::InvalidParameter(format!(
            "index holds {} vectors, set has {}",
            ix.n_total(),
            vs.len()
        )));
    }
    if stats.frequencies.len() != ix.m() {
        return Err(Error::InvalidParameter(format!(
            "stats cover {} clusters, index has {}",
            stats.frequencies.len(),
            ix.m()
        )));
    }
    let ranked = coherence_ranking(stats);
    if ranked.is_empty() {
        return Err(Error::EmptyInput("all clusters are empty".into()));
    }
    let weights = zipf_weights(ranked.len(), s)?;
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }

    let dim = vs.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(n_q * dim);
    let mut truth_ids = Vec::with_capacity(n_q);
    let mut source_clusters = Vec::with_capacity(n_q);
    for _ in 0..n_q {
        let u = rng.random::<f64>();
        let rank = cumulative
            .partition_point(|&c| c <= u)
            .min(ranked.len() - 1);
        let cluster = ranked[rank];
        let members = ix.list_ids(cluster as usize);
        let base_id = members[rng.random_range(0..members.len())];
        let base = vs.row(base_id as usize);

        let mut qv: Vec<f64> = base.iter().map(|&x| x as f64).collect();
        for x in qv.iter_mut() {
            *x += noise_sigma * rng.sample::<f64, _>(StandardNormal);
        }
        let norm = qv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in qv.iter_mut() {
                *x /= norm;
            }
        } else {
            qv = base.iter().map(|&x| x as f64).collect();
        }
        let start = queries.len();
        queries.extend(qv.iter().map(|&x| x as f32));

        let truth = index::brute_force(vs, &queries[start..start + dim], 1)?;
        truth_ids.push(truth.hits[0].id);
        source_clusters.push(cluster);
    }
    QuerySet::new(dim, queries, truth_ids, source_clusters, seed)
}

/// Writes the query vectors in the AVF1 format (source clusters ride along
/// as labels) and the truth table as a sidecar CSV.
pub fn save_query_set(qs: &QuerySet, vec_path: &Path, csv_path: &Path) -> Result<()> {
    let vs = VectorSet::new(qs.dim, qs.queries.clone(), Some(qs.source_clusters.clone()))?;
    dataset::save_vectors(&vs, vec_path)?;
    let mut w = BufWriter::new(File::create(csv_path)?);
    writeln!(w, "{QUERY_CSV_HEADER}")?;
    for i in 0..qs.len() {
        writeln!(w, "{},{},{}", i, qs.truth_ids[i], qs.source_clusters[i])?;
    }
    w.flush()?;
    Ok(())
}

/// Counterpart to save_query_set. The sampling seed is not persisted;
/// loaded sets report seed 0.
pub fn load_query_set(vec_path: &Path, csv_path: &Path) -> Result<QuerySet> {
    let vs = dataset::load_vectors(vec_path)?;
    let reader = BufReader::new(File::open(csv_path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(header)) if header.trim_end() == QUERY_CSV_HEADER => {}
        Some(Ok(header)) => {
            return Err(Error::Format(format!("bad query CSV header: {header:?}")))
        }
        Some(Err(e)) => return Err(Error::Io(e)),
        None => return Err(Error::Format("query CSV is empty".into())),
    }
    let mut truth_ids = Vec::new();
    let mut source_clusters = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "query CSV row {row} has {} fields, expected 3",
                fields.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<u32> {
            s.parse::<u32>()
                .map_err(|_| Error::Format(format!("query CSV row {row}: bad {what} {s:?}")))
        };
        let idx = parse(fields[0], "query_index")?;
        if idx as usize != row {
            return Err(Error::Format(format!(
                "query CSV row {row} has query_index {idx}"
            )));
        }
        truth_ids.push(parse(fields[1], "truth_id")?);
        source_clusters.push(parse(fields[2], "source_cluster")?);
    }
    if truth_ids.len() != vs.len() {
        return Err(Error::Format(format!(
            "query CSV has {} rows for {} vectors",
            truth_ids.len(),
            vs.len()
        )));
    }
    if let Some(labels) = vs.labels() {
        if labels != source_clusters.as_slice() {
            return Err(Error::Format(
                "source clusters in CSV disagree with vector file labels".into(),
            ));
        }
    }
    QuerySet::new(vs.dim(), vs.vectors().to_vec(), truth_ids, source_clusters, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SynthConfig;
    use crate::quantizer;
    use std::path::PathBuf;

    fn tmp_path(name: &str) -> PathBuf {
        std::env::temp_dir().join(format!("workload_test_{}_{name}", std::process::id()))
    }

    fn pipeline(config: &SynthConfig, m: usize) -> (VectorSet, InvertedIndex, ClusterStats) {
        let vs = dataset::generate_synthetic(config).unwrap();
        let centroids = quantizer::train_kmeans(&vs, m, 40, config.seed ^ 1).unwrap();
        let ix = index::build_ivf(&vs, centroids).unwrap();
        let stats = ClusterStats::compute(&vs, &ix, 0.2, 0.8).unwrap();
        (vs, ix, stats)
    }

    fn small_config() -> SynthConfig {
        SynthConfig {
            n: 600,
            dim: 8,
            m_concepts: 6,
            zipf_exponent_sizes: 1.0,
            alpha: 0.5,
            base_spread: 0.01,
            seed: 31,
        }
    }

    #[test]
    fn zipf_harmonic_example() {
        let w = zipf_weights(4, 1.0).unwrap();
        let expected = [0.48, 0.24, 0.16, 0.12];
        for (a, b) in w.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zipf_flat_and_decreasing() {
        let w = zipf_weights(5, 0.0).unwrap();
        assert!(w.iter().all(|&x| (x - 0.2).abs() < 1e-12));
        let w = zipf_weights(20, 0.7).unwrap();
        assert!(w.windows(2).all(|p| p[0] > p[1]));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(zipf_weights(0, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn zero_noise_queries_hit_their_base_vector() {
        let (_, ix, stats) = pipeline(&small_config(), 6);
        let vs = dataset::generate_synthetic(&small_config()).unwrap();
        let qs = sample_queries(&vs, &ix, &stats, 40, 1.0, 0.0, 5).unwrap();
        for i in 0..qs.len() {
            let hit = ix.search(qs.query(i), ix.m(), 1).unwrap().hits[0].id;
            assert_eq!(hit, qs.truth_ids()[i]);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let (vs, ix, stats) = pipeline(&small_config(), 6);
        let a = sample_queries(&vs, &ix, &stats, 50, 1.0, 0.05, 77).unwrap();
        let b = sample_queries(&vs, &ix, &stats, 50, 1.0, 0.05, 77).unwrap();
        assert_eq!(a, b);
        let c = sample_queries(&vs, &ix, &stats, 50, 1.0, 0.05, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn truth_ignores_the_index_structure() {
        let (vs, ix, stats) = pipeline(&small_config(), 6);
        let qs = sample_queries(&vs, &ix, &stats, 30, 1.0, 0.05, 9).unwrap();
        for i in 0..qs.len() {
            let exact = index::brute_force(&vs, qs.query(i), 1).unwrap();
            assert_eq!(exact.hits[0].id, qs.truth_ids()[i]);
        }
    }

    #[test]
    fn query_set_round_trip() {
        let (vs, ix, stats) = pipeline(&small_config(), 6);
        let qs = sample_queries(&vs, &ix, &stats, 25, 1.0, 0.05, 13).unwrap();
        let vec_path = tmp_path("queries.avf");
        let csv_path = tmp_path("queries.csv");
        save_query_set(&qs, &vec_path, &csv_path).unwrap();
        let loaded = load_query_set(&vec_path, &csv_path).unwrap();
        std::fs::remove_file(&vec_path).unwrap();
        std::fs::remove_file(&csv_path).unwrap();
        assert_eq!(loaded.dim(), qs.dim());
        assert_eq!(loaded.truth_ids(), qs.truth_ids());
        assert_eq!(loaded.source_clusters(), qs.source_clusters());
        for i in 0..qs.len() {
            assert_eq!(qs.query(i), loaded.query(i));
        }
    }

    #[test]
    fn more_coherent_clusters_receive_more_queries() {
        let (vs, ix, stats) = pipeline(&small_config(), 6);
        let qs = sample_queries(&vs, &ix, &stats, 400, 1.0, 0.05, 3).unwrap();
        let mut hit_count = vec![0usize; ix.m()];
        for &c in qs.source_clusters() {
            hit_count[c as usize] += 1;
        }
        let total: f64 = qs.len() as f64;
        let mut weighted = 0.0;
        let mut unweighted = 0.0;
        let mut nonempty = 0.0;
        for c in 0..ix.m() {
            if let Some(rho) = stats.coherences[c] {
                weighted += rho * hit_count[c] as f64 / total;
                unweighted += rho;
                nonempty += 1.0;
            }
        }
        assert!(weighted > unweighted / nonempty);
    }

    #[test]
    fn rejects_degenerate_requests() {
        let (vs, ix, stats) = pipeline(&small_config(), 6);
        assert!(matches!(
            sample_queries(&vs, &ix, &stats, 0, 1.0, 0.05, 1),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            sample_queries(&vs, &ix, &stats, 10, 1.0, -0.5, 1),
            Err(Error::InvalidParameter(_))
        ));
    }
}
