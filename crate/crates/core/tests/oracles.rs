//! Cross-checks of derived quantities against independent recomputations:
//! brute-force search, double-loop coherence, linear-scan assignment,
//! prefix-sum cost accounting, and distributional checks on the sampled
//! query stream.

use std::cmp::Ordering;
use std::sync::OnceLock;

use adaptive_ivf::bench;
use adaptive_ivf::dataset::{self, SynthConfig};
use adaptive_ivf::index::{self, InvertedIndex};
use adaptive_ivf::policy::{PolicyKind, TierMultipliers};
use adaptive_ivf::quantizer::{self, Centroids};
use adaptive_ivf::stats::{self, ClusterStats};
use adaptive_ivf::workload::{self, QuerySet};
use adaptive_ivf::VectorSet;

use statrs::distribution::{ChiSquared, ContinuousCDF};

struct World {
    vs: VectorSet,
    ix: InvertedIndex,
    stats: ClusterStats,
    queries: QuerySet,
}

fn world() -> &'static World {
    static WORLD: OnceLock<World> = OnceLock::new();
    WORLD.get_or_init(|| {
        let config = SynthConfig {
            n: 4000,
            dim: 16,
            m_concepts: 32,
            zipf_exponent_sizes: 1.0,
            alpha: 0.5,
            base_spread: 0.005,
            seed: 101,
        };
        let vs = dataset::generate_synthetic(&config).unwrap();
        let centroids = quantizer::train_kmeans(&vs, 32, 40, 202).unwrap();
        let ix = index::build_ivf(&vs, centroids).unwrap();
        let stats = ClusterStats::compute(&vs, &ix, 0.2, 0.8).unwrap();
        let queries = workload::sample_queries(&vs, &ix, &stats, 600, 1.0, 0.02, 303).unwrap();
        World { vs, ix, stats, queries }
    })
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..a.len() {
        let d = a[i] as f64 - b[i] as f64;
        acc += d * d;
    }
    acc
}

#[test]
fn trained_sse_matches_an_independent_recomputation() {
    let w = world();
    let (centroids, trace) = quantizer::train_kmeans_traced(&w.vs, 32, 40, 202, true).unwrap();
    let last = trace.snapshots.last().unwrap();
    let dim = w.vs.dim();
    let mut sse = 0.0f64;
    for p in 0..w.vs.len() {
        let c = last.assignments[p] as usize;
        sse += squared_distance(w.vs.row(p), &last.centroids[c * dim..(c + 1) * dim]);
    }
    let reported = *trace.sse_per_iteration.last().unwrap();
    assert!(
        (sse - reported).abs() <= 1e-9 * reported.max(1.0),
        "recomputed {sse}, reported {reported}"
    );
    assert_eq!(reported, centroids.train_sse());
    for pair in trace.sse_per_iteration.windows(2) {
        assert!(pair[1] <= pair[0] * (1.0 + 1e-9));
    }
}

#[test]
fn assignment_matches_a_linear_scan() {
    let w = world();
    let c = w.ix.centroids();
    for p in 0..w.vs.len() {
        let row = w.vs.row(p);
        let mut best = 0usize;
        let mut best_score = dot(row, c.row(0));
        for j in 1..c.m() {
            let s = dot(row, c.row(j));
            if s > best_score {
                best = j;
                best_score = s;
            }
        }
        assert_eq!(quantizer::assign(c, row).unwrap(), best);
    }
}

#[test]
fn coherence_matches_a_double_loop() {
    let w = world();
    let assignments = w.ix.assignments();
    let c = w.ix.centroids();
    let m = c.m();
    for cluster in 0..m {
        let mut radius: Option<f64> = None;
        let mut foreign: Option<f64> = None;
        for p in 0..w.vs.len() {
            let d = squared_distance(w.vs.row(p), c.row(cluster)).sqrt();
            if assignments[p] as usize == cluster {
                radius = Some(radius.map_or(d, |r| r.max(d)));
            } else {
                foreign = Some(foreign.map_or(d, |f| f.min(d)));
            }
        }
        let expected = match (radius, foreign) {
            (Some(r), Some(f)) => Some(((f - r) / r.max(1e-12)).min(stats::COHERENCE_CAP)),
            _ => None,
        };
        assert_eq!(w.stats.radii[cluster], radius);
        assert_eq!(w.stats.coherences[cluster], expected);
    }
}

#[test]
fn probing_every_list_reproduces_brute_force() {
    let w = world();
    for i in 0..100 {
        let q = w.queries.query(i);
        let full = w.ix.search(q, w.ix.m(), 5).unwrap();
        let exact = index::brute_force(&w.vs, q, 5).unwrap();
        assert_eq!(full.hits, exact.hits);
    }
}

#[test]
fn probe_cost_is_the_ranked_prefix_sum() {
    let w = world();
    let c = w.ix.centroids();
    let m = w.ix.m();
    for i in 0..20 {
        let q = w.queries.query(i);
        let mut ranked: Vec<usize> = (0..m).collect();
        ranked.sort_by(|&a, &b| {
            dot(q, c.row(b)).total_cmp(&dot(q, c.row(a))).then(a.cmp(&b))
        });
        let mut prev_best: Option<f32> = None;
        for &k in &[1usize, 2, 5, 17, m] {
            let res = w.ix.search(q, k, 1).unwrap();
            let expected: usize = ranked[..k].iter().map(|&cl| w.ix.list_len(cl)).sum();
            assert_eq!(res.cost_vectors, expected);
            assert_eq!(res.probes_used, k);
            assert_eq!(res.cost_centroids, m);
            let best = res.hits[0].score;
            if let Some(p) = prev_best {
                assert!(best >= p, "best score fell from {p} to {best} as probes grew");
            }
            prev_best = Some(best);
        }
    }
}

#[test]
fn uniform_cost_tracks_the_probe_fraction_on_balanced_data() {
    let config = SynthConfig {
        n: 3200,
        dim: 16,
        m_concepts: 16,
        zipf_exponent_sizes: 0.0,
        alpha: 0.5,
        base_spread: 0.005,
        seed: 77,
    };
    let vs = dataset::generate_synthetic(&config).unwrap();
    let centroids = quantizer::train_kmeans(&vs, 16, 40, 78).unwrap();
    let ix = index::build_ivf(&vs, centroids).unwrap();
    let stats = ClusterStats::compute(&vs, &ix, 0.2, 0.8).unwrap();
    let queries = workload::sample_queries(&vs, &ix, &stats, 300, 0.0, 0.02, 79).unwrap();
    let curve = bench::run_sweep(
        &ix,
        PolicyKind::Uniform,
        &stats,
        &queries,
        &[4],
        TierMultipliers::default(),
        1,
    )
    .unwrap();
    let expected = 3200.0 * 4.0 / 16.0;
    let got = curve[0].mean_cost;
    assert!(
        (got - expected).abs() < 0.25 * expected,
        "mean cost {got} not within 25% of {expected}"
    );
}

#[test]
fn uniform_recall_never_falls_as_the_budget_grows() {
    let w = world();
    let curve = bench::run_sweep(
        &w.ix,
        PolicyKind::Uniform,
        &w.stats,
        &w.queries,
        &[1, 2, 4, 8, 16, 32],
        TierMultipliers::default(),
        1,
    )
    .unwrap();
    for pair in curve.windows(2) {
        assert!(
            pair[1].recall_at_1 >= pair[0].recall_at_1,
            "recall fell from {} to {} between k {} and {}",
            pair[0].recall_at_1,
            pair[1].recall_at_1,
            pair[0].k_base,
            pair[1].k_base
        );
        assert!(pair[1].mean_cost >= pair[0].mean_cost);
    }
    assert!(curve.last().unwrap().recall_at_1 > 0.95);
}

#[test]
fn planted_sizes_and_label_coherence_correlate_positively() {
    for m_concepts in [16usize, 32] {
        let config = SynthConfig {
            n: 250 * m_concepts,
            dim: 16,
            m_concepts,
            zipf_exponent_sizes: 1.0,
            alpha: 0.5,
            base_spread: 5e-4,
            seed: 500 + m_concepts as u64,
        };
        let vs = dataset::generate_synthetic(&config).unwrap();
        let labels = vs.labels().unwrap().to_vec();
        let centroids = Centroids::from_labels(&vs).unwrap();
        let (_, coherences) =
            stats::partition_radius_coherence(&vs, &labels, &centroids).unwrap();
        let mut freqs = vec![0.0f64; m_concepts];
        for &l in &labels {
            freqs[l as usize] += 1.0;
        }
        let rhos: Vec<f64> = coherences.iter().map(|c| c.unwrap_or(f64::NAN)).collect();
        let fit = stats::fit_power_law(&freqs, &rhos).unwrap();
        assert!(
            fit.alpha_hat > 0.2,
            "m_concepts {m_concepts}: fitted exponent {} not clearly positive",
            fit.alpha_hat
        );
        assert!(
            fit.r_squared > 0.5,
            "m_concepts {m_concepts}: fit explains too little variance, r2 {}",
            fit.r_squared
        );
    }
}

fn coherence_rank_order(stats: &ClusterStats) -> Vec<u32> {
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

#[test]
fn sampled_cluster_frequencies_pass_a_chi_square_check() {
    let w = world();
    let n_q = 5000usize;
    let qs = workload::sample_queries(&w.vs, &w.ix, &w.stats, n_q, 1.0, 0.02, 404).unwrap();
    let ranked = coherence_rank_order(&w.stats);
    let weights = workload::zipf_weights(ranked.len(), 1.0).unwrap();
    let mut rank_of = vec![usize::MAX; w.ix.m()];
    for (r, &c) in ranked.iter().enumerate() {
        rank_of[c as usize] = r;
    }
    let mut observed = vec![0usize; ranked.len()];
    for &c in qs.source_clusters() {
        observed[rank_of[c as usize]] += 1;
    }
    let mut statistic = 0.0f64;
    for (o, wgt) in observed.iter().zip(&weights) {
        let expected = wgt * n_q as f64;
        statistic += (*o as f64 - expected).powi(2) / expected;
    }
    let df = (ranked.len() - 1) as f64;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
    assert!(
        statistic < critical,
        "chi-square statistic {statistic} exceeds the 0.999 critical value {critical}"
    );
}

#[test]
fn noisy_queries_mostly_route_back_to_their_source_cluster() {
    let w = world();
    let mut home = 0usize;
    for i in 0..w.queries.len() {
        let assigned = quantizer::assign(w.ix.centroids(), w.queries.query(i)).unwrap();
        if assigned as u32 == w.queries.source_clusters()[i] {
            home += 1;
        }
    }
    let fraction = home as f64 / w.queries.len() as f64;
    assert!(fraction > 0.95, "only {fraction} of queries route home");
}

#[test]
fn near_constant_spreads_fit_to_a_near_zero_exponent() {
    let cfg = SynthConfig {
        n: 20_000,
        dim: 64,
        m_concepts: 64,
        zipf_exponent_sizes: 1.0,
        alpha: 0.01,
        base_spread: 0.0005,
        seed: 4242,
    };
    let vs = dataset::generate_synthetic(&cfg).unwrap();
    let cents = Centroids::from_labels(&vs).unwrap();
    let labels = vs.labels().unwrap().to_vec();
    let (_, coh) = stats::partition_radius_coherence(&vs, &labels, &cents).unwrap();
    let mut freq = vec![0usize; cents.m()];
    for &l in &labels {
        freq[l as usize] += 1;
    }
    let f: Vec<f64> = freq.iter().map(|&x| x as f64).collect();
    let c: Vec<f64> = coh.iter().map(|x| x.unwrap_or(-1.0)).collect();
    let fit = stats::fit_power_law(&f, &c).unwrap();
    assert!(
        fit.alpha_hat.abs() < 0.1,
        "spreads nearly equal yet fitted exponent is {}",
        fit.alpha_hat
    );
}
