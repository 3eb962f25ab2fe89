//! Subcommand implementations. Each stage failure is prefixed with what
//! the pipeline was doing so a propagated error names its origin.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use adaptive_ivf::bench::{self, BenchParams, BenchReport, SeedSet, TargetSummary};
use adaptive_ivf::dataset::{self, concept_sizes};
use adaptive_ivf::index::{self, InvertedIndex};
use adaptive_ivf::quantizer;
use adaptive_ivf::stats::ClusterStats;
use adaptive_ivf::workload;
use adaptive_ivf::VectorSet;

use crate::config::{ArtifactPaths, RunConfig};

const SIG: usize = bench::REPORT_SIG_DIGITS;

fn fmt(x: f64) -> String {
    bench::format_significant(x, SIG)
}

pub fn cmd_gen(config: &RunConfig, paths: &ArtifactPaths) -> Result<()> {
    let vs = dataset::generate_synthetic(&config.data).context("generating dataset")?;
    dataset::save_vectors(&vs, &paths.dataset)
        .with_context(|| format!("writing dataset {}", paths.dataset.display()))?;
    let sizes = concept_sizes(
        config.data.n,
        config.data.m_concepts,
        config.data.zipf_exponent_sizes,
    )
    .context("summarizing concept sizes")?;
    println!(
        "generated {} vectors, dim {}, {} concepts",
        vs.len(),
        vs.dim(),
        config.data.m_concepts
    );
    println!(
        "concept sizes: largest {}, median {}, smallest {}",
        sizes[0],
        sizes[sizes.len() / 2],
        sizes[sizes.len() - 1]
    );
    println!("dataset written to {}", paths.dataset.display());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<VectorSet> {
    dataset::load_vectors(path).with_context(|| {
        format!(
            "loading dataset {} (run the gen subcommand first if it does not exist)",
            path.display()
        )
    })
}

fn train_and_build(config: &RunConfig, vs: &VectorSet) -> Result<InvertedIndex> {
    let centroids = quantizer::train_kmeans(
        vs,
        config.index.m,
        config.index.kmeans_max_iters,
        config.index.seed,
    )
    .context("training quantizer")?;
    index::build_ivf(vs, centroids).context("building index")
}

fn list_size_summary(ix: &InvertedIndex) -> (usize, usize, usize, usize) {
    let mut sizes: Vec<usize> = (0..ix.m()).map(|c| ix.list_len(c)).collect();
    sizes.sort_unstable();
    let empty = sizes.iter().filter(|&&s| s == 0).count();
    (sizes[0], sizes[sizes.len() / 2], sizes[sizes.len() - 1], empty)
}

pub fn cmd_build(config: &RunConfig, paths: &ArtifactPaths) -> Result<()> {
    let vs = load_dataset(&paths.dataset)?;
    let ix = train_and_build(config, &vs)?;
    index::save_index(&ix, &paths.index)
        .with_context(|| format!("writing index {}", paths.index.display()))?;
    let (min, median, max, empty) = list_size_summary(&ix);
    println!(
        "built index: {} lists over {} vectors",
        ix.m(),
        ix.n_total()
    );
    println!("list sizes: min {min}, median {median}, max {max}, empty {empty}");
    println!("index written to {}", paths.index.display());
    Ok(())
}

pub fn cmd_stats(config: &RunConfig, paths: &ArtifactPaths) -> Result<()> {
    let vs = load_dataset(&paths.dataset)?;
    let ix = index::load_index(&paths.index)
        .with_context(|| format!("loading index {}", paths.index.display()))?;
    let stats = ClusterStats::compute(
        &vs,
        &ix,
        config.policy.percentile_low,
        config.policy.percentile_high,
    )
    .context("computing cluster statistics")?;

    let mut w = BufWriter::new(
        File::create(&paths.stats_csv)
            .with_context(|| format!("writing stats {}", paths.stats_csv.display()))?,
    );
    writeln!(w, "cluster_id,frequency,radius,coherence").context("writing stats header")?;
    let mut rows = 0usize;
    for c in 0..stats.frequencies.len() {
        if stats.frequencies[c] == 0 {
            continue;
        }
        let radius = stats.radii[c].map(fmt).unwrap_or_default();
        let coherence = stats.coherences[c].map(fmt).unwrap_or_default();
        writeln!(w, "{c},{},{radius},{coherence}", stats.frequencies[c])
            .context("writing stats row")?;
        rows += 1;
    }
    w.flush().context("writing stats rows")?;

    let fit = stats.power_law_fit().context("fitting the frequency-coherence power law")?;
    let empty = stats.frequencies.len() - rows;
    println!("stats: {rows} clusters with members, {empty} empty");
    println!("f_low = {}", fmt(stats.f_low));
    println!("f_high = {}", fmt(stats.f_high));
    println!("alpha_hat = {}", fmt(fit.alpha_hat));
    println!("r_squared = {}", fmt(fit.r_squared));
    println!("pairs_used = {}", fit.pairs_used);
    println!("pairs_excluded = {}", fit.pairs_excluded);
    println!("stats written to {}", paths.stats_csv.display());
    Ok(())
}

#[derive(Serialize)]
struct BenchSummary<'a> {
    config: &'a RunConfig,
    report: &'a BenchReport,
}

#[derive(Serialize)]
struct AnalysisSummary<'a> {
    targets: &'a [TargetSummary],
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut w, value)
        .with_context(|| format!("serializing {}", path.display()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_targets(targets: &[TargetSummary]) {
    for t in targets {
        println!(
            "recall {}: uniform cost {}, adaptive cost {}, gain {}%",
            fmt(t.target_recall),
            fmt(t.cost_uniform),
            fmt(t.cost_adaptive),
            fmt(t.gain_percent)
        );
    }
}

pub fn cmd_bench(config: &RunConfig, paths: &ArtifactPaths) -> Result<()> {
    let vs = if paths.dataset.exists() {
        load_dataset(&paths.dataset)?
    } else {
        let vs = dataset::generate_synthetic(&config.data).context("generating dataset")?;
        dataset::save_vectors(&vs, &paths.dataset)
            .with_context(|| format!("writing dataset {}", paths.dataset.display()))?;
        println!("generated dataset {}", paths.dataset.display());
        vs
    };
    let ix = train_and_build(config, &vs)?;
    let stats = ClusterStats::compute(
        &vs,
        &ix,
        config.policy.percentile_low,
        config.policy.percentile_high,
    )
    .context("computing cluster statistics")?;
    let queries = workload::sample_queries(
        &vs,
        &ix,
        &stats,
        config.workload.n_q,
        config.workload.s,
        config.workload.noise_sigma,
        config.workload.seed,
    )
    .context("sampling queries")?;
    workload::save_query_set(&queries, &paths.queries, &paths.queries_csv)
        .with_context(|| format!("writing queries {}", paths.queries.display()))?;

    let params = BenchParams {
        n: vs.len(),
        dim: vs.dim(),
        m: ix.m(),
        n_q: queries.len(),
        s: config.workload.s,
        noise_sigma: config.workload.noise_sigma,
        k_base_list: config.effective_k_list(),
        multipliers: config.multipliers(),
        telemetry_k_base: config.effective_telemetry_k(),
        recall_targets: config.bench.recall_targets.clone(),
        seeds: SeedSet {
            data: config.data.seed,
            train: config.index.seed,
            workload: config.workload.seed,
        },
    };
    let report = bench::run_bench(&ix, &stats, &queries, &params).context("running sweeps")?;
    bench::write_curves_csv(&report, &paths.curves)
        .with_context(|| format!("writing curves {}", paths.curves.display()))?;
    write_json(&BenchSummary { config, report: &report }, &paths.summary)?;

    print_targets(&report.targets);
    let t = &report.telemetry;
    println!(
        "telemetry at k_base {}: head {} ({} queries), body {} ({}), tail {} ({})",
        params.telemetry_k_base,
        fmt(t.head.fraction),
        t.head.count,
        fmt(t.body.fraction),
        t.body.count,
        fmt(t.tail.fraction),
        t.tail.count
    );
    if !report.uniform_curve_monotone || !report.adaptive_curve_monotone {
        println!("warning: at least one recall curve is not monotone in cost");
    }
    println!("curves written to {}", paths.curves.display());
    println!("summary written to {}", paths.summary.display());
    Ok(())
}

pub fn cmd_analyze(
    config: &RunConfig,
    paths: &ArtifactPaths,
    curves_override: Option<&Path>,
) -> Result<()> {
    let curves_path = curves_override.unwrap_or(&paths.curves);
    let (uniform, adaptive) = bench::load_curves_csv(curves_path)
        .with_context(|| format!("reading curves {}", curves_path.display()))?;
    let targets =
        bench::summarize_targets(&uniform, &adaptive, &config.bench.recall_targets)
            .context("interpolating recall targets")?;
    write_json(&AnalysisSummary { targets: &targets }, &paths.analysis)?;
    print_targets(&targets);
    println!("analysis written to {}", paths.analysis.display());
    Ok(())
}
