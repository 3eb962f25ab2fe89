//! Budget sweeps, recall-cost curves, cost interpolation at recall
//! targets, and report emission.
//!
//! All floats that reach a report are rounded to 6 significant digits
//! when the report is built, so the CSV and JSON artifacts agree with
//! each other and repeated runs under the same seeds are byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::policy::{
    self, PolicyKind, ProbePolicy, TierMultipliers, TierTelemetry,
};
use crate::stats::ClusterStats;
use crate::workload::QuerySet;

const CURVES_CSV_HEADER: &str = "policy,k_base,mean_cost,recall_at_1";
pub const REPORT_SIG_DIGITS: usize = 6;

/// One operating point of a policy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub k_base: usize,
    pub mean_cost: f64,
    pub recall_at_1: f64,
}

/// Interpolated costs and the gain at one recall target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetSummary {
    pub target_recall: f64,
    pub cost_uniform: f64,
    pub cost_adaptive: f64,
    pub gain_percent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedSet {
    pub data: u64,
    pub train: u64,
    pub workload: u64,
}

/// Echo of everything that determines a bench run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchParams {
    pub n: usize,
    pub dim: usize,
    pub m: usize,
    pub n_q: usize,
    pub s: f64,
    pub noise_sigma: f64,
    pub k_base_list: Vec<usize>,
    pub multipliers: TierMultipliers,
    pub telemetry_k_base: usize,
    pub recall_targets: Vec<f64>,
    pub seeds: SeedSet,
}

/// Full sweep output: both curves cost-sorted, target summaries, tier
/// telemetry at one budget, monotonicity flags, and the config echo.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub uniform_curve: Vec<CurvePoint>,
    pub adaptive_curve: Vec<CurvePoint>,
    pub targets: Vec<TargetSummary>,
    pub telemetry: TierTelemetry,
    pub uniform_curve_monotone: bool,
    pub adaptive_curve_monotone: bool,
    pub params: BenchParams,
}

/// Formats with the given number of significant digits, trimming
/// trailing zeros. Parsing the result back gives the rounded value.
pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn round_report(x: f64) -> f64 {
    format_significant(x, REPORT_SIG_DIGITS)
        .parse()
        .expect("formatted float parses back")
}

/// One curve point per budget in k_base_list, in list order.
pub fn run_sweep(
    ix: &InvertedIndex,
    kind: PolicyKind,
    stats: &ClusterStats,
    queries: &QuerySet,
    k_base_list: &[usize],
    multipliers: TierMultipliers,
    top_r: usize,
) -> Result<Vec<CurvePoint>> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("sweep over no queries".into()));
    }
    if k_base_list.is_empty() {
        return Err(Error::EmptyInput("sweep over no budgets".into()));
    }
    if !k_base_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(format!(
            "budget list must be strictly ascending, got {k_base_list:?}"
        )));
    }
    let mut curve = Vec::with_capacity(k_base_list.len());
    for &k in k_base_list {
        let pol = match kind {
            PolicyKind::Uniform => ProbePolicy::uniform(ix.m(), k)?,
            PolicyKind::Adaptive => policy::build_policy(stats, k, multipliers, ix.m())?,
        };
        let (results, _) = policy::run_with_telemetry(&pol, ix, queries, top_r)?;
        let mut cost_sum = 0u64;
        let mut hits = 0usize;
        for (r, &truth) in results.iter().zip(queries.truth_ids()) {
            cost_sum += r.cost_vectors as u64;
            if r.hits.first().map(|h| h.id) == Some(truth) {
                hits += 1;
            }
        }
        let n_q = queries.len() as f64;
        curve.push(CurvePoint {
            k_base: k,
            mean_cost: cost_sum as f64 / n_q,
            recall_at_1: hits as f64 / n_q,
        });
    }
    Ok(curve)
}

fn sort_by_cost(curve: &mut [CurvePoint]) {
    curve.sort_by(|a, b| {
        a.mean_cost
            .total_cmp(&b.mean_cost)
            .then(a.recall_at_1.total_cmp(&b.recall_at_1))
            .then(a.k_base.cmp(&b.k_base))
    });
}

fn recall_monotone(curve: &[CurvePoint]) -> bool {
    curve.windows(2).all(|w| w[0].recall_at_1 <= w[1].recall_at_1)
}

/// Cost needed to reach the target recall, linearly interpolated between
/// the first adjacent cost-sorted pair that brackets the target. An
/// exact recall match short-circuits to that point's cost. On a
/// non-monotone curve a descending bracket is accepted once no ascending
/// pair contains the target.
pub fn interpolate_cost_at_recall(curve: &[CurvePoint], target: f64) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "interpolation needs at least 2 curve points, got {}",
            curve.len()
        )));
    }
    let mut sorted = curve.to_vec();
    sort_by_cost(&mut sorted);
    let min = sorted.iter().map(|p| p.recall_at_1).fold(f64::INFINITY, f64::min);
    let max = sorted.iter().map(|p| p.recall_at_1).fold(f64::NEG_INFINITY, f64::max);
    if !(target >= min && target <= max) {
        return Err(Error::UnreachableRecall { target, min, max });
    }
    if let Some(p) = sorted.iter().find(|p| p.recall_at_1 == target) {
        return Ok(p.mean_cost);
    }
    let lerp = |a: &CurvePoint, b: &CurvePoint| {
        a.mean_cost
            + (target - a.recall_at_1) / (b.recall_at_1 - a.recall_at_1)
                * (b.mean_cost - a.mean_cost)
    };
    for w in sorted.windows(2) {
        if w[0].recall_at_1 <= target && target <= w[1].recall_at_1 {
            return Ok(lerp(&w[0], &w[1]));
        }
    }
    for w in sorted.windows(2) {
        if w[1].recall_at_1 <= target && target <= w[0].recall_at_1 {
            return Ok(lerp(&w[0], &w[1]));
        }
    }
    Err(Error::UnreachableRecall { target, min, max })
}

/// Percent cost saved by the adaptive policy at equal recall.
pub fn efficiency_gain(cost_uniform: f64, cost_adaptive: f64) -> Result<f64> {
    if !(cost_uniform > 0.0) || !(cost_adaptive > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "costs must be positive, got {cost_uniform} and {cost_adaptive}"
        )));
    }
    Ok(100.0 * (cost_uniform - cost_adaptive) / cost_uniform)
}

/// Interpolates both curves at every target and attaches the gain.
pub fn summarize_targets(
    uniform: &[CurvePoint],
    adaptive: &[CurvePoint],
    targets: &[f64],
) -> Result<Vec<TargetSummary>> {
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        let cu = round_report(interpolate_cost_at_recall(uniform, t)?);
        let ca = round_report(interpolate_cost_at_recall(adaptive, t)?);
        out.push(TargetSummary {
            target_recall: t,
            cost_uniform: cu,
            cost_adaptive: ca,
            gain_percent: round_report(efficiency_gain(cu, ca)?),
        });
    }
    Ok(out)
}

fn round_telemetry(t: &TierTelemetry) -> TierTelemetry {
    let round_stat = |s: &policy::TierStat| policy::TierStat {
        count: s.count,
        fraction: round_report(s.fraction),
        mean_probes: round_report(s.mean_probes),
        mean_cost: round_report(s.mean_cost),
    };
    TierTelemetry {
        head: round_stat(&t.head),
        body: round_stat(&t.body),
        tail: round_stat(&t.tail),
        empty: t.empty,
    }
}

/// Sweeps both policies, interpolates every target, and gathers tier
/// telemetry from the adaptive policy at params.telemetry_k_base.
pub fn run_bench(
    ix: &InvertedIndex,
    stats: &ClusterStats,
    queries: &QuerySet,
    params: &BenchParams,
) -> Result<BenchReport> {
    let round_curve = |mut c: Vec<CurvePoint>| {
        for p in c.iter_mut() {
            p.mean_cost = round_report(p.mean_cost);
            p.recall_at_1 = round_report(p.recall_at_1);
        }
        sort_by_cost(&mut c);
        c
    };
    let uniform = round_curve(run_sweep(
        ix,
        PolicyKind::Uniform,
        stats,
        queries,
        &params.k_base_list,
        params.multipliers,
        1,
    )?);
    let adaptive = round_curve(run_sweep(
        ix,
        PolicyKind::Adaptive,
        stats,
        queries,
        &params.k_base_list,
        params.multipliers,
        1,
    )?);
    let targets = summarize_targets(&uniform, &adaptive, &params.recall_targets)?;
    let telemetry_policy =
        policy::build_policy(stats, params.telemetry_k_base, params.multipliers, ix.m())?;
    let (_, telemetry) = policy::run_with_telemetry(&telemetry_policy, ix, queries, 1)?;
    Ok(BenchReport {
        uniform_curve_monotone: recall_monotone(&uniform),
        adaptive_curve_monotone: recall_monotone(&adaptive),
        uniform_curve: uniform,
        adaptive_curve: adaptive,
        targets,
        telemetry: round_telemetry(&telemetry),
        params: params.clone(),
    })
}

/// Writes just the curves CSV.
pub fn write_curves_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CURVES_CSV_HEADER}")?;
    for (name, curve) in [
        ("uniform", &report.uniform_curve),
        ("adaptive", &report.adaptive_curve),
    ] {
        for p in curve {
            writeln!(
                w,
                "{name},{},{},{}",
                p.k_base,
                format_significant(p.mean_cost, REPORT_SIG_DIGITS),
                format_significant(p.recall_at_1, REPORT_SIG_DIGITS)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the curves CSV and the summary JSON.
pub fn emit_report(report: &BenchReport, curves_path: &Path, summary_path: &Path) -> Result<()> {
    write_curves_csv(report, curves_path)?;
    let mut w = BufWriter::new(File::create(summary_path)?);
    serde_json::to_writer_pretty(&mut w, report)
        .map_err(|e| Error::Format(format!("summary JSON would not serialize: {e}")))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Reads a curves CSV back into (uniform, adaptive) point lists.
pub fn load_curves_csv(path: &Path) -> Result<(Vec<CurvePoint>, Vec<CurvePoint>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    match lines.next() {
        Some(Ok(header)) if header.trim_end() == CURVES_CSV_HEADER => {}
        Some(Ok(header)) => {
            return Err(Error::Format(format!("bad curves CSV header: {header:?}")))
        }
        Some(Err(e)) => return Err(Error::Io(e)),
        None => return Err(Error::Format("curves CSV is empty".into())),
    }
    let mut uniform = Vec::new();
    let mut adaptive = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "curves CSV row {row} has {} fields, expected 4",
                fields.len()
            )));
        }
        let k_base = fields[1].parse::<usize>().map_err(|_| {
            Error::Format(format!("curves CSV row {row}: bad k_base {:?}", fields[1]))
        })?;
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Format(format!("curves CSV row {row}: bad {what} {s:?}")))
        };
        let point = CurvePoint {
            k_base,
            mean_cost: parse_f(fields[2], "mean_cost")?,
            recall_at_1: parse_f(fields[3], "recall_at_1")?,
        };
        match fields[0] {
            "uniform" => uniform.push(point),
            "adaptive" => adaptive.push(point),
            other => {
                return Err(Error::Format(format!(
                    "curves CSV row {row}: unknown policy {other:?}"
                )))
            }
        }
    }
    Ok((uniform, adaptive))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(k: usize, cost: f64, recall: f64) -> CurvePoint {
        CurvePoint { k_base: k, mean_cost: cost, recall_at_1: recall }
    }

    #[test]
    fn published_cost_targets_reproduce() {
        let uniform = vec![
            point(1, 14.50, 0.7022),
            point(2, 29.04, 0.8107),
            point(4, 87.18, 0.9054),
            point(8, 369.33, 0.9870),
            point(16, 1411.29, 0.9988),
            point(32, 5183.96, 1.0000),
        ];
        let adaptive = vec![
            point(1, 18.43, 0.7459),
            point(2, 42.30, 0.8526),
            point(4, 99.18, 0.9142),
            point(8, 266.27, 0.9786),
            point(12, 561.16, 0.9938),
            point(16, 1099.67, 0.9991),
            point(32, 3978.71, 1.0000),
        ];
        let u95 = interpolate_cost_at_recall(&uniform, 0.95).unwrap();
        let a95 = interpolate_cost_at_recall(&adaptive, 0.95).unwrap();
        let u98 = interpolate_cost_at_recall(&uniform, 0.98).unwrap();
        let a98 = interpolate_cost_at_recall(&adaptive, 0.98).unwrap();
        assert!((u95 - 241.4).abs() < 0.1, "got {u95}");
        assert!((a95 - 192.1).abs() < 0.1, "got {a95}");
        assert!((u98 - 345.1).abs() < 0.1, "got {u98}");
        assert!((a98 - 293.4).abs() < 0.1, "got {a98}");
        assert!((efficiency_gain(u95, a95).unwrap() - 20.44).abs() < 0.15);
        assert!((efficiency_gain(u98, a98).unwrap() - 14.98).abs() < 0.15);
    }

    #[test]
    fn exact_recall_hit_returns_that_cost() {
        let curve = vec![point(1, 10.0, 0.5), point(2, 20.0, 0.8), point(4, 40.0, 0.95)];
        assert_eq!(interpolate_cost_at_recall(&curve, 0.8).unwrap(), 20.0);
        assert_eq!(interpolate_cost_at_recall(&curve, 0.5).unwrap(), 10.0);
        assert_eq!(interpolate_cost_at_recall(&curve, 0.95).unwrap(), 40.0);
    }

    #[test]
    fn midpoint_interpolates_linearly() {
        let curve = vec![point(1, 10.0, 0.5), point(2, 30.0, 0.9)];
        let c = interpolate_cost_at_recall(&curve, 0.7).unwrap();
        assert!((c - 20.0).abs() < 1e-12);
    }

    #[test]
    fn unsorted_input_is_sorted_by_cost_first() {
        let curve = vec![point(2, 30.0, 0.9), point(1, 10.0, 0.5)];
        let c = interpolate_cost_at_recall(&curve, 0.7).unwrap();
        assert!((c - 20.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_target_reports_the_achieved_range() {
        let curve = vec![point(1, 10.0, 0.5), point(2, 30.0, 0.9)];
        match interpolate_cost_at_recall(&curve, 0.95) {
            Err(Error::UnreachableRecall { target, min, max }) => {
                assert_eq!(target, 0.95);
                assert_eq!(min, 0.5);
                assert_eq!(max, 0.9);
            }
            other => panic!("expected unreachable recall, got {other:?}"),
        }
        assert!(matches!(
            interpolate_cost_at_recall(&curve[..1], 0.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn first_bracketing_pair_wins_on_plateaus() {
        let curve = vec![
            point(1, 10.0, 0.5),
            point(2, 20.0, 0.9),
            point(4, 40.0, 0.9),
            point(8, 80.0, 0.99),
        ];
        let c = interpolate_cost_at_recall(&curve, 0.7).unwrap();
        assert!((c - 15.0).abs() < 1e-12);
        assert_eq!(interpolate_cost_at_recall(&curve, 0.9).unwrap(), 20.0);
    }

    #[test]
    fn ascending_bracket_wins_over_descending() {
        let curve = vec![point(1, 10.0, 0.9), point(2, 20.0, 0.6), point(4, 40.0, 0.95)];
        let c = interpolate_cost_at_recall(&curve, 0.8).unwrap();
        let expected = 20.0 + (0.8 - 0.6) / (0.95 - 0.6) * 20.0;
        assert!((c - expected).abs() < 1e-12, "got {c}, expected {expected}");
    }

    #[test]
    fn descending_bracket_is_a_fallback() {
        let curve = vec![point(1, 10.0, 0.9), point(2, 20.0, 0.6), point(4, 40.0, 0.7)];
        let c = interpolate_cost_at_recall(&curve, 0.8).unwrap();
        let expected = 10.0 + (0.8 - 0.9) / (0.6 - 0.9) * 10.0;
        assert!((c - expected).abs() < 1e-12, "got {c}, expected {expected}");
    }

    #[test]
    fn gain_arithmetic() {
        assert!((efficiency_gain(200.0, 150.0).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(efficiency_gain(100.0, 100.0).unwrap(), 0.0);
        assert!(efficiency_gain(100.0, 120.0).unwrap() < 0.0);
        assert!(matches!(efficiency_gain(0.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(efficiency_gain(1.0, -2.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(241.40460, 6), "241.405");
        assert_eq!(format_significant(0.905417, 4), "0.9054");
        assert_eq!(format_significant(0.0, 6), "0");
        assert_eq!(format_significant(-87.18, 6), "-87.18");
        assert_eq!(format_significant(123456.7, 6), "123457");
        assert_eq!(format_significant(1.0, 6), "1");
        assert_eq!(format_significant(0.000123456789, 6), "0.000123457");
        assert_eq!(format_significant(999.99999, 6), "1000");
    }

    #[test]
    fn report_rounding_is_idempotent() {
        for x in [241.40460123, 0.98765432109, 1e-7, 523199.9, 0.05] {
            let once = round_report(x);
            assert_eq!(round_report(once), once);
            assert_eq!(
                format_significant(once, REPORT_SIG_DIGITS).parse::<f64>().unwrap(),
                once
            );
        }
    }
}
