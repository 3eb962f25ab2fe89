//! Probe-budget policies and per-tier telemetry.
//!
//! The uniform policy probes a fixed number of lists for every query. The
//! adaptive policy buckets clusters into frequency tiers and scales the
//! base budget per tier: rare clusters get more probes, popular ones
//! fewer. A query's tier is decided by its single nearest centroid even
//! though the search may scan many lists.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{InvertedIndex, SearchResult};
use crate::quantizer::{self, Centroids};
use crate::stats::ClusterStats;
use crate::workload::QuerySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Head,
    Body,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Uniform,
    Adaptive,
}

/// Budget scale per tier. Defaults quadruple the budget for tail
/// clusters and halve it for head clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TierMultipliers {
    pub tail: f64,
    pub body: f64,
    pub head: f64,
}

impl Default for TierMultipliers {
    fn default() -> Self {
        Self { tail: 4.0, body: 1.0, head: 0.5 }
    }
}

/// Immutable cluster-to-probe-count mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePolicy {
    kind: PolicyKind,
    k_base: usize,
    multipliers: TierMultipliers,
    f_low: f64,
    f_high: f64,
    tiers: Vec<Tier>,
    probes: Vec<usize>,
}

fn round_half_up_clamped(scaled: f64, m: usize) -> usize {
    let rounded = (scaled + 0.5).floor();
    let bounded = rounded.max(1.0).min(m as f64);
    bounded as usize
}

impl ProbePolicy {
    /// Every cluster gets exactly k_base probes and reports the body tier.
    pub fn uniform(m: usize, k_base: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("policy needs at least one cluster".into()));
        }
        if k_base < 1 || k_base > m {
            return Err(Error::ProbesOutOfRange { probes: k_base, m });
        }
        Ok(Self {
            kind: PolicyKind::Uniform,
            k_base,
            multipliers: TierMultipliers { tail: 1.0, body: 1.0, head: 1.0 },
            f_low: f64::NAN,
            f_high: f64::NAN,
            tiers: vec![Tier::Body; m],
            probes: vec![k_base; m],
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn k_base(&self) -> usize {
        self.k_base
    }

    pub fn multipliers(&self) -> TierMultipliers {
        self.multipliers
    }

    pub fn m(&self) -> usize {
        self.probes.len()
    }

    pub fn tier(&self, cluster: usize) -> Tier {
        self.tiers[cluster]
    }

    pub fn probes(&self, cluster: usize) -> usize {
        self.probes[cluster]
    }

    /// Tier and resolved probe count for the cluster nearest to q.
    pub fn probes_for(&self, q: &[f32], centroids: &Centroids) -> Result<(usize, Tier)> {
        if centroids.m() != self.probes.len() {
            return Err(Error::InvalidParameter(format!(
                "policy covers {} clusters, centroids have {}",
                self.probes.len(),
                centroids.m()
            )));
        }
        let cluster = quantizer::assign(centroids, q)?;
        Ok((self.probes[cluster], self.tiers[cluster]))
    }
}

/// Tiered policy from frequency thresholds. Clusters strictly below f_low
/// are tail, strictly above f_high are head, boundary equality lands in
/// the body. Scaled budgets are rounded half-up and clamped to [1, m].
pub fn build_policy(
    stats: &ClusterStats,
    k_base: usize,
    multipliers: TierMultipliers,
    m: usize,
) -> Result<ProbePolicy> {
    if stats.frequencies.len() != m {
        return Err(Error::InvalidParameter(format!(
            "stats cover {} clusters, policy wants {m}",
            stats.frequencies.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("policy needs at least one cluster".into()));
    }
    if k_base < 1 || k_base > m {
        return Err(Error::ProbesOutOfRange { probes: k_base, m });
    }
    for (name, v) in [
        ("tail", multipliers.tail),
        ("body", multipliers.body),
        ("head", multipliers.head),
    ] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} multiplier must be positive, got {v}"
            )));
        }
    }
    let mut tiers = Vec::with_capacity(m);
    let mut probes = Vec::with_capacity(m);
    for &f in &stats.frequencies {
        let f = f as f64;
        let (tier, mult) = if f < stats.f_low {
            (Tier::Tail, multipliers.tail)
        } else if f > stats.f_high {
            (Tier::Head, multipliers.head)
        } else {
            (Tier::Body, multipliers.body)
        };
        tiers.push(tier);
        probes.push(round_half_up_clamped(mult * k_base as f64, m));
    }
    Ok(ProbePolicy {
        kind: PolicyKind::Adaptive,
        k_base,
        multipliers,
        f_low: stats.f_low,
        f_high: stats.f_high,
        tiers,
        probes,
    })
}

/// Query counts and means for one tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TierStat {
    pub count: usize,
    pub fraction: f64,
    pub mean_probes: f64,
    pub mean_cost: f64,
}

impl TierStat {
    fn zero() -> Self {
        Self { count: 0, fraction: 0.0, mean_probes: 0.0, mean_cost: 0.0 }
    }
}

/// Per-tier query routing summary for one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TierTelemetry {
    pub head: TierStat,
    pub body: TierStat,
    pub tail: TierStat,
    pub empty: bool,
}

#[derive(Default)]
struct TierAccumulator {
    count: usize,
    probes_sum: u64,
    cost_sum: u64,
}

impl TierAccumulator {
    fn finish(&self, total: usize) -> TierStat {
        if self.count == 0 {
            return TierStat::zero();
        }
        TierStat {
            count: self.count,
            fraction: self.count as f64 / total as f64,
            mean_probes: self.probes_sum as f64 / self.count as f64,
            mean_cost: self.cost_sum as f64 / self.count as f64,
        }
    }
}

/// Runs every query under the policy and accumulates per-tier telemetry.
/// An empty query stream yields all-zero telemetry with the empty flag
/// set rather than an error.
pub fn run_with_telemetry(
    policy: &ProbePolicy,
    ix: &InvertedIndex,
    queries: &QuerySet,
    top_r: usize,
) -> Result<(Vec<SearchResult>, TierTelemetry)> {
    if policy.m() != ix.m() {
        return Err(Error::InvalidParameter(format!(
            "policy covers {} clusters, index has {}",
            policy.m(),
            ix.m()
        )));
    }
    let mut results = Vec::with_capacity(queries.len());
    let mut head = TierAccumulator::default();
    let mut body = TierAccumulator::default();
    let mut tail = TierAccumulator::default();
    for i in 0..queries.len() {
        let q = queries.query(i);
        let (probes, tier) = policy.probes_for(q, ix.centroids())?;
        let result = ix.search(q, probes, top_r)?;
        let acc = match tier {
            Tier::Head => &mut head,
            Tier::Body => &mut body,
            Tier::Tail => &mut tail,
        };
        acc.count += 1;
        acc.probes_sum += probes as u64;
        acc.cost_sum += result.cost_vectors as u64;
        results.push(result);
    }
    let total = queries.len();
    let telemetry = TierTelemetry {
        head: head.finish(total.max(1)),
        body: body.finish(total.max(1)),
        tail: tail.finish(total.max(1)),
        empty: total == 0,
    };
    Ok((results, telemetry))
}
