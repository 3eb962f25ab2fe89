//! Per-cluster frequency and coherence, percentile thresholds, and the
//! log-log power-law fit of coherence against frequency.
//!
//! Coherence of a cluster is its separation margin: (nearest foreign
//! distance to the centroid - radius) / radius, with the radius taken as
//! the maximum member distance. Clusters with no members have no radius
//! and no coherence; both are recorded as missing rather than invented.

use crate::dataset::VectorSet;
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::quantizer::Centroids;
use crate::vecmath;

pub const COHERENCE_CAP: f64 = 1e6;
const RADIUS_FLOOR: f64 = 1e-12;

/// Per-cluster statistics plus the two frequency percentile thresholds
/// used for tiering.
#[derive(Debug, Clone)]
pub struct ClusterStats {
    pub frequencies: Vec<usize>,
    pub radii: Vec<Option<f64>>,
    pub coherences: Vec<Option<f64>>,
    pub f_low: f64,
    pub f_high: f64,
}

/// Least-squares fit of log(coherence) against log(frequency).
#[derive(Debug, Clone, Copy)]
pub struct PowerLawFit {
    pub alpha_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub pairs_used: usize,
    pub pairs_excluded: usize,
}

pub fn cluster_frequency(ix: &InvertedIndex) -> Vec<usize> {
    (0..ix.m()).map(|c| ix.list_len(c)).collect()
}

/// Radius and coherence for an explicit partition. The assignment slice
/// maps each vector to its cluster; this is the workhorse behind both
/// index-derived and label-derived statistics.
pub fn partition_radius_coherence(
    vs: &VectorSet,
    assignments: &[u32],
    centroids: &Centroids,
) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>)> {
    if assignments.len() != vs.len() {
        return Err(Error::InvalidParameter(format!(
            "have {} assignments for {} vectors",
            assignments.len(),
            vs.len()
        )));
    }
    if vs.dim() != centroids.dim() {
        return Err(Error::DimensionMismatch { expected: centroids.dim(), got: vs.dim() });
    }
    let m = centroids.m();
    if let Some(&bad) = assignments.iter().find(|&&a| a as usize >= m) {
        return Err(Error::InvalidParameter(format!(
            "assignment {bad} out of range for {m} clusters"
        )));
    }

    let mut radius: Vec<Option<f64>> = vec![None; m];
    let mut nearest_foreign: Vec<Option<f64>> = vec![None; m];
    for p in 0..vs.len() {
        let row = vs.row(p);
        let home = assignments[p] as usize;
        for c in 0..m {
            let d = vecmath::distance(row, centroids.row(c));
            if c == home {
                if radius[c].map_or(true, |r| d > r) {
                    radius[c] = Some(d);
                }
            } else if nearest_foreign[c].map_or(true, |f| d < f) {
                nearest_foreign[c] = Some(d);
            }
        }
    }

    let coherences = (0..m)
        .map(|c| match (radius[c], nearest_foreign[c]) {
            (Some(r), Some(f)) => Some(((f - r) / r.max(RADIUS_FLOOR)).min(COHERENCE_CAP)),
            _ => None,
        })
        .collect();
    Ok((radius, coherences))
}

/// Radius and coherence for the index's own partition.
pub fn cluster_coherence(
    vs: &VectorSet,
    ix: &InvertedIndex,
) -> Result<(Vec<Option<f64>>, Vec<Option<f64>>)> {
    if vs.len() != ix.n_total() {
        return Err(Error::InvalidParameter(format!(
            "index holds {} vectors, set has {}",
            ix.n_total(),
            vs.len()
        )));
    }
    partition_radius_coherence(vs, &ix.assignments(), ix.centroids())
}

/// Nearest-rank percentile: sort ascending, take element ceil(p * len) - 1,
/// with p = 0 mapping to the first element.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile over no values".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "percentile fraction {p} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

impl ClusterStats {
    /// Frequencies, radii, coherences, and percentile thresholds for a
    /// built index. Empty clusters are excluded from the percentiles.
    pub fn compute(vs: &VectorSet, ix: &InvertedIndex, p_low: f64, p_high: f64) -> Result<Self> {
        if !(p_low <= p_high) {
            return Err(Error::InvalidParameter(format!(
                "percentile levels out of order: {p_low} > {p_high}"
            )));
        }
        let frequencies = cluster_frequency(ix);
        let (radii, coherences) = cluster_coherence(vs, ix)?;
        let nonempty: Vec<f64> = frequencies
            .iter()
            .filter(|&&f| f > 0)
            .map(|&f| f as f64)
            .collect();
        if nonempty.is_empty() {
            return Err(Error::EmptyInput("all clusters are empty".into()));
        }
        let f_low = percentile(&nonempty, p_low)?;
        let f_high = percentile(&nonempty, p_high)?;
        Ok(Self { frequencies, radii, coherences, f_low, f_high })
    }

    /// Fit over this set's (frequency, coherence) pairs; empty or
    /// missing-coherence clusters are excluded by the fitter.
    pub fn power_law_fit(&self) -> Result<PowerLawFit> {
        let f: Vec<f64> = self.frequencies.iter().map(|&x| x as f64).collect();
        let rho: Vec<f64> = self
            .coherences
            .iter()
            .map(|c| c.unwrap_or(f64::NAN))
            .collect();
        fit_power_law(&f, &rho)
    }
}

/// OLS in log-log space. Pairs with nonpositive or non-finite frequency or
/// coherence are excluded and counted.
pub fn fit_power_law(frequencies: &[f64], coherences: &[f64]) -> Result<PowerLawFit> {
    if frequencies.len() != coherences.len() {
        return Err(Error::InvalidParameter(format!(
            "have {} frequencies but {} coherences",
            frequencies.len(),
            coherences.len()
        )));
    }
    let pts: Vec<(f64, f64)> = frequencies
        .iter()
        .zip(coherences)
        .filter(|(&f, &rho)| f.is_finite() && f > 0.0 && rho.is_finite() && rho > 0.0)
        .map(|(&f, &rho)| (f.ln(), rho.ln()))
        .collect();
    let pairs_excluded = frequencies.len() - pts.len();
    if pts.len() < 3 {
        return Err(Error::InsufficientPairs { usable: pts.len() });
    }

    let count = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = if sxx > 1e-30 { sxy / sxx } else { 0.0 };
    let intercept = mean_y - slope * mean_x;
    let sst: f64 = pts.iter().map(|p| (p.1 - mean_y) * (p.1 - mean_y)).sum();
    let ssr: f64 = pts
        .iter()
        .map(|p| {
            let resid = p.1 - (intercept + slope * p.0);
            resid * resid
        })
        .sum();
    let r_squared = if sst <= 1e-30 {
        1.0
    } else {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        alpha_hat: slope,
        intercept,
        r_squared,
        pairs_used: pts.len(),
        pairs_excluded,
    })
}
