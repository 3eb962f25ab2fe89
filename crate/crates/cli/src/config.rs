//! Declarative run configuration. One TOML file drives every subcommand,
//! and the non-path parts are echoed into the bench summary so each
//! report describes the run that produced it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use adaptive_ivf::policy::TierMultipliers;
use adaptive_ivf::{Error, SynthConfig};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: SynthConfig,
    pub index: IndexSection,
    pub workload: WorkloadSection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default, skip_serializing)]
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IndexSection {
    pub m: usize,
    #[serde(default = "default_max_iters")]
    pub kmeans_max_iters: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub n_q: usize,
    pub s: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySection {
    pub k_base_list: Vec<usize>,
    pub tail_mult: f64,
    pub body_mult: f64,
    pub head_mult: f64,
    pub percentile_low: f64,
    pub percentile_high: f64,
    pub telemetry_k_base: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub recall_targets: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub dataset: Option<String>,
    pub index: Option<String>,
    pub queries: Option<String>,
    pub queries_csv: Option<String>,
    pub stats_csv: Option<String>,
    pub curves: Option<String>,
    pub summary: Option<String>,
    pub analysis: Option<String>,
}

fn default_max_iters() -> usize {
    25
}

/// A problem with the config file itself, as opposed to a data or
/// format failure later in the pipeline. Maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl Default for PolicySection {
    fn default() -> Self {
        let m = TierMultipliers::default();
        Self {
            k_base_list: vec![1, 2, 4, 8, 16, 32, 64],
            tail_mult: m.tail,
            body_mult: m.body,
            head_mult: m.head,
            percentile_low: 0.2,
            percentile_high: 0.8,
            telemetry_k_base: 8,
        }
    }
}

impl Default for BenchSection {
    fn default() -> Self {
        Self { recall_targets: vec![0.95, 0.98] }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("cannot parse config {}: {e}", path.display())))?;
        config
            .validate()
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.data.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.index.m < 1 {
            return bad("index.m must be at least 1".into());
        }
        if self.index.kmeans_max_iters < 1 {
            return bad("index.kmeans_max_iters must be at least 1".into());
        }
        if self.workload.n_q < 1 {
            return bad("workload.n_q must be at least 1".into());
        }
        if !(self.workload.s >= 0.0) {
            return bad("workload.s must be nonnegative".into());
        }
        if !(self.workload.noise_sigma >= 0.0) {
            return bad("workload.noise_sigma must be nonnegative".into());
        }
        let p = &self.policy;
        if p.k_base_list.is_empty() {
            return bad("policy.k_base_list must not be empty".into());
        }
        if !p.k_base_list.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!(
                "policy.k_base_list must be strictly ascending, got {:?}",
                p.k_base_list
            ));
        }
        if p.k_base_list[0] < 1 {
            return bad("policy.k_base_list entries must be at least 1".into());
        }
        for (name, v) in [
            ("tail_mult", p.tail_mult),
            ("body_mult", p.body_mult),
            ("head_mult", p.head_mult),
        ] {
            if !(v > 0.0) {
                return bad(format!("policy.{name} must be positive, got {v}"));
            }
        }
        if !(p.percentile_low > 0.0
            && p.percentile_low < p.percentile_high
            && p.percentile_high < 1.0)
        {
            return bad(format!(
                "percentile levels must satisfy 0 < low < high < 1, got {} and {}",
                p.percentile_low, p.percentile_high
            ));
        }
        if p.telemetry_k_base < 1 {
            return bad("policy.telemetry_k_base must be at least 1".into());
        }
        for &t in &self.bench.recall_targets {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("recall target {t} outside (0, 1)"));
            }
        }
        Ok(())
    }

    /// Applies the --seed override: data, training, and workload streams
    /// get consecutive seeds derived from the one value.
    pub fn override_seed(&mut self, seed: u64) {
        self.data.seed = seed;
        self.index.seed = seed.wrapping_add(1);
        self.workload.seed = seed.wrapping_add(2);
    }

    pub fn multipliers(&self) -> TierMultipliers {
        TierMultipliers {
            tail: self.policy.tail_mult,
            body: self.policy.body_mult,
            head: self.policy.head_mult,
        }
    }

    /// Sweep budgets clamped to the number of clusters, deduplicated.
    pub fn effective_k_list(&self) -> Vec<usize> {
        let m = self.index.m;
        let mut ks: Vec<usize> = self.policy.k_base_list.iter().map(|&k| k.min(m)).collect();
        ks.dedup();
        ks
    }

    pub fn effective_telemetry_k(&self) -> usize {
        self.policy.telemetry_k_base.min(self.index.m)
    }
}

/// Artifact locations for one run. Relative overrides resolve against
/// the --out directory, absolute ones are taken as given.
pub struct ArtifactPaths {
    pub dataset: PathBuf,
    pub index: PathBuf,
    pub queries: PathBuf,
    pub queries_csv: PathBuf,
    pub stats_csv: PathBuf,
    pub curves: PathBuf,
    pub summary: PathBuf,
    pub analysis: PathBuf,
}

impl ArtifactPaths {
    pub fn resolve(out_dir: &Path, paths: &PathsSection) -> Self {
        let place = |over: &Option<String>, default: &str| -> PathBuf {
            match over {
                Some(p) => {
                    let p = Path::new(p);
                    if p.is_absolute() {
                        p.to_path_buf()
                    } else {
                        out_dir.join(p)
                    }
                }
                None => out_dir.join(default),
            }
        };
        Self {
            dataset: place(&paths.dataset, "data.avf"),
            index: place(&paths.index, "index.aivf"),
            queries: place(&paths.queries, "queries.avf"),
            queries_csv: place(&paths.queries_csv, "queries.csv"),
            stats_csv: place(&paths.stats_csv, "stats.csv"),
            curves: place(&paths.curves, "curves.csv"),
            summary: place(&paths.summary, "summary.json"),
            analysis: place(&paths.analysis, "analyze.json"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        r#"
[data]
n = 100
dim = 8
m_concepts = 4
zipf_exponent_sizes = 1.0
alpha = 0.5
base_spread = 0.01
seed = 1

[index]
m = 4
seed = 2

[workload]
n_q = 50
s = 1.0
noise_sigma = 0.05
seed = 3
"#
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let config: RunConfig = toml::from_str(minimal_toml()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.policy.k_base_list, vec![1, 2, 4, 8, 16, 32, 64]);
        assert_eq!(config.policy.telemetry_k_base, 8);
        assert_eq!(config.bench.recall_targets, vec![0.95, 0.98]);
        assert_eq!(config.index.kmeans_max_iters, 25);
        assert_eq!(config.effective_k_list(), vec![1, 2, 4]);
        assert_eq!(config.effective_telemetry_k(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{}\n[extra]\nx = 1\n", minimal_toml());
        assert!(toml::from_str::<RunConfig>(&text).is_err());
        let text = minimal_toml().replace("n_q = 50", "n_q = 50\nbogus = 1");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn validation_rejects_bad_percentiles_and_targets() {
        let mut config: RunConfig = toml::from_str(minimal_toml()).unwrap();
        config.policy.percentile_low = 0.9;
        assert!(config.validate().is_err());
        let mut config: RunConfig = toml::from_str(minimal_toml()).unwrap();
        config.bench.recall_targets = vec![1.5];
        assert!(config.validate().is_err());
        let mut config: RunConfig = toml::from_str(minimal_toml()).unwrap();
        config.policy.k_base_list = vec![4, 2];
        assert!(config.validate().is_err());
    }

    #[test]
    fn seed_override_derives_three_streams() {
        let mut config: RunConfig = toml::from_str(minimal_toml()).unwrap();
        config.override_seed(100);
        assert_eq!(config.data.seed, 100);
        assert_eq!(config.index.seed, 101);
        assert_eq!(config.workload.seed, 102);
    }

    #[test]
    fn paths_section_is_not_echoed() {
        let mut config: RunConfig = toml::from_str(minimal_toml()).unwrap();
        config.paths.dataset = Some("elsewhere.avf".into());
        let echoed = toml::to_string(&config).unwrap();
        assert!(!echoed.contains("elsewhere"));
        let json = serde_json::to_string(&config).unwrap();
        assert!(!json.contains("paths"));
    }

    #[test]
    fn relative_paths_resolve_against_out_dir() {
        let paths = PathsSection {
            dataset: Some("d/my.avf".into()),
            index: None,
            ..Default::default()
        };
        let a = ArtifactPaths::resolve(Path::new("/tmp/run"), &paths);
        assert_eq!(a.dataset, Path::new("/tmp/run/d/my.avf"));
        assert_eq!(a.index, Path::new("/tmp/run/index.aivf"));
        assert_eq!(a.summary, Path::new("/tmp/run/summary.json"));
    }
}
