//! JSON configuration files. Every field has a default, so `{}` is valid.

use netquality_core::matching::{ExperimentKind, ExperimentSpec};
use netquality_core::metrics::Threshold;
use netquality_core::recommend::DEFAULT_BAND;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Q4Any,
    Q4ExactlyN,
    Q4Alpha,
    Q5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub kind: ExperimentName,
    /// Link count for `q4_exactly_n`.
    pub n: Option<u32>,
    /// Relative beauty gain for `q4_alpha`.
    pub alpha: Option<f64>,
    pub control_max: f64,
    pub treated_min: f64,
    pub horizons: Vec<u32>,
    pub seed: Option<u64>,
    pub bootstrap: usize,
    pub level: f64,
    pub balance: bool,
    pub control_ratio: Option<f64>,
    pub max_restarts: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            kind: ExperimentName::Q4Any,
            n: None,
            alpha: None,
            control_max: 0.1,
            treated_min: 0.3,
            horizons: (1..=12).collect(),
            seed: None,
            bootstrap: 1000,
            level: 0.95,
            balance: true,
            control_ratio: None,
            max_restarts: 5,
        }
    }
}

impl MatchConfig {
    pub fn spec(&self, seed: u64) -> Result<ExperimentSpec> {
        let kind = match self.kind {
            ExperimentName::Q4Any => ExperimentKind::Q4Any,
            ExperimentName::Q4ExactlyN => match self.n {
                Some(n @ 1..) => ExperimentKind::Q4ExactlyN { n },
                _ => return Err(CliError::Usage(String::from("q4_exactly_n needs n ≥ 1"))),
            },
            ExperimentName::Q4Alpha => match self.alpha {
                Some(alpha) if alpha.is_finite() && alpha >= 0.0 => ExperimentKind::Q4Alpha { alpha },
                _ => return Err(CliError::Usage(String::from("q4_alpha needs alpha ≥ 0"))),
            },
            ExperimentName::Q5 => ExperimentKind::Q5 {
                control_max: self.control_max,
                treated_min: self.treated_min,
            },
        };
        if self.horizons.contains(&0) {
            return Err(CliError::Usage(String::from("inactivity horizons must be ≥ 1")));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Usage(String::from("level must lie in (0, 1)")));
        }
        let mut spec = ExperimentSpec::new(kind);
        spec.horizons = self.horizons.clone();
        spec.seed = seed;
        spec.bootstrap = self.bootstrap;
        spec.level = self.level;
        spec.balance = self.balance;
        spec.control_ratio = self.control_ratio;
        spec.max_restarts = self.max_restarts;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdName {
    Mean,
    Median,
}

impl From<ThresholdName> for Threshold {
    fn from(t: ThresholdName) -> Self {
        match t {
            ThresholdName::Mean => Threshold::Mean,
            ThresholdName::Median => Threshold::Median,
        }
    }
}

/// Shared by `metrics`, `spectrum` and `illusion`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Snapshot week; the final graph when absent.
    pub week: Option<u32>,
    pub bins: usize,
    pub threshold: ThresholdName,
    /// Reshuffled null models to evaluate alongside the data.
    pub shuffles: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            week: None,
            bins: 100,
            threshold: ThresholdName::Mean,
            shuffles: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Fixed K; chosen by the gap statistic when absent.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub references: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: None,
            k_min: 2,
            k_max: 10,
            references: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommendConfig {
    pub band: f64,
    pub week: Option<u32>,
    /// Clustering used to find the forlorn-beauty class.
    pub clusters: ClusterConfig,
}

impl Default for RecommendConfig {
    fn default() -> Self {
        RecommendConfig {
            band: DEFAULT_BAND,
            week: None,
            clusters: ClusterConfig {
                k: Some(4),
                ..ClusterConfig::default()
            },
        }
    }
}
