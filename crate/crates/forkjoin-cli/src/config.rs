//! Config documents and flag/config precedence.
//!
//! Configs are JSON and parse into the library's own types wherever one
//! exists (distributions, server classes, statistics), so a config that
//! loads is already a valid experiment. Unknown keys are rejected.
//! `--seed` and `--out` override the matching config fields;
//! `--parallelism` has no config counterpart because it changes nothing
//! about the results, only how they are computed.

use std::fs;
use std::path::{Path, PathBuf};

use forkjoin::{moments, DistributionSpec, ServerClass, Statistic};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

/// Global flags resolved once in `main`.
pub struct Context {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: usize,
}

impl Context {
    pub fn load<T: DeserializeOwned>(&self) -> Result<T, CliError> {
        let path = self.config.as_ref().ok_or_else(|| {
            CliError::Config("--config <PATH> is required for this command".into())
        })?;
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        parse(&text)
    }

    /// Like [`load`](Self::load) but a missing `--config` falls back to
    /// the type's defaults; `verify` runs out of the box this way.
    pub fn load_or_default<T: DeserializeOwned + Default>(&self) -> Result<T, CliError> {
        match &self.config {
            Some(_) => self.load(),
            None => Ok(T::default()),
        }
    }

    /// Output directory: flag, then config, then the current directory.
    pub fn out_dir(&self, from_config: Option<&Path>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| from_config.map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    /// Output directory for commands whose primary product is stdout;
    /// `None` means write no files.
    pub fn out_dir_opt(&self, from_config: Option<&Path>) -> Option<PathBuf> {
        self.out
            .clone()
            .or_else(|| from_config.map(Path::to_path_buf))
    }

    pub fn seed(&self, from_config: u64) -> u64 {
        self.seed.unwrap_or(from_config)
    }

    pub fn require_seed(&self, from_config: Option<u64>) -> Result<u64, CliError> {
        self.seed.or(from_config).ok_or_else(|| {
            CliError::Config("`master_seed` missing from config (or pass --seed)".into())
        })
    }
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    normalize_kinds(&mut value);
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("bad config: {e}")))
}

/// Statistic kinds are documented with underscores (`max_wait_sup`) but
/// the hyphenated spellings are accepted too.
fn normalize_kinds(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (key, item) in map.iter_mut() {
                if key == "kind" {
                    if let Value::String(s) = item {
                        *s = s.replace('-', "_");
                    }
                } else {
                    normalize_kinds(item);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize_kinds),
        _ => {}
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub service: DistributionSpec,
    pub lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub arrival: DistributionSpec,
    pub servers: Vec<ServerClass>,
    pub statistic: Statistic,
    pub replications: usize,
    pub master_seed: u64,
    /// Steps per replication; computed from the system when absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// File stem for the CSV/manifest pair; defaults to the statistic name.
    #[serde(default)]
    pub label: Option<String>,
    /// Largest tolerated fraction of horizon-censored replications before
    /// the run counts as failed (hitting times excepted, where censoring
    /// is data); default 0.01.
    #[serde(default)]
    pub max_censored: Option<f64>,
}

/// Which limit law `compare` standardizes against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawSelector {
    Wait,
    Queue,
    LowerBound,
    UpperBound,
}

impl LawSelector {
    pub fn name(&self) -> &'static str {
        match self {
            LawSelector::Wait => "wait",
            LawSelector::Queue => "queue",
            LawSelector::LowerBound => "lower-bound",
            LawSelector::UpperBound => "upper-bound",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub arrival: DistributionSpec,
    pub servers: Vec<ServerClass>,
    pub law: LawSelector,
    /// Existing sample CSV (with `<stem>.manifest.json` beside it); when
    /// absent the samples are generated from the fields below.
    #[serde(default)]
    pub samples: Option<PathBuf>,
    #[serde(default)]
    pub statistic: Option<Statistic>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Spread of the mixture bound laws; default is a tenth of the
    /// hitting constant.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// KS pass threshold; default 0.10.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroClass {
    pub service: DistributionSpec,
    pub alpha: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroConfig {
    pub classes: Vec<HeteroClass>,
    /// Arrival rate; derived from `arrival` when that is present.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub arrival: Option<DistributionSpec>,
    /// Interarrival standard deviation; derived from `arrival` when that
    /// is present. One of the two must be given.
    #[serde(default)]
    pub sigma_a: Option<f64>,
    /// Together with `replications`, triggers a simulation check of the
    /// winning law at this system size.
    #[serde(default)]
    pub n_servers: Option<usize>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub horizon: Option<usize>,
    /// KS pass threshold for the simulation check; default 0.12.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Service distribution under test; default Exponential(2).
    pub service: Option<DistributionSpec>,
    /// Arrival distribution; default Exponential(1).
    pub arrival: Option<DistributionSpec>,
    /// Servers in the simulated checks; default 50.
    pub n_servers: Option<usize>,
    /// Steps per replication; default 400.
    pub horizon: Option<usize>,
    /// Replications per sampler; default 4000.
    pub replications: Option<usize>,
    /// Fixed default, so the bare `verify` invocation is reproducible.
    pub master_seed: Option<u64>,
    pub thresholds: VerifyThresholds,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyThresholds {
    /// Bound on |Λ(γ)|; default 1e-12.
    pub root_residual: Option<f64>,
    /// Bound on |Λ*(Λ'(γ)) − γΛ'(γ)|; default 1e-8.
    pub duality: Option<f64>,
    /// Relative error bound for the finite-difference derivative check;
    /// default 1e-6.
    pub derivative_rel: Option<f64>,
    /// Significance level of the two-sample KS checks; default 0.01.
    pub ks_level: Option<f64>,
    /// Relative drift bound on the mean when the horizon doubles;
    /// default 0.005.
    pub truncation_rel: Option<f64>,
}

/// Standard deviation of an interarrival distribution.
pub fn interarrival_sigma(spec: &DistributionSpec) -> Result<f64, CliError> {
    let (_, var) = moments(spec).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(var.sqrt())
}

/// Splits `n` servers across classes proportionally to `alphas`: floor
/// each share, then hand the leftover servers to the largest fractional
/// remainders (ties to the earlier class). Requires weights that sum to
/// one, which the solver layer has already checked.
pub fn apportion(alphas: &[f64], n: usize) -> Vec<usize> {
    let shares: Vec<f64> = alphas.iter().map(|a| a * n as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = shares[i] - shares[i].floor();
        let rj = shares[j] - shares[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}
