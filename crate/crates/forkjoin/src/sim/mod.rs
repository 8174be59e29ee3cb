//! Simulation of fork-join maxima: per-replication samplers, the batch
//! runner, and sample-set serialization.
//!
//! Every replication draws from substreams derived from a master seed and
//! the replication index, so batches are reproducible bit for bit at any
//! parallelism, and enlarging the system keeps the arrival process and the
//! streams of existing servers unchanged.

mod batch;
mod samplers;

pub use batch::run_batch;
pub use samplers::{
    count_arrivals, sample_hitting_time, sample_max_queue_direct, sample_max_queue_little,
    sample_max_wait_lindley, sample_max_wait_sup,
};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dist::{moments, validate, DistError, DistributionSpec};
use crate::lundberg::{solve_gamma, LundbergError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Lundberg(#[from] LundbergError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("horizon of {horizon} steps too short to observe the statistic")]
    HorizonTooShort { horizon: usize },
    #[error("replication {replication} failed: {source}")]
    ReplicationFailed {
        replication: usize,
        source: Box<SimError>,
    },
    #[error("malformed sample file: {0}")]
    MalformedSamples(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One block of identical servers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerClass {
    pub service: DistributionSpec,
    pub count: usize,
}

/// A fork-join system: a shared interarrival distribution feeding every
/// server, and one or more service classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkJoinConfig {
    pub arrival: DistributionSpec,
    pub servers: Vec<ServerClass>,
}

impl ForkJoinConfig {
    pub fn homogeneous(arrival: DistributionSpec, service: DistributionSpec, count: usize) -> Self {
        ForkJoinConfig {
            arrival,
            servers: vec![ServerClass { service, count }],
        }
    }

    pub fn n_servers(&self) -> usize {
        self.servers.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        validate(&self.arrival)?;
        let (mean, _) = moments(&self.arrival)?;
        if !mean.is_finite() || mean <= 0.0 {
            return Err(SimError::InvalidConfig(
                "arrival mean must be positive".into(),
            ));
        }
        if self.servers.is_empty() {
            return Err(SimError::InvalidConfig("no server classes".into()));
        }
        for class in &self.servers {
            validate(&class.service)?;
            if class.count == 0 {
                return Err(SimError::InvalidConfig(
                    "server class with zero servers".into(),
                ));
            }
        }
        Ok(())
    }

    /// Arrival rate `1/E[A]`.
    pub fn arrival_rate(&self) -> Result<f64, SimError> {
        let (mean, _) = moments(&self.arrival)?;
        Ok(1.0 / mean)
    }

    /// SHA-256 of the canonical JSON encoding, so reloaded samples can be
    /// matched to the system that produced them.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(json.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Number of arrival/service pairs each replication processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub steps: usize,
}

impl Horizon {
    pub fn new(steps: usize) -> Self {
        Horizon { steps }
    }
}

/// Horizon covering ten times the expected hitting scale `c_hat log N`,
/// floored at 1000 steps. Systems whose decay rate has no root fall back
/// to the floor.
pub fn default_horizon(config: &ForkJoinConfig) -> Result<Horizon, SimError> {
    config.validate()?;
    let lambda = config.arrival_rate()?;
    let log_n = (config.n_servers().max(2) as f64).ln();
    let mut scale: f64 = 0.0;
    for class in &config.servers {
        match solve_gamma(&class.service, lambda) {
            Ok(sol) => scale = scale.max(sol.c_hat),
            Err(LundbergError::NoRoot | LundbergError::BoundaryRoot { .. }) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let steps = (10.0 * scale * log_n).ceil() as usize;
    Ok(Horizon::new(steps.max(1000)))
}

/// Which per-replication statistic a batch records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// Longest waiting time via running suprema of the service-minus-
    /// interarrival random walks.
    MaxWaitSup,
    /// Longest waiting time via the Lindley recursion.
    MaxWaitLindley,
    /// Longest queue length via the distributional Little's law.
    MaxQueueLittle,
    /// Longest queue length read off the simulated system at the last
    /// arrival epoch.
    MaxQueueDirect,
    /// First step at which the longest waiting time reaches `level`.
    HittingTime { level: f64 },
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::MaxWaitSup => "max_wait_sup",
            Statistic::MaxWaitLindley => "max_wait_lindley",
            Statistic::MaxQueueLittle => "max_queue_little",
            Statistic::MaxQueueDirect => "max_queue_direct",
            Statistic::HittingTime { .. } => "hitting_time",
        }
    }
}

/// Metadata stored alongside a sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub statistic: Statistic,
    pub master_seed: u64,
    pub replications: usize,
    pub horizon: usize,
    pub n_servers: usize,
    pub config_digest: String,
    pub censored: usize,
}

/// A batch of per-replication samples together with everything needed to
/// reproduce it: statistic, seed, horizon, and the system digest.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub statistic: Statistic,
    pub values: Vec<f64>,
    pub censored: Vec<bool>,
    pub master_seed: u64,
    pub horizon: usize,
    pub n_servers: usize,
    pub config_digest: String,
}

impl SampleSet {
    pub fn censored_fraction(&self) -> f64 {
        if self.censored.is_empty() {
            return 0.0;
        }
        self.censored.iter().filter(|c| **c).count() as f64 / self.censored.len() as f64
    }

    /// Values of uncensored replications.
    pub fn uncensored_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.censored)
            .filter(|(_, c)| !**c)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn manifest(&self) -> SampleManifest {
        SampleManifest {
            statistic: self.statistic,
            master_seed: self.master_seed,
            replications: self.values.len(),
            horizon: self.horizon,
            n_servers: self.n_servers,
            config_digest: self.config_digest.clone(),
            censored: self.censored.iter().filter(|c| **c).count(),
        }
    }

    pub fn assemble(
        manifest: &SampleManifest,
        values: Vec<f64>,
        censored: Vec<bool>,
    ) -> Result<Self, SimError> {
        if values.len() != manifest.replications || censored.len() != manifest.replications {
            return Err(SimError::MalformedSamples(format!(
                "manifest promises {} replications, file has {}",
                manifest.replications,
                values.len()
            )));
        }
        let n_censored = censored.iter().filter(|c| **c).count();
        if n_censored != manifest.censored {
            return Err(SimError::MalformedSamples(format!(
                "manifest promises {} censored rows, file has {n_censored}",
                manifest.censored
            )));
        }
        Ok(SampleSet {
            statistic: manifest.statistic,
            values,
            censored,
            master_seed: manifest.master_seed,
            horizon: manifest.horizon,
            n_servers: manifest.n_servers,
            config_digest: manifest.config_digest.clone(),
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "replication,value,censored")?;
        for (i, (v, c)) in self.values.iter().zip(&self.censored).enumerate() {
            writeln!(out, "{i},{v},{c}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<(Vec<f64>, Vec<bool>), SimError> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(header)) if header.trim() == "replication,value,censored" => {}
            _ => {
                return Err(SimError::MalformedSamples(
                    "missing header 'replication,value,censored'".into(),
                ))
            }
        }
        let mut values = Vec::new();
        let mut censored = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.trim().split(',');
            let bad = || SimError::MalformedSamples(format!("row {row}: '{line}'"));
            let idx: usize = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let value: f64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let flag: bool = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if fields.next().is_some() || idx != row {
                return Err(bad());
            }
            values.push(value);
            censored.push(flag);
        }
        Ok((values, censored))
    }
}
