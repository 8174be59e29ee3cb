//! Batch execution of replications.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::rng::StreamFamily;

use super::{
    sample_hitting_time, sample_max_queue_direct, sample_max_queue_little,
    sample_max_wait_lindley, sample_max_wait_sup, ForkJoinConfig, Horizon, SampleSet, SimError,
    Statistic,
};

/// Runs `replications` independent replications of `statistic` and collects
/// them into a [`SampleSet`].
///
/// Replication `r` draws only from substreams of `(master_seed, r)`, so the
/// result is bit-identical for any `threads` value, including the
/// sequential build. `threads == 0` uses the default thread pool. A
/// replication whose horizon is too short becomes a censored row carrying
/// the horizon as its value.
pub fn run_batch(
    config: &ForkJoinConfig,
    statistic: Statistic,
    horizon: Horizon,
    replications: usize,
    master_seed: u64,
    threads: usize,
) -> Result<SampleSet, SimError> {
    config.validate()?;
    if replications == 0 {
        return Err(SimError::InvalidConfig(
            "at least one replication required".into(),
        ));
    }
    if horizon.steps == 0 {
        return Err(SimError::InvalidConfig("horizon of zero steps".into()));
    }
    let one = |r: usize| -> Result<(f64, bool), SimError> {
        let family = StreamFamily::new(master_seed, r as u64);
        let drawn = match statistic {
            Statistic::MaxWaitSup => {
                sample_max_wait_sup(config, &family, horizon).map(|v| (v, false))
            }
            Statistic::MaxWaitLindley => {
                sample_max_wait_lindley(config, &family, horizon).map(|v| (v, false))
            }
            Statistic::MaxQueueLittle => {
                sample_max_queue_little(config, &family, horizon).map(|v| (v, false))
            }
            Statistic::MaxQueueDirect => {
                sample_max_queue_direct(config, &family, horizon).map(|v| (v, false))
            }
            Statistic::HittingTime { level } => {
                sample_hitting_time(config, &family, level, horizon)
            }
        };
        match drawn {
            Ok(pair) => Ok(pair),
            Err(SimError::HorizonTooShort { .. }) => Ok((horizon.steps as f64, true)),
            Err(e) => Err(SimError::ReplicationFailed {
                replication: r,
                source: Box::new(e),
            }),
        }
    };
    let rows = execute(replications, threads, one)?;
    let (values, censored) = rows.into_iter().unzip();
    Ok(SampleSet {
        statistic,
        values,
        censored,
        master_seed,
        horizon: horizon.steps,
        n_servers: config.n_servers(),
        config_digest: config.digest(),
    })
}

#[cfg(feature = "parallel")]
fn execute(
    replications: usize,
    threads: usize,
    one: impl Fn(usize) -> Result<(f64, bool), SimError> + Sync,
) -> Result<Vec<(f64, bool)>, SimError> {
    if threads == 0 {
        return (0..replications).into_par_iter().map(&one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| (0..replications).into_par_iter().map(&one).collect())
}

#[cfg(not(feature = "parallel"))]
fn execute(
    replications: usize,
    threads: usize,
    one: impl Fn(usize) -> Result<(f64, bool), SimError> + Sync,
) -> Result<Vec<(f64, bool)>, SimError> {
    let _ = threads;
    (0..replications).map(one).collect()
}
