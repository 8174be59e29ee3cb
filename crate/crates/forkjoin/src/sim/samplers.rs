//! Per-replication samplers. Each takes a [`StreamFamily`] so that the
//! shared arrival stream, the auxiliary counting stream, and the per-server
//! service streams are fixed functions of `(master seed, replication)`.

use crate::dist::{moments, sampler, validate, DistributionSpec, Sampler};
use crate::rng::{RngStream, StreamFamily};

use super::{ForkJoinConfig, Horizon, SimError};

fn draw_arrivals(config: &ForkJoinConfig, family: &StreamFamily, steps: usize) -> Vec<f64> {
    let arrival = sampler(&config.arrival);
    let mut stream = family.arrivals();
    (0..steps).map(|_| arrival.draw(&mut stream)).collect()
}

fn check(config: &ForkJoinConfig, horizon: Horizon) -> Result<(), SimError> {
    config.validate()?;
    if horizon.steps == 0 {
        return Err(SimError::InvalidConfig("horizon of zero steps".into()));
    }
    Ok(())
}

/// Visits every server with its service sampler and a fresh service stream.
fn for_each_server(
    config: &ForkJoinConfig,
    family: &StreamFamily,
    mut visit: impl FnMut(&Sampler<'_>, &mut RngStream),
) {
    let mut index = 0u64;
    for class in &config.servers {
        let service = sampler(&class.service);
        for _ in 0..class.count {
            let mut stream = family.server(index);
            visit(&service, &mut stream);
            index += 1;
        }
    }
}

/// Longest waiting time as the maximum over servers of the running
/// supremum of the service-minus-interarrival random walk over `horizon`
/// steps.
pub fn sample_max_wait_sup(
    config: &ForkJoinConfig,
    family: &StreamFamily,
    horizon: Horizon,
) -> Result<f64, SimError> {
    check(config, horizon)?;
    let arrivals = draw_arrivals(config, family, horizon.steps);
    let mut best = 0.0f64;
    for_each_server(config, family, |service, stream| {
        let mut sum = 0.0f64;
        let mut sup = 0.0f64;
        for a in &arrivals {
            sum += service.draw(stream) - a;
            if sum > sup {
                sup = sum;
            }
        }
        if sup > best {
            best = sup;
        }
    });
    Ok(best)
}

/// Longest waiting time as the maximum over servers of the Lindley
/// recursion `W(n+1) = max(0, W(n) + S(n) - A(n))` after `horizon` steps.
pub fn sample_max_wait_lindley(
    config: &ForkJoinConfig,
    family: &StreamFamily,
    horizon: Horizon,
) -> Result<f64, SimError> {
    check(config, horizon)?;
    let arrivals = draw_arrivals(config, family, horizon.steps);
    let mut best = 0.0f64;
    for_each_server(config, family, |service, stream| {
        let mut w = 0.0f64;
        for a in &arrivals {
            w = (w + service.draw(stream) - a).max(0.0);
        }
        if w > best {
            best = w;
        }
    });
    Ok(best)
}

/// Largest `n` whose first `n` interarrival draws sum to at most `wait`.
pub fn count_arrivals(
    arrival: &DistributionSpec,
    wait: f64,
    stream: &mut RngStream,
) -> Result<u64, SimError> {
    validate(arrival)?;
    let (mean, _) = moments(arrival)?;
    if !mean.is_finite() || mean <= 0.0 {
        return Err(SimError::InvalidConfig(
            "arrival mean must be positive".into(),
        ));
    }
    if !wait.is_finite() {
        return Err(SimError::InvalidConfig(format!(
            "non-finite wait {wait} in arrival count"
        )));
    }
    let arrival = sampler(arrival);
    let mut cum = 0.0f64;
    let mut n = 0u64;
    loop {
        cum += arrival.draw(stream);
        if cum > wait {
            return Ok(n);
        }
        n += 1;
    }
}

/// Longest queue length via the distributional Little's law: the number of
/// arrivals from an independent stream within the longest waiting time.
pub fn sample_max_queue_little(
    config: &ForkJoinConfig,
    family: &StreamFamily,
    horizon: Horizon,
) -> Result<f64, SimError> {
    let wait = sample_max_wait_sup(config, family, horizon)?;
    let mut aux = family.aux();
    let count = count_arrivals(&config.arrival, wait, &mut aux)?;
    Ok(count as f64)
}

/// Longest queue length read directly off the simulated system, observed
/// as the state seen by the last arriving task: the largest `j` such that
/// the task `j` places earlier is still waiting in some queue. Tasks whose
/// service has started are not in queue, and in each FCFS queue the
/// waiting tasks form a suffix of the arrival order, so the largest such
/// `j` is exactly the longest queue length.
pub fn sample_max_queue_direct(
    config: &ForkJoinConfig,
    family: &StreamFamily,
    horizon: Horizon,
) -> Result<f64, SimError> {
    check(config, horizon)?;
    let k = horizon.steps;
    let arrivals = draw_arrivals(config, family, k);
    let mut cum = Vec::with_capacity(k);
    let mut acc = 0.0f64;
    for a in &arrivals {
        acc += a;
        cum.push(acc);
    }
    let t = cum[k - 1];
    let mut best = 0usize;
    for_each_server(config, family, |service, stream| {
        let mut w = 0.0f64;
        let mut count = 0usize;
        // Task m (1-based, m < k) arrived at cum[m-1] and waits in this
        // queue while w = W(m) exceeds the elapsed time t - cum[m-1].
        for m in 1..k {
            if w > t - cum[m - 1] {
                count += 1;
            }
            w = (w + service.draw(stream) - arrivals[m]).max(0.0);
        }
        if count > best {
            best = count;
        }
    });
    // The oldest observable waiter is task 2; a count that reaches it
    // means the backlog spans the whole simulated window.
    if k >= 3 && best == k - 2 {
        return Err(SimError::HorizonTooShort { horizon: k });
    }
    Ok(best as f64)
}

/// First step `k` at which some server's partial sum
/// `Σ_{j<=k}(S_i(j) - A(j))` reaches `level`, and whether the observation
/// was censored at the horizon.
///
/// The empty sum at `k = 0` hits any non-positive level immediately.
/// Censored replications report the horizon itself.
pub fn sample_hitting_time(
    config: &ForkJoinConfig,
    family: &StreamFamily,
    level: f64,
    horizon: Horizon,
) -> Result<(f64, bool), SimError> {
    check(config, horizon)?;
    if !level.is_finite() {
        return Err(SimError::InvalidConfig(format!(
            "non-finite hitting level {level}"
        )));
    }
    if level <= 0.0 {
        return Ok((0.0, false));
    }
    let k = horizon.steps;
    let arrivals = draw_arrivals(config, family, k);
    // min over servers of the first-passage step; later servers only need
    // to be followed until the best step so far.
    let mut best = k + 1;
    for_each_server(config, family, |service, stream| {
        let mut sum = 0.0f64;
        for (j, a) in arrivals.iter().enumerate() {
            let step = j + 1;
            if step >= best {
                break;
            }
            sum += service.draw(stream) - a;
            if sum >= level {
                best = step;
                break;
            }
        }
    });
    if best <= k {
        Ok((best as f64, false))
    } else {
        Ok((k as f64, true))
    }
}
