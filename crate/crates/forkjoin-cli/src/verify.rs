//! The `verify` subcommand: a self-contained consistency suite.
//!
//! Six checks cover the chain from root solving to simulation. Three are
//! numeric identities (root residual, convex-dual identity, derivative
//! consistency against finite differences); two compare samplers that must
//! share a law (the two waiting-time samplers, and the two queue-length
//! samplers); the last doubles the horizon and requires the mean to stay
//! put. Checks that need the root report `skip` with the solver's reason
//! when the configured system has none, and a skip is not a failure.
//!
//! Every threshold can be overridden in the config; the defaults are
//! documented on [`crate::config::VerifyThresholds`].

use forkjoin::lundberg::{legendre, shifted_cgf, solve_gamma, LundbergSolution};
use forkjoin::{
    run_batch, two_sample_ks, DistributionSpec, ForkJoinConfig, Horizon, ServerClass, Statistic,
};
use serde_json::{json, Value};

use crate::commands::{domain_reason, sim_err};
use crate::config::{Context, VerifyConfig};
use crate::CliError;

const DEFAULT_ROOT_RESIDUAL: f64 = 1e-12;
const DEFAULT_DUALITY: f64 = 1e-8;
const DEFAULT_DERIVATIVE_REL: f64 = 1e-6;
const DEFAULT_KS_LEVEL: f64 = 0.01;
const DEFAULT_TRUNCATION_REL: f64 = 0.005;

const DEFAULT_N_SERVERS: usize = 50;
const DEFAULT_HORIZON: usize = 400;
const DEFAULT_REPLICATIONS: usize = 4000;
const DEFAULT_SEED: u64 = 20_240_817;

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg: VerifyConfig = ctx.load_or_default()?;
    let service = cfg
        .service
        .clone()
        .unwrap_or(DistributionSpec::Exponential { rate: 2.0 });
    let arrival = cfg
        .arrival
        .clone()
        .unwrap_or(DistributionSpec::Exponential { rate: 1.0 });
    let n_servers = cfg.n_servers.unwrap_or(DEFAULT_N_SERVERS);
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let replications = cfg.replications.unwrap_or(DEFAULT_REPLICATIONS);
    let seed = ctx.seed.or(cfg.master_seed).unwrap_or(DEFAULT_SEED);

    let system = ForkJoinConfig {
        arrival: arrival.clone(),
        servers: vec![ServerClass {
            service: service.clone(),
            count: n_servers,
        }],
    };
    system
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let lambda = system
        .arrival_rate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let mut checks = Vec::new();
    match solve_gamma(&service, lambda) {
        Ok(solution) => {
            let t = cfg.thresholds.root_residual.unwrap_or(DEFAULT_ROOT_RESIDUAL);
            checks.push(root_residual(&service, lambda, &solution, t));
            let t = cfg.thresholds.duality.unwrap_or(DEFAULT_DUALITY);
            checks.push(duality(&service, lambda, &solution, t)?);
            let t = cfg
                .thresholds
                .derivative_rel
                .unwrap_or(DEFAULT_DERIVATIVE_REL);
            checks.push(derivative_consistency(&service, lambda, &solution, t));
        }
        Err(e) => match domain_reason(&e) {
            Some(name) => {
                let why = format!("{name}: {e}");
                for check in ["root_residual", "duality", "derivative_consistency"] {
                    checks.push(json!({
                        "name": check,
                        "status": "skip",
                        "reason": why,
                    }));
                }
            }
            None => return Err(CliError::Config(e.to_string())),
        },
    }

    let level = cfg.thresholds.ks_level.unwrap_or(DEFAULT_KS_LEVEL);
    let critical = ks_critical(level, replications, replications);
    checks.push(sampler_pair(
        "sampler_equivalence_ks",
        &system,
        (Statistic::MaxWaitSup, Statistic::MaxWaitLindley),
        horizon,
        replications,
        (seed, seed.wrapping_add(1)),
        critical,
        ctx.threads,
    )?);
    checks.push(sampler_pair(
        "littles_law_ks",
        &system,
        (Statistic::MaxQueueDirect, Statistic::MaxQueueLittle),
        horizon,
        replications,
        (seed.wrapping_add(2), seed.wrapping_add(3)),
        critical,
        ctx.threads,
    )?);
    let t = cfg
        .thresholds
        .truncation_rel
        .unwrap_or(DEFAULT_TRUNCATION_REL);
    checks.push(truncation_stability(
        &system,
        horizon,
        replications,
        seed,
        t,
        ctx.threads,
    )?);

    let failed = checks
        .iter()
        .filter(|c| c["status"] == "fail")
        .count();
    let report = json!({
        "config": {
            "service": service,
            "arrival": arrival,
            "n_servers": n_servers,
            "horizon": horizon,
            "replications": replications,
            "master_seed": seed,
        },
        "checks": checks,
        "pass": failed == 0,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    crate::commands::write_report(ctx.out_dir_opt(cfg.out.as_deref()), "verify.json", &text)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Domain(format!("{failed} verify check(s) failed")))
    }
}

fn verdict(name: &str, observed: f64, threshold: f64, extra: Value) -> Value {
    let mut check = json!({
        "name": name,
        "status": if observed <= threshold { "pass" } else { "fail" },
        "observed": observed,
        "threshold": threshold,
    });
    if let (Value::Object(target), Value::Object(source)) = (&mut check, extra) {
        target.extend(source);
    }
    check
}

fn root_residual(
    service: &DistributionSpec,
    lambda: f64,
    solution: &LundbergSolution,
    threshold: f64,
) -> Value {
    let residual = shifted_cgf(service, lambda, solution.gamma).abs();
    verdict(
        "root_residual",
        residual,
        threshold,
        json!({ "gamma": solution.gamma }),
    )
}

/// `Λ*(Λ'(γ)) = γΛ'(γ)`: the rate function evaluated at the root's slope
/// must equal the product, which is also `1/ĉ`.
fn duality(
    service: &DistributionSpec,
    lambda: f64,
    solution: &LundbergSolution,
    threshold: f64,
) -> Result<Value, CliError> {
    let x = solution.lambda_prime_at_gamma;
    let rate = legendre(service, lambda, x)
        .map_err(|e| CliError::Config(e.to_string()))?
        .value;
    let gap = (rate - solution.gamma * x).abs();
    Ok(verdict(
        "duality",
        gap,
        threshold,
        json!({ "rate_value": rate, "gamma_times_slope": solution.gamma * x }),
    ))
}

/// Central finite differences of the shifted CGF around γ against the
/// solver's reported first and second derivatives.
fn derivative_consistency(
    service: &DistributionSpec,
    lambda: f64,
    solution: &LundbergSolution,
    threshold: f64,
) -> Value {
    let gamma = solution.gamma;
    let h = 1e-4 * gamma.abs().max(1.0);
    let up = shifted_cgf(service, lambda, gamma + h);
    let down = shifted_cgf(service, lambda, gamma - h);
    let mid = shifted_cgf(service, lambda, gamma);
    let d1 = (up - down) / (2.0 * h);
    let d2 = (up - 2.0 * mid + down) / (h * h);
    let rel1 = (d1 - solution.lambda_prime_at_gamma).abs()
        / solution.lambda_prime_at_gamma.abs().max(1.0);
    let rel2 = (d2 - solution.lambda_double_prime_at_gamma).abs()
        / solution.lambda_double_prime_at_gamma.abs().max(1.0);
    verdict(
        "derivative_consistency",
        rel1.max(rel2),
        threshold,
        json!({ "first_rel": rel1, "second_rel": rel2, "step": h }),
    )
}

/// Asymptotic two-sample KS critical value at significance `level`.
fn ks_critical(level: f64, n: usize, m: usize) -> f64 {
    let c = (-(level / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn sampler_pair(
    name: &str,
    system: &ForkJoinConfig,
    statistics: (Statistic, Statistic),
    horizon: usize,
    replications: usize,
    seeds: (u64, u64),
    critical: f64,
    threads: usize,
) -> Result<Value, CliError> {
    let a = run_batch(
        system,
        statistics.0,
        Horizon::new(horizon),
        replications,
        seeds.0,
        threads,
    )
    .map_err(sim_err)?;
    let b = run_batch(
        system,
        statistics.1,
        Horizon::new(horizon),
        replications,
        seeds.1,
        threads,
    )
    .map_err(sim_err)?;
    let censored =
        a.censored.iter().filter(|c| **c).count() + b.censored.iter().filter(|c| **c).count();
    let ks = two_sample_ks(&a.uncensored_values(), &b.uncensored_values())
        .map_err(|e| CliError::Domain(e.to_string()))?;
    Ok(verdict(
        name,
        ks,
        critical,
        json!({
            "samplers": [statistics.0.name(), statistics.1.name()],
            "replications": replications,
            "censored": censored,
        }),
    ))
}

/// Means of the same seeded batch at the configured horizon and at twice
/// that; the runs share every draw, so any drift is pure truncation.
fn truncation_stability(
    system: &ForkJoinConfig,
    horizon: usize,
    replications: usize,
    seed: u64,
    threshold: f64,
    threads: usize,
) -> Result<Value, CliError> {
    let short = run_batch(
        system,
        Statistic::MaxWaitSup,
        Horizon::new(horizon),
        replications,
        seed,
        threads,
    )
    .map_err(sim_err)?;
    let long = run_batch(
        system,
        Statistic::MaxWaitSup,
        Horizon::new(2 * horizon),
        replications,
        seed,
        threads,
    )
    .map_err(sim_err)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m_short = mean(&short.values);
    let m_long = mean(&long.values);
    let rel = (m_long - m_short).abs() / m_short.abs().max(f64::MIN_POSITIVE);
    Ok(verdict(
        "truncation_stability",
        rel,
        threshold,
        json!({
            "mean_at_horizon": m_short,
            "mean_at_double_horizon": m_long,
            "horizon": horizon,
        }),
    ))
}
