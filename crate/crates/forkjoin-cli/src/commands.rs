//! The `gamma`, `simulate`, `compare`, and `hetero` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use forkjoin::asymptotics::AsymptoticsError;
use forkjoin::lundberg::LundbergError;
use forkjoin::sim::SimError;
use forkjoin::stats::StatsError;
use forkjoin::{
    default_horizon, hetero_select, ks_distance, lower_bound_law, predicted_quantile,
    queue_limit_law, run_batch, solve_gamma, standardize, upper_bound_law, ClassSpec,
    ForkJoinConfig, Horizon, LimitLaw, SampleManifest, SampleSet, ServerClass, Statistic,
};
use serde_json::{json, Value};

use crate::config::{
    apportion, interarrival_sigma, CompareConfig, Context, GammaConfig, HeteroConfig, LawSelector,
    SimulateConfig,
};
use crate::CliError;

/// Band around the centering term inside which a sample agrees with a
/// zero-variance law.
const POINT_MASS_TOLERANCE: f64 = 1e-9;

const DEFAULT_COMPARE_THRESHOLD: f64 = 0.10;
const DEFAULT_HETERO_THRESHOLD: f64 = 0.12;
const DEFAULT_MAX_CENSORED: f64 = 0.01;

pub fn gamma(ctx: &Context) -> Result<(), CliError> {
    let cfg: GammaConfig = ctx.load()?;
    match solve_gamma(&cfg.service, cfg.lambda) {
        Ok(solution) => {
            let report = solution.to_json();
            println!("{report}");
            write_report(ctx.out_dir_opt(None), "gamma.json", &report)?;
            Ok(())
        }
        Err(e) => {
            let Some(name) = domain_reason(&e) else {
                return Err(CliError::Config(e.to_string()));
            };
            let report = json!({ "reason": name, "message": e.to_string() }).to_string();
            println!("{report}");
            write_report(ctx.out_dir_opt(None), "gamma.json", &report)?;
            Err(CliError::Domain(format!("{name}: {e}")))
        }
    }
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg: SimulateConfig = ctx.load()?;
    let system = ForkJoinConfig {
        arrival: cfg.arrival,
        servers: cfg.servers,
    };
    let set = run_simulation(
        &system,
        cfg.statistic,
        cfg.horizon,
        cfg.replications,
        ctx.seed(cfg.master_seed),
        ctx.threads,
    )?;
    let dir = ctx.out_dir(cfg.out.as_deref());
    let label = cfg
        .label
        .unwrap_or_else(|| set.statistic.name().to_string());
    let (csv_path, manifest_path) = write_sample_set(&set, &dir, &label)?;
    let censored = set.censored.iter().filter(|c| **c).count();
    println!(
        "{}",
        json!({
            "statistic": set.statistic.name(),
            "replications": set.values.len(),
            "censored": censored,
            "csv": csv_path,
            "manifest": manifest_path,
        })
    );
    let allowed = cfg.max_censored.unwrap_or(DEFAULT_MAX_CENSORED);
    let hitting = matches!(set.statistic, Statistic::HittingTime { .. });
    if !hitting && set.censored_fraction() > allowed {
        return Err(CliError::Domain(format!(
            "{censored} of {} replications were cut off by the horizon \
             (allowed fraction {allowed}); raise `horizon`",
            set.values.len(),
        )));
    }
    Ok(())
}

pub fn compare(ctx: &Context) -> Result<(), CliError> {
    let cfg: CompareConfig = ctx.load()?;
    let system = ForkJoinConfig {
        arrival: cfg.arrival.clone(),
        servers: cfg.servers.clone(),
    };
    system
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let lambda = system
        .arrival_rate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let sigma_a = interarrival_sigma(&cfg.arrival)?;
    let (selected, law) = select_law(&system, lambda, sigma_a, cfg.law, cfg.epsilon)?;

    let set = match &cfg.samples {
        Some(path) => load_samples(path, &system)?,
        None => {
            let statistic = cfg.statistic.ok_or_else(|| {
                CliError::Config(
                    "either `samples` or `statistic` with `replications` is required".into(),
                )
            })?;
            let replications = cfg.replications.ok_or_else(|| {
                CliError::Config("`replications` is required when generating samples".into())
            })?;
            let seed = ctx.require_seed(cfg.master_seed)?;
            run_simulation(
                &system,
                statistic,
                cfg.horizon,
                replications,
                seed,
                ctx.threads,
            )?
        }
    };

    let n_servers = system.n_servers();
    let censored = set.censored.iter().filter(|c| **c).count();
    let clean = uncensored(&set)?;
    let z = standardize(&clean, &law, n_servers).map_err(stats_err)?;

    let dir = ctx.out_dir(cfg.out.as_deref());
    let label = cfg
        .label
        .clone()
        .unwrap_or_else(|| format!("{}_{}", set.statistic.name(), cfg.law.name()));
    let mut raw = clean.values.clone();
    raw.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let qq_path = write_qq(&dir, &label, &raw, &law, n_servers)?;

    let mut verdict = json!({
        "statistic": set.statistic.name(),
        "law": cfg.law.name(),
        "limit_law": serde_json::to_value(&law).expect("law serializes"),
        "selected_class": selected,
        "n_servers": n_servers,
        "replications": clean.values.len(),
        "censored_excluded": censored,
        "qq_csv": qq_path,
    });
    let pass;
    if law.scale == 0.0 {
        let max_abs = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        pass = max_abs <= POINT_MASS_TOLERANCE;
        merge(
            &mut verdict,
            json!({
                "degenerate": true,
                "max_abs_z": max_abs,
                "tolerance": POINT_MASS_TOLERANCE,
                "pass": pass,
            }),
        );
    } else {
        let ks = ks_distance(&z, |x| law.cdf(x)).map_err(stats_err)?;
        let threshold = cfg.threshold.unwrap_or(DEFAULT_COMPARE_THRESHOLD);
        pass = ks <= threshold;
        merge(
            &mut verdict,
            json!({ "ks": ks, "threshold": threshold, "pass": pass }),
        );
    }
    let report = verdict.to_string();
    println!("{report}");
    write_report(Some(dir), &format!("{label}.compare.json"), &report)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Domain(
            "samples do not match the selected law; see the verdict".into(),
        ))
    }
}

pub fn hetero(ctx: &Context) -> Result<(), CliError> {
    let cfg: HeteroConfig = ctx.load()?;
    let lambda = resolve_lambda(&cfg)?;
    let sigma_a = match (cfg.sigma_a, &cfg.arrival) {
        (Some(s), _) if s.is_finite() && s >= 0.0 => s,
        (Some(s), _) => {
            return Err(CliError::Config(format!(
                "`sigma_a` must be a nonnegative number, got {s}"
            )))
        }
        (None, Some(spec)) => interarrival_sigma(spec)?,
        (None, None) => {
            return Err(CliError::Config(
                "either `arrival` or `sigma_a` is required".into(),
            ))
        }
    };

    let mut classes = Vec::with_capacity(cfg.classes.len());
    for class in &cfg.classes {
        match ClassSpec::solve(class.service.clone(), class.alpha, lambda) {
            Ok(spec) => classes.push(spec),
            Err(e) => {
                let Some(name) = domain_reason(&e) else {
                    return Err(CliError::Config(e.to_string()));
                };
                let report = json!({
                    "reason": name,
                    "message": e.to_string(),
                    "service": class.service,
                })
                .to_string();
                println!("{report}");
                return Err(CliError::Domain(format!("{name}: {e}")));
            }
        }
    }
    let (selected, law) = match hetero_select(&classes, sigma_a) {
        Ok(pair) => pair,
        Err(e @ AsymptoticsError::AmbiguousMinimum { .. }) => {
            let report = json!({ "reason": "AmbiguousMinimum", "message": e.to_string() })
                .to_string();
            println!("{report}");
            return Err(CliError::Domain(format!("AmbiguousMinimum: {e}")));
        }
        Err(e) => return Err(asym_err(e)),
    };

    let mut report = json!({
        "lambda": lambda,
        "sigma_a": sigma_a,
        "selected": selected,
        "classes": classes
            .iter()
            .map(|c| json!({
                "service": c.service,
                "alpha": c.alpha,
                "gamma": c.solution.gamma,
                "c_hat": c.solution.c_hat,
            }))
            .collect::<Vec<_>>(),
        "law": serde_json::to_value(&law).expect("law serializes"),
    });

    let mut failure = None;
    if let (Some(n), Some(replications)) = (cfg.n_servers, cfg.replications) {
        let arrival = cfg.arrival.clone().ok_or_else(|| {
            CliError::Config("`arrival` is required for the simulation check".into())
        })?;
        let alphas: Vec<f64> = classes.iter().map(|c| c.alpha).collect();
        let counts = apportion(&alphas, n);
        if counts.contains(&0) {
            return Err(CliError::Config(format!(
                "n_servers = {n} is too small: a class rounds to zero servers"
            )));
        }
        let servers: Vec<ServerClass> = classes
            .iter()
            .zip(&counts)
            .map(|(c, &count)| ServerClass {
                service: c.service.clone(),
                count,
            })
            .collect();
        let system = ForkJoinConfig { arrival, servers };
        let seed = ctx.require_seed(cfg.master_seed)?;
        let set = run_simulation(
            &system,
            Statistic::MaxWaitSup,
            cfg.horizon,
            replications,
            seed,
            ctx.threads,
        )?;
        let z = standardize(&set, &law, system.n_servers()).map_err(stats_err)?;
        let ks = ks_distance(&z, |x| law.cdf(x)).map_err(stats_err)?;
        let threshold = cfg.threshold.unwrap_or(DEFAULT_HETERO_THRESHOLD);
        let pass = ks <= threshold;
        report["compare"] = json!({
            "statistic": set.statistic.name(),
            "counts": counts,
            "replications": set.values.len(),
            "master_seed": seed,
            "horizon": set.horizon,
            "ks": ks,
            "threshold": threshold,
            "pass": pass,
        });
        if let Some(dir) = ctx.out_dir_opt(cfg.out.as_deref()) {
            let label = cfg.label.clone().unwrap_or_else(|| "hetero".to_string());
            write_sample_set(&set, &dir, &label)?;
        }
        if !pass {
            failure = Some(format!(
                "KS {ks:.4} above threshold {threshold}; the winning-class law does not fit"
            ));
        }
    }

    let text = report.to_string();
    println!("{text}");
    write_report(ctx.out_dir_opt(cfg.out.as_deref()), "hetero.json", &text)?;
    match failure {
        None => Ok(()),
        Some(msg) => Err(CliError::Domain(msg)),
    }
}

fn resolve_lambda(cfg: &HeteroConfig) -> Result<f64, CliError> {
    match (&cfg.arrival, cfg.lambda) {
        (Some(spec), given) => {
            let (mean, _) =
                forkjoin::moments(spec).map_err(|e| CliError::Config(e.to_string()))?;
            if mean <= 0.0 {
                return Err(CliError::Config(
                    "arrival distribution must have positive mean".into(),
                ));
            }
            let derived = 1.0 / mean;
            if let Some(l) = given {
                if (l - derived).abs() > 1e-9 * derived.max(1.0) {
                    return Err(CliError::Config(format!(
                        "`lambda` = {l} disagrees with the arrival spec's rate {derived}"
                    )));
                }
            }
            Ok(derived)
        }
        (None, Some(l)) => Ok(l),
        (None, None) => Err(CliError::Config(
            "either `arrival` or `lambda` is required".into(),
        )),
    }
}

/// Per-class roots, winner selection, and the law the selector asks for.
fn select_law(
    system: &ForkJoinConfig,
    lambda: f64,
    sigma_a: f64,
    selector: LawSelector,
    epsilon: Option<f64>,
) -> Result<(usize, LimitLaw), CliError> {
    let total = system.n_servers() as f64;
    let mut classes = Vec::with_capacity(system.servers.len());
    for class in &system.servers {
        let alpha = class.count as f64 / total;
        classes.push(
            ClassSpec::solve(class.service.clone(), alpha, lambda).map_err(lundberg_err)?,
        );
    }
    let (selected, wait_law) = hetero_select(&classes, sigma_a).map_err(asym_err)?;
    let solution = &classes[selected].solution;
    let eps = epsilon.unwrap_or(0.1 * solution.c_hat);
    let law = match selector {
        LawSelector::Wait => wait_law,
        LawSelector::Queue => queue_limit_law(solution, lambda, sigma_a).map_err(asym_err)?,
        LawSelector::LowerBound => {
            lower_bound_law(solution, sigma_a, eps).map_err(asym_err)?
        }
        LawSelector::UpperBound => {
            upper_bound_law(solution, sigma_a, eps).map_err(asym_err)?
        }
    };
    Ok((selected, law))
}

fn run_simulation(
    system: &ForkJoinConfig,
    statistic: Statistic,
    horizon: Option<usize>,
    replications: usize,
    seed: u64,
    threads: usize,
) -> Result<SampleSet, CliError> {
    let horizon = match horizon {
        Some(steps) => Horizon::new(steps),
        None => default_horizon(system).map_err(sim_err)?,
    };
    run_batch(system, statistic, horizon, replications, seed, threads).map_err(sim_err)
}

fn load_samples(path: &Path, system: &ForkJoinConfig) -> Result<SampleSet, CliError> {
    let manifest_path = path.with_extension("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", manifest_path.display()))
    })?;
    let manifest: SampleManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad manifest {}: {e}", manifest_path.display())))?;
    let (values, censored) =
        SampleSet::read_csv(path).map_err(|e| CliError::Config(e.to_string()))?;
    let set = SampleSet::assemble(&manifest, values, censored)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let digest = system.digest();
    if set.config_digest != digest {
        return Err(CliError::Config(format!(
            "samples were generated from a different system: digest {} vs {digest}",
            set.config_digest
        )));
    }
    Ok(set)
}

/// Drops horizon-censored rows so laws are compared on observed values
/// only; errors when nothing remains.
fn uncensored(set: &SampleSet) -> Result<SampleSet, CliError> {
    if !set.censored.iter().any(|&c| c) {
        return Ok(set.clone());
    }
    let values = set.uncensored_values();
    if values.is_empty() {
        return Err(CliError::Domain(
            "every replication was censored by the horizon".into(),
        ));
    }
    let mut clean = set.clone();
    clean.censored = vec![false; values.len()];
    clean.values = values;
    Ok(clean)
}

fn write_qq(
    dir: &Path,
    label: &str,
    sorted: &[f64],
    law: &LimitLaw,
    n_servers: usize,
) -> Result<PathBuf, CliError> {
    let mut body = String::from("p,empirical_quantile,predicted_quantile\n");
    for i in 1..100 {
        let p = i as f64 / 100.0;
        let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        let predicted = predicted_quantile(law, n_servers, p)
            .map_err(asym_err)?
            .value;
        body.push_str(&format!("{p},{},{predicted}\n", sorted[idx]));
    }
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(format!("{label}.qq.csv"));
    fs::write(&path, body)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_sample_set(
    set: &SampleSet,
    dir: &Path,
    label: &str,
) -> Result<(PathBuf, PathBuf), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let csv_path = dir.join(format!("{label}.csv"));
    set.write_csv(&csv_path)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let manifest_path = dir.join(format!("{label}.manifest.json"));
    let body =
        serde_json::to_string_pretty(&set.manifest()).expect("manifest serializes");
    fs::write(&manifest_path, body).map_err(|e| {
        CliError::Config(format!("cannot write {}: {e}", manifest_path.display()))
    })?;
    Ok((csv_path, manifest_path))
}

pub fn write_report(dir: Option<PathBuf>, name: &str, text: &str) -> Result<(), CliError> {
    let Some(dir) = dir else { return Ok(()) };
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let mut owned = text.to_string();
    owned.push('\n');
    fs::write(&path, owned)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

/// Error states the experiment can legitimately land in, as opposed to a
/// config mistake; these exit 2 with the variant name in the report.
pub fn domain_reason(e: &LundbergError) -> Option<&'static str> {
    match e {
        LundbergError::NoRoot => Some("NoRoot"),
        LundbergError::Unstable { .. } => Some("Unstable"),
        LundbergError::BoundaryRoot { .. } => Some("BoundaryRoot"),
        _ => None,
    }
}

pub fn lundberg_err(e: LundbergError) -> CliError {
    match domain_reason(&e) {
        Some(name) => CliError::Domain(format!("{name}: {e}")),
        None => CliError::Config(e.to_string()),
    }
}

fn asym_err(e: AsymptoticsError) -> CliError {
    match e {
        AsymptoticsError::AmbiguousMinimum { .. } => {
            CliError::Domain(format!("AmbiguousMinimum: {e}"))
        }
        AsymptoticsError::Lundberg(inner) => lundberg_err(inner),
        _ => CliError::Config(e.to_string()),
    }
}

pub fn sim_err(e: SimError) -> CliError {
    match e {
        SimError::ReplicationFailed { .. } | SimError::HorizonTooShort { .. } => {
            CliError::Domain(e.to_string())
        }
        SimError::Lundberg(inner) => lundberg_err(inner),
        _ => CliError::Config(e.to_string()),
    }
}

fn stats_err(e: StatsError) -> CliError {
    CliError::Domain(e.to_string())
}
