//! Distribution-level checks of the samplers against classical queueing
//! results and against each other. Sizes here are moderate; the acceptance
//! suite re-runs the headline comparisons at full scale.

use forkjoin::{
    fit_slope, run_batch, two_sample_ks, DistributionSpec, ForkJoinConfig, Horizon, Statistic,
};

fn exp_exp_config(n: usize) -> ForkJoinConfig {
    ForkJoinConfig::homogeneous(
        DistributionSpec::Exponential { rate: 1.0 },
        DistributionSpec::Exponential { rate: 2.0 },
        n,
    )
}

fn log_tail_points(samples: &mut [f64], grid: &[f64]) -> Vec<(f64, f64)> {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    grid.iter()
        .map(|x| {
            let above = samples.len() - samples.partition_point(|v| v <= x);
            (*x, (above as f64 / n).ln())
        })
        .collect()
}

#[test]
fn single_queue_wait_tail_matches_mm1_closed_form() {
    // M/M/1 with lambda = 1, mu = 2: P(W > x) = 0.5 exp(-x).
    let set = run_batch(
        &exp_exp_config(1),
        Statistic::MaxWaitSup,
        Horizon::new(5000),
        30_000,
        20260815,
        0,
    )
    .unwrap();
    let mut values = set.values;
    let grid: Vec<f64> = (1..=8).map(|k| k as f64 * 0.5).collect();
    let points = log_tail_points(&mut values, &grid);
    let (slope, intercept, r2) = fit_slope(&points).unwrap();
    assert!((slope + 1.0).abs() < 0.07, "tail slope {slope}");
    assert!((intercept - 0.5f64.ln()).abs() < 0.15, "intercept {intercept}");
    assert!(r2 > 0.995, "r2 {r2}");
}

#[test]
fn sup_and_lindley_samplers_share_a_law() {
    let config = exp_exp_config(20);
    let horizon = Horizon::new(500);
    let r = 20_000;
    let sup = run_batch(&config, Statistic::MaxWaitSup, horizon, r, 101, 0).unwrap();
    let lindley = run_batch(&config, Statistic::MaxWaitLindley, horizon, r, 202, 0).unwrap();
    let d = two_sample_ks(&sup.values, &lindley.values).unwrap();
    let threshold = 1.63 * (2.0 / r as f64).sqrt();
    assert!(d < threshold, "KS {d} vs threshold {threshold}");
}

#[test]
fn direct_and_little_queue_samplers_share_a_law() {
    let config = exp_exp_config(20);
    let horizon = Horizon::new(500);
    let r = 20_000;
    let direct = run_batch(&config, Statistic::MaxQueueDirect, horizon, r, 303, 0).unwrap();
    let little = run_batch(&config, Statistic::MaxQueueLittle, horizon, r, 404, 0).unwrap();
    assert!(direct.censored.iter().all(|c| !c));
    let d = two_sample_ks(&direct.values, &little.values).unwrap();
    let threshold = 1.63 * (2.0 / r as f64).sqrt();
    assert!(d < threshold, "KS {d} vs threshold {threshold}");

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    let (md, ml) = (mean(&direct.values), mean(&little.values));
    let se = (var(&direct.values, md) / r as f64 + var(&little.values, ml) / r as f64).sqrt();
    assert!((md - ml).abs() < 4.0 * se, "means {md} vs {ml} (se {se})");
}

#[test]
fn doubling_the_horizon_leaves_the_mean_wait_in_place() {
    let config = exp_exp_config(100);
    let r = 2000;
    let short = run_batch(&config, Statistic::MaxWaitSup, Horizon::new(1000), r, 7, 0).unwrap();
    let long = run_batch(&config, Statistic::MaxWaitSup, Horizon::new(2000), r, 7, 0).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ms, ml) = (mean(&short.values), mean(&long.values));
    assert!((ms - ml).abs() / ml < 0.005, "means {ms} vs {ml}");
}

#[test]
fn disjoint_master_seeds_draw_from_the_same_law() {
    let config = exp_exp_config(10);
    let horizon = Horizon::new(300);
    let r = 10_000;
    let a = run_batch(&config, Statistic::MaxWaitSup, horizon, r, 1111, 0).unwrap();
    let b = run_batch(&config, Statistic::MaxWaitSup, horizon, r, 2222, 0).unwrap();
    let d = two_sample_ks(&a.values, &b.values).unwrap();
    let threshold = 1.63 * (2.0 / r as f64).sqrt();
    assert!(d < threshold, "KS {d} vs threshold {threshold}");
}
