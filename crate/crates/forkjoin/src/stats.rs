//! Statistical primitives: empirical-distribution distances, slope fits,
//! and the standard normal CDF and quantile used throughout.
//!
//! The empirical CDF convention is right-continuous, `F̂(x) = #{i : x_i <=
//! x}/n`, and the Kolmogorov-Smirnov statistic evaluates both one-sided
//! gaps at the sample points. At significance 0.01 the one-sample null
//! threshold is approximately `1.63/sqrt(n)` and the two-sample threshold
//! `1.63 sqrt((n+m)/(nm))`.

use thiserror::Error;

use crate::asymptotics::LimitLaw;
use crate::sim::SampleSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("need at least two servers for the log N scaling, got {0}")]
    TooFewServers(usize),
    #[error("probability {0} outside (0, 1)")]
    OutOfRange(f64),
    #[error("slope fit needs at least two distinct abscissae")]
    DegenerateDesign,
    #[error("non-finite value in input")]
    NonFinite,
}

/// Maps raw maxima onto the limit scale: `(x - center_coeff log N) /
/// sqrt(log N)` per sample.
pub fn standardize(
    samples: &SampleSet,
    law: &LimitLaw,
    n_servers: usize,
) -> Result<Vec<f64>, StatsError> {
    if samples.values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if n_servers < 2 {
        return Err(StatsError::TooFewServers(n_servers));
    }
    let log_n = (n_servers as f64).ln();
    let center = law.center_coeff * log_n;
    let root = log_n.sqrt();
    Ok(samples.values.iter().map(|x| (x - center) / root).collect())
}

/// One-sample Kolmogorov-Smirnov distance `sup_x |F̂(x) - F(x)|`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let upper = (i as f64 + 1.0) / n - f;
        let lower = f - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    Ok(d)
}

/// Two-sample Kolmogorov-Smirnov distance between the empirical CDFs.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < sa.len() || j < sb.len() {
        let v = match (sa.get(i), sb.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => break,
        };
        while i < sa.len() && sa[i] <= v {
            i += 1;
        }
        while j < sb.len() && sb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Ordinary least squares for `y = slope x + intercept`; returns
/// `(slope, intercept, r_squared)`. A perfect fit of constant `y` reports
/// `r_squared = 1`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<(f64, f64, f64), StatsError> {
    if points.len() < 2 {
        return Err(StatsError::DegenerateDesign);
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx == 0.0 {
        return Err(StatsError::DegenerateDesign);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let syy: f64 = points.iter().map(|(_, y)| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok((slope, intercept, r2))
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() * FRAC_1_SQRT_2PI
}

/// `erf` on `[0, ~2.5]` via the single-signed series
/// `erf(z) = (2/sqrt(pi)) z e^{-z^2} sum_n (2 z^2)^n / (1*3*...*(2n+1))`.
fn erf_series(z: f64) -> f64 {
    let z2 = 2.0 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= z2 / (2.0 * k + 1.0);
        sum += term;
        k += 1.0;
        if k > 300.0 {
            break;
        }
    }
    2.0 * FRAC_1_SQRT_2PI * std::f64::consts::SQRT_2 * z * (-z * z).exp() * sum
}

/// `erfc` for `z >= 2` via the Legendre continued fraction
/// `erfc(z) = e^{-z^2}/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))`
/// evaluated with the modified Lentz algorithm.
fn erfc_cf(z: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = z.max(tiny);
    let mut c = f;
    let mut d = 0.0;
    let mut n = 0.5;
    for _ in 0..200 {
        d = z + n * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + n / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
        n += 0.5;
    }
    (-z * z).exp() * FRAC_1_SQRT_2PI * std::f64::consts::SQRT_2 / f
}

fn erfc_nonneg(z: f64) -> f64 {
    if z < 2.0 {
        1.0 - erf_series(z)
    } else if z > 27.0 {
        0.0
    } else {
        erfc_cf(z)
    }
}

/// Standard normal CDF, absolute error below `1e-12`.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    if x < 0.0 {
        0.5 * erfc_nonneg(-z)
    } else {
        1.0 - 0.5 * erfc_nonneg(z)
    }
}

/// Inverse standard normal CDF by Newton iteration on [`normal_cdf`],
/// seeded with a rational tail approximation.
pub fn normal_quantile(p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::OutOfRange(p));
    }
    let tail = p.min(1.0 - p);
    let t = (-2.0 * tail.ln()).sqrt();
    let mut x = t - (2.30753 + 0.27061 * t) / (1.0 + 0.99229 * t + 0.04481 * t * t);
    if p < 0.5 {
        x = -x;
    }
    for _ in 0..60 {
        let err = normal_cdf(x) - p;
        let dens = normal_pdf(x);
        if dens <= f64::MIN_POSITIVE {
            break;
        }
        let step = err / dens;
        x -= step;
        if step.abs() <= 1e-14 * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}
