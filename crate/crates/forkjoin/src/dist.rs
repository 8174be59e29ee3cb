//! Service and interarrival distributions.
//!
//! A [`DistributionSpec`] names a nonnegative distribution from a small set
//! of families, each with closed-form moments and log-moment-generating
//! function K(θ) = log E[exp(θX)]. K is what the Lundberg root solver
//! consumes, so families with a bounded MGF domain report their boundary
//! via [`theta_sup`] and [`log_mgf`] returns `f64::INFINITY` at and beyond
//! it rather than an error; root finders bracket against the marker.
//!
//! The JSON encoding is `{"family": "exponential", "rate": 2.0}` and so on,
//! one key set per family. Unknown families and unknown or missing keys are
//! rejected, not ignored.

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::rng::RngStream;
use rand::Rng;
use rand_distr::{Exp1, Gamma as GammaDist};

/// Parameter validation failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

fn bad(field: &'static str, reason: impl Into<String>) -> DistError {
    DistError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}

/// A nonnegative service or interarrival distribution.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "Value")]
pub enum DistributionSpec {
    /// Point mass at `value`.
    Deterministic { value: f64 },
    /// Exponential with the given rate; mean `1/rate`.
    Exponential { rate: f64 },
    /// Gamma with shape `shape` and rate `rate`; mean `shape/rate`.
    Gamma { shape: f64, rate: f64 },
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Mixture of exponentials: component `k` has weight `weights[k]` and
    /// rate `rates[k]`.
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    /// Uniform resampling of a fixed point set.
    Empirical { points: Vec<f64> },
}

impl DistributionSpec {
    pub fn from_json(s: &str) -> Result<Self, DistError> {
        let value: Value =
            serde_json::from_str(s).map_err(|e| bad("json", e.to_string()))?;
        Self::try_from(value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("distribution serializes")
    }
}

/// Checks parameter ranges: positive rates and shapes, `0 <= lo < hi`,
/// positive weights summing to one, nonempty and nonnegative point sets.
pub fn validate(spec: &DistributionSpec) -> Result<(), DistError> {
    use DistributionSpec::*;
    let finite = |x: f64| x.is_finite();
    match spec {
        Deterministic { value } => {
            if !finite(*value) || *value <= 0.0 {
                return Err(bad("value", format!("must be positive, got {value}")));
            }
        }
        Exponential { rate } => {
            if !finite(*rate) || *rate <= 0.0 {
                return Err(bad("rate", format!("must be positive, got {rate}")));
            }
        }
        Gamma { shape, rate } => {
            if !finite(*shape) || *shape <= 0.0 {
                return Err(bad("shape", format!("must be positive, got {shape}")));
            }
            if !finite(*rate) || *rate <= 0.0 {
                return Err(bad("rate", format!("must be positive, got {rate}")));
            }
        }
        Uniform { lo, hi } => {
            if !finite(*lo) || *lo < 0.0 {
                return Err(bad("lo", format!("must be nonnegative, got {lo}")));
            }
            if !finite(*hi) || *hi <= *lo {
                return Err(bad("hi", format!("must exceed lo = {lo}, got {hi}")));
            }
        }
        HyperExponential { weights, rates } => {
            if weights.is_empty() || weights.len() != rates.len() {
                return Err(bad(
                    "weights",
                    "weights and rates must be nonempty and of equal length",
                ));
            }
            if weights.iter().any(|w| !finite(*w) || *w <= 0.0) {
                return Err(bad("weights", "every weight must be positive"));
            }
            let sum: f64 = weights.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(bad("weights", format!("must sum to 1, got {sum}")));
            }
            if rates.iter().any(|r| !finite(*r) || *r <= 0.0) {
                return Err(bad("rates", "every rate must be positive"));
            }
        }
        Empirical { points } => {
            if points.is_empty() {
                return Err(bad("points", "must be nonempty"));
            }
            if points.iter().any(|x| !finite(*x) || *x < 0.0) {
                return Err(bad("points", "every point must be finite and >= 0"));
            }
        }
    }
    Ok(())
}

/// Mean and variance. The empirical variance uses denominator `n`.
pub fn moments(spec: &DistributionSpec) -> Result<(f64, f64), DistError> {
    use DistributionSpec::*;
    validate(spec)?;
    Ok(match spec {
        Deterministic { value } => (*value, 0.0),
        Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
        Gamma { shape, rate } => (shape / rate, shape / (rate * rate)),
        Uniform { lo, hi } => {
            let w = hi - lo;
            ((lo + hi) / 2.0, w * w / 12.0)
        }
        HyperExponential { weights, rates } => {
            let mean: f64 = weights.iter().zip(rates).map(|(w, r)| w / r).sum();
            let second: f64 = weights
                .iter()
                .zip(rates)
                .map(|(w, r)| 2.0 * w / (r * r))
                .sum();
            (mean, second - mean * mean)
        }
        Empirical { points } => {
            let n = points.len() as f64;
            let mean = points.iter().sum::<f64>() / n;
            let var = points.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            (mean, var)
        }
    })
}

/// Supremum of the MGF domain: `log E[exp(θX)]` is finite for `θ <
/// theta_sup` and infinite for `θ >= theta_sup` (for the families here the
/// boundary itself always diverges when finite).
pub fn theta_sup(spec: &DistributionSpec) -> f64 {
    use DistributionSpec::*;
    match spec {
        Deterministic { .. } | Uniform { .. } | Empirical { .. } => f64::INFINITY,
        Exponential { rate } => *rate,
        Gamma { rate, .. } => *rate,
        HyperExponential { rates, .. } => rates.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// Essential supremum of the distribution's support.
pub fn support_sup(spec: &DistributionSpec) -> f64 {
    use DistributionSpec::*;
    match spec {
        Deterministic { value } => *value,
        Uniform { hi, .. } => *hi,
        Empirical { points } => points.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Exponential { .. } | Gamma { .. } | HyperExponential { .. } => f64::INFINITY,
    }
}

/// `log((e^u - 1)/u)`, the centered uniform log-MGF kernel, stable at 0.
fn log_expm1_over(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else if u.abs() < 1e-5 {
        // log(1 + u/2 + u^2/6 + ...) expanded once more than needed.
        let c = u / 2.0 + u * u / 6.0;
        c.ln_1p()
    } else if u > 700.0 {
        // e^u overflows; log((e^u-1)/u) = u - log u up to e^{-u} corrections.
        u - u.ln()
    } else {
        (u.exp_m1() / u).ln()
    }
}

/// `K(θ) = log E[exp(θX)]`, with `f64::INFINITY` marking θ outside the
/// domain. `K(0) = 0` exactly for every family.
pub fn log_mgf(spec: &DistributionSpec, theta: f64) -> f64 {
    use DistributionSpec::*;
    match spec {
        Deterministic { value } => theta * value,
        Exponential { rate } => {
            if theta >= *rate {
                f64::INFINITY
            } else {
                -(1.0 - theta / rate).ln()
            }
        }
        Gamma { shape, rate } => {
            if theta >= *rate {
                f64::INFINITY
            } else {
                -shape * (1.0 - theta / rate).ln()
            }
        }
        Uniform { lo, hi } => theta * lo + log_expm1_over(theta * (hi - lo)),
        HyperExponential { weights, rates } => {
            let sup = theta_sup(spec);
            if theta >= sup {
                return f64::INFINITY;
            }
            let m: f64 = weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w / (1.0 - theta / r))
                .sum();
            m.ln()
        }
        Empirical { points } => {
            // log-mean-exp with max subtraction; exact 0 at θ = 0.
            if theta == 0.0 {
                return 0.0;
            }
            let m = points
                .iter()
                .map(|x| theta * x)
                .fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = points.iter().map(|x| (theta * x - m).exp()).sum();
            m + (sum / points.len() as f64).ln()
        }
    }
}

/// First and second derivatives of `K` at an interior `theta`.
///
/// For `Empirical` these are the mean and variance of the point set under
/// the exponentially tilted weights, computed with the same max-subtraction
/// stabilization as [`log_mgf`].
pub fn log_mgf_derivatives(spec: &DistributionSpec, theta: f64) -> (f64, f64) {
    use DistributionSpec::*;
    match spec {
        Deterministic { value } => (*value, 0.0),
        Exponential { rate } => {
            let d = rate - theta;
            (1.0 / d, 1.0 / (d * d))
        }
        Gamma { shape, rate } => {
            let d = rate - theta;
            (shape / d, shape / (d * d))
        }
        Uniform { lo, hi } => {
            let c = hi - lo;
            let u = theta * c;
            let (g1, g2) = if u.abs() < 1e-3 {
                // g(u) = log((e^u-1)/u): g' = 1/2 + u/12 - u^3/720,
                // g'' = 1/12 - u^2/240 + u^4/6048.
                (
                    0.5 + u / 12.0 - u * u * u / 720.0,
                    1.0 / 12.0 - u * u / 240.0 + u.powi(4) / 6048.0,
                )
            } else {
                let em = u.exp_m1();
                let g1 = (em + 1.0) / em - 1.0 / u;
                let g2 = 1.0 / (u * u) - (em + 1.0) / (em * em);
                (g1, g2)
            };
            (lo + c * g1, c * c * g2)
        }
        HyperExponential { weights, rates } => {
            let m0: f64 = weights.iter().zip(rates).map(|(w, r)| w * r / (r - theta)).sum();
            let m1: f64 = weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r / ((r - theta) * (r - theta)))
                .sum();
            let m2: f64 = weights
                .iter()
                .zip(rates)
                .map(|(w, r)| 2.0 * w * r / ((r - theta) * (r - theta) * (r - theta)))
                .sum();
            let k1 = m1 / m0;
            (k1, m2 / m0 - k1 * k1)
        }
        Empirical { points } => {
            let m = points
                .iter()
                .map(|x| theta * x)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            let mut zx = 0.0;
            let mut zxx = 0.0;
            for &x in points {
                let w = (theta * x - m).exp();
                z += w;
                zx += w * x;
                zxx += w * x * x;
            }
            let k1 = zx / z;
            (k1, zxx / z - k1 * k1)
        }
    }
}

/// A sampler compiled from a spec, reusable across many draws.
pub struct Sampler<'a> {
    kind: SamplerKind<'a>,
}

enum SamplerKind<'a> {
    Deterministic(f64),
    Exponential { inv_rate: f64 },
    Gamma(GammaDist<f64>),
    Uniform { lo: f64, width: f64 },
    HyperExponential { cum_weights: Vec<f64>, inv_rates: Vec<f64> },
    Empirical { points: &'a [f64] },
}

/// Compiles `spec` into a [`Sampler`]. `spec` must have passed [`validate`].
pub fn sampler(spec: &DistributionSpec) -> Sampler<'_> {
    use DistributionSpec::*;
    let kind = match spec {
        Deterministic { value } => SamplerKind::Deterministic(*value),
        Exponential { rate } => SamplerKind::Exponential { inv_rate: 1.0 / rate },
        Gamma { shape, rate } => {
            SamplerKind::Gamma(GammaDist::new(*shape, 1.0 / rate).expect("validated"))
        }
        Uniform { lo, hi } => SamplerKind::Uniform { lo: *lo, width: hi - lo },
        HyperExponential { weights, rates } => {
            let mut acc = 0.0;
            let cum_weights = weights
                .iter()
                .map(|w| {
                    acc += w;
                    acc
                })
                .collect();
            SamplerKind::HyperExponential {
                cum_weights,
                inv_rates: rates.iter().map(|r| 1.0 / r).collect(),
            }
        }
        Empirical { points } => SamplerKind::Empirical { points },
    };
    Sampler { kind }
}

impl Sampler<'_> {
    /// One draw from `stream`. Identical `(spec, stream state)` pairs yield
    /// identical draws.
    #[inline]
    pub fn draw(&self, stream: &mut RngStream) -> f64 {
        match &self.kind {
            SamplerKind::Deterministic(v) => *v,
            SamplerKind::Exponential { inv_rate } => {
                let e: f64 = stream.sample(Exp1);
                e * inv_rate
            }
            SamplerKind::Gamma(g) => stream.sample(*g),
            SamplerKind::Uniform { lo, width } => lo + width * stream.next_f64(),
            SamplerKind::HyperExponential { cum_weights, inv_rates } => {
                let u = stream.next_f64();
                let mut k = cum_weights.len() - 1;
                for (i, c) in cum_weights.iter().enumerate() {
                    if u < *c {
                        k = i;
                        break;
                    }
                }
                let e: f64 = stream.sample(Exp1);
                e * inv_rates[k]
            }
            SamplerKind::Empirical { points } => {
                let i = stream.gen_range(0..points.len());
                points[i]
            }
        }
    }
}

/// One draw from `spec`. Prefer [`sampler`] plus [`Sampler::draw`] in loops.
pub fn sample(spec: &DistributionSpec, stream: &mut RngStream) -> f64 {
    sampler(spec).draw(stream)
}

impl Serialize for DistributionSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use DistributionSpec::*;
        let mut map = serializer.serialize_map(None)?;
        match self {
            Deterministic { value } => {
                map.serialize_entry("family", "deterministic")?;
                map.serialize_entry("value", value)?;
            }
            Exponential { rate } => {
                map.serialize_entry("family", "exponential")?;
                map.serialize_entry("rate", rate)?;
            }
            Gamma { shape, rate } => {
                map.serialize_entry("family", "gamma")?;
                map.serialize_entry("shape", shape)?;
                map.serialize_entry("rate", rate)?;
            }
            Uniform { lo, hi } => {
                map.serialize_entry("family", "uniform")?;
                map.serialize_entry("lo", lo)?;
                map.serialize_entry("hi", hi)?;
            }
            HyperExponential { weights, rates } => {
                map.serialize_entry("family", "hyperexponential")?;
                map.serialize_entry("weights", weights)?;
                map.serialize_entry("rates", rates)?;
            }
            Empirical { points } => {
                map.serialize_entry("family", "empirical")?;
                map.serialize_entry("points", points)?;
            }
        }
        map.end()
    }
}

impl TryFrom<Value> for DistributionSpec {
    type Error = DistError;

    fn try_from(value: Value) -> Result<Self, DistError> {
        let obj = value
            .as_object()
            .ok_or_else(|| bad("json", "expected an object"))?;
        let family = obj
            .get("family")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("family", "missing or not a string"))?;

        let num = |key: &'static str| -> Result<f64, DistError> {
            obj.get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| bad(key, "missing or not a number"))
        };
        let nums = |key: &'static str| -> Result<Vec<f64>, DistError> {
            obj.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| bad(key, "missing or not an array"))?
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| bad(key, "non-numeric entry")))
                .collect()
        };
        let only = |keys: &[&str]| -> Result<(), DistError> {
            for k in obj.keys() {
                if k != "family" && !keys.contains(&k.as_str()) {
                    return Err(bad("json", format!("unknown key `{k}` for family `{family}`")));
                }
            }
            Ok(())
        };

        let spec = match family {
            "deterministic" => {
                only(&["value"])?;
                DistributionSpec::Deterministic { value: num("value")? }
            }
            "exponential" => {
                only(&["rate"])?;
                DistributionSpec::Exponential { rate: num("rate")? }
            }
            "gamma" => {
                only(&["shape", "rate"])?;
                DistributionSpec::Gamma { shape: num("shape")?, rate: num("rate")? }
            }
            "uniform" => {
                only(&["lo", "hi"])?;
                DistributionSpec::Uniform { lo: num("lo")?, hi: num("hi")? }
            }
            "hyperexponential" => {
                only(&["weights", "rates"])?;
                DistributionSpec::HyperExponential {
                    weights: nums("weights")?,
                    rates: nums("rates")?,
                }
            }
            "empirical" => {
                only(&["points"])?;
                DistributionSpec::Empirical { points: nums("points")? }
            }
            other => return Err(bad("family", format!("unknown family `{other}`"))),
        };
        validate(&spec)?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp2() -> DistributionSpec {
        DistributionSpec::Exponential { rate: 2.0 }
    }

    #[test]
    fn validate_accepts_standard_families() {
        assert!(validate(&exp2()).is_ok());
        assert!(validate(&DistributionSpec::Gamma { shape: 2.0, rate: 4.0 }).is_ok());
        assert!(validate(&DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }).is_ok());
        assert!(validate(&DistributionSpec::HyperExponential {
            weights: vec![0.3, 0.7],
            rates: vec![1.0, 5.0],
        })
        .is_ok());
        assert!(validate(&DistributionSpec::Empirical { points: vec![0.0, 1.5] }).is_ok());
    }

    #[test]
    fn validate_rejects_empty_uniform_interval() {
        let spec = DistributionSpec::Uniform { lo: 1.0, hi: 1.0 };
        assert!(validate(&spec).is_err());
    }

    #[test]
    fn validate_rejects_weights_not_summing_to_one() {
        let spec = DistributionSpec::HyperExponential {
            weights: vec![0.6, 0.5],
            rates: vec![1.0, 2.0],
        };
        assert!(validate(&spec).is_err());
    }

    #[test]
    fn validate_rejects_nonpositive_parameters() {
        assert!(validate(&DistributionSpec::Exponential { rate: 0.0 }).is_err());
        assert!(validate(&DistributionSpec::Gamma { shape: -1.0, rate: 2.0 }).is_err());
        assert!(validate(&DistributionSpec::Deterministic { value: 0.0 }).is_err());
        assert!(validate(&DistributionSpec::Empirical { points: vec![] }).is_err());
        assert!(validate(&DistributionSpec::Empirical { points: vec![1.0, -0.1] }).is_err());
    }

    #[test]
    fn moments_match_closed_forms() {
        assert_eq!(moments(&exp2()).unwrap(), (0.5, 0.25));
        assert_eq!(
            moments(&DistributionSpec::Deterministic { value: 1.0 }).unwrap(),
            (1.0, 0.0)
        );
        assert_eq!(
            moments(&DistributionSpec::Gamma { shape: 2.0, rate: 4.0 }).unwrap(),
            (0.5, 0.125)
        );
        let (m, v) = moments(&DistributionSpec::Uniform { lo: 1.0, hi: 3.0 }).unwrap();
        assert!((m - 2.0).abs() < 1e-15);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_variance_uses_denominator_n() {
        let (m, v) = moments(&DistributionSpec::Empirical { points: vec![1.0, 3.0] }).unwrap();
        assert_eq!(m, 2.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn hyperexponential_moments() {
        // 0.5 Exp(1) + 0.5 Exp(2): mean = 0.75, E X^2 = 0.5*2 + 0.5*0.5 = 1.25.
        let spec = DistributionSpec::HyperExponential {
            weights: vec![0.5, 0.5],
            rates: vec![1.0, 2.0],
        };
        let (m, v) = moments(&spec).unwrap();
        assert!((m - 0.75).abs() < 1e-15);
        assert!((v - (1.25 - 0.5625)).abs() < 1e-15);
    }

    #[test]
    fn log_mgf_known_values() {
        let lm = log_mgf(&exp2(), 1.0);
        assert!((lm - 2.0_f64.ln()).abs() < 1e-15);
        assert_eq!(log_mgf(&exp2(), 2.0), f64::INFINITY);
        assert_eq!(log_mgf(&exp2(), 2.5), f64::INFINITY);
        assert_eq!(log_mgf(&DistributionSpec::Empirical { points: vec![0.0, 0.0] }, 5.0), 0.0);
    }

    #[test]
    fn log_mgf_zero_is_zero_for_every_family() {
        let specs = vec![
            DistributionSpec::Deterministic { value: 0.4 },
            exp2(),
            DistributionSpec::Gamma { shape: 2.0, rate: 4.0 },
            DistributionSpec::Uniform { lo: 0.5, hi: 2.0 },
            DistributionSpec::HyperExponential {
                weights: vec![0.2, 0.8],
                rates: vec![1.0, 3.0],
            },
            DistributionSpec::Empirical { points: vec![0.3, 0.9, 2.2] },
        ];
        for spec in specs {
            assert_eq!(log_mgf(&spec, 0.0), 0.0, "{spec:?}");
        }
    }

    #[test]
    fn uniform_log_mgf_is_stable_near_zero() {
        let spec = DistributionSpec::Uniform { lo: 1.0, hi: 3.0 };
        for theta in [1e-13, -1e-13, 1e-7, -1e-7] {
            let lm = log_mgf(&spec, theta);
            // K(θ) ≈ θ μ + θ² σ²/2 with μ = 2.
            assert!(
                (lm - 2.0 * theta).abs() < 1e-14 + theta * theta,
                "theta={theta} lm={lm}"
            );
        }
    }

    #[test]
    fn uniform_log_mgf_survives_huge_theta() {
        let spec = DistributionSpec::Uniform { lo: 0.5, hi: 2.0 };
        let lm = log_mgf(&spec, 800.0);
        // Dominated by the upper endpoint: θ·hi - log(θ(hi-lo)).
        assert!((lm - (800.0 * 2.0 - (800.0 * 1.5_f64).ln())).abs() < 1e-6);
    }

    #[test]
    fn empirical_log_mgf_matches_direct_sum() {
        let points = vec![0.2, 0.7, 1.1, 1.9, 2.4];
        let spec = DistributionSpec::Empirical { points: points.clone() };
        for theta in [-3.0, -0.4, 0.3, 1.7, 6.0] {
            let direct = (points.iter().map(|x| (theta * x).exp()).sum::<f64>()
                / points.len() as f64)
                .ln();
            assert!(
                (log_mgf(&spec, theta) - direct).abs() <= 1e-12,
                "theta={theta}"
            );
        }
    }

    #[test]
    fn log_mgf_is_convex_on_a_grid() {
        let specs = vec![
            exp2(),
            DistributionSpec::Uniform { lo: 0.1, hi: 1.3 },
            DistributionSpec::Empirical { points: vec![0.1, 0.5, 0.9, 2.0] },
        ];
        for spec in specs {
            let h = 0.05;
            for i in -20..=20 {
                let t = i as f64 * h;
                let (a, b, c) = (
                    log_mgf(&spec, t - h),
                    log_mgf(&spec, t),
                    log_mgf(&spec, t + h),
                );
                if a.is_finite() && c.is_finite() {
                    assert!(a + c - 2.0 * b >= -1e-9, "{spec:?} at {t}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let specs = vec![
            exp2(),
            DistributionSpec::Gamma { shape: 2.0, rate: 4.0 },
            DistributionSpec::Uniform { lo: 0.5, hi: 2.5 },
            DistributionSpec::HyperExponential {
                weights: vec![0.4, 0.6],
                rates: vec![2.0, 7.0],
            },
            DistributionSpec::Empirical { points: vec![0.2, 0.9, 1.4] },
        ];
        let h = 1e-5;
        for spec in specs {
            for theta in [-0.8, 0.0, 0.7] {
                let (k1, k2) = log_mgf_derivatives(&spec, theta);
                let f = |t: f64| log_mgf(&spec, t);
                let d1 = (f(theta + h) - f(theta - h)) / (2.0 * h);
                let d2 = (f(theta + h) - 2.0 * f(theta) + f(theta - h)) / (h * h);
                assert!((k1 - d1).abs() < 1e-7, "{spec:?} K' at {theta}: {k1} vs {d1}");
                assert!((k2 - d2).abs() < 1e-4, "{spec:?} K'' at {theta}: {k2} vs {d2}");
                assert!(k2 >= 0.0);
            }
        }
    }

    #[test]
    fn deterministic_sample_is_exact() {
        let mut s = RngStream::substream(1, 0);
        let spec = DistributionSpec::Deterministic { value: 0.7 };
        assert_eq!(sample(&spec, &mut s), 0.7);
    }

    #[test]
    fn sampling_is_reproducible_per_stream() {
        let specs = vec![
            exp2(),
            DistributionSpec::Gamma { shape: 1.7, rate: 3.0 },
            DistributionSpec::HyperExponential {
                weights: vec![0.5, 0.5],
                rates: vec![1.0, 4.0],
            },
        ];
        for spec in specs {
            let smp = sampler(&spec);
            let mut a = RngStream::substream(77, 3);
            let mut b = RngStream::substream(77, 3);
            for _ in 0..1000 {
                assert!(smp.draw(&mut a) == smp.draw(&mut b), "{spec:?}");
            }
        }
    }

    #[test]
    fn empirical_draws_come_from_the_point_set() {
        let points = vec![0.25, 1.5, 2.75];
        let spec = DistributionSpec::Empirical { points: points.clone() };
        let smp = sampler(&spec);
        let mut s = RngStream::substream(5, 9);
        let mut seen = [false; 3];
        for _ in 0..1000 {
            let x = smp.draw(&mut s);
            let idx = points.iter().position(|p| *p == x).expect("draw in set");
            seen[idx] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn sample_means_match_moments() {
        let specs = [
            exp2(),
            DistributionSpec::Gamma { shape: 2.0, rate: 4.0 },
            DistributionSpec::Gamma { shape: 0.5, rate: 1.0 },
            DistributionSpec::Uniform { lo: 1.0, hi: 3.0 },
            DistributionSpec::HyperExponential {
                weights: vec![0.3, 0.7],
                rates: vec![0.5, 5.0],
            },
            DistributionSpec::Empirical { points: vec![0.1, 0.4, 2.0, 3.3] },
        ];
        let n = 1_000_000usize;
        for (k, spec) in specs.iter().enumerate() {
            let (mean, var) = moments(spec).unwrap();
            let smp = sampler(spec);
            let mut s = RngStream::substream(4242, k as u64);
            let sum: f64 = (0..n).map(|_| smp.draw(&mut s)).sum();
            let got = sum / n as f64;
            let se = (var / n as f64).sqrt();
            assert!(
                (got - mean).abs() < 4.0 * se + 1e-12,
                "{spec:?}: mean {got} expected {mean} (se {se})"
            );
        }
    }

    #[test]
    fn json_round_trip_and_examples() {
        let spec = DistributionSpec::from_json(r#"{"family": "exponential", "rate": 2.0}"#)
            .unwrap();
        assert_eq!(spec, exp2());
        let all = vec![
            DistributionSpec::Deterministic { value: 0.4 },
            exp2(),
            DistributionSpec::Gamma { shape: 2.0, rate: 4.0 },
            DistributionSpec::Uniform { lo: 0.5, hi: 2.0 },
            DistributionSpec::HyperExponential {
                weights: vec![0.2, 0.8],
                rates: vec![1.0, 3.0],
            },
            DistributionSpec::Empirical { points: vec![0.3, 0.9] },
        ];
        for spec in all {
            let json = spec.to_json();
            assert_eq!(DistributionSpec::from_json(&json).unwrap(), spec, "{json}");
        }
    }

    #[test]
    fn json_rejects_unknown_keys_and_families() {
        let err = DistributionSpec::from_json(
            r#"{"family": "exponential", "rate": 2.0, "scale": 1.0}"#,
        );
        assert!(err.is_err());
        let err = DistributionSpec::from_json(r#"{"family": "weibull", "shape": 1.0}"#);
        assert!(err.is_err());
        let err = DistributionSpec::from_json(r#"{"family": "gamma", "shape": 2.0}"#);
        assert!(err.is_err(), "missing rate must be rejected");
    }

    proptest! {
        #[test]
        fn prop_log_mgf_zero_and_moment_consistency(
            rate in 0.1f64..10.0,
            shape in 0.1f64..5.0,
        ) {
            let spec = DistributionSpec::Gamma { shape, rate };
            prop_assert_eq!(log_mgf(&spec, 0.0), 0.0);
            let (k1, k2) = log_mgf_derivatives(&spec, 0.0);
            let (mean, var) = moments(&spec).unwrap();
            prop_assert!((k1 - mean).abs() < 1e-12);
            prop_assert!((k2 - var).abs() < 1e-12);
        }

        #[test]
        fn prop_json_round_trip(lo in 0.0f64..5.0, width in 0.001f64..5.0) {
            let spec = DistributionSpec::Uniform { lo, hi: lo + width };
            let json = spec.to_json();
            prop_assert_eq!(DistributionSpec::from_json(&json).unwrap(), spec);
        }
    }
}
