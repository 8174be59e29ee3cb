//! The Lundberg exponent of a single queue and its companions.
//!
//! For service times `S` and arrival rate `λ`, the shifted cumulant
//! generating function is `Λ(θ) = K(θ) - θ/λ` with `K(θ) = log E[exp(θS)]`.
//! Under stability (`E[S] < 1/λ`) the function starts at `Λ(0) = 0` with
//! negative slope and is strictly convex, so it has at most one further
//! zero `γ > 0`. That root is the exponential decay rate of the single
//! queue's stationary waiting-time tail, and everything downstream (the
//! `(1/γ) log N` centering of the maximum over `N` queues, the hitting
//! constant `ĉ = 1/(γ Λ'(γ))`) is built from it.
//!
//! `solve_gamma` brackets the root by doubling from `θ = 1e-8`, treating
//! the `+∞` marker returned by [`crate::dist::log_mgf`] outside the MGF
//! domain as a positive sign, bisects to a width of `1e-14`, and polishes
//! with Newton until `|Λ| <= 1e-14` (at most 200 iterations). Every
//! returned solution satisfies `|Λ(γ)| <= 1e-12`.

use serde_json::json;
use thiserror::Error;

use crate::dist::{
    self, log_mgf, log_mgf_derivatives, moments, support_sup, theta_sup, validate,
    DistributionSpec,
};

const BISECT_WIDTH: f64 = 1e-14;
const NEWTON_RESIDUAL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 200;
const DOUBLING_CAP: usize = 1_000_000;
const RESIDUAL_GUARANTEE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LundbergError {
    #[error(transparent)]
    Dist(#[from] dist::DistError),
    #[error("arrival rate must be positive and finite, got {0}")]
    InvalidLambda(f64),
    /// The queue is not stable: mean service `E[S]` at least the mean
    /// interarrival time `1/λ`.
    #[error("unstable queue: E[S] = {mean_service} >= 1/lambda = {mean_interarrival}")]
    Unstable {
        mean_service: f64,
        mean_interarrival: f64,
    },
    /// `Λ(θ) < 0` on the whole domain; the waiting-time tail decays faster
    /// than any exponential (for example deterministic service below the
    /// mean interarrival time).
    #[error("shifted CGF has no positive root")]
    NoRoot,
    /// The root exists only in the limit `θ ↑ theta_sup`, so the exponent
    /// is not attained at an interior point.
    #[error("root attained only at the domain boundary theta_sup = {theta_sup}")]
    BoundaryRoot { theta_sup: f64 },
    /// Legendre transform queried left of the drift `Λ'(0)`.
    #[error("legendre point {x} below the drift {drift}")]
    OutsideDomain { x: f64, drift: f64 },
}

/// Solved root data for one `(service, λ)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LundbergSolution {
    /// Positive root of the shifted CGF.
    pub gamma: f64,
    /// `Λ'(γ) > 0`.
    pub lambda_prime_at_gamma: f64,
    /// `Λ''(γ) > 0`.
    pub lambda_double_prime_at_gamma: f64,
    /// `1/(γ Λ'(γ))`, the hitting-time constant.
    pub c_hat: f64,
    /// Supremum of the CGF domain (may be `f64::INFINITY`).
    pub theta_sup: f64,
    /// Whether `γ` lies strictly inside the domain.
    pub interior: bool,
}

impl LundbergSolution {
    /// One-line JSON form, e.g.
    /// `{"gamma":...,"lambda_prime":...,"lambda_double_prime":...,"c_hat":...,"interior":true}`.
    pub fn to_json(&self) -> String {
        json!({
            "gamma": self.gamma,
            "lambda_prime": self.lambda_prime_at_gamma,
            "lambda_double_prime": self.lambda_double_prime_at_gamma,
            "c_hat": self.c_hat,
            "interior": self.interior,
        })
        .to_string()
    }
}

fn check_lambda(lambda: f64) -> Result<(), LundbergError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(LundbergError::InvalidLambda(lambda));
    }
    Ok(())
}

/// `Λ(θ) = log E[exp(θ(S - 1/λ))]`, with `f64::INFINITY` outside the MGF
/// domain so root finders can bracket against the boundary.
pub fn shifted_cgf(service: &DistributionSpec, lambda: f64, theta: f64) -> f64 {
    let k = log_mgf(service, theta);
    if k.is_infinite() {
        k
    } else {
        k - theta / lambda
    }
}

/// `(Λ'(θ), Λ''(θ))` at an interior `θ`; both `f64::INFINITY` at or past
/// the domain boundary.
pub fn shifted_cgf_derivatives(
    service: &DistributionSpec,
    lambda: f64,
    theta: f64,
) -> (f64, f64) {
    if theta >= theta_sup(service) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let (k1, k2) = log_mgf_derivatives(service, theta);
    (k1 - 1.0 / lambda, k2)
}

/// Finds the Lundberg exponent `γ > 0` with `Λ(γ) = 0`.
pub fn solve_gamma(
    service: &DistributionSpec,
    lambda: f64,
) -> Result<LundbergSolution, LundbergError> {
    validate(service)?;
    check_lambda(lambda)?;
    let (mean_s, _) = moments(service)?;
    let mean_a = 1.0 / lambda;
    if mean_s >= mean_a {
        return Err(LundbergError::Unstable {
            mean_service: mean_s,
            mean_interarrival: mean_a,
        });
    }
    // A root needs paths with S > 1/λ; with the whole support at or below
    // the mean interarrival time the shifted CGF stays negative.
    if support_sup(service) <= mean_a {
        return Err(LundbergError::NoRoot);
    }

    let sup = theta_sup(service);
    let f = |t: f64| shifted_cgf(service, lambda, t);

    // Bracket [lo, hi] with Λ(lo) < 0 and Λ(hi) > 0 (possibly +∞).
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    let mut theta = 1e-8_f64;
    if sup.is_finite() {
        theta = theta.min(sup * 0.5);
    }
    for _ in 0..DOUBLING_CAP {
        if theta >= sup {
            break;
        }
        let v = f(theta);
        if v > 0.0 {
            hi = theta;
            break;
        }
        lo = theta;
        theta *= 2.0;
    }
    if hi.is_nan() {
        if sup.is_finite() {
            let near = sup * (1.0 - 1e-12);
            if near > lo && f(near) > 0.0 {
                hi = near;
            } else if f(sup) > 0.0 {
                // Positive mass only in the closure: not an interior root.
                return Err(LundbergError::BoundaryRoot { theta_sup: sup });
            } else {
                return Err(LundbergError::NoRoot);
            }
        } else {
            return Err(LundbergError::NoRoot);
        }
    }

    // Bisection on the sign, +∞ counting as positive.
    while hi - lo > BISECT_WIDTH * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish from the bracket midpoint.
    let mut gamma = 0.5 * (lo + hi);
    for _ in 0..NEWTON_MAX_ITER {
        let v = f(gamma);
        if v.abs() <= NEWTON_RESIDUAL {
            break;
        }
        let (d1, _) = shifted_cgf_derivatives(service, lambda, gamma);
        if !d1.is_finite() || d1 == 0.0 {
            break;
        }
        let next = gamma - v / d1;
        let clamped = if next <= 0.0 || (sup.is_finite() && next >= sup) {
            0.5 * (lo + hi)
        } else {
            next
        };
        if (clamped - gamma).abs() <= f64::EPSILON * gamma.abs() {
            gamma = clamped;
            break;
        }
        gamma = clamped;
    }

    let residual = f(gamma);
    assert!(
        residual.abs() <= RESIDUAL_GUARANTEE,
        "root residual {residual} exceeds {RESIDUAL_GUARANTEE} at gamma = {gamma}"
    );
    let (d1, d2) = shifted_cgf_derivatives(service, lambda, gamma);
    let interior = gamma < sup;
    Ok(LundbergSolution {
        gamma,
        lambda_prime_at_gamma: d1,
        lambda_double_prime_at_gamma: d2,
        c_hat: 1.0 / (gamma * d1),
        theta_sup: sup,
        interior,
    })
}

/// Legendre transform value with an attainability flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreValue {
    pub value: f64,
    /// True when no interior `t` attains the supremum and `value` is the
    /// limit along `t → ∞` or the domain boundary (`f64::INFINITY` past the
    /// essential supremum of `S - 1/λ`).
    pub boundary: bool,
}

/// `Λ*(x) = sup_t (t x - Λ(t))` over `t >= 0`, valid for `x >= Λ'(0)`.
///
/// The supremum is located by solving `Λ'(t) = x`, exploiting the strict
/// convexity of `Λ`; because the objective is stationary there, the value
/// is insensitive to the residual error in `t`.
pub fn legendre(
    service: &DistributionSpec,
    lambda: f64,
    x: f64,
) -> Result<LegendreValue, LundbergError> {
    validate(service)?;
    check_lambda(lambda)?;
    let (mean_s, var_s) = moments(service)?;
    let drift = mean_s - 1.0 / lambda;
    let scale = drift.abs().max(1.0);
    if x < drift - 1e-12 * scale {
        return Err(LundbergError::OutsideDomain { x, drift });
    }
    if (x - drift).abs() <= 1e-12 * scale {
        return Ok(LegendreValue { value: 0.0, boundary: false });
    }
    // Zero-variance service: Λ is linear, the supremum is 0 at x = drift
    // (handled above) and +∞, never attained, elsewhere.
    if var_s == 0.0 {
        return Ok(LegendreValue { value: f64::INFINITY, boundary: true });
    }
    let x_max = support_sup(service) - 1.0 / lambda;
    if x_max.is_finite() && x >= x_max - 1e-12 * x_max.abs().max(1.0) {
        if x > x_max + 1e-12 * x_max.abs().max(1.0) {
            return Ok(LegendreValue { value: f64::INFINITY, boundary: true });
        }
        // At the essential supremum the objective plateaus: the limit is
        // -log P(S = ess sup S), infinite when the endpoint carries no atom.
        let value = match service {
            DistributionSpec::Empirical { points } => {
                let max = support_sup(service);
                let hits = points.iter().filter(|p| **p == max).count();
                -(hits as f64 / points.len() as f64).ln()
            }
            _ => f64::INFINITY,
        };
        return Ok(LegendreValue { value, boundary: true });
    }

    let sup = theta_sup(service);
    let slope = |t: f64| shifted_cgf_derivatives(service, lambda, t).0;

    // Bracket t with Λ'(t) >= x by doubling, clamped into the domain.
    const T_CAP: f64 = 1e12;
    let mut lo = 0.0;
    let mut hi = f64::NAN;
    let mut t = 1e-8_f64;
    if sup.is_finite() {
        t = t.min(sup * 0.5);
    }
    while t < T_CAP {
        if sup.is_finite() && t >= sup {
            break;
        }
        let s = slope(t);
        if s >= x {
            hi = t;
            break;
        }
        lo = t;
        t *= 2.0;
    }
    if hi.is_nan() {
        if sup.is_finite() {
            let near = sup * (1.0 - 1e-12);
            if near > lo && slope(near) >= x {
                hi = near;
            } else {
                // Slope saturates below x approaching the boundary.
                let v = near * x - shifted_cgf(service, lambda, near);
                return Ok(LegendreValue { value: v, boundary: true });
            }
        } else {
            // Bounded support with x at the essential supremum: the
            // objective plateaus at -log P(S = ess sup S).
            let v = T_CAP * x - shifted_cgf(service, lambda, T_CAP);
            return Ok(LegendreValue { value: v, boundary: true });
        }
    }

    while hi - lo > BISECT_WIDTH * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_star = 0.5 * (lo + hi);
    let value = t_star * x - shifted_cgf(service, lambda, t_star);
    Ok(LegendreValue { value, boundary: false })
}

/// `ĉ = 1/(γ Λ'(γ))`; the maximum over `N` queues typically first reaches
/// its `(1/γ) log N` height around step `ĉ log N`.
pub fn hitting_constant(solution: &LundbergSolution) -> f64 {
    1.0 / (solution.gamma * solution.lambda_prime_at_gamma)
}
