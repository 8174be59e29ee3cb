//! Limit laws for the maximum steady-state waiting time and queue length.
//!
//! On the `sqrt(log N)` scale the centered maximum waiting time converges
//! to a normal law with variance `sigma_A^2 c_hat`, and the maximum queue
//! length to a normal law centered at `(lambda/gamma) log N`. The normal
//! wait limit is sandwiched between two explicit mixture laws of the form
//! `a X_1 - b |X_2|` and `a X_1 + b' |X_2|` with `X_1, X_2` independent
//! standard normals; their CDFs are one-dimensional integrals evaluated
//! here by adaptive Gauss-Kronrod quadrature.

use serde::Serialize;
use thiserror::Error;

use crate::dist::DistributionSpec;
use crate::lundberg::{solve_gamma, LundbergError, LundbergSolution};
use crate::stats::{normal_cdf, normal_pdf, normal_quantile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("sigma_a must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("arrival rate must be finite and positive, got {0}")]
    InvalidLambda(f64),
    #[error("epsilon {epsilon} outside (0, c_hat = {c_hat})")]
    InvalidEpsilon { epsilon: f64, c_hat: f64 },
    #[error("operation requires a mixture bound law, got {0:?}")]
    KindMismatch(LawKind),
    #[error("probability {0} outside (0, 1)")]
    OutOfRange(f64),
    #[error("need at least two servers for the log N scaling, got {0}")]
    TooFewServers(usize),
    #[error("no server classes given")]
    EmptyClasses,
    #[error("class fractions must lie in (0, 1] and sum to 1, got sum {sum}")]
    BadWeights { sum: f64 },
    #[error("decay rates of classes {first} and {second} coincide within 1e-9; no dominant class")]
    AmbiguousMinimum { first: usize, second: usize },
    #[error(transparent)]
    Lundberg(#[from] LundbergError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LawKind {
    Normal,
    LowerBoundMix,
    UpperBoundMix,
}

/// A limit law on the `sqrt(log N)` scale: the raw maximum is approximated
/// by `center_coeff * log N + sqrt(log N) * Z` where `Z` follows this law.
#[derive(Debug, Clone, Serialize)]
pub struct LimitLaw {
    pub kind: LawKind,
    pub center_coeff: f64,
    /// Standard deviation of `Z` for the normal kind; for the mixture
    /// kinds the nominal normal scale `sigma_a sqrt(c_hat)` being bracketed.
    pub scale: f64,
    /// Mixture window; zero for the normal kind.
    pub epsilon: f64,
    pub c_hat: f64,
    pub sigma_a: f64,
}

fn check_sigma(sigma_a: f64) -> Result<(), AsymptoticsError> {
    if !sigma_a.is_finite() || sigma_a < 0.0 {
        return Err(AsymptoticsError::InvalidSigma(sigma_a));
    }
    Ok(())
}

/// Limit law of the maximum waiting time: normal with center coefficient
/// `1/gamma` and scale `sigma_a sqrt(c_hat)`.
pub fn wait_limit_law(
    solution: &LundbergSolution,
    sigma_a: f64,
) -> Result<LimitLaw, AsymptoticsError> {
    check_sigma(sigma_a)?;
    Ok(LimitLaw {
        kind: LawKind::Normal,
        center_coeff: 1.0 / solution.gamma,
        scale: sigma_a * solution.c_hat.sqrt(),
        epsilon: 0.0,
        c_hat: solution.c_hat,
        sigma_a,
    })
}

/// Limit law of the maximum queue length: normal with center coefficient
/// `lambda/gamma` and scale
/// `sqrt(lambda^2 sigma_a^2 c_hat + lambda^3 sigma_a^2 / gamma)`.
pub fn queue_limit_law(
    solution: &LundbergSolution,
    lambda: f64,
    sigma_a: f64,
) -> Result<LimitLaw, AsymptoticsError> {
    check_sigma(sigma_a)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(AsymptoticsError::InvalidLambda(lambda));
    }
    let var = lambda * lambda * sigma_a * sigma_a * (solution.c_hat + lambda / solution.gamma);
    Ok(LimitLaw {
        kind: LawKind::Normal,
        center_coeff: lambda / solution.gamma,
        scale: var.sqrt(),
        epsilon: 0.0,
        c_hat: solution.c_hat,
        sigma_a,
    })
}

fn bound_law(
    kind: LawKind,
    solution: &LundbergSolution,
    sigma_a: f64,
    epsilon: f64,
) -> Result<LimitLaw, AsymptoticsError> {
    check_sigma(sigma_a)?;
    if !(epsilon > 0.0 && epsilon < solution.c_hat) {
        return Err(AsymptoticsError::InvalidEpsilon {
            epsilon,
            c_hat: solution.c_hat,
        });
    }
    Ok(LimitLaw {
        kind,
        center_coeff: 1.0 / solution.gamma,
        scale: sigma_a * solution.c_hat.sqrt(),
        epsilon,
        c_hat: solution.c_hat,
        sigma_a,
    })
}

/// Stochastic lower bound on the wait limit:
/// `sigma_a sqrt(c_hat - eps) X_1 - sigma_a sqrt(eps) |X_2|`.
pub fn lower_bound_law(
    solution: &LundbergSolution,
    sigma_a: f64,
    epsilon: f64,
) -> Result<LimitLaw, AsymptoticsError> {
    bound_law(LawKind::LowerBoundMix, solution, sigma_a, epsilon)
}

/// Stochastic upper bound on the wait limit:
/// `sigma_a sqrt(c_hat - eps) X_1 + sigma_a sqrt(2 eps) |X_2|`.
pub fn upper_bound_law(
    solution: &LundbergSolution,
    sigma_a: f64,
    epsilon: f64,
) -> Result<LimitLaw, AsymptoticsError> {
    bound_law(LawKind::UpperBoundMix, solution, sigma_a, epsilon)
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth >= 48 {
        return value;
    }
    let mid = 0.5 * (a + b);
    integrate(f, a, mid, 0.5 * tol, depth + 1) + integrate(f, mid, b, 0.5 * tol, depth + 1)
}

const MIX_CUTOFF: f64 = 8.0;

fn mix_components(law: &LimitLaw) -> (f64, f64, f64) {
    let a = law.sigma_a * (law.c_hat - law.epsilon).sqrt();
    match law.kind {
        LawKind::LowerBoundMix => (a, law.sigma_a * law.epsilon.sqrt(), -1.0),
        LawKind::UpperBoundMix => (a, law.sigma_a * (2.0 * law.epsilon).sqrt(), 1.0),
        LawKind::Normal => unreachable!("mixture components of a normal law"),
    }
}

/// CDF of a mixture bound law at `x`. Errors with `KindMismatch` when the
/// law is the normal kind.
pub fn bound_law_cdf(law: &LimitLaw, x: f64) -> Result<f64, AsymptoticsError> {
    if law.kind == LawKind::Normal {
        return Err(AsymptoticsError::KindMismatch(law.kind));
    }
    if law.sigma_a == 0.0 {
        return Ok(if x >= 0.0 { 1.0 } else { 0.0 });
    }
    let (a, b, sign) = mix_components(law);
    // P(a X_1 + sign b |X_2| <= x) = int_0^inf 2 phi(y) Phi((x - sign b y)/a) dy.
    let integrand = move |y: f64| 2.0 * normal_pdf(y) * normal_cdf((x - sign * b * y) / a);
    let mut cdf = integrate(&integrand, 0.0, MIX_CUTOFF, 1e-13, 0);
    if sign < 0.0 {
        // Beyond the cutoff the inner CDF is essentially 1.
        cdf += 2.0 * (1.0 - normal_cdf(MIX_CUTOFF));
    }
    Ok(cdf.clamp(0.0, 1.0))
}

impl LimitLaw {
    /// CDF of the law on the standardized scale.
    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            LawKind::Normal => {
                if self.scale == 0.0 {
                    if x >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    normal_cdf(x / self.scale)
                }
            }
            _ => bound_law_cdf(self, x).expect("mixture kinds always have a CDF"),
        }
    }

    /// Quantile of the law on the standardized scale.
    pub fn quantile(&self, p: f64) -> Result<f64, AsymptoticsError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(AsymptoticsError::OutOfRange(p));
        }
        match self.kind {
            LawKind::Normal => {
                let z = normal_quantile(p).expect("p checked in range");
                Ok(self.scale * z)
            }
            _ => {
                if self.sigma_a == 0.0 {
                    return Ok(0.0);
                }
                let (a, b, _) = mix_components(self);
                let span = 12.0 * (a + b);
                let (mut lo, mut hi) = (-span, span);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if bound_law_cdf(self, mid)? < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-12 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// True when the law collapses to a point mass at zero.
    pub fn degenerate(&self) -> bool {
        self.sigma_a == 0.0 || (self.kind == LawKind::Normal && self.scale == 0.0)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantilePrediction {
    pub value: f64,
    /// Set when the law is a point mass, in which case `value` is the
    /// center for every probability level.
    pub degenerate: bool,
}

/// Predicted `p`-quantile of the raw maximum for `n_servers` servers:
/// `center_coeff log N + sqrt(log N) z_p`.
pub fn predicted_quantile(
    law: &LimitLaw,
    n_servers: usize,
    p: f64,
) -> Result<QuantilePrediction, AsymptoticsError> {
    if n_servers < 2 {
        return Err(AsymptoticsError::TooFewServers(n_servers));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(AsymptoticsError::OutOfRange(p));
    }
    let log_n = (n_servers as f64).ln();
    if law.degenerate() {
        return Ok(QuantilePrediction {
            value: law.center_coeff * log_n,
            degenerate: true,
        });
    }
    let z = law.quantile(p)?;
    Ok(QuantilePrediction {
        value: law.center_coeff * log_n + log_n.sqrt() * z,
        degenerate: false,
    })
}

/// One service class in a heterogeneous system: a service distribution, the
/// fraction of servers it occupies, and its decay-rate solution.
#[derive(Debug, Clone)]
pub struct ClassSpec {
    pub service: DistributionSpec,
    pub alpha: f64,
    pub solution: LundbergSolution,
}

impl ClassSpec {
    pub fn solve(
        service: DistributionSpec,
        alpha: f64,
        lambda: f64,
    ) -> Result<Self, LundbergError> {
        let solution = solve_gamma(&service, lambda)?;
        Ok(ClassSpec {
            service,
            alpha,
            solution,
        })
    }
}

const TIE_TOLERANCE: f64 = 1e-9;

/// Selects the class with the smallest decay rate; its wait law is the
/// limit law of the whole heterogeneous system regardless of the class
/// fractions.
pub fn hetero_select(
    classes: &[ClassSpec],
    sigma_a: f64,
) -> Result<(usize, LimitLaw), AsymptoticsError> {
    if classes.is_empty() {
        return Err(AsymptoticsError::EmptyClasses);
    }
    let sum: f64 = classes.iter().map(|c| c.alpha).sum();
    if classes.iter().any(|c| !(c.alpha > 0.0 && c.alpha <= 1.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(AsymptoticsError::BadWeights { sum });
    }
    let mut best = 0usize;
    for (k, class) in classes.iter().enumerate().skip(1) {
        if class.solution.gamma < classes[best].solution.gamma {
            best = k;
        }
    }
    for (k, class) in classes.iter().enumerate() {
        if k != best && (class.solution.gamma - classes[best].solution.gamma).abs() <= TIE_TOLERANCE
        {
            return Err(AsymptoticsError::AmbiguousMinimum {
                first: best.min(k),
                second: best.max(k),
            });
        }
    }
    let law = wait_limit_law(&classes[best].solution, sigma_a)?;
    Ok((best, law))
}
