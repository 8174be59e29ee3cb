//! Extreme waiting times and queue lengths in fork-join queues.
//!
//! A fork-join queue splits every arriving task into `N` subtasks served by
//! `N` parallel FCFS single-server queues fed by one shared arrival stream.
//! As `N` grows, the largest steady-state waiting time concentrates around
//! `(1/γ) log N`, where `γ` is the Lundberg exponent of one queue: the
//! positive root of `Λ(θ) = log E[exp(θ(S - 1/λ))]` with `S` a service
//! time and `λ` the arrival rate. Around that center the maximum satisfies
//! a central limit law on the `sqrt(log N)` scale driven entirely by the
//! arrival-process variability, and the largest queue length inherits an
//! analogous law through a distributional Little identity.
//!
//! The crate computes the constants (`γ`, `Λ'(γ)`, the hitting constant
//! `ĉ = 1/(γ Λ'(γ))`, Legendre transforms), builds the limit laws and
//! their finite-`ε` lower/upper bounding mixtures, simulates the maxima
//! exactly at configurable scale, and ships the statistical machinery
//! (Kolmogorov-Smirnov distances, slope fits, normal quantiles) used to
//! check the two against each other.

pub mod asymptotics;
pub mod dist;
pub mod lundberg;
pub mod rng;
pub mod sim;
pub mod stats;

pub use asymptotics::{
    bound_law_cdf, hetero_select, lower_bound_law, predicted_quantile, queue_limit_law,
    upper_bound_law, wait_limit_law, ClassSpec, LawKind, LimitLaw, QuantilePrediction,
};
pub use dist::{
    log_mgf, log_mgf_derivatives, moments, sample, sampler, support_sup, theta_sup, validate,
    DistributionSpec,
};
pub use lundberg::{
    hitting_constant, legendre, shifted_cgf, shifted_cgf_derivatives, solve_gamma,
    LundbergSolution,
};
pub use rng::{RngStream, StreamFamily};
pub use sim::{
    count_arrivals, default_horizon, run_batch, sample_hitting_time, sample_max_queue_direct,
    sample_max_queue_little, sample_max_wait_lindley, sample_max_wait_sup, ForkJoinConfig,
    Horizon, SampleManifest, SampleSet, ServerClass, Statistic,
};
pub use stats::{
    fit_slope, ks_distance, normal_cdf, normal_pdf, normal_quantile, standardize, two_sample_ks,
};
