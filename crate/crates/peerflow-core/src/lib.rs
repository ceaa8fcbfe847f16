//! Core math for a two-tier (paid and free peering) network platform: closed-form
//! market primitives, the nested-bisection congestion-equilibrium solver, analytic
//! and finite-difference sensitivities, profit/welfare objectives with their
//! first-order-condition residuals, derivative-free optimizers, and independent
//! verification oracles (Monte Carlo load sampling, damped fixed-point iteration,
//! brute-force grids).
//!
//! The crate is `no_std`-compatible (`alloc` is required); the default `std`
//! feature only adds `std::error::Error` for [`Error`].

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod capacity;
pub mod dist;
pub mod equilibrium;
pub mod gain;
pub mod model;
pub mod numeric;
pub mod objectives;
pub mod optimize;
pub mod oracle;
pub mod sensitivity;

pub use capacity::Capacity;
pub use dist::Distribution;
pub use equilibrium::{solve_equilibrium, Equilibrium, SolverSettings};
pub use gain::Gain;
pub use model::{MarketModel, Strategy};
pub use objectives::{FocResiduals, ObjectiveValue};
pub use optimize::{
    ConditionReport, ConstrainedOptimum, Objective, OptimumReport, Regime, SearchBox,
};
pub use sensitivity::{SensitivityReport, ThetaElasticities};

use core::fmt;

/// Failure modes shared across the solver, sensitivity, objective, and
/// optimizer layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Error {
    /// A root-bracketing search found no sign change on its interval.
    NoBracket { lo: f64, hi: f64 },
    /// The paid tier cannot absorb the requested capacity share at this CP
    /// price: the share map jumps over `requested` (bounded value support).
    UnreachableShare { requested: f64, attainable: f64 },
    /// No CP can afford the paid tier (q at or beyond the value-support top).
    PaidTierInfeasible { q: f64 },
    /// Both tiers offer the same gain, so the indifference value is undefined.
    DegenerateTiers,
    /// No active users at this price.
    ZeroPopulation { p: f64 },
    /// A derivative or elasticity of a zero quantity was requested.
    DegenerateQuantity(&'static str),
    /// Iteration cap reached before the convergence test was met.
    NonConvergence { iterations: u32 },
    /// Input outside an operation's domain.
    Domain(&'static str),
    /// A constrained search found no feasible point.
    Infeasible,
    /// Invalid model or strategy field.
    InvalidInput(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Error::NoBracket { lo, hi } => {
                write!(f, "bracket failure: no sign change on [{lo:e}, {hi:e}]")
            }
            Error::UnreachableShare { requested, attainable } => write!(
                f,
                "unreachable share: requested {requested} but the paid tier attains at most {attainable}"
            ),
            Error::PaidTierInfeasible { q } => {
                write!(f, "paid tier infeasible: no CP value exceeds q = {q}")
            }
            Error::DegenerateTiers => write!(f, "degenerate tiers: both tiers have equal gain"),
            Error::ZeroPopulation { p } => write!(f, "zero population: no active users at p = {p}"),
            Error::DegenerateQuantity(what) => {
                write!(f, "degenerate quantity: {what} is zero, derivative undefined")
            }
            Error::NonConvergence { iterations } => {
                write!(f, "no convergence after {iterations} iterations")
            }
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::Infeasible => write!(f, "infeasible: no point satisfies the constraint"),
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

impl Error {
    /// Stable short name, used by the CLI for diagnostics and CSV status
    /// fields.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NoBracket { .. } => "bracket-failure",
            Error::UnreachableShare { .. } => "unreachable-share",
            Error::PaidTierInfeasible { .. } => "paid-tier-infeasible",
            Error::DegenerateTiers => "degenerate-tiers",
            Error::ZeroPopulation { .. } => "zero-population",
            Error::DegenerateQuantity(_) => "degenerate-quantity",
            Error::NonConvergence { .. } => "non-convergence",
            Error::Domain(_) => "domain-error",
            Error::Infeasible => "infeasible",
            Error::InvalidInput(_) => "invalid-input",
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
