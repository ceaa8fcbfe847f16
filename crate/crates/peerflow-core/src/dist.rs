//! Closed-form value and demand distributions. Three families cover every
//! model this crate constructs: power-law CDFs on [0,1], exponentials on
//! [0,inf), and uniforms. Each carries analytic pdf, quantile, mean, and
//! hazard rate, so sampling and surplus integrals never need numeric
//! integration or inversion.

// Resolves float intrinsics through libm on no_std builds.
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// CDF `x^exponent` on [0, 1].
    Power { exponent: f64 },
    /// CDF `1 - exp(-rate * x)` on [0, inf).
    Exponential { rate: f64 },
    /// Uniform on [lo, hi].
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Power { exponent } if exponent > 0.0 && exponent.is_finite() => Ok(()),
            Distribution::Power { .. } => Err(Error::InvalidInput("power exponent must be > 0")),
            Distribution::Exponential { rate } if rate > 0.0 && rate.is_finite() => Ok(()),
            Distribution::Exponential { .. } => {
                Err(Error::InvalidInput("exponential rate must be > 0"))
            }
            Distribution::Uniform { lo, hi } if 0.0 <= lo && lo < hi && hi.is_finite() => Ok(()),
            Distribution::Uniform { .. } => Err(Error::InvalidInput("uniform needs 0 <= lo < hi")),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return match *self {
                Distribution::Uniform { lo, .. } if x >= lo => 0.0,
                _ => 0.0,
            };
        }
        match *self {
            Distribution::Power { exponent } => {
                if x >= 1.0 {
                    1.0
                } else {
                    x.powf(exponent)
                }
            }
            Distribution::Exponential { rate } => 1.0 - (-rate * x).exp(),
            Distribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Power { exponent } => {
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    exponent * x.powf(exponent - 1.0)
                }
            }
            Distribution::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
            Distribution::Uniform { lo, hi } => {
                if x < lo || x > hi {
                    0.0
                } else {
                    1.0 / (hi - lo)
                }
            }
        }
    }

    /// Inverse CDF on (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!(
            u > 0.0 && u < 1.0,
            "quantile domain is the open unit interval"
        );
        match *self {
            Distribution::Power { exponent } => u.powf(1.0 / exponent),
            Distribution::Exponential { rate } => -(1.0 - u).ln() / rate,
            Distribution::Uniform { lo, hi } => lo + u * (hi - lo),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Power { exponent } => exponent / (exponent + 1.0),
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn support_upper(&self) -> f64 {
        match *self {
            Distribution::Power { .. } => 1.0,
            Distribution::Exponential { .. } => f64::INFINITY,
            Distribution::Uniform { hi, .. } => hi,
        }
    }

    pub fn support_lower(&self) -> f64 {
        match *self {
            Distribution::Power { .. } | Distribution::Exponential { .. } => 0.0,
            Distribution::Uniform { lo, .. } => lo,
        }
    }

    /// Hazard rate `pdf / (1 - cdf)`; infinite at and beyond the support top.
    pub fn hazard(&self, x: f64) -> f64 {
        let tail = 1.0 - self.cdf(x);
        if tail <= 0.0 {
            f64::INFINITY
        } else {
            self.pdf(x) / tail
        }
    }
}
