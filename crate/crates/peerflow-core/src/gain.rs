//! Usage-gain functions: how much of their intrinsic demand users actually
//! realize at congestion level `phi`. Gains are decreasing with `g(0) = 1`
//! (no congestion, full demand) and `g(1) = 0` (total congestion, none).

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gain {
    /// `g(phi) = 1 - phi^(1/beta)`. Small `beta` keeps demand flat until
    /// congestion is severe (text-like traffic); large `beta` collapses it
    /// quickly (video-like traffic).
    Power { beta: f64 },
}

impl Gain {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Gain::Power { beta } if beta > 0.0 && beta.is_finite() => Ok(()),
            Gain::Power { .. } => Err(Error::InvalidInput("gain beta must be > 0")),
        }
    }

    pub fn g(&self, phi: f64) -> f64 {
        match *self {
            Gain::Power { beta } => 1.0 - phi.powf(1.0 / beta),
        }
    }

    pub fn g_prime(&self, phi: f64) -> f64 {
        match *self {
            Gain::Power { beta } => {
                let ib = 1.0 / beta;
                -ib * phi.powf(ib - 1.0)
            }
        }
    }

    /// Inverse of `g` on [0, 1]: the congestion level delivering gain `y`.
    pub fn g_inverse(&self, y: f64) -> f64 {
        match *self {
            Gain::Power { beta } => (1.0 - y).powf(beta),
        }
    }

    /// Gain elasticity `-(phi / g) * g'`, positive and increasing from 0.
    pub fn elasticity(&self, phi: f64) -> f64 {
        -(phi / self.g(phi)) * self.g_prime(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_inverse_roundtrip() {
        for beta in [0.5, 1.0, 2.0, 3.7] {
            let g = Gain::Power { beta };
            assert_eq!(g.g(0.0), 1.0);
            assert_eq!(g.g(1.0), 0.0);
            for i in 1..200 {
                let phi = i as f64 / 200.0;
                let roundtrip = g.g_inverse(g.g(phi));
                assert!((roundtrip - phi).abs() < 1e-10, "beta={beta} phi={phi}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for beta in [0.5, 1.0, 2.0] {
            let g = Gain::Power { beta };
            for i in 1..40 {
                let phi = i as f64 / 40.0 * 0.95;
                let h = 1e-6;
                let fd = (g.g(phi + h) - g.g(phi - h)) / (2.0 * h);
                assert!((g.g_prime(phi) - fd).abs() < 1e-7, "beta={beta} phi={phi}");
            }
        }
    }

    #[test]
    fn elasticity_closed_form() {
        // For this family the elasticity is (1/beta) phi^(1/beta) / (1 - phi^(1/beta)).
        for beta in [0.5, 1.0, 2.0] {
            let g = Gain::Power { beta };
            for i in 1..20 {
                let phi = i as f64 / 20.0 * 0.9;
                let x = phi.powf(1.0 / beta);
                let expect = x / (beta * (1.0 - x));
                assert!((g.elasticity(phi) - expect).abs() < 1e-8);
            }
        }
    }
}
