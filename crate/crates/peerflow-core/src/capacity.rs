//! Per-unit capacity requirement at a given congestion level: sustaining load
//! `d` at congestion `phi` requires `h(phi) * d` capacity. `h` is decreasing
//! and blows up as `phi -> 0`, so zero congestion is unattainable with finite
//! capacity.

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    /// `h(phi) = phi^(-kappa)`; `kappa = 1` is the inverse-proportional case.
    InversePower { kappa: f64 },
}

impl Capacity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Capacity::InversePower { kappa } if kappa > 0.0 && kappa.is_finite() => Ok(()),
            Capacity::InversePower { .. } => Err(Error::InvalidInput("capacity kappa must be > 0")),
        }
    }

    pub fn h(&self, phi: f64) -> f64 {
        match *self {
            Capacity::InversePower { kappa } => {
                if kappa == 1.0 {
                    1.0 / phi
                } else {
                    phi.powf(-kappa)
                }
            }
        }
    }

    pub fn h_prime(&self, phi: f64) -> f64 {
        match *self {
            Capacity::InversePower { kappa } => -kappa * phi.powf(-kappa - 1.0),
        }
    }

    /// Inverse of `h`: the congestion level with per-unit requirement `y`.
    pub fn h_inverse(&self, y: f64) -> f64 {
        match *self {
            Capacity::InversePower { kappa } => y.powf(-1.0 / kappa),
        }
    }

    /// Capacity elasticity `-(phi / h) * h'`; constant `kappa` for this family.
    pub fn elasticity(&self, phi: f64) -> f64 {
        -(phi / self.h(phi)) * self.h_prime(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diverges_at_zero_and_inverts() {
        for kappa in [0.5, 1.0, 2.0] {
            let h = Capacity::InversePower { kappa };
            // The mildest exponent (0.5) still grows by sqrt(5e8) ~ 2e4.
            assert!(h.h(1e-9) > 1e3 * h.h(0.5));
            for i in 1..100 {
                let phi = i as f64 / 100.0;
                assert!((h.h_inverse(h.h(phi)) - phi).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn elasticity_is_kappa() {
        for kappa in [0.5, 1.0, 2.0] {
            let h = Capacity::InversePower { kappa };
            for i in 1..20 {
                let phi = i as f64 / 20.0;
                assert!((h.elasticity(phi) - kappa).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = Capacity::InversePower { kappa: 1.3 };
        for i in 2..40 {
            let phi = i as f64 / 40.0;
            let step = 1e-6;
            let fd = (h.h(phi + step) - h.h(phi - step)) / (2.0 * step);
            assert!((h.h_prime(phi) - fd).abs() / fd.abs() < 1e-7);
        }
    }
}
