//! The market model (exogenous structure) and platform strategy (decision
//! variables), plus the primitive quantities built directly from them: active
//! user population, the CP indifference value between tiers, per-CP tier
//! choice, and aggregate tier loads.

#[allow(unused_imports)]
use num_traits::Float;

use crate::capacity::Capacity;
use crate::dist::Distribution;
use crate::gain::Gain;
use crate::{Error, Result};

/// Everything exogenous: user values `f_u`, CP values `f_v`, CP demand
/// weights `f_w`, the gain and capacity functions, total capacity `c`, and
/// per-unit transit cost `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketModel {
    pub f_u: Distribution,
    pub f_v: Distribution,
    pub f_w: Distribution,
    pub gain: Gain,
    pub capacity: Capacity,
    pub c: f64,
    pub k: f64,
}

impl MarketModel {
    pub fn validate(&self) -> Result<()> {
        self.f_u.validate()?;
        self.f_v.validate()?;
        self.f_w.validate()?;
        self.gain.validate()?;
        self.capacity.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidInput("total capacity c must be > 0"));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidInput("unit cost k must be >= 0"));
        }
        Ok(())
    }

    /// Power-law family used throughout the tests and as the config default:
    /// user and CP values `x^0.33` on [0,1], demand weights `w^alpha`, gain
    /// `1 - phi^(1/beta)`, capacity `1/phi`.
    pub fn power_family(alpha: f64, beta: f64, c: f64, k: f64) -> Self {
        MarketModel {
            f_u: Distribution::Power { exponent: 0.33 },
            f_v: Distribution::Power { exponent: 0.33 },
            f_w: Distribution::Power { exponent: alpha },
            gain: Gain::Power { beta },
            capacity: Capacity::InversePower { kappa: 1.0 },
            c,
            k,
        }
    }

    /// Active-user fraction `M(p) = 1 - F_u(p)`; zero beyond the support.
    pub fn user_population(&self, p: f64) -> f64 {
        1.0 - self.f_u.cdf(p)
    }

    /// Mean CP demand weight `N`.
    pub fn mean_demand(&self) -> f64 {
        self.f_w.mean()
    }
}

/// The platform's decision triple: user price `p`, paid-peering price `q`,
/// and the capacity fraction `r` reserved for the paid tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl Strategy {
    pub fn new(p: f64, q: f64, r: f64) -> Result<Self> {
        let s = Strategy { p, q, r };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidInput("price p must be > 0"));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidInput("price q must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::InvalidInput("allocation r must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// CP value above which the paid tier is preferred: `q*G(phi_h) /
/// (G(phi_h) - G(phi_l))`, equivalently `q / (1 - t)` with
/// `t = G(phi_l)/G(phi_h)`.
pub fn boundary_value(q: f64, phi_h: f64, phi_l: f64, gain: &Gain) -> Result<f64> {
    let gh = gain.g(phi_h);
    let gl = gain.g(phi_l);
    if gh <= gl {
        return Err(Error::DegenerateTiers);
    }
    Ok(q * gh / (gh - gl))
}

/// A CP's tier decision and the utility it realizes there (per unit demand).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TierChoice {
    Paid { utility: f64 },
    Free { utility: f64 },
    Exit,
}

/// Tier choice of a CP with value `v`: paid if `v` meets the indifference
/// threshold (ties go to paid), otherwise free; exit only in the degenerate
/// case where the free tier delivers no gain and paid is unaffordable.
pub fn cp_choice(
    v: f64,
    p: f64,
    q: f64,
    phi_h: f64,
    phi_l: f64,
    model: &MarketModel,
) -> TierChoice {
    let m = model.user_population(p);
    let gh = model.gain.g(phi_h);
    let gl = model.gain.g(phi_l);
    let vbar = if gh > gl {
        q * gh / (gh - gl)
    } else {
        f64::INFINITY
    };
    if v >= vbar {
        TierChoice::Paid {
            utility: (v - q) * m * gh,
        }
    } else if gl > 0.0 {
        TierChoice::Free {
            utility: v * m * gl,
        }
    } else {
        TierChoice::Exit
    }
}

/// Aggregate tier loads at the given congestion pair:
/// `D_h = M*N*(1 - F_v(vbar))*G(phi_h)` and `D_l = M*N*F_v(vbar)*G(phi_l)`.
/// When the tiers coincide the indifference value is infinite and the paid
/// load is zero.
pub fn loads_at(model: &MarketModel, p: f64, q: f64, phi_h: f64, phi_l: f64) -> (f64, f64) {
    let m = model.user_population(p);
    let n = model.mean_demand();
    let gh = model.gain.g(phi_h);
    let gl = model.gain.g(phi_l);
    let fv = if gh > gl {
        model.f_v.cdf(q * gh / (gh - gl))
    } else {
        1.0
    };
    (m * n * (1.0 - fv) * gh, m * n * fv * gl)
}
