//! Platform objectives and their first-order conditions: operator profit,
//! total and per-user surplus, user welfare, and normalized residuals of the
//! stationarity conditions that characterize profit-optimal and
//! welfare-optimal strategies.

#[allow(unused_imports)]
use num_traits::Float;

use crate::dist::Distribution;
use crate::equilibrium::{solve_equilibrium, SolverSettings};
use crate::model::{MarketModel, Strategy};
use crate::sensitivity::{load_slopes_along, solve_loads, theta_elasticities};
use crate::{Error, Result};

/// All objective quantities at one strategy, from a single equilibrium solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    /// Operator profit `U = (p+q-k) d_h + (p-k) d_l`.
    pub profit: f64,
    /// User welfare `W = s * d_t`.
    pub welfare: f64,
    /// Total user surplus `S(p)`.
    pub surplus_total: f64,
    /// Per-user average surplus `s = S / M`.
    pub surplus_avg: f64,
    /// Total load `d_h + d_l`.
    pub d_t: f64,
}

/// Residuals of the profit and welfare stationarity conditions. Fields are
/// present when the corresponding branch applies at the evaluated strategy;
/// every present value is finite.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FocResiduals {
    /// Normalized residual of the user-price condition for profit:
    /// `[p d_t - (p+q-k) d_h e^{d_h}_p - (p-k) d_l e^{d_l}_p] / (p d_t)`.
    pub profit_price: Option<f64>,
    /// Relative gap between the tier profit ratio `(p+q-k)d_h / ((p-k)d_l)`
    /// and its price-elasticity expression (interior allocations only).
    pub profit_ratio_prices: Option<f64>,
    /// Relative gap between the tier profit ratio and the allocation
    /// elasticity ratio `-e^{d_l}_r / e^{d_h}_r` (interior allocations only).
    pub profit_ratio_alloc: Option<f64>,
    /// One-sided profit slope indicator at the full-paid boundary:
    /// `[U(r) - U(r-h)] / (h |U(r)|)`; nonnegative values certify the
    /// boundary inequality branch.
    pub profit_alloc_slack: Option<f64>,
    /// `e^{d_t}_p + e^s_p`; zero at an interior welfare optimum.
    pub welfare_p: Option<f64>,
    /// `e^{d_t}_q`; zero at an interior welfare optimum.
    pub welfare_q: Option<f64>,
    /// `e^{d_t}_r` for interior allocations; at `r = 0` the one-sided
    /// normalized load drop `-(d_t(h) - d_t(0)) / d_t(0)`, which must be
    /// nonnegative (up to tolerance) at a pure-free welfare optimum.
    pub welfare_r: Option<f64>,
}

/// Expected surplus of a user draw above a price `p`: the integral of
/// `(u - p)` over the upper tail of `f_u`.
pub fn total_surplus(f_u: &Distribution, p: f64) -> f64 {
    match *f_u {
        Distribution::Power { exponent: a } => {
            if p >= 1.0 {
                0.0
            } else if p <= 0.0 {
                a / (a + 1.0)
            } else {
                a * (1.0 - p.powf(a + 1.0)) / (a + 1.0) - p * (1.0 - p.powf(a))
            }
        }
        Distribution::Exponential { rate } => (-rate * p.max(0.0)).exp() / rate,
        Distribution::Uniform { lo, hi } => {
            if p >= hi {
                0.0
            } else if p <= lo {
                0.5 * (lo + hi) - p
            } else {
                (hi - p) * (hi - p) / (2.0 * (hi - lo))
            }
        }
    }
}

/// Total and per-user surplus `(S, s)` at price `p`. The per-user average
/// requires a nonempty population.
pub fn user_surplus(model: &MarketModel, p: f64) -> Result<(f64, f64)> {
    if p < 0.0 {
        return Err(Error::InvalidInput("surplus requires a nonnegative price"));
    }
    let s_total = total_surplus(&model.f_u, p);
    let m = model.user_population(p);
    if m <= 0.0 {
        return Err(Error::ZeroPopulation { p });
    }
    Ok((s_total, s_total / m))
}

/// Evaluate every objective at a strategy from one equilibrium solve.
pub fn objective_value(
    model: &MarketModel,
    strategy: &Strategy,
    settings: &SolverSettings,
) -> Result<ObjectiveValue> {
    let eq = solve_equilibrium(model, strategy, settings)?;
    let (p, q) = (strategy.p, strategy.q);
    let k = model.k;
    let d_t = eq.d_h + eq.d_l;
    let profit = (p + q - k) * eq.d_h + (p - k) * eq.d_l;
    let (surplus_total, surplus_avg) = user_surplus(model, p)?;
    Ok(ObjectiveValue {
        profit,
        welfare: surplus_avg * d_t,
        surplus_total,
        surplus_avg,
        d_t,
    })
}

/// Operator profit at a strategy.
pub fn profit(model: &MarketModel, strategy: &Strategy, settings: &SolverSettings) -> Result<f64> {
    Ok(objective_value(model, strategy, settings)?.profit)
}

/// User welfare at a strategy. An empty user population produces zero
/// welfare rather than an error: no users, no usage.
pub fn welfare(model: &MarketModel, strategy: &Strategy, settings: &SolverSettings) -> Result<f64> {
    if model.user_population(strategy.p) <= 0.0 {
        return Ok(0.0);
    }
    Ok(objective_value(model, strategy, settings)?.welfare)
}

/// Elasticity of per-user surplus with respect to price, by central
/// differences on the closed-form surplus.
pub fn surplus_elasticity(model: &MarketModel, p: f64) -> Result<f64> {
    let h = 1e-5 * p;
    let (_, s_hi) = user_surplus(model, p + h)?;
    let (_, s_lo) = user_surplus(model, p - h)?;
    let (_, s0) = user_surplus(model, p)?;
    if s0 == 0.0 {
        return Err(Error::DegenerateQuantity("per-user surplus"));
    }
    Ok(-(p / s0) * (s_hi - s_lo) / (2.0 * h))
}

/// Residuals of the profit stationarity conditions at a strategy.
///
/// Requires `r > 0`: a profit optimum never allocates zero paid capacity, so
/// the conditions are only stated there. For interior `r` both equality
/// residuals are reported; at `r = 1` (or whenever the tier profit ratio is
/// undefined) only the price condition and the boundary slack indicator are.
pub fn profit_foc(
    model: &MarketModel,
    strategy: &Strategy,
    settings: &SolverSettings,
) -> Result<FocResiduals> {
    let (p, q, r) = (strategy.p, strategy.q, strategy.r);
    if r <= 0.0 {
        return Err(Error::InvalidInput(
            "profit stationarity is only defined for a positive paid allocation",
        ));
    }
    let base = solve_loads(model, p, q, r, settings)?;
    let [d_h, d_l, d_t] = base;
    let k = model.k;

    let slopes_p = load_slopes_along(model, p, q, r, settings, 0)?;
    let e_dh_p = -(p / d_h) * slopes_p[0];
    let price_defect = if d_l > 0.0 {
        let e_dl_p = -(p / d_l) * slopes_p[1];
        p * d_t - (p + q - k) * d_h * e_dh_p - (p - k) * d_l * e_dl_p
    } else {
        p * d_t - (p + q - k) * d_h * e_dh_p
    };
    let mut out = FocResiduals {
        profit_price: Some(price_defect / (p * d_t)),
        ..FocResiduals::default()
    };

    if r < 1.0 && d_l > 0.0 && p != k {
        let el = theta_elasticities(model, strategy, settings)?;
        let lhs = (p + q - k) * d_h / ((p - k) * d_l);
        let mid =
            (-p * d_t * el.d_l_q + q * d_h * el.d_l_p) / (p * d_t * el.d_h_q - q * d_h * el.d_h_p);
        let alloc = -el.d_l_r / el.d_h_r;
        out.profit_ratio_prices = Some((lhs - mid) / lhs);
        out.profit_ratio_alloc = Some((lhs - alloc) / lhs);
    } else {
        let h = 1e-5;
        let u_here = profit(model, strategy, settings)?;
        let u_back = profit(model, &Strategy::new(p, q, r - h)?, settings)?;
        out.profit_alloc_slack = Some((u_here - u_back) / (h * u_here.abs().max(1e-12)));
    }
    Ok(out)
}

/// Residuals of the welfare stationarity conditions at a strategy.
///
/// Requires `r < 1`: a welfare optimum never allocates everything to the
/// paid tier. At `r = 0` the allocation entry is a one-sided probe into the
/// interior (stepping up through `h` in `{1e-5, ..., 1e-2}` until a solvable
/// share is found; an isolated boundary with no reachable neighbor reports
/// zero), and the peering-price entry is identically zero because no paid
/// tier exists.
pub fn welfare_foc(
    model: &MarketModel,
    strategy: &Strategy,
    settings: &SolverSettings,
) -> Result<FocResiduals> {
    let (p, q, r) = (strategy.p, strategy.q, strategy.r);
    if r >= 1.0 {
        return Err(Error::InvalidInput(
            "welfare stationarity is only defined below the full-paid boundary",
        ));
    }
    let e_s_p = surplus_elasticity(model, p)?;
    let mut out = FocResiduals::default();
    if r == 0.0 {
        let base = solve_loads(model, p, q, 0.0, settings)?;
        let d_t0 = base[2];
        let slopes_p = load_slopes_along(model, p, q, 0.0, settings, 0)?;
        let e_dt_p = -(p / d_t0) * slopes_p[2];
        out.welfare_p = Some(e_dt_p + e_s_p);
        out.welfare_q = Some(0.0);
        let mut w_r = 0.0;
        for h in [1e-5, 1e-4, 1e-3, 1e-2] {
            match solve_loads(model, p, q, h, settings) {
                Ok(probe) => {
                    w_r = -(probe[2] - d_t0) / d_t0;
                    break;
                }
                Err(_) => continue,
            }
        }
        out.welfare_r = Some(w_r);
    } else {
        let el = theta_elasticities(model, strategy, settings)?;
        out.welfare_p = Some(el.d_t_p + e_s_p);
        out.welfare_q = Some(el.d_t_q);
        out.welfare_r = Some(el.d_t_r);
    }
    Ok(out)
}
