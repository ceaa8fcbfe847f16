//! First-order comparative statics. Two complementary views:
//!
//! * [`analytic_sensitivities`] evaluates closed-form partial derivatives of
//!   the tier congestions and loads in `(p, q, t)` coordinates, where `t` is
//!   the gain ratio held by the inner solver.
//! * [`theta_elasticities`] differentiates numerically through the full
//!   solver in strategy coordinates `(p, q, r)` and reports signed
//!   elasticities (`eps_x^y = -(x/y) dy/dx`).
//!
//! Each is used to validate the other: the closed forms catch
//! finite-difference noise, the differences catch transcription errors.

#[allow(unused_imports)]
use num_traits::Float;

use crate::equilibrium::{inner_congestion, solve_equilibrium, SolverSettings};
use crate::model::{MarketModel, Strategy};
use crate::{Error, Result};

/// Closed-form partial derivatives at a point in `(p, q, t)` space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    pub p: f64,
    pub q: f64,
    pub t: f64,
    pub phi_h: f64,
    pub phi_l: f64,
    pub d_h: f64,
    pub d_l: f64,
    pub dphi_h_dp: f64,
    pub dphi_h_dq: f64,
    pub dphi_h_dt: f64,
    pub dphi_l_dp: f64,
    pub dphi_l_dq: f64,
    pub dphi_l_dt: f64,
    pub dd_h_dp: f64,
    pub dd_h_dq: f64,
    pub dd_h_dt: f64,
    pub dd_l_dp: f64,
    pub dd_l_dq: f64,
    pub dd_l_dt: f64,
    /// Capacity-weighted stiffness scale `K = d_h H_h (e^H_h/e^G_h + 1)
    /// + d_l H_l (e^H_l/e^G_l + 1)`; the common denominator of every
    /// derivative above.
    pub kappa: f64,
}

/// Signed elasticities of the tier loads with respect to the strategy
/// components, by central differences through [`solve_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaElasticities {
    pub d_h_p: f64,
    pub d_l_p: f64,
    pub d_t_p: f64,
    pub d_h_q: f64,
    pub d_l_q: f64,
    pub d_t_q: f64,
    pub d_h_r: f64,
    pub d_l_r: f64,
    pub d_t_r: f64,
}

/// Evaluate the closed-form congestion and load derivatives at `(p, q, t)`.
///
/// Requires a strictly interior point: `t` in `(0, 1)` and the CP value
/// threshold `q/(1-t)` strictly inside the value support, since the forms
/// divide by both tier masses. Both tiers must also have nonvanishing gain
/// elasticity.
pub fn analytic_sensitivities(
    model: &MarketModel,
    p: f64,
    q: f64,
    t: f64,
    settings: &SolverSettings,
) -> Result<SensitivityReport> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(
            "sensitivities need a gain ratio strictly inside (0, 1)",
        ));
    }
    let m = model.user_population(p);
    if m <= 0.0 {
        return Err(Error::ZeroPopulation { p });
    }
    // Reject degenerate tier splits before solving: with the threshold off
    // the CP value support one tier is empty and the congestion equation may
    // not even bracket.
    let v_bar = q / (1.0 - t);
    let fv = model.f_v.cdf(v_bar);
    if fv <= 0.0 || fv >= 1.0 {
        return Err(Error::DegenerateTiers);
    }
    let (phi_h, phi_l) = inner_congestion(model, p, q, t, settings)?;
    let n = model.mean_demand();
    let gain = model.gain;
    let cap = model.capacity;
    let fvp = model.f_v.pdf(v_bar);
    let d_h = m * n * (1.0 - fv) * gain.g(phi_h);
    let d_l = m * n * fv * gain.g(phi_l);
    let h_h = cap.h(phi_h);
    let h_l = cap.h(phi_l);
    let eg_h = gain.elasticity(phi_h);
    let eg_l = gain.elasticity(phi_l);
    if eg_h == 0.0 || eg_l == 0.0 {
        return Err(Error::Domain(
            "gain elasticity vanished at a tier congestion",
        ));
    }
    let eh_h = cap.elasticity(phi_h);
    let eh_l = cap.elasticity(phi_l);

    let kappa = d_h * h_h * (eh_h / eg_h + 1.0) + d_l * h_l * (eh_l / eg_l + 1.0);
    let m_prime = -model.f_u.pdf(p);
    let dfv_dq = fvp / (1.0 - t);
    let dfv_dt = fvp * q / ((1.0 - t) * (1.0 - t));

    let pref = phi_h / (kappa * eg_h);
    let tier_gap = d_l * h_l / fv - d_h * h_h / (1.0 - fv);
    let dphi_h_dp = pref * (m_prime / m) * (d_h * h_h + d_l * h_l);
    let dphi_h_dq = pref * dfv_dq * tier_gap;
    let dphi_h_dt = pref
        * (dfv_dt * tier_gap
            + d_l * (h_l / t + cap.h_prime(phi_l) * gain.g(phi_h) / gain.g_prime(phi_l)));

    let chain = phi_l * eg_h / (phi_h * eg_l);
    let dphi_l_dp = chain * dphi_h_dp;
    let dphi_l_dq = chain * dphi_h_dq;
    let dphi_l_dt = chain * dphi_h_dt + gain.g(phi_h) / gain.g_prime(phi_l);

    let load_scale = d_h * h_h * eh_h / eg_h + d_l * h_l * eh_l / eg_l;
    let dd_h_dp = d_h * m_prime / (kappa * m) * load_scale;
    let dd_l_dp = d_l * m_prime / (kappa * m) * load_scale;

    let shift_gap = d_h * h_h / (1.0 - fv) - d_l * h_l / fv;
    let dd_h_dq = d_h / kappa * dfv_dq * shift_gap - dfv_dq * d_h / (1.0 - fv);
    let dd_l_dq = d_l / kappa * dfv_dq * shift_gap + dfv_dq * d_l / fv;
    let dd_h_dt = dd_h_dq / dfv_dq * dfv_dt - d_h / (t * kappa) * (d_l * h_l * (eh_l / eg_l + 1.0));
    let dd_l_dt = dd_l_dq / dfv_dq * dfv_dt + d_l / (t * kappa) * (d_h * h_h * (eh_h / eg_h + 1.0));

    Ok(SensitivityReport {
        p,
        q,
        t,
        phi_h,
        phi_l,
        d_h,
        d_l,
        dphi_h_dp,
        dphi_h_dq,
        dphi_h_dt,
        dphi_l_dp,
        dphi_l_dq,
        dphi_l_dt,
        dd_h_dp,
        dd_h_dq,
        dd_h_dt,
        dd_l_dp,
        dd_l_dq,
        dd_l_dt,
        kappa,
    })
}

/// Loads `(d_h, d_l, d_t)` at a strategy point.
pub(crate) fn solve_loads(
    model: &MarketModel,
    p: f64,
    q: f64,
    r: f64,
    settings: &SolverSettings,
) -> Result<[f64; 3]> {
    let eq = solve_equilibrium(model, &Strategy::new(p, q, r)?, settings)?;
    Ok([eq.d_h, eq.d_l, eq.d_h + eq.d_l])
}

/// Central-difference slopes of `(d_h, d_l, d_t)` along one strategy axis
/// (0 = p, 1 = q, 2 = r), relative step `1e-5`, shrinking the step up to
/// twice when a probe point cannot be solved or leaves the feasible region.
pub(crate) fn load_slopes_along(
    model: &MarketModel,
    p: f64,
    q: f64,
    r: f64,
    settings: &SolverSettings,
    axis: usize,
) -> Result<[f64; 3]> {
    let x = [p, q, r][axis];
    let mut step = if axis == 2 {
        1e-5 * x.max(1e-3)
    } else {
        1e-5 * x
    };
    if axis == 2 {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidInput(
                "allocation slopes need an interior allocation share",
            ));
        }
        step = step.min(r - 1e-12).min(1.0 - r - 1e-12);
    }
    let probe = |s: f64| -> Result<[f64; 3]> {
        let mut at = [p, q, r];
        at[axis] += s;
        solve_loads(model, at[0], at[1], at[2], settings)
    };
    let mut shrinks = 0;
    let (hi, lo) = loop {
        match (probe(step), probe(-step)) {
            (Ok(hi), Ok(lo)) => break (hi, lo),
            (hi, lo) => {
                shrinks += 1;
                if shrinks > 2 {
                    hi?;
                    lo?;
                    unreachable!("one probe must have failed");
                }
                step *= 0.1;
            }
        }
    };
    Ok([
        (hi[0] - lo[0]) / (2.0 * step),
        (hi[1] - lo[1]) / (2.0 * step),
        (hi[2] - lo[2]) / (2.0 * step),
    ])
}

/// Load elasticities in strategy space by central differences through the
/// solver, with relative step `1e-5` shrunk up to twice when a probe leaves
/// the feasible region or fails to solve.
///
/// Requires interior `r` (the allocation elasticities are two-sided). When
/// `q` sits at or beyond the CP value support so that no paid tier can form,
/// the paid load is identically zero and its elasticity undefined; that case
/// is reported as a degenerate-quantity error.
pub fn theta_elasticities(
    model: &MarketModel,
    strategy: &Strategy,
    settings: &SolverSettings,
) -> Result<ThetaElasticities> {
    let (p, q, r) = (strategy.p, strategy.q, strategy.r);
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidInput(
            "load elasticities need an interior allocation share",
        ));
    }
    let base = match solve_loads(model, p, q, r, settings) {
        Err(Error::UnreachableShare { attainable, .. }) if attainable == 0.0 => {
            return Err(Error::DegenerateQuantity("d_h"));
        }
        other => other?,
    };
    if base.iter().any(|&y| y == 0.0) {
        return Err(Error::DegenerateQuantity("tier load"));
    }

    let mut eps = [[0.0f64; 3]; 3];
    for (axis, &x) in [p, q, r].iter().enumerate() {
        let slopes = load_slopes_along(model, p, q, r, settings, axis)?;
        for comp in 0..3 {
            eps[axis][comp] = -(x / base[comp]) * slopes[comp];
        }
    }

    Ok(ThetaElasticities {
        d_h_p: eps[0][0],
        d_l_p: eps[0][1],
        d_t_p: eps[0][2],
        d_h_q: eps[1][0],
        d_l_q: eps[1][1],
        d_t_q: eps[1][2],
        d_h_r: eps[2][0],
        d_l_r: eps[2][1],
        d_t_r: eps[2][2],
    })
}
