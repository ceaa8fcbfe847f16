//! Congestion-equilibrium solver. At an equilibrium, each tier's load times
//! its per-unit capacity requirement exactly consumes that tier's capacity
//! slice. The solver exploits the constructive uniqueness argument: for a
//! fixed gain ratio `t = G(phi_l)/G(phi_h)` the within-tier problem reduces to
//! a strictly decreasing scalar function of `phi_h` (inner bisection), and the
//! paid-capacity share implied by `t` is itself strictly decreasing (outer
//! bisection), with the `r = 0` and `r = 1` boundaries handled by dedicated
//! single-equation branches.

#[allow(unused_imports)]
use num_traits::Float;

use crate::model::MarketModel;
use crate::model::Strategy;
use crate::numeric::{bisect, Midpoint};
use crate::{Error, Result};

/// Solved market state for one strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    /// Paid-tier congestion.
    pub phi_h: f64,
    /// Free-tier congestion (`phi_h <= phi_l`).
    pub phi_l: f64,
    /// Paid-tier load `r*c / H(phi_h)`.
    pub d_h: f64,
    /// Free-tier load `(1-r)*c / H(phi_l)`.
    pub d_l: f64,
    /// CP value threshold between tiers; infinite when the paid tier is off.
    pub v_threshold: f64,
    /// Gain ratio `G(phi_l) / G(phi_h)`.
    pub t: f64,
    /// Capacity-balance defect of the paid tier, `|D_h*H(phi_h) - r*c|`.
    pub residual_h: f64,
    /// Capacity-balance defect of the free tier.
    pub residual_l: f64,
}

/// Tolerances and iteration caps for the nested bisections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Absolute tolerance on the inner capacity-balance function.
    pub inner_tol: f64,
    /// Tolerance on the outer share mismatch `|R(t) - r|`.
    pub outer_tol: f64,
    /// Interior solves keep `t` inside `[t_clamp, 1 - t_clamp]`.
    pub t_clamp: f64,
    /// Iteration cap per bisection.
    pub max_iter: u32,
    /// Lower end of the inner congestion bracket.
    pub bracket_floor: f64,
    /// Probe-point rule for the inner bisection; exists so independent
    /// bracketing strategies can cross-check uniqueness.
    pub midpoint: Midpoint,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            inner_tol: 1e-12,
            outer_tol: 1e-11,
            t_clamp: 1e-9,
            max_iter: 300,
            bracket_floor: 1e-12,
            midpoint: Midpoint::Arithmetic,
        }
    }
}

/// Solve the two-tier congestion balance for a fixed gain ratio `t`:
/// returns the unique `(phi_h, phi_l)` with `G(phi_l) = t*G(phi_h)` at which
/// the two tiers jointly consume capacity `c`.
///
/// The root function is evaluated through the identity
/// `G(phi_l) = t*G(phi_h)`, so only `phi_h` is searched and `phi_l` follows
/// through the gain inverse.
/// Expand a capacity-balance bracket's lower end until the function turns
/// positive there. `H -> inf` at 0 guarantees a sign change for any nonempty
/// tier, but a large budget can push it below the configured floor; every
/// starting floor expands to the same terminal depth, so bracketing variants
/// reach identical roots.
fn expand_floor<F: Fn(f64) -> f64>(z: &F, floor: f64) -> Result<f64> {
    const TERMINAL_FLOOR: f64 = 1e-18;
    let mut lo = floor;
    while z(lo) <= 0.0 {
        if lo <= TERMINAL_FLOOR {
            return Err(Error::NoBracket { lo, hi: 1.0 });
        }
        lo = (lo * 1e-2).max(TERMINAL_FLOOR);
    }
    Ok(lo)
}

pub fn inner_congestion(
    model: &MarketModel,
    p: f64,
    q: f64,
    t: f64,
    settings: &SolverSettings,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain("inner congestion requires t in [0, 1)"));
    }
    let m = model.user_population(p);
    if m <= 0.0 {
        return Err(Error::ZeroPopulation { p });
    }
    let n = model.mean_demand();
    let v_bar = q / (1.0 - t);
    let fv = model.f_v.cdf(v_bar);
    let gain = model.gain;
    let cap = model.capacity;
    let c = model.c;
    let z = |x: f64| {
        let gx = gain.g(x);
        let paid = (1.0 - fv) * gx * cap.h(x);
        let free = fv * t * gx * cap.h(gain.g_inverse(t * gx));
        m * n * (paid + free) - c
    };
    let lo = expand_floor(&z, settings.bracket_floor)?;
    let phi_h = bisect(
        z,
        lo,
        1.0,
        0.0,
        settings.inner_tol,
        settings.max_iter,
        settings.midpoint,
    )?;
    let phi_l = gain.g_inverse(t * gain.g(phi_h)).clamp(phi_h, 1.0);
    Ok((phi_h, phi_l))
}

/// Fraction of total capacity the paid tier absorbs at gain ratio `t`,
/// holding prices fixed: `D_h*H(phi_h) / c` at the inner solution. Decreasing
/// in `t`, anchored at 1 for `t = 0` and 0 for `t = 1`; evaluates to 0 on the
/// whole range where the indifference value exits the CP value support.
pub fn paid_share(
    model: &MarketModel,
    p: f64,
    q: f64,
    t: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    if t >= 1.0 {
        return Ok(0.0);
    }
    let v_bar = q / (1.0 - t);
    let fv = model.f_v.cdf(v_bar);
    if fv >= 1.0 {
        return Ok(0.0);
    }
    // A bracket that fails even at the terminal floor means the paid demand
    // coefficient 1 - F_v has numerically vanished: no representable
    // congestion level lets the residual paid tier absorb the budget gap.
    // That is the approach to the zero plateau, not a solver defect.
    let (phi_h, _) = match inner_congestion(model, p, q, t, settings) {
        Ok(pair) => pair,
        Err(Error::NoBracket { .. }) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let m = model.user_population(p);
    let n = model.mean_demand();
    let d_h = m * n * (1.0 - fv) * model.gain.g(phi_h);
    Ok(d_h * model.capacity.h(phi_h) / model.c)
}

/// Invert the paid-share map: find `t` with `paid_share(t) = r`.
///
/// Returns the endpoint values 1 and 0 for `r = 0` and `r = 1` without
/// solving. With a bounded CP value support the share map can jump
/// discontinuously to its zero plateau; shares inside the jump are
/// unreachable and reported as errors rather than approximated. The
/// bisection therefore iterates until the share mismatch itself (not just
/// the bracket width) is inside `outer_tol`.
pub fn share_inverse(
    model: &MarketModel,
    p: f64,
    q: f64,
    r: f64,
    settings: &SolverSettings,
) -> Result<f64> {
    if r == 0.0 {
        return Ok(1.0);
    }
    if r == 1.0 {
        return Ok(0.0);
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidInput("share r must lie in [0, 1]"));
    }
    if q >= model.f_v.support_upper() {
        return Err(Error::UnreachableShare {
            requested: r,
            attainable: 0.0,
        });
    }
    let mut lo = settings.t_clamp;
    let mut hi = 1.0 - settings.t_clamp;
    let r_lo = paid_share(model, p, q, lo, settings)?;
    if r_lo < r {
        return Err(Error::UnreachableShare {
            requested: r,
            attainable: r_lo,
        });
    }
    let r_hi = paid_share(model, p, q, hi, settings)?;
    if r_hi >= r {
        // Root sits inside the clamped band next to t = 1; the clamp width
        // already bounds the share error there.
        return Ok(hi);
    }
    let mut t = 0.5 * (lo + hi);
    let mut mismatch = paid_share(model, p, q, t, settings)? - r;
    for _ in 0..settings.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            t = mid.max(lo).min(hi);
            mismatch = paid_share(model, p, q, t, settings)? - r;
            break;
        }
        t = mid;
        mismatch = paid_share(model, p, q, t, settings)? - r;
        if mismatch.abs() <= settings.outer_tol {
            break;
        }
        if mismatch > 0.0 {
            // Share too high: move toward larger t (share is decreasing).
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // A persistent mismatch after a collapsed bracket is the share-map jump.
    if mismatch.abs() > 1e-6 {
        return Err(Error::UnreachableShare {
            requested: r,
            attainable: r + mismatch,
        });
    }
    Ok(t)
}

/// Solve for the unique equilibrium at a strategy.
///
/// `r = 0` and `r = 1` reduce to single-tier scalar equations; interior `r`
/// composes [`share_inverse`] with [`inner_congestion`]. Loads are reported
/// as the capacity-implied `r*c/H(phi_h)` and `(1-r)*c/H(phi_l)`; the
/// residual fields measure how far the demand-side load formulas are from
/// those capacity balances.
pub fn solve_equilibrium(
    model: &MarketModel,
    strategy: &Strategy,
    settings: &SolverSettings,
) -> Result<Equilibrium> {
    model.validate()?;
    strategy.validate()?;
    let (p, q, r) = (strategy.p, strategy.q, strategy.r);
    let m = model.user_population(p);
    if m <= 0.0 {
        return Err(Error::ZeroPopulation { p });
    }
    let n = model.mean_demand();
    let c = model.c;
    let gain = model.gain;
    let cap = model.capacity;

    if r == 0.0 {
        let z = |x: f64| m * n * gain.g(x) * cap.h(x) - c;
        let lo = expand_floor(&z, settings.bracket_floor)?;
        let phi = bisect(
            z,
            lo,
            1.0,
            0.0,
            settings.inner_tol,
            settings.max_iter,
            settings.midpoint,
        )?;
        return Ok(Equilibrium {
            phi_h: phi,
            phi_l: phi,
            d_h: 0.0,
            d_l: c / cap.h(phi),
            v_threshold: f64::INFINITY,
            t: 1.0,
            residual_h: 0.0,
            residual_l: z(phi).abs(),
        });
    }

    if r == 1.0 {
        let fvq = model.f_v.cdf(q);
        if 1.0 - fvq <= 0.0 {
            return Err(Error::PaidTierInfeasible { q });
        }
        let z = |x: f64| m * n * (1.0 - fvq) * gain.g(x) * cap.h(x) - c;
        let lo = expand_floor(&z, settings.bracket_floor)?;
        let phi = bisect(
            z,
            lo,
            1.0,
            0.0,
            settings.inner_tol,
            settings.max_iter,
            settings.midpoint,
        )?;
        return Ok(Equilibrium {
            phi_h: phi,
            phi_l: 1.0,
            d_h: c / cap.h(phi),
            d_l: 0.0,
            v_threshold: q,
            t: 0.0,
            residual_h: z(phi).abs(),
            residual_l: 0.0,
        });
    }

    let t = share_inverse(model, p, q, r, settings)?;
    let (phi_h, phi_l) = inner_congestion(model, p, q, t, settings)?;
    let v_threshold = q / (1.0 - t);
    let fv = model.f_v.cdf(v_threshold);
    let residual_h = (m * n * (1.0 - fv) * gain.g(phi_h) * cap.h(phi_h) - r * c).abs();
    let residual_l = (m * n * fv * gain.g(phi_l) * cap.h(phi_l) - (1.0 - r) * c).abs();
    Ok(Equilibrium {
        phi_h,
        phi_l,
        d_h: r * c / cap.h(phi_h),
        d_l: (1.0 - r) * c / cap.h(phi_l),
        v_threshold,
        t,
        residual_h,
        residual_l,
    })
}
