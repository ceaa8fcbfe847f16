//! Independent verification engines: a discrete-agent Monte Carlo load
//! estimator, a damped fixed-point alternative to the bisection equilibrium
//! solver, and an exhaustive grid maximizer. None of them share numerical
//! machinery with the primary implementations they check.

#[allow(unused_imports)]
use num_traits::Float;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{Equilibrium, SolverSettings};
use crate::model::{loads_at, MarketModel, Strategy};
use crate::objectives::objective_value;
use crate::optimize::{tie_pref, Objective, SearchBox};
use crate::{Error, Result};

/// Sampled tier loads with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub d_h_hat: f64,
    pub d_l_hat: f64,
    pub std_err_h: f64,
    pub std_err_l: f64,
    pub n_users: u64,
    pub n_cps: u64,
    pub seed: u64,
}

/// Uniform draw on the open interval (0, 1): 53 random mantissa bits shifted
/// off the endpoints, so quantile transforms never see 0 or 1.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Estimate the tier loads at fixed congestions by simulating discrete
/// users and CPs (inverse-CDF sampling, ChaCha8 stream, fully determined by
/// `seed`). Users are drawn first, then one `(v, w)` pair per CP.
///
/// The standard errors combine the CP-side sampling variance with the
/// user-side binomial variance of the active-population estimate.
pub fn mc_loads(
    model: &MarketModel,
    p: f64,
    q: f64,
    phi_h: f64,
    phi_l: f64,
    n_users: u64,
    n_cps: u64,
    seed: u64,
) -> McEstimate {
    debug_assert!(
        n_users >= 10_000 && n_cps >= 10_000,
        "estimator contract: n >= 1e4"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut active = 0u64;
    for _ in 0..n_users {
        let u = model.f_u.quantile(open_unit(&mut rng));
        if u > p {
            active += 1;
        }
    }
    let m_hat = active as f64 / n_users as f64;

    let g_h = model.gain.g(phi_h);
    let g_l = model.gain.g(phi_l);
    // Coincident or inverted tiers leave every CP on the free side: the
    // indifference threshold is infinite.
    let v_bar = if g_h > g_l {
        q * g_h / (g_h - g_l)
    } else {
        f64::INFINITY
    };

    let mut sum_h = 0.0;
    let mut sumsq_h = 0.0;
    let mut sum_l = 0.0;
    let mut sumsq_l = 0.0;
    for _ in 0..n_cps {
        let v = model.f_v.quantile(open_unit(&mut rng));
        let w = model.f_w.quantile(open_unit(&mut rng));
        let (a_h, a_l) = if v >= v_bar {
            (w * g_h, 0.0)
        } else {
            (0.0, w * g_l)
        };
        sum_h += a_h;
        sumsq_h += a_h * a_h;
        sum_l += a_l;
        sumsq_l += a_l * a_l;
    }
    let nc = n_cps as f64;
    let nu = n_users as f64;
    let mean_h = sum_h / nc;
    let mean_l = sum_l / nc;
    let var_h = (sumsq_h - nc * mean_h * mean_h) / (nc - 1.0);
    let var_l = (sumsq_l - nc * mean_l * mean_l) / (nc - 1.0);
    let user_var = m_hat * (1.0 - m_hat) / nu;
    let std_err =
        |mean_a: f64, var_a: f64| (m_hat * m_hat * var_a / nc + mean_a * mean_a * user_var).sqrt();

    McEstimate {
        d_h_hat: m_hat * mean_h,
        d_l_hat: m_hat * mean_l,
        std_err_h: std_err(mean_h, var_h),
        std_err_l: std_err(mean_l, var_l),
        n_users,
        n_cps,
        seed,
    }
}

/// Solve the interior equilibrium by damped fixed-point iteration instead of
/// nested bisection: each step inverts the capacity requirement on the loads
/// implied by the current congestion pair, moving a `damping` fraction of
/// the way. Convergence is declared on the capacity-balance residuals (not
/// on iterate movement, which can stall short of an equilibrium); callers
/// retry with smaller damping on non-convergence.
pub fn fixed_point_equilibrium(
    model: &MarketModel,
    strategy: &Strategy,
    damping: f64,
    max_iter: u32,
) -> Result<Equilibrium> {
    model.validate()?;
    strategy.validate()?;
    let (p, q, r) = (strategy.p, strategy.q, strategy.r);
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidInput(
            "fixed-point iteration needs an interior allocation",
        ));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::InvalidInput("damping must lie in (0, 1]"));
    }
    if model.user_population(p) <= 0.0 {
        return Err(Error::ZeroPopulation { p });
    }
    let c = model.c;
    let cap = model.capacity;
    let tol = 1e-9 * c;
    const FLOOR: f64 = 1e-12;

    let mut phi_h = 0.25;
    let mut phi_l = 0.75;
    for _ in 0..max_iter {
        let (d_h, d_l) = loads_at(model, p, q, phi_h, phi_l);
        let res_h = (d_h * cap.h(phi_h) - r * c).abs();
        let res_l = (d_l * cap.h(phi_l) - (1.0 - r) * c).abs();
        if res_h <= tol && res_l <= tol {
            let g_h = model.gain.g(phi_h);
            let g_l = model.gain.g(phi_l);
            let t = g_l / g_h;
            return Ok(Equilibrium {
                phi_h,
                phi_l,
                d_h,
                d_l,
                v_threshold: q / (1.0 - t),
                t,
                residual_h: res_h,
                residual_l: res_l,
            });
        }
        let tgt_h = if d_h > 0.0 {
            cap.h_inverse(r * c / d_h)
        } else {
            FLOOR
        };
        let tgt_l = if d_l > 0.0 {
            cap.h_inverse((1.0 - r) * c / d_l)
        } else {
            1.0
        };
        let tgt_h = tgt_h.max(FLOOR).min(1.0);
        let tgt_l = tgt_l.max(FLOOR).min(1.0);
        let mut nh = (1.0 - damping) * phi_h + damping * tgt_h;
        let nl = (1.0 - damping) * phi_l + damping * tgt_l;
        // Keep the paid tier strictly less congested; the map can overshoot
        // the ordering during early transients.
        if nh >= nl {
            nh = 0.999 * nl;
        }
        phi_h = nh;
        phi_l = nl;
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
    })
}

/// Exhaustively maximize an objective on a lattice: cell-centered price
/// grids inside the box, an endpoint-inclusive allocation grid, infeasible
/// points skipped, ties broken exactly as the pattern-search optimizer
/// breaks them.
pub fn brute_force_optimum(
    model: &MarketModel,
    objective: Objective,
    grid: (usize, usize, usize),
    search_box: &SearchBox,
    settings: &SolverSettings,
) -> Result<(Strategy, f64)> {
    let (np, nq, nr) = grid;
    debug_assert!(
        np >= 20 && nq >= 20 && nr >= 11,
        "grid contract: at least 20x20x11"
    );
    let mut best: Option<(f64, [f64; 3])> = None;
    for i in 0..np {
        let p =
            search_box.p_lo + (search_box.p_hi - search_box.p_lo) * (i as f64 + 0.5) / np as f64;
        for j in 0..nq {
            let q = search_box.q_lo
                + (search_box.q_hi - search_box.q_lo) * (j as f64 + 0.5) / nq as f64;
            for l in 0..nr {
                let r = l as f64 / (nr - 1) as f64;
                let Ok(strategy) = Strategy::new(p, q, r) else {
                    continue;
                };
                let Ok(v) = objective_value(model, &strategy, settings) else {
                    continue;
                };
                let value = match objective {
                    Objective::Profit => v.profit,
                    Objective::Welfare => v.welfare,
                };
                let x = [p, q, r];
                let better = match &best {
                    None => true,
                    Some((bv, bx)) => {
                        value > bv + 1e-10 || (value > bv - 1e-10 && tie_pref(&x, bx))
                    }
                };
                if better {
                    best = Some((value, x));
                }
            }
        }
    }
    let (value, x) = best.ok_or(Error::Infeasible)?;
    Ok((Strategy::new(x[0], x[1], x[2])?, value))
}
