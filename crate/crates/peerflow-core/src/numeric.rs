//! Scalar root finding and line search used by the equilibrium solver and the
//! optimizers. Bisection is preferred over Newton throughout: every function
//! handed to these routines is strictly monotone, so bracketing convergence is
//! guaranteed and iteration count is a non-issue at this scale.

use crate::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// How a bisection step picks the next probe point. The geometric variant
/// probes the geometric mean of the bracket, which resolves roots that sit
/// many orders of magnitude below the initial upper end in fewer effective
/// digits; it exists mainly so independent bracket strategies can be compared
/// when verifying solution uniqueness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Midpoint {
    Arithmetic,
    Geometric,
}

/// Find the root of a monotone `f` on `[lo, hi]` by bisection.
///
/// Stops as soon as `|f(x)| <= f_tol`, so the residual tolerance alone
/// controls the accuracy callers observe; `x_tol` is a secondary stop for
/// brackets that become too narrow to refine, and a collapsed bracket
/// (adjacent floats) ends the search unconditionally. Returns the best
/// midpoint after `max_iter` halvings otherwise.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    x_tol: f64,
    f_tol: f64,
    max_iter: u32,
    midpoint: Midpoint,
) -> Result<f64> {
    let mut flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let fhi = f(hi);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if (flo > 0.0) == (fhi > 0.0) {
        return Err(Error::NoBracket { lo, hi });
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        x = match midpoint {
            Midpoint::Geometric if lo > 0.0 => (lo * hi).sqrt(),
            _ => 0.5 * (lo + hi),
        };
        if x <= lo || x >= hi {
            // Bracket exhausted at floating-point resolution.
            return Ok(x.max(lo).min(hi));
        }
        let fx = f(x);
        if fx == 0.0 || fx.abs() <= f_tol || hi - lo <= x_tol {
            return Ok(x);
        }
        if (fx > 0.0) == (flo > 0.0) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
    }
    Ok(x)
}

/// Maximize a unimodal `f` on `[lo, hi]` by golden-section search.
///
/// `f` returns `None` at infeasible points, which are treated as worse than
/// any feasible value. Returns the midpoint of the final bracket and its
/// value, or `None` if nothing in the interval evaluated.
pub fn golden_max<F: Fn(f64) -> Option<f64>>(
    f: F,
    lo: f64,
    hi: f64,
    iters: u32,
) -> Option<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c1 = b - INV_PHI * (b - a);
    let mut c2 = a + INV_PHI * (b - a);
    let mut f1 = f(c1);
    let mut f2 = f(c2);
    for _ in 0..iters {
        let move_right = match (f1, f2) {
            (Some(v1), Some(v2)) => v2 > v1,
            (None, Some(_)) => true,
            _ => false,
        };
        if move_right {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + INV_PHI * (b - a);
            f2 = f(c2);
        } else {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - INV_PHI * (b - a);
            f1 = f(c1);
        }
    }
    let mid = 0.5 * (a + b);
    f(mid).map(|v| (mid, v))
}

/// Central-difference derivative with an adaptively shrinking step: the step
/// contracts by 10x (up to `max_shrink` times) whenever an endpoint leaves the
/// caller's feasible region or fails to evaluate.
pub fn central_diff<F: Fn(f64) -> Result<f64>>(
    f: F,
    x: f64,
    mut step: f64,
    max_shrink: u32,
    feasible: impl Fn(f64) -> bool,
) -> Result<f64> {
    let mut last_err = Error::Domain("empty finite-difference step");
    for _ in 0..=max_shrink {
        if !feasible(x - step) || !feasible(x + step) {
            step *= 0.1;
            continue;
        }
        match (f(x + step), f(x - step)) {
            (Ok(up), Ok(down)) => return Ok((up - down) / (2.0 * step)),
            (Err(e), _) | (_, Err(e)) => {
                last_err = e;
                step *= 0.1;
            }
        }
    }
    Err(last_err)
}
