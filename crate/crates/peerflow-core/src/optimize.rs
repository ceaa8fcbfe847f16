//! Derivative-free maximization of profit and welfare over strategies, the
//! capacity-constrained welfare variant, and numeric checkers for the
//! sufficient conditions that pin the optimal allocation to a boundary.
//!
//! The search is a multi-start compass/pattern search over `(p, q, r)` with
//! dedicated subsearches on the `r = 0` and `r = 1` boundary slices, so
//! boundary optima are found exactly rather than approached from inside.
//! Objectives are smooth but each evaluation runs the nested-bisection
//! solver, which makes gradient estimation needlessly expensive.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;
use core::cell::Cell;

use crate::equilibrium::{solve_equilibrium, Equilibrium, SolverSettings};
use crate::model::{MarketModel, Strategy};
use crate::numeric::golden_max;
use crate::objectives::{objective_value, profit_foc, welfare_foc, FocResiduals};
use crate::{Error, Result};

/// Which objective a search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Profit,
    Welfare,
}

/// Classification of an optimal allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// All capacity on the paid tier (`r >= 1 - 1e-6`).
    PurePaid,
    /// All capacity on the free tier (`r <= 1e-6`).
    PureFree,
    /// A genuinely split allocation.
    Hybrid,
}

impl Regime {
    /// Classify an allocation share.
    pub fn classify(r: f64) -> Regime {
        if r >= 1.0 - 1e-6 {
            Regime::PurePaid
        } else if r <= 1e-6 {
            Regime::PureFree
        } else {
            Regime::Hybrid
        }
    }
}

/// Price rectangle searched by the optimizers (`r` always spans `[0, 1]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub p_lo: f64,
    pub p_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
}

impl SearchBox {
    /// Default box: prices from a tenth of marginal cost up to the top of
    /// each valuation support (its 0.999 quantile when unbounded).
    pub fn default_for(model: &MarketModel) -> SearchBox {
        let cap = |d: &crate::dist::Distribution| {
            let top = d.support_upper();
            if top.is_finite() {
                top
            } else {
                d.quantile(0.999)
            }
        };
        SearchBox {
            p_lo: 0.1 * model.k,
            p_hi: cap(&model.f_u),
            q_lo: 0.1 * model.k,
            q_hi: cap(&model.f_v),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.p_lo > 0.0
            && self.q_lo > 0.0
            && self.p_hi > self.p_lo
            && self.q_hi > self.q_lo
            && self.p_hi.is_finite()
            && self.q_hi.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "search box must be bounded with positive lower edges",
            ))
        }
    }
}

/// Result of a strategy-space maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumReport {
    pub strategy: Strategy,
    /// Objective value at `strategy`.
    pub objective: f64,
    pub equilibrium: Equilibrium,
    /// Stationarity residuals at the optimum; entries whose branch does not
    /// apply (or cannot be evaluated at a boundary) are absent.
    pub foc: FocResiduals,
    pub regime: Regime,
    /// Objective evaluations spent.
    pub n_evals: u64,
    /// Gap between the best and worst converged multistart candidates; small
    /// values mean the starts agree on the basin.
    pub multistart_spread: f64,
}

/// Result of the capacity-constrained welfare maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedOptimum {
    pub p: f64,
    pub q: f64,
    /// Welfare at the constrained optimum.
    pub welfare: f64,
    /// Profit at the constrained optimum (the constraint quantity).
    pub profit: f64,
    /// True when the positivity constraint is active at the solution
    /// (profit below 1e-6).
    pub binding: bool,
}

/// Numeric verdicts on the sufficient conditions for boundary optima.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionReport {
    /// The capacity-cost profile `H(phi) (e^H/e^G + 1)` rises strictly across
    /// the scan grid; implies the profit optimum allocates everything to the
    /// paid tier.
    pub paid_dominance_increasing: bool,
    /// The same profile falls strictly; implies the welfare optimum keeps
    /// everything on the free tier.
    pub free_dominance_decreasing: bool,
    /// Every user-side hazard rate on the scan grid sits strictly below
    /// every CP-side hazard rate; implies the profit optimum is hybrid.
    pub hazard_separation: bool,
    /// Grid resolution used for the scans.
    pub scan_points: u32,
}

/// Lexicographic preference used to break objective ties: smaller `r`,
/// then smaller `q`, then smaller `p`. Keeps optimizer output deterministic
/// on flat regions.
pub(crate) fn tie_pref(a: &[f64; 3], b: &[f64; 3]) -> bool {
    (a[2], a[1], a[0]) < (b[2], b[1], b[0])
}

/// Compass/pattern search maximizing `f` (None = infeasible) within a box,
/// with per-coordinate initial steps halved on stall until `min_step`.
/// Coordinates marked frozen are never moved. Only strict improvements are
/// accepted, so the walk terminates.
fn pattern_search<F: Fn(&[f64; 3]) -> Option<f64>>(
    f: &F,
    x0: [f64; 3],
    lo: [f64; 3],
    hi: [f64; 3],
    frozen: [bool; 3],
    step0: [f64; 3],
    min_step: f64,
) -> Option<([f64; 3], f64)> {
    let mut x = x0;
    let mut fx = f(&x)?;
    let mut steps = step0;
    loop {
        let widest = (0..3)
            .filter(|&i| !frozen[i])
            .map(|i| steps[i])
            .fold(0.0f64, f64::max);
        if widest <= min_step {
            break;
        }
        let mut moved = false;
        for i in 0..3 {
            if frozen[i] {
                continue;
            }
            for sgn in [1.0, -1.0] {
                let mut cand = x;
                cand[i] = (cand[i] + sgn * steps[i]).max(lo[i]).min(hi[i]);
                if cand[i] == x[i] {
                    continue;
                }
                if let Some(fc) = f(&cand) {
                    if fc > fx {
                        x = cand;
                        fx = fc;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            for s in &mut steps {
                *s *= 0.5;
            }
        }
    }
    Some((x, fx))
}

fn maximize_inner(
    model: &MarketModel,
    objective: Objective,
    search_box: &SearchBox,
    settings: &SolverSettings,
) -> Result<OptimumReport> {
    model.validate()?;
    search_box.validate()?;
    let SearchBox {
        p_lo,
        p_hi,
        q_lo,
        q_hi,
    } = *search_box;
    let evals = Cell::new(0u64);
    let f3 = |x: &[f64; 3]| -> Option<f64> {
        evals.set(evals.get() + 1);
        let s = Strategy::new(x[0], x[1], x[2]).ok()?;
        let v = objective_value(model, &s, settings).ok()?;
        Some(match objective {
            Objective::Profit => v.profit,
            Objective::Welfare => v.welfare,
        })
    };

    let clamp_p = |v: f64| v.max(p_lo).min(p_hi);
    let clamp_q = |v: f64| v.max(q_lo).min(q_hi);
    let seeds_p = [0.25, 0.5, 0.75].map(|u| clamp_p(model.f_u.quantile(u)));
    let seeds_q = [0.25, 0.5, 0.75].map(|u| clamp_q(model.f_v.quantile(u)));

    // Score the full lattice, then refine the most promising starts.
    let mut scored: Vec<(f64, [f64; 3])> = Vec::new();
    for &sp in &seeds_p {
        for &sq in &seeds_q {
            for sr in [0.05, 0.5, 0.95] {
                let x = [sp, sq, sr];
                if let Some(v) = f3(&x) {
                    scored.push((v, x));
                }
            }
        }
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("objective values are finite"));

    let lo = [p_lo, q_lo, 0.0];
    let hi = [p_hi, q_hi, 1.0];
    let step0 = [(p_hi - p_lo) / 8.0, (q_hi - q_lo) / 8.0, 0.125];
    let mut cands: Vec<(f64, [f64; 3])> = Vec::new();
    for &(_, x0) in scored.iter().take(8) {
        if let Some((x, fx)) = pattern_search(&f3, x0, lo, hi, [false; 3], step0, 1e-6) {
            cands.push((fx, x));
        }
    }

    // Boundary slice: the theorems make the r in {0, 1} classification the
    // headline result, so those slices get their own exact 2-D searches.
    let boundary_r = match objective {
        Objective::Profit => 1.0,
        Objective::Welfare => 0.0,
    };
    for &sp in &seeds_p {
        for &sq in &seeds_q {
            let x0 = [sp, sq, boundary_r];
            let step_b = [step0[0], step0[1], 0.0];
            if let Some((x, fx)) =
                pattern_search(&f3, x0, lo, hi, [false, false, true], step_b, 1e-6)
            {
                cands.push((fx, x));
            }
        }
    }
    if cands.is_empty() {
        return Err(Error::Infeasible);
    }

    let mut best = cands[0];
    let mut worst = cands[0].0;
    for &(fx, x) in &cands[1..] {
        worst = worst.min(fx);
        if fx > best.0 + 1e-10 || (fx > best.0 - 1e-10 && tie_pref(&x, &best.1)) {
            best = (fx, x);
        }
    }
    let spread = best.0 - worst;

    match objective {
        Objective::Profit => {
            // A profit optimum never sits at r = 0; give a hybrid restart a
            // chance to displace a spurious boundary hit.
            if best.1[2] < 1e-6 {
                let x0 = [best.1[0], best.1[1], 0.3];
                let step_h = [(p_hi - p_lo) / 16.0, (q_hi - q_lo) / 16.0, 0.1];
                if let Some((x, fx)) = pattern_search(&f3, x0, lo, hi, [false; 3], step_h, 1e-6) {
                    if fx > best.0 - 1e-10 {
                        best = (fx, x);
                    }
                }
            }
        }
        Objective::Welfare => {
            // Welfare is nearly flat in p along the free-tier slice; a 1-D
            // golden pass sharpens the price beyond pattern-search stalls.
            if best.1[2] <= 1e-6 {
                let q0 = best.1[1];
                if let Some((pm, fm)) = golden_max(|p| f3(&[p, q0, 0.0]), p_lo, p_hi, 60) {
                    if fm > best.0 {
                        best = (fm, [pm, q0, 0.0]);
                    }
                }
            }
        }
    }

    let strategy = Strategy::new(best.1[0], best.1[1], best.1[2])?;
    let equilibrium = solve_equilibrium(model, &strategy, settings)?;
    let foc = match objective {
        Objective::Profit => profit_foc(model, &strategy, settings),
        Objective::Welfare => welfare_foc(model, &strategy, settings),
    }
    .unwrap_or_default();
    Ok(OptimumReport {
        strategy,
        objective: best.0,
        equilibrium,
        foc,
        regime: Regime::classify(strategy.r),
        n_evals: evals.get(),
        multistart_spread: spread,
    })
}

/// Maximize operator profit over the box. The returned report carries the
/// profit stationarity residuals evaluated at the optimum.
pub fn maximize_profit(
    model: &MarketModel,
    search_box: &SearchBox,
    settings: &SolverSettings,
) -> Result<OptimumReport> {
    maximize_inner(model, Objective::Profit, search_box, settings)
}

/// Maximize user welfare over the box.
pub fn maximize_welfare(
    model: &MarketModel,
    search_box: &SearchBox,
    settings: &SolverSettings,
) -> Result<OptimumReport> {
    maximize_inner(model, Objective::Welfare, search_box, settings)
}

/// Maximize welfare over prices at a fixed allocation share, subject to
/// nonnegative operator profit (`U >= 1e-9`; the strict constraint has no
/// attained optimum).
///
/// The feasible price set at a given `q` is an interval in `p`, so the
/// search nests: an outer scan-and-refine over `q`, and for each `q` an
/// inner pass that brackets the feasibility interval in `p`, bisects its
/// endpoints onto the constraint boundary, and runs a golden section inside.
/// `anchor_q` adds one extra outer node (pass the profit-optimal `q` so the
/// known-feasible price is always tried).
pub fn maximize_welfare_constrained(
    model: &MarketModel,
    r_fixed: f64,
    search_box: &SearchBox,
    anchor_q: Option<f64>,
    settings: &SolverSettings,
) -> Result<ConstrainedOptimum> {
    model.validate()?;
    search_box.validate()?;
    if !(0.0..=1.0).contains(&r_fixed) {
        return Err(Error::InvalidInput(
            "fixed allocation share must lie in [0, 1]",
        ));
    }
    let SearchBox {
        p_lo,
        p_hi,
        q_lo,
        q_hi,
    } = *search_box;
    const FEAS_TOL: f64 = 1e-9;
    const NODES: usize = 32;

    let eval_uw = |p: f64, q: f64| -> Option<(f64, f64)> {
        let s = Strategy::new(p, q, r_fixed).ok()?;
        let v = objective_value(model, &s, settings).ok()?;
        Some((v.profit, v.welfare))
    };

    // Best feasible (welfare, p) at one q, or None when nothing qualifies.
    let inner_max = |q: f64| -> Option<(f64, f64)> {
        let node = |i: usize| p_lo + (p_hi - p_lo) * i as f64 / (NODES - 1) as f64;
        let feasible_at = |p: f64| eval_uw(p, q).map_or(false, |(u, _)| u >= FEAS_TOL);
        let mut first = None;
        let mut last = None;
        for i in 0..NODES {
            if feasible_at(node(i)) {
                if first.is_none() {
                    first = Some(i);
                }
                last = Some(i);
            }
        }
        let (i0, i1) = (first?, last?);
        // Sharpen both interval ends onto the constraint boundary.
        let mut lo_p = node(i0);
        if i0 > 0 {
            let (mut a, mut b) = (node(i0 - 1), lo_p);
            for _ in 0..45 {
                let m = 0.5 * (a + b);
                if feasible_at(m) {
                    b = m;
                } else {
                    a = m;
                }
            }
            lo_p = b;
        }
        let mut hi_p = node(i1);
        if i1 < NODES - 1 {
            let (mut a, mut b) = (hi_p, node(i1 + 1));
            for _ in 0..45 {
                let m = 0.5 * (a + b);
                if feasible_at(m) {
                    a = m;
                } else {
                    b = m;
                }
            }
            hi_p = a;
        }
        // Coarse scan inside the interval, then golden refine at the best node.
        let grid = |i: usize| lo_p + (hi_p - lo_p) * i as f64 / (NODES - 1) as f64;
        let mut best: Option<(f64, f64, usize)> = None;
        for i in 0..NODES {
            let pn = grid(i);
            match eval_uw(pn, q) {
                Some((u, w)) if u >= FEAS_TOL => {
                    let better = match best {
                        None => true,
                        Some((bw, bp, _)) => w > bw || (w == bw && pn < bp),
                    };
                    if better {
                        best = Some((w, pn, i));
                    }
                }
                _ => {}
            }
        }
        let (w_node, p_node, j) = best?;
        let a = grid(j.saturating_sub(1));
        let b = grid((j + 1).min(NODES - 1));
        let w_of =
            |p: f64| eval_uw(p, q).and_then(|(u, w)| if u >= FEAS_TOL { Some(w) } else { None });
        let refined = golden_max(w_of, a, b, 45);
        match refined {
            Some((pm, wm)) if wm > w_node || (wm == w_node && pm < p_node) => Some((wm, pm)),
            _ => Some((w_node, p_node)),
        }
    };

    let mut best: Option<(f64, f64, f64)> = None; // (W, p, q)
    let mut consider = |q: f64| {
        if let Some((w, p)) = inner_max(q) {
            let better = match best {
                None => true,
                Some((bw, bp, bq)) => {
                    w > bw + 1e-12 || ((w - bw).abs() <= 1e-12 && (q, p) < (bq, bp))
                }
            };
            if better {
                best = Some((w, p, q));
            }
        }
    };
    for i in 0..NODES {
        consider(q_lo + (q_hi - q_lo) * i as f64 / (NODES - 1) as f64);
    }
    if let Some(aq) = anchor_q {
        if (q_lo..=q_hi).contains(&aq) {
            consider(aq);
        }
    }
    let (mut w, mut p, mut q) = best.ok_or(Error::Infeasible)?;

    // 1-D pattern refinement over q.
    let mut step = (q_hi - q_lo) / (NODES - 1) as f64;
    while step > 1e-7 {
        let mut moved = false;
        for qc in [q - step, q + step] {
            let qc = qc.max(q_lo).min(q_hi);
            if qc == q {
                continue;
            }
            if let Some((wc, pc)) = inner_max(qc) {
                if wc > w {
                    w = wc;
                    p = pc;
                    q = qc;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }

    let (u, w_final) = eval_uw(p, q).ok_or(Error::Infeasible)?;
    Ok(ConstrainedOptimum {
        p,
        q,
        welfare: w_final,
        profit: u,
        binding: u < 1e-6,
    })
}

/// Scan the capacity-cost profile and the hazard rates to decide which
/// boundary-optimum sufficient conditions hold. Indeterminate scans report
/// false rather than failing; grids below 100 points are widened to 100.
pub fn check_conditions(model: &MarketModel, grid_size: u32) -> ConditionReport {
    let n = grid_size.max(100);
    let profile = |phi: f64| {
        model.capacity.h(phi) * (model.capacity.elasticity(phi) / model.gain.elasticity(phi) + 1.0)
    };
    let lo = 1e-3;
    let hi = 1.0 - 1e-3;
    let mut increasing = true;
    let mut decreasing = true;
    let mut prev = profile(lo);
    for i in 1..n {
        let phi = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let cur = profile(phi);
        if cur - prev <= 1e-9 {
            increasing = false;
        }
        if prev - cur <= 1e-9 {
            decreasing = false;
        }
        prev = cur;
    }

    // Hazard separation: every user hazard strictly below every CP hazard,
    // on interior grids of each support (unbounded tails cut at the 0.999
    // quantile).
    let hazard_range = |d: &crate::dist::Distribution| {
        let top = d.support_upper();
        let cap = if top.is_finite() {
            top
        } else {
            d.quantile(0.999)
        };
        (d.support_lower(), cap)
    };
    let (u_lo, u_hi) = hazard_range(&model.f_u);
    let (v_lo, v_hi) = hazard_range(&model.f_v);
    let mut sup_u = f64::NEG_INFINITY;
    let mut inf_v = f64::INFINITY;
    for i in 1..=n {
        let frac = i as f64 / (n + 1) as f64;
        sup_u = sup_u.max(model.f_u.hazard(u_lo + (u_hi - u_lo) * frac));
        inf_v = inf_v.min(model.f_v.hazard(v_lo + (v_hi - v_lo) * frac));
    }
    let hazard_separation = sup_u.is_finite() && sup_u + 1e-9 < inf_v;

    ConditionReport {
        paid_dominance_increasing: increasing,
        free_dominance_decreasing: decreasing,
        hazard_separation,
        scan_points: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Distribution;

    fn baseline() -> MarketModel {
        MarketModel::power_family(1.0, 1.0, 0.2, 0.2)
    }

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn regime_classification_thresholds() {
        assert_eq!(Regime::classify(0.0), Regime::PureFree);
        assert_eq!(Regime::classify(1e-7), Regime::PureFree);
        assert_eq!(Regime::classify(1e-5), Regime::Hybrid);
        assert_eq!(Regime::classify(0.5), Regime::Hybrid);
        assert_eq!(Regime::classify(1.0 - 1e-7), Regime::PurePaid);
        assert_eq!(Regime::classify(1.0), Regime::PurePaid);
    }

    #[test]
    fn default_box_spans_supports() {
        let b = SearchBox::default_for(&baseline());
        assert!((b.p_lo - 0.02).abs() < 1e-15 && (b.q_lo - 0.02).abs() < 1e-15);
        assert_eq!((b.p_hi, b.q_hi), (1.0, 1.0));
        let m = MarketModel {
            f_u: Distribution::Exponential { rate: 0.5 },
            ..baseline()
        };
        let b = SearchBox::default_for(&m);
        assert!((b.p_hi - (-(0.001f64).ln() / 0.5)).abs() < 1e-9);
    }

    #[test]
    fn profit_optimum_allocates_paid_capacity() {
        let m = baseline();
        let report = maximize_profit(&m, &SearchBox::default_for(&m), &settings()).unwrap();
        assert!(report.strategy.r > 0.0, "{report:?}");
        assert_ne!(report.regime, Regime::PureFree);
        // It must beat the best pure-free operating point.
        let free_best = golden_max(
            |p| {
                let s = Strategy::new(p, 0.3, 0.0).ok()?;
                crate::objectives::profit(&m, &s, &settings()).ok()
            },
            0.02,
            1.0,
            200,
        )
        .unwrap();
        assert!(
            report.objective > free_best.1,
            "hybrid {} vs pure-free {}",
            report.objective,
            free_best.1
        );
        assert!(report.n_evals > 27);
        assert!(report.multistart_spread >= 0.0);
    }

    #[test]
    fn welfare_optimum_stays_free_on_baseline() {
        let m = baseline();
        let report = maximize_welfare(&m, &SearchBox::default_for(&m), &settings()).unwrap();
        assert!(report.strategy.r <= 0.01, "{report:?}");
        assert_eq!(report.regime, Regime::PureFree);
        assert!(report.foc.welfare_r.unwrap() >= -1e-3);
    }

    #[test]
    fn optimizer_is_deterministic() {
        let m = baseline();
        let b = SearchBox::default_for(&m);
        let one = maximize_profit(&m, &b, &settings()).unwrap();
        let two = maximize_profit(&m, &b, &settings()).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn constrained_welfare_moves_prices_against_profit() {
        let m = baseline();
        let b = SearchBox::default_for(&m);
        let star = maximize_profit(&m, &b, &settings()).unwrap();
        let circ = maximize_welfare_constrained(
            &m,
            star.strategy.r,
            &b,
            Some(star.strategy.q),
            &settings(),
        )
        .unwrap();
        assert!(
            circ.p < star.strategy.p,
            "p {} vs p* {}",
            circ.p,
            star.strategy.p
        );
        assert!(
            circ.q > star.strategy.q,
            "q {} vs q* {}",
            circ.q,
            star.strategy.q
        );
        assert!(circ.profit >= 1e-9);
    }

    #[test]
    fn conditions_on_reference_families() {
        let base = check_conditions(&baseline(), 1000);
        assert!(base.free_dominance_decreasing);
        assert!(!base.paid_dominance_increasing);
        assert!(!base.hazard_separation);
        assert_eq!(base.scan_points, 1000);

        let separated = MarketModel {
            f_u: Distribution::Exponential { rate: 0.5 },
            f_v: Distribution::Uniform { lo: 0.0, hi: 1.0 },
            ..baseline()
        };
        let rep = check_conditions(&separated, 1000);
        assert!(rep.hazard_separation);

        // Identical hazards cannot be strictly separated.
        assert!(!check_conditions(&baseline(), 250).hazard_separation);
    }

    #[test]
    fn condition_booleans_are_mutually_exclusive() {
        for beta in [0.5, 1.0, 2.0] {
            let m = MarketModel::power_family(1.0, beta, 0.2, 0.2);
            let rep = check_conditions(&m, 500);
            assert!(!(rep.paid_dominance_increasing && rep.free_dominance_decreasing));
        }
    }

    #[test]
    fn tiny_grids_are_widened() {
        assert_eq!(check_conditions(&baseline(), 10).scan_points, 100);
    }
}
