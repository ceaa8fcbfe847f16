//! Command implementations. Each command writes a deterministic plain-text
//! report to the supplied writer and maps failures onto the process exit
//! contract: 0 success, 1 failed validation, 2 configuration problem,
//! 3 solver error (reported by its stable error name).

use std::fmt;
use std::io::Write;

use peerflow_core::equilibrium::inner_congestion;
use peerflow_core::model::loads_at;
use peerflow_core::numeric::central_diff;
use peerflow_core::objectives::objective_value;
use peerflow_core::optimize::{
    check_conditions, maximize_profit, maximize_welfare, maximize_welfare_constrained,
};
use peerflow_core::oracle::{fixed_point_equilibrium, mc_loads};
use peerflow_core::sensitivity::analytic_sensitivities;
use peerflow_core::{
    solve_equilibrium, Equilibrium, MarketModel, OptimumReport, Regime, SearchBox, SolverSettings,
    Strategy,
};

use crate::config::RunConfig;

/// Failure categories, carrying the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or command line (exit 2).
    Config(String),
    /// Filesystem problem on input or output paths (exit 2).
    Io(String),
    /// The model could not be solved or optimized (exit 3).
    Solver(peerflow_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Io(msg) => write!(f, "io: {msg}"),
            CliError::Solver(e) => write!(f, "{}: {e}", e.name()),
        }
    }
}

pub(crate) fn wio(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Twelve-significant-digit rendering used for every numeric field, chosen
/// for bit-exact reproducibility across platforms.
pub fn sig(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt_sig(x: Option<f64>) -> String {
    match x {
        Some(v) => sig(v),
        None => "none".to_string(),
    }
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::PurePaid => "pure-paid",
        Regime::PureFree => "pure-free",
        Regime::Hybrid => "hybrid",
    }
}

fn kv(
    out: &mut dyn Write,
    width: usize,
    key: &str,
    value: impl fmt::Display,
) -> Result<(), CliError> {
    writeln!(out, "{key:<width$} = {value}").map_err(wio)
}

/// Solve the equilibrium at a fixed strategy and print the market state
/// together with both objectives.
pub fn cmd_solve(
    cfg: &RunConfig,
    p: f64,
    q: f64,
    r: f64,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let model = cfg.model();
    let strategy = Strategy::new(p, q, r).map_err(CliError::Solver)?;
    let eq = solve_equilibrium(&model, &strategy, &cfg.solver).map_err(CliError::Solver)?;
    let obj = objective_value(&model, &strategy, &cfg.solver).map_err(CliError::Solver)?;
    let w = 11;
    kv(out, w, "phi_h", sig(eq.phi_h))?;
    kv(out, w, "phi_l", sig(eq.phi_l))?;
    kv(out, w, "d_h", sig(eq.d_h))?;
    kv(out, w, "d_l", sig(eq.d_l))?;
    kv(out, w, "v_threshold", sig(eq.v_threshold))?;
    kv(out, w, "t", sig(eq.t))?;
    kv(out, w, "profit", sig(obj.profit))?;
    kv(out, w, "welfare", sig(obj.welfare))?;
    kv(out, w, "residual_h", sig(eq.residual_h))?;
    kv(out, w, "residual_l", sig(eq.residual_l))?;
    Ok(0)
}

/// Objective selected on the `optimize` command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeObjective {
    Profit,
    Welfare,
    /// Welfare over prices with the allocation pinned at the profit optimum
    /// and nonnegative profit enforced.
    WelfareConstrained,
}

fn write_optimum(out: &mut dyn Write, name: &str, report: &OptimumReport) -> Result<(), CliError> {
    let w = 24;
    kv(out, w, "objective", name)?;
    kv(out, w, "p", sig(report.strategy.p))?;
    kv(out, w, "q", sig(report.strategy.q))?;
    kv(out, w, "r", sig(report.strategy.r))?;
    kv(out, w, "value", sig(report.objective))?;
    kv(out, w, "regime", regime_name(report.regime))?;
    kv(out, w, "phi_h", sig(report.equilibrium.phi_h))?;
    kv(out, w, "phi_l", sig(report.equilibrium.phi_l))?;
    kv(out, w, "d_h", sig(report.equilibrium.d_h))?;
    kv(out, w, "d_l", sig(report.equilibrium.d_l))?;
    kv(out, w, "n_evals", report.n_evals)?;
    kv(out, w, "multistart_spread", sig(report.multistart_spread))?;
    kv(out, w, "foc.profit_price", opt_sig(report.foc.profit_price))?;
    kv(
        out,
        w,
        "foc.profit_ratio_prices",
        opt_sig(report.foc.profit_ratio_prices),
    )?;
    kv(
        out,
        w,
        "foc.profit_ratio_alloc",
        opt_sig(report.foc.profit_ratio_alloc),
    )?;
    kv(
        out,
        w,
        "foc.profit_alloc_slack",
        opt_sig(report.foc.profit_alloc_slack),
    )?;
    kv(out, w, "foc.welfare_p", opt_sig(report.foc.welfare_p))?;
    kv(out, w, "foc.welfare_q", opt_sig(report.foc.welfare_q))?;
    kv(out, w, "foc.welfare_r", opt_sig(report.foc.welfare_r))?;
    Ok(())
}

/// Run the selected maximization and print the optimum report.
pub fn cmd_optimize(
    cfg: &RunConfig,
    objective: OptimizeObjective,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let model = cfg.model();
    let search = SearchBox::default_for(&model);
    match objective {
        OptimizeObjective::Profit => {
            let report = maximize_profit(&model, &search, &cfg.solver).map_err(CliError::Solver)?;
            write_optimum(out, "profit", &report)?;
        }
        OptimizeObjective::Welfare => {
            let report =
                maximize_welfare(&model, &search, &cfg.solver).map_err(CliError::Solver)?;
            write_optimum(out, "welfare", &report)?;
        }
        OptimizeObjective::WelfareConstrained => {
            let star = maximize_profit(&model, &search, &cfg.solver).map_err(CliError::Solver)?;
            let circ = maximize_welfare_constrained(
                &model,
                star.strategy.r,
                &search,
                Some(star.strategy.q),
                &cfg.solver,
            )
            .map_err(CliError::Solver)?;
            let w = 12;
            kv(out, w, "objective", "welfare-constrained")?;
            kv(out, w, "r_fixed", sig(star.strategy.r))?;
            kv(out, w, "p_star", sig(star.strategy.p))?;
            kv(out, w, "q_star", sig(star.strategy.q))?;
            kv(out, w, "u_star", sig(star.objective))?;
            kv(out, w, "p_circ", sig(circ.p))?;
            kv(out, w, "q_circ", sig(circ.q))?;
            kv(out, w, "welfare", sig(circ.welfare))?;
            kv(out, w, "profit", sig(circ.profit))?;
            kv(out, w, "binding", circ.binding)?;
        }
    }
    Ok(0)
}

/// Evaluate the boundary-regime conditions on a scan grid and print the
/// verdicts.
pub fn cmd_check_conditions(
    cfg: &RunConfig,
    grid: u32,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    let model = cfg.model();
    let report = check_conditions(&model, grid);
    let w = 25;
    kv(
        out,
        w,
        "paid_dominance_increasing",
        report.paid_dominance_increasing,
    )?;
    kv(
        out,
        w,
        "free_dominance_decreasing",
        report.free_dominance_decreasing,
    )?;
    kv(out, w, "hazard_separation", report.hazard_separation)?;
    kv(out, w, "scan_points", report.scan_points)?;
    Ok(0)
}

/// Reference strategy the validation checks probe. Chosen interior so every
/// cross-check (tier split, sensitivities, fixed point) is exercised.
const CHECK_P: f64 = 0.5;
const CHECK_Q: f64 = 0.3;
const CHECK_R: f64 = 0.5;

fn base_eq<'a>(
    base: &'a Result<Equilibrium, peerflow_core::Error>,
) -> Result<&'a Equilibrium, String> {
    base.as_ref()
        .map_err(|e| format!("reference solve failed: {e}"))
}

fn check_mc(
    model: &MarketModel,
    base: &Result<Equilibrium, peerflow_core::Error>,
    seed: u64,
) -> Result<(), String> {
    let eq = base_eq(base)?;
    let mc = mc_loads(
        model, CHECK_P, CHECK_Q, eq.phi_h, eq.phi_l, 200_000, 200_000, seed,
    );
    let cases = [
        ("d_h", mc.d_h_hat, eq.d_h, mc.std_err_h),
        ("d_l", mc.d_l_hat, eq.d_l, mc.std_err_l),
    ];
    for (name, got, want, std_err) in cases {
        let bound = 3.0 * std_err + 1e-12;
        let gap = (got - want).abs();
        if gap > bound {
            return Err(format!("{name} off by {gap:.2e}, allowed {bound:.2e}"));
        }
    }
    Ok(())
}

fn check_fixed_point(
    model: &MarketModel,
    strategy: &Strategy,
    base: &Result<Equilibrium, peerflow_core::Error>,
) -> Result<(), String> {
    let eq = base_eq(base)?;
    let mut last = String::new();
    for damping in [0.3, 0.09, 0.03, 0.009] {
        match fixed_point_equilibrium(model, strategy, damping, 20_000) {
            Ok(fp) => {
                let gap = (fp.phi_h - eq.phi_h).abs().max((fp.phi_l - eq.phi_l).abs());
                if gap <= 1e-6 {
                    return Ok(());
                }
                return Err(format!("congestion gap {gap:.2e} exceeds 1e-6"));
            }
            Err(e) => last = format!("iteration failed: {e}"),
        }
    }
    Err(last)
}

fn check_derivatives(
    model: &MarketModel,
    base: &Result<Equilibrium, peerflow_core::Error>,
    solver: &SolverSettings,
) -> Result<(), String> {
    let eq = base_eq(base)?;
    let t = eq.t;
    let report = analytic_sensitivities(model, CHECK_P, CHECK_Q, t, solver)
        .map_err(|e| format!("sensitivity evaluation failed: {e}"))?;
    // State of the fixed-gain-ratio subproblem; differentiating it directly
    // is an independent path to the same derivatives the closed forms give.
    let state = |p: f64, q: f64| -> peerflow_core::Result<(f64, f64, f64)> {
        let (phi_h, phi_l) = inner_congestion(model, p, q, t, solver)?;
        let (d_h, d_l) = loads_at(model, p, q, phi_h, phi_l);
        Ok((phi_h, d_h, d_l))
    };
    let pos = |x: f64| x > 0.0;
    let cases = [
        (
            "dphi_h/dp",
            central_diff(
                |x| state(x, CHECK_Q).map(|s| s.0),
                CHECK_P,
                1e-5 * CHECK_P,
                2,
                pos,
            ),
            report.dphi_h_dp,
        ),
        (
            "dd_h/dp",
            central_diff(
                |x| state(x, CHECK_Q).map(|s| s.1),
                CHECK_P,
                1e-5 * CHECK_P,
                2,
                pos,
            ),
            report.dd_h_dp,
        ),
        (
            "dphi_h/dq",
            central_diff(
                |x| state(CHECK_P, x).map(|s| s.0),
                CHECK_Q,
                1e-5 * CHECK_Q,
                2,
                pos,
            ),
            report.dphi_h_dq,
        ),
        (
            "dd_l/dq",
            central_diff(
                |x| state(CHECK_P, x).map(|s| s.2),
                CHECK_Q,
                1e-5 * CHECK_Q,
                2,
                pos,
            ),
            report.dd_l_dq,
        ),
    ];
    for (name, fd, analytic) in cases {
        let fd = fd.map_err(|e| format!("{name}: finite difference failed: {e}"))?;
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-9);
        if rel > 1e-4 {
            return Err(format!(
                "{name} mismatch: closed form {analytic:.6e}, fd {fd:.6e}"
            ));
        }
    }
    Ok(())
}

/// Search box widened toward the price floors so boundary-regime checks are
/// not confounded by a truncated feasible region.
fn widened_box(model: &MarketModel) -> SearchBox {
    let b = SearchBox::default_for(model);
    SearchBox {
        p_lo: 1e-3 * b.p_hi,
        q_lo: 1e-4 * b.q_hi,
        ..b
    }
}

fn check_condition_regime(model: &MarketModel, solver: &SolverSettings) -> Result<(), String> {
    let report = check_conditions(model, 1000);
    let search = widened_box(model);
    let star = maximize_profit(model, &search, solver)
        .map_err(|e| format!("profit optimization failed: {e}"))?;
    if star.regime == Regime::PureFree {
        return Err("profit optimum landed in the free-only regime".to_string());
    }
    if report.paid_dominance_increasing && star.regime != Regime::PurePaid {
        return Err(format!(
            "rising dominance profile but profit optimum keeps r = {}",
            sig(star.strategy.r)
        ));
    }
    if report.free_dominance_decreasing {
        let circ = maximize_welfare(model, &search, solver)
            .map_err(|e| format!("welfare optimization failed: {e}"))?;
        if circ.strategy.r > 0.01 {
            return Err(format!(
                "falling dominance profile but welfare optimum keeps r = {}",
                sig(circ.strategy.r)
            ));
        }
    }
    Ok(())
}

/// Cross-check the solver against the independent oracles and print a
/// pass/fail table. Returns exit code 0 when every check passes, 1 otherwise.
pub fn cmd_validate(cfg: &RunConfig, out: &mut dyn Write) -> Result<u8, CliError> {
    let model = cfg.model();
    let strategy = Strategy::new(CHECK_P, CHECK_Q, CHECK_R).map_err(CliError::Solver)?;
    let base = solve_equilibrium(&model, &strategy, &cfg.solver);

    let checks: [(&str, Result<(), String>); 4] = [
        ("mc-loads", check_mc(&model, &base, cfg.seed)),
        ("fixed-point", check_fixed_point(&model, &strategy, &base)),
        (
            "derivative-fd",
            check_derivatives(&model, &base, &cfg.solver),
        ),
        (
            "condition-regime",
            check_condition_regime(&model, &cfg.solver),
        ),
    ];

    writeln!(out, "{:<18}result", "check").map_err(wio)?;
    let mut all_pass = true;
    for (name, result) in &checks {
        match result {
            Ok(()) => writeln!(out, "{name:<18}pass").map_err(wio)?,
            Err(msg) => {
                all_pass = false;
                writeln!(out, "{name:<18}fail ({msg})").map_err(wio)?;
            }
        }
    }
    writeln!(
        out,
        "{:<18}{}",
        "overall",
        if all_pass { "pass" } else { "fail" }
    )
    .map_err(wio)?;
    Ok(if all_pass { 0 } else { 1 })
}
