//! Parameter sweep: at each grid point along one model axis, find the
//! profit-optimal strategy, then the welfare-best prices holding that
//! allocation fixed, and emit one CSV row. Points are evaluated on a small
//! thread pool; rows are buffered and written in grid order regardless of
//! completion order, so output is byte-identical run to run.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use peerflow_core::optimize::{maximize_profit, maximize_welfare_constrained};
use peerflow_core::{Distribution, Gain, MarketModel, SearchBox};

use crate::commands::{sig, wio, CliError};
use crate::config::{RunConfig, SweepAxis, SweepConfig};

/// Fixed column order; consumers key on this exact header line.
pub const CSV_HEADER: &str =
    "axis,axis_value,p_star,q_star,r_star,p_circ,q_circ,U_star,W_circ,phi_h,phi_l,d_h,d_l,status";

/// One sweep grid point. Numeric fields belonging to a failed stage hold NaN
/// and the status column names the stage and error.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub p_star: f64,
    pub q_star: f64,
    pub r_star: f64,
    pub p_circ: f64,
    pub q_circ: f64,
    pub u_star: f64,
    pub w_circ: f64,
    pub phi_h: f64,
    pub phi_l: f64,
    pub d_h: f64,
    pub d_l: f64,
    pub status: String,
}

impl SweepRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.axis.name(),
            sig(self.axis_value),
            sig(self.p_star),
            sig(self.q_star),
            sig(self.r_star),
            sig(self.p_circ),
            sig(self.q_circ),
            sig(self.u_star),
            sig(self.w_circ),
            sig(self.phi_h),
            sig(self.phi_l),
            sig(self.d_h),
            sig(self.d_l),
            self.status,
        )
    }
}

/// The configured model with the swept axis overridden.
pub fn model_at(cfg: &RunConfig, axis: SweepAxis, x: f64) -> MarketModel {
    let mut model = cfg.model();
    match axis {
        SweepAxis::Alpha => model.f_w = Distribution::Power { exponent: x },
        SweepAxis::Beta => model.gain = Gain::Power { beta: x },
        SweepAxis::C => model.c = x,
    }
    model
}

fn sweep_point(cfg: &RunConfig, axis: SweepAxis, x: f64) -> SweepRecord {
    let nan = f64::NAN;
    let mut rec = SweepRecord {
        axis,
        axis_value: x,
        p_star: nan,
        q_star: nan,
        r_star: nan,
        p_circ: nan,
        q_circ: nan,
        u_star: nan,
        w_circ: nan,
        phi_h: nan,
        phi_l: nan,
        d_h: nan,
        d_l: nan,
        status: String::new(),
    };
    let model = model_at(cfg, axis, x);
    if let Err(e) = model.validate() {
        rec.status = format!("model:{}", e.name());
        return rec;
    }
    let search = SearchBox::default_for(&model);
    let star = match maximize_profit(&model, &search, &cfg.solver) {
        Ok(report) => report,
        Err(e) => {
            rec.status = format!("profit:{}", e.name());
            return rec;
        }
    };
    rec.p_star = star.strategy.p;
    rec.q_star = star.strategy.q;
    rec.r_star = star.strategy.r;
    rec.u_star = star.objective;
    rec.phi_h = star.equilibrium.phi_h;
    rec.phi_l = star.equilibrium.phi_l;
    rec.d_h = star.equilibrium.d_h;
    rec.d_l = star.equilibrium.d_l;
    let constrained = maximize_welfare_constrained(
        &model,
        star.strategy.r,
        &search,
        Some(star.strategy.q),
        &cfg.solver,
    );
    match constrained {
        Ok(circ) => {
            rec.p_circ = circ.p;
            rec.q_circ = circ.q;
            rec.w_circ = circ.welfare;
            rec.status = "ok".to_string();
        }
        Err(e) => rec.status = format!("welfare:{}", e.name()),
    }
    rec
}

/// Evaluate every grid point (concurrently) and write the CSV.
pub fn cmd_sweep(
    cfg: &RunConfig,
    sweep: &SweepConfig,
    out: &mut dyn Write,
) -> Result<u8, CliError> {
    if sweep.points < 2 {
        return Err(CliError::Config(
            "sweep needs at least 2 grid points".to_string(),
        ));
    }
    if !(sweep.from.is_finite() && sweep.to.is_finite() && sweep.from < sweep.to) {
        return Err(CliError::Config(
            "sweep range must be finite with from < to".to_string(),
        ));
    }
    if sweep.axis == SweepAxis::Alpha && !matches!(cfg.f_w, Distribution::Power { .. }) {
        return Err(CliError::Config(
            "alpha sweeps the demand-weight exponent, which requires f_w.family = power"
                .to_string(),
        ));
    }

    let n = sweep.points as usize;
    let xs: Vec<f64> = (0..n)
        .map(|i| sweep.from + (sweep.to - sweep.from) * i as f64 / (n - 1) as f64)
        .collect();
    let slots: Vec<Mutex<Option<SweepRecord>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|v| v.get())
        .unwrap_or(1)
        .min(n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let record = sweep_point(cfg, sweep.axis, xs[i]);
                *slots[i].lock().unwrap() = Some(record);
            });
        }
    });

    writeln!(out, "{CSV_HEADER}").map_err(wio)?;
    for slot in slots {
        let record = slot
            .into_inner()
            .unwrap()
            .expect("every sweep slot is filled");
        writeln!(out, "{}", record.csv_line()).map_err(wio)?;
    }
    Ok(0)
}
