//! Run configuration: a flat `key = value` text format (one pair per line,
//! `#` starts a comment) with namespaced keys such as `f_u.family` and
//! `gain.beta`. Parsing is strict: unknown keys, duplicate keys, and
//! malformed values are errors. `emit` produces a canonical rendering that
//! parses back to an identical configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use peerflow_core::numeric::Midpoint;
use peerflow_core::{Capacity, Distribution, Gain, MarketModel, SolverSettings};

/// Model parameter swept by the `sweep` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Exponent of the CP demand-weight distribution.
    Alpha,
    /// Gain-curvature parameter.
    Beta,
    /// Total capacity.
    C,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
            SweepAxis::C => "c",
        }
    }

    pub fn parse(s: &str) -> Result<SweepAxis, String> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "beta" => Ok(SweepAxis::Beta),
            "c" => Ok(SweepAxis::C),
            other => Err(format!(
                "unknown sweep axis `{other}` (expected alpha, beta, or c)"
            )),
        }
    }

    /// Built-in sweep range used when nothing more specific is configured.
    pub fn default_range(self) -> (f64, f64) {
        match self {
            SweepAxis::Alpha | SweepAxis::Beta => (0.25, 4.0),
            SweepAxis::C => (0.05, 0.8),
        }
    }
}

/// Grid specification for the `sweep` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub from: f64,
    pub to: f64,
    pub points: u32,
}

/// Complete run configuration: model families, economic constants, solver
/// tolerances, sweep grid, output destination, and the RNG seed used by the
/// validation cross-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub f_u: Distribution,
    pub f_v: Distribution,
    pub f_w: Distribution,
    pub gain: Gain,
    pub capacity: Capacity,
    pub c: f64,
    pub k: f64,
    pub solver: SolverSettings,
    pub sweep: SweepConfig,
    pub output: Option<String>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            f_u: Distribution::Power { exponent: 0.33 },
            f_v: Distribution::Power { exponent: 0.33 },
            f_w: Distribution::Power { exponent: 1.0 },
            gain: Gain::Power { beta: 1.0 },
            capacity: Capacity::InversePower { kappa: 1.0 },
            c: 0.2,
            k: 0.2,
            solver: SolverSettings::default(),
            sweep: SweepConfig {
                axis: SweepAxis::Alpha,
                from: 0.25,
                to: 4.0,
                points: 8,
            },
            output: None,
            seed: 42,
        }
    }
}

/// Key-value store with consumption tracking, so leftover keys can be
/// reported as errors after the known sections have claimed theirs.
struct Keys {
    map: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl Keys {
    fn get(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| format!("key `{key}`: invalid number `{s}`")),
        }
    }

    fn f64_required(&mut self, key: &str, why: &str) -> Result<f64, String> {
        self.f64(key)?
            .ok_or_else(|| format!("key `{key}` is required {why}"))
    }

    fn u32(&mut self, key: &str) -> Result<Option<u32>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<u32>()
                .map(Some)
                .map_err(|_| format!("key `{key}`: invalid integer `{s}`")),
        }
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| format!("key `{key}`: invalid integer `{s}`")),
        }
    }
}

fn parse_distribution(
    keys: &mut Keys,
    prefix: &str,
    default_power_exponent: f64,
) -> Result<Distribution, String> {
    let family = keys
        .get(&format!("{prefix}.family"))
        .unwrap_or_else(|| "power".to_string());
    match family.as_str() {
        "power" => {
            let exponent =
                keys.f64(&format!("{prefix}.exponent"))?.unwrap_or(default_power_exponent);
            Ok(Distribution::Power { exponent })
        }
        "exponential" => {
            let rate =
                keys.f64_required(&format!("{prefix}.rate"), "for the exponential family")?;
            Ok(Distribution::Exponential { rate })
        }
        "uniform" => {
            let lo = keys.f64_required(&format!("{prefix}.lo"), "for the uniform family")?;
            let hi = keys.f64_required(&format!("{prefix}.hi"), "for the uniform family")?;
            Ok(Distribution::Uniform { lo, hi })
        }
        other => Err(format!(
            "key `{prefix}.family`: unknown family `{other}` (expected power, exponential, or uniform)"
        )),
    }
}

impl RunConfig {
    /// Parse the flat key-value text format.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(format!("line {}: expected `key = value`", idx + 1));
            };
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() || value.is_empty() {
                return Err(format!("line {}: expected `key = value`", idx + 1));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(format!("line {}: duplicate key `{key}`", idx + 1));
            }
        }
        let mut keys = Keys {
            map,
            used: BTreeSet::new(),
        };
        let defaults = RunConfig::default();

        let f_u = parse_distribution(&mut keys, "f_u", 0.33)?;
        let f_v = parse_distribution(&mut keys, "f_v", 0.33)?;
        let f_w = parse_distribution(&mut keys, "f_w", 1.0)?;

        let gain = {
            let family = keys
                .get("gain.family")
                .unwrap_or_else(|| "power".to_string());
            if family != "power" {
                return Err(format!("key `gain.family`: unknown family `{family}`"));
            }
            Gain::Power {
                beta: keys.f64("gain.beta")?.unwrap_or(1.0),
            }
        };
        let capacity = {
            let family = keys
                .get("capacity.family")
                .unwrap_or_else(|| "inverse-power".to_string());
            if family != "inverse-power" {
                return Err(format!("key `capacity.family`: unknown family `{family}`"));
            }
            Capacity::InversePower {
                kappa: keys.f64("capacity.kappa")?.unwrap_or(1.0),
            }
        };

        let c = keys.f64("model.c")?.unwrap_or(defaults.c);
        let k = keys.f64("model.k")?.unwrap_or(defaults.k);

        let mut solver = SolverSettings::default();
        if let Some(v) = keys.f64("solver.inner_tol")? {
            solver.inner_tol = v;
        }
        if let Some(v) = keys.f64("solver.outer_tol")? {
            solver.outer_tol = v;
        }
        if let Some(v) = keys.f64("solver.t_clamp")? {
            solver.t_clamp = v;
        }
        if let Some(v) = keys.u32("solver.max_iter")? {
            solver.max_iter = v;
        }
        if let Some(v) = keys.f64("solver.bracket_floor")? {
            solver.bracket_floor = v;
        }
        if let Some(v) = keys.get("solver.midpoint") {
            solver.midpoint = match v.as_str() {
                "arithmetic" => Midpoint::Arithmetic,
                "geometric" => Midpoint::Geometric,
                other => {
                    return Err(format!(
                        "key `solver.midpoint`: unknown rule `{other}` (expected arithmetic or geometric)"
                    ))
                }
            };
        }

        let mut sweep = defaults.sweep;
        if let Some(v) = keys.get("sweep.axis") {
            sweep.axis = SweepAxis::parse(&v).map_err(|e| format!("key `sweep.axis`: {e}"))?;
            let (lo, hi) = sweep.axis.default_range();
            sweep.from = lo;
            sweep.to = hi;
        }
        if let Some(v) = keys.f64("sweep.from")? {
            sweep.from = v;
        }
        if let Some(v) = keys.f64("sweep.to")? {
            sweep.to = v;
        }
        if let Some(v) = keys.u32("sweep.points")? {
            sweep.points = v;
        }

        let output = keys.get("output.path");
        let seed = keys.u64("seed")?.unwrap_or(defaults.seed);

        let unused: Vec<String> = keys
            .map
            .keys()
            .filter(|k| !keys.used.contains(*k))
            .cloned()
            .collect();
        if !unused.is_empty() {
            return Err(format!("unrecognized or unused key `{}`", unused[0]));
        }

        let cfg = RunConfig {
            f_u,
            f_v,
            f_w,
            gain,
            capacity,
            c,
            k,
            solver,
            sweep,
            output,
            seed,
        };
        cfg.model()
            .validate()
            .map_err(|e| format!("invalid model: {e}"))?;
        if !(cfg.sweep.from.is_finite()
            && cfg.sweep.to.is_finite()
            && cfg.sweep.from < cfg.sweep.to)
        {
            return Err("sweep range must be finite with from < to".to_string());
        }
        Ok(cfg)
    }

    /// Read and parse a configuration file.
    pub fn load(path: &std::path::Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        RunConfig::parse(&text)
    }

    /// Canonical rendering; `parse(emit(cfg)) == cfg`. The binary itself
    /// only consumes configurations, so this is exercised by the round-trip
    /// tests and kept for tooling that generates config files.
    #[allow(dead_code)]
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# peerflow run configuration");
        emit_distribution(&mut s, "f_u", &self.f_u);
        emit_distribution(&mut s, "f_v", &self.f_v);
        emit_distribution(&mut s, "f_w", &self.f_w);
        let Gain::Power { beta } = self.gain;
        let _ = writeln!(s, "gain.family = power");
        let _ = writeln!(s, "gain.beta = {}", fmt_f64(beta));
        let Capacity::InversePower { kappa } = self.capacity;
        let _ = writeln!(s, "capacity.family = inverse-power");
        let _ = writeln!(s, "capacity.kappa = {}", fmt_f64(kappa));
        let _ = writeln!(s, "model.c = {}", fmt_f64(self.c));
        let _ = writeln!(s, "model.k = {}", fmt_f64(self.k));
        let _ = writeln!(s, "solver.inner_tol = {}", fmt_f64(self.solver.inner_tol));
        let _ = writeln!(s, "solver.outer_tol = {}", fmt_f64(self.solver.outer_tol));
        let _ = writeln!(s, "solver.t_clamp = {}", fmt_f64(self.solver.t_clamp));
        let _ = writeln!(s, "solver.max_iter = {}", self.solver.max_iter);
        let _ = writeln!(
            s,
            "solver.bracket_floor = {}",
            fmt_f64(self.solver.bracket_floor)
        );
        let midpoint = match self.solver.midpoint {
            Midpoint::Arithmetic => "arithmetic",
            Midpoint::Geometric => "geometric",
        };
        let _ = writeln!(s, "solver.midpoint = {midpoint}");
        let _ = writeln!(s, "sweep.axis = {}", self.sweep.axis.name());
        let _ = writeln!(s, "sweep.from = {}", fmt_f64(self.sweep.from));
        let _ = writeln!(s, "sweep.to = {}", fmt_f64(self.sweep.to));
        let _ = writeln!(s, "sweep.points = {}", self.sweep.points);
        if let Some(path) = &self.output {
            let _ = writeln!(s, "output.path = {path}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// Assemble the market model described by this configuration.
    pub fn model(&self) -> MarketModel {
        MarketModel {
            f_u: self.f_u,
            f_v: self.f_v,
            f_w: self.f_w,
            gain: self.gain,
            capacity: self.capacity,
            c: self.c,
            k: self.k,
        }
    }
}

fn emit_distribution(s: &mut String, prefix: &str, dist: &Distribution) {
    match dist {
        Distribution::Power { exponent } => {
            let _ = writeln!(s, "{prefix}.family = power");
            let _ = writeln!(s, "{prefix}.exponent = {}", fmt_f64(*exponent));
        }
        Distribution::Exponential { rate } => {
            let _ = writeln!(s, "{prefix}.family = exponential");
            let _ = writeln!(s, "{prefix}.rate = {}", fmt_f64(*rate));
        }
        Distribution::Uniform { lo, hi } => {
            let _ = writeln!(s, "{prefix}.family = uniform");
            let _ = writeln!(s, "{prefix}.lo = {}", fmt_f64(*lo));
            let _ = writeln!(s, "{prefix}.hi = {}", fmt_f64(*hi));
        }
    }
}

/// Shortest round-trip rendering, switching to exponent notation for small
/// magnitudes so tolerances stay readable.
fn fmt_f64(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = RunConfig::default();
        let parsed = RunConfig::parse(&cfg.emit()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn default_matches_reference_parameterization() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.model(), MarketModel::power_family(1.0, 1.0, 0.2, 0.2));
        assert_eq!(cfg.solver, SolverSettings::default());
    }

    #[test]
    fn empty_text_yields_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn exotic_families_round_trip() {
        let cfg = RunConfig {
            f_u: Distribution::Exponential { rate: 0.5 },
            f_v: Distribution::Uniform { lo: 0.0, hi: 1.0 },
            f_w: Distribution::Power { exponent: 2.0 },
            gain: Gain::Power { beta: 0.7 },
            capacity: Capacity::InversePower { kappa: 1.5 },
            c: 0.35,
            k: 0.1,
            solver: SolverSettings {
                inner_tol: 1e-10,
                midpoint: Midpoint::Geometric,
                ..SolverSettings::default()
            },
            sweep: SweepConfig {
                axis: SweepAxis::C,
                from: 0.05,
                to: 0.8,
                points: 12,
            },
            output: Some("out/run.csv".to_string()),
            seed: 7,
        };
        let parsed = RunConfig::parse(&cfg.emit()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "\n# leading comment\nmodel.c = 0.3   # trailing comment\n\nseed = 9\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.c, 0.3);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.k, 0.2);
    }

    #[test]
    fn axis_key_resets_range_to_axis_default() {
        let cfg = RunConfig::parse("sweep.axis = c\n").unwrap();
        assert_eq!(cfg.sweep.axis, SweepAxis::C);
        assert_eq!((cfg.sweep.from, cfg.sweep.to), (0.05, 0.8));
        let cfg = RunConfig::parse("sweep.axis = c\nsweep.from = 0.1\nsweep.to = 0.4\n").unwrap();
        assert_eq!((cfg.sweep.from, cfg.sweep.to), (0.1, 0.4));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let cases = [
            ("nonsense\n", "expected `key = value`"),
            ("model.c = fast\n", "invalid number"),
            ("model.c = 0.2\nmodel.c = 0.3\n", "duplicate key"),
            ("f_u.family = exponential\n", "f_u.rate"),
            ("f_u.family = cauchy\n", "unknown family"),
            ("gravity = 9.8\n", "unrecognized"),
            (
                "f_u.family = exponential\nf_u.rate = 0.5\nf_u.exponent = 0.33\n",
                "unused",
            ),
            ("sweep.axis = gamma\n", "unknown sweep axis"),
            ("model.c = -0.2\n", "invalid model"),
            ("sweep.from = 2\nsweep.to = 1\n", "from < to"),
            ("solver.midpoint = quadratic\n", "unknown rule"),
        ];
        for (text, needle) in cases {
            let err = RunConfig::parse(text).unwrap_err();
            assert!(err.contains(needle), "input {text:?} gave error {err:?}");
        }
    }

    #[test]
    fn small_tolerances_render_in_exponent_notation() {
        let cfg = RunConfig::default();
        let text = cfg.emit();
        assert!(text.contains("solver.inner_tol = 1e-12"), "{text}");
        assert!(text.contains("model.c = 0.2"), "{text}");
    }
}
