//! Paired Monte Carlo comparisons of offline, myopic and DP policies.

use std::io::Write;
use std::path::PathBuf;

use gluepour_core::{
    check_feasibility, dp_solve, online_energy_step, online_throughput_step, simulate, solve_offline_energy,
    solve_offline_throughput, DpPolicy, ProblemKind, Scenario,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::format::sig6;
use crate::montecarlo::{gen_fading_scenario, FadingParams};

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "GLUEPOUR_WORKERS";

/// Objectives that have an online counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OnlineKind {
    Throughput,
    Energy,
}

impl From<OnlineKind> for ProblemKind {
    fn from(k: OnlineKind) -> Self {
        match k {
            OnlineKind::Throughput => ProblemKind::Throughput,
            OnlineKind::Energy => ProblemKind::Energy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Processing cost ε, μW.
    ProcessingCost,
    /// Mean energy arrival rate `E/2`, μJ per block.
    EnergyRate,
    /// Mean data arrival rate `B/2`, nats per block.
    DataRate,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::ProcessingCost => "processing_cost",
            SweepVariable::EnergyRate => "energy_rate",
            SweepVariable::DataRate => "data_rate",
        }
    }

    /// Generator parameters at sweep value `v`.
    pub fn apply(self, base: &FadingParams, v: f64) -> FadingParams {
        let mut p = base.clone();
        match self {
            SweepVariable::ProcessingCost => p.processing_cost = v,
            SweepVariable::EnergyRate => p.energy_max = 2.0 * v,
            SweepVariable::DataRate => p.data_max = 2.0 * v,
        }
        p
    }
}

/// Quantization of the DP baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpSettings {
    pub gain_levels: usize,
    /// μJ.
    pub battery_step: f64,
    /// nats.
    pub buffer_step: f64,
    pub state_cap: usize,
}

impl Default for DpSettings {
    fn default() -> Self {
        Self { gain_levels: 8, battery_step: 1.0, buffer_step: 0.01, state_cap: 2_000_000 }
    }
}

fn default_seeds() -> usize {
    1000
}

fn default_dp() -> Option<DpSettings> {
    Some(DpSettings::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: OnlineKind,
    pub sweep: SweepVariable,
    pub grid: Vec<f64>,
    pub params: FadingParams,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub first_seed: u64,
    /// `null` skips the DP baseline.
    #[serde(default = "default_dp")]
    pub dp: Option<DpSettings>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Throughput versus mean energy rate `E/2 ∈ {0.5, 1, …, 5}`.
    pub fn throughput_default() -> Self {
        Self {
            kind: OnlineKind::Throughput,
            sweep: SweepVariable::EnergyRate,
            grid: (1..=10).map(|j| 0.5 * j as f64).collect(),
            params: FadingParams::throughput(),
            seeds: default_seeds(),
            first_seed: 0,
            dp: default_dp(),
            output: None,
        }
    }

    /// Remaining energy versus mean data rate `B/2 ∈ {0.01, …, 0.09}`.
    pub fn energy_default() -> Self {
        Self {
            kind: OnlineKind::Energy,
            sweep: SweepVariable::DataRate,
            grid: (1..=9).map(|j| 0.01 * j as f64).collect(),
            params: FadingParams::energy(),
            ..Self::throughput_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.grid.is_empty() {
            return bad("sweep grid is empty");
        }
        if self.grid.iter().any(|v| !v.is_finite()) || self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("sweep grid must be finite and strictly increasing");
        }
        if self.seeds == 0 {
            return bad("seed count must be at least 1");
        }
        for &v in &self.grid {
            self.sweep.apply(&self.params, v).validate()?;
        }
        Ok(())
    }
}

/// Outcome of one seed at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// Offline feasibility (always true for throughput).
    pub feasible: bool,
    pub offline: f64,
    pub myopic: f64,
    /// `NaN` when no DP ran.
    pub dp: f64,
    pub myopic_overflow: f64,
    /// The online runs delivered every arrival.
    pub myopic_delivered: bool,
    pub dp_delivered: bool,
    pub error: Option<String>,
}

/// Offline optimum on a realization. Energy returns `None` when infeasible.
pub fn offline_value(s: &Scenario, kind: OnlineKind) -> gluepour_core::Result<Option<f64>> {
    match kind {
        OnlineKind::Throughput => Ok(Some(solve_offline_throughput(s)?.throughput)),
        OnlineKind::Energy => {
            if !check_feasibility(s)?.feasible {
                return Ok(None);
            }
            Ok(Some(solve_offline_energy(s)?.remaining_energy))
        }
    }
}

/// Objective of an online trace; energy runs that leave data behind score 0.
fn score(kind: OnlineKind, t: &gluepour_core::Trace) -> f64 {
    match kind {
        OnlineKind::Throughput => t.throughput,
        OnlineKind::Energy if t.feasible => t.remaining_energy,
        OnlineKind::Energy => 0.0,
    }
}

/// Myopic policy trace on one realization.
pub fn run_myopic(s: &Scenario, kind: OnlineKind) -> gluepour_core::Trace {
    let eps = s.processing_cost();
    let e_max = s.battery().limit().unwrap_or(f64::INFINITY);
    match kind {
        OnlineKind::Throughput => simulate(s, kind.into(), |st| online_throughput_step(st, eps, e_max)),
        OnlineKind::Energy => simulate(s, kind.into(), |st| online_energy_step(st, eps).allocation),
    }
}

pub fn run_dp(s: &Scenario, kind: OnlineKind, dp: &DpPolicy) -> gluepour_core::Trace {
    simulate(s, kind.into(), |st| dp.decide(st))
}

/// Evaluates every policy on the realization of `seed`.
pub fn evaluate_seed(seed: u64, kind: OnlineKind, params: &FadingParams, dp: Option<&DpPolicy>) -> SeedResult {
    let mut r = SeedResult {
        seed,
        feasible: false,
        offline: f64::NAN,
        myopic: f64::NAN,
        dp: f64::NAN,
        myopic_overflow: 0.0,
        myopic_delivered: false,
        dp_delivered: false,
        error: None,
    };
    let s = match gen_fading_scenario(seed, params) {
        Ok(s) => s,
        Err(e) => {
            r.error = Some(e.to_string());
            return r;
        }
    };
    match offline_value(&s, kind) {
        Ok(Some(v)) => {
            r.feasible = true;
            r.offline = v;
        }
        Ok(None) => {}
        Err(e) => {
            r.error = Some(e.to_string());
            return r;
        }
    }
    let t = run_myopic(&s, kind);
    r.myopic = score(kind, &t);
    r.myopic_overflow = t.total_overflow;
    r.myopic_delivered = t.feasible;
    if let Some(dp) = dp {
        let t = run_dp(&s, kind, dp);
        r.dp = score(kind, &t);
        r.dp_delivered = t.feasible;
    }
    r
}

/// Seeds whose online value exceeds the offline optimum.
pub fn dominance_violations(results: &[SeedResult]) -> usize {
    let tol = |off: f64| 1e-6 * (1.0 + off.abs());
    results
        .iter()
        .filter(|r| r.error.is_none() && r.feasible)
        .filter(|r| r.myopic > r.offline + tol(r.offline) || (!r.dp.is_nan() && r.dp > r.offline + tol(r.offline)))
        .count()
}

/// Aggregates of one sweep point. Means cover offline-feasible seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value: f64,
    pub seeds: usize,
    pub feasible_fraction: f64,
    pub offline_mean: f64,
    pub offline_stderr: f64,
    pub myopic_mean: f64,
    pub myopic_stderr: f64,
    pub dp_mean: f64,
    pub dp_stderr: f64,
    /// `1 − myopic_mean / offline_mean`.
    pub myopic_gap: f64,
    pub dp_gap: f64,
    pub dominance_violations: usize,
    pub errors: usize,
    /// Why the DP baseline is missing, if it is.
    pub dp_error: Option<String>,
}

/// Column names of the sweep CSV, in order.
pub const SWEEP_COLUMNS: [&str; 15] = [
    "variable",
    "value",
    "seeds",
    "feasible_fraction",
    "offline_mean",
    "offline_stderr",
    "myopic_mean",
    "myopic_stderr",
    "dp_mean",
    "dp_stderr",
    "myopic_gap",
    "dp_gap",
    "dominance_violations",
    "errors",
    "dp_error",
];

impl SweepRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.variable.name().into(),
            sig6(self.value),
            self.seeds.to_string(),
            sig6(self.feasible_fraction),
            sig6(self.offline_mean),
            sig6(self.offline_stderr),
            sig6(self.myopic_mean),
            sig6(self.myopic_stderr),
            sig6(self.dp_mean),
            sig6(self.dp_stderr),
            sig6(self.myopic_gap),
            sig6(self.dp_gap),
            self.dominance_violations.to_string(),
            self.errors.to_string(),
            self.dp_error.clone().unwrap_or_default(),
        ]
    }
}

/// Sample mean and standard error; `NaN` for an empty sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn summarize(variable: SweepVariable, value: f64, results: &[SeedResult], dp_error: Option<String>) -> SweepRow {
    let ok: Vec<&SeedResult> = results.iter().filter(|r| r.error.is_none()).collect();
    let used: Vec<&SeedResult> = ok.iter().copied().filter(|r| r.feasible).collect();
    let col = |f: fn(&SeedResult) -> f64| {
        let xs: Vec<f64> = used.iter().map(|r| f(r)).filter(|x| !x.is_nan()).collect();
        mean_stderr(&xs)
    };
    let (offline_mean, offline_stderr) = col(|r| r.offline);
    let (myopic_mean, myopic_stderr) = col(|r| r.myopic);
    let (dp_mean, dp_stderr) = col(|r| r.dp);
    let gap = |m: f64| if offline_mean > 0.0 { 1.0 - m / offline_mean } else { f64::NAN };
    SweepRow {
        variable,
        value,
        seeds: results.len(),
        feasible_fraction: if ok.is_empty() { f64::NAN } else { used.len() as f64 / ok.len() as f64 },
        offline_mean,
        offline_stderr,
        myopic_mean,
        myopic_stderr,
        dp_mean,
        dp_stderr,
        myopic_gap: gap(myopic_mean),
        dp_gap: gap(dp_mean),
        dominance_violations: dominance_violations(results),
        errors: results.len() - ok.len(),
        dp_error,
    }
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn configured_workers() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` inside a pool sized by [`WORKERS_ENV`].
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match configured_workers().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Solves the DP baseline for `params`.
pub fn build_dp(kind: OnlineKind, params: &FadingParams, settings: &DpSettings) -> gluepour_core::Result<DpPolicy> {
    let mut cfg = params.dp_config(kind.into());
    cfg.gain_levels = settings.gain_levels;
    cfg.battery_step = settings.battery_step;
    cfg.buffer_step = settings.buffer_step;
    cfg.state_cap = settings.state_cap;
    dp_solve(&cfg)
}

/// Per-seed results at one sweep value, in seed order.
pub fn run_point(cfg: &ExperimentConfig, value: f64) -> (Vec<SeedResult>, Option<String>) {
    let params = cfg.sweep.apply(&cfg.params, value);
    let (dp, dp_error) = match &cfg.dp {
        None => (None, None),
        Some(d) => match build_dp(cfg.kind, &params, d) {
            Ok(p) => (Some(p), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|j| cfg.first_seed + j).collect();
    let results = seeds.par_iter().map(|&seed| evaluate_seed(seed, cfg.kind, &params, dp.as_ref())).collect();
    (results, dp_error)
}

/// One row per grid value, in grid order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    Ok(with_workers(|| {
        cfg.grid
            .iter()
            .map(|&v| {
                let (results, dp_error) = run_point(cfg, v);
                summarize(cfg.sweep, v, &results, dp_error)
            })
            .collect()
    }))
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Column names of the per-seed CSV, in order.
pub const SEED_COLUMNS: [&str; 9] =
    ["seed", "feasible", "offline", "online", "online_delivered", "online_overflow", "policy", "value", "error"];

pub fn write_seed_csv<W: Write>(out: W, policy: &str, value: f64, results: &[SeedResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SEED_COLUMNS)?;
    for r in results {
        let (online, delivered) = if policy == "dp" { (r.dp, r.dp_delivered) } else { (r.myopic, r.myopic_delivered) };
        w.write_record([
            r.seed.to_string(),
            r.feasible.to_string(),
            sig6(r.offline),
            sig6(online),
            delivered.to_string(),
            sig6(r.myopic_overflow),
            policy.to_string(),
            sig6(value),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Offline optimum and total airtime of a fixed scenario over a grid of
/// processing costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPoint {
    pub processing_cost: f64,
    /// Throughput (nats) or remaining energy (μJ); `NaN` when infeasible.
    pub objective: f64,
    /// Sum over epochs of the longest channel duration, s.
    pub airtime: f64,
}

pub fn cost_sweep(s: &Scenario, kind: OnlineKind, grid: &[f64]) -> Result<Vec<CostPoint>> {
    grid.par_iter()
        .map(|&eps| {
            let s = s.with_processing_cost(eps);
            let (objective, policy) = match kind {
                OnlineKind::Throughput => {
                    let r = solve_offline_throughput(&s)?;
                    (r.throughput, Some(r.policy))
                }
                OnlineKind::Energy => match check_feasibility(&s)?.feasible {
                    true => {
                        let r = solve_offline_energy(&s)?;
                        (r.remaining_energy, Some(r.policy))
                    }
                    false => (f64::NAN, None),
                },
            };
            let airtime = policy.map_or(f64::NAN, |p| p.total_airtime());
            Ok(CostPoint { processing_cost: eps, objective, airtime })
        })
        .collect()
}

pub fn write_cost_csv<W: Write>(out: W, points: &[CostPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["processing_cost", "objective", "airtime"])?;
    for p in points {
        w.write_record([sig6(p.processing_cost), sig6(p.objective), sig6(p.airtime)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: OnlineKind) -> ExperimentConfig {
        let mut cfg = match kind {
            OnlineKind::Throughput => ExperimentConfig::throughput_default(),
            OnlineKind::Energy => ExperimentConfig::energy_default(),
        };
        cfg.seeds = 6;
        cfg.grid.truncate(2);
        cfg.params.blocks = 4;
        cfg
    }

    #[test]
    fn single_seed_dominance() {
        let mut cfg = small(OnlineKind::Throughput);
        cfg.seeds = 1;
        cfg.grid = vec![2.0];
        let (res, err) = run_point(&cfg, 2.0);
        assert!(err.is_none());
        let r = &res[0];
        assert!(r.offline >= r.dp - 1e-9 && r.offline >= r.myopic - 1e-9, "{r:?}");
        assert!(r.dp >= 0.0);
    }

    #[test]
    fn sweep_rows_are_deterministic_and_ordered() {
        let cfg = small(OnlineKind::Throughput);
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_sweep_csv(&mut x, &a).unwrap();
        write_sweep_csv(&mut y, &b).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.len(), 2);
        assert!(a[0].value < a[1].value);
        assert!(a.iter().all(|r| r.dominance_violations == 0 && r.errors == 0));
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with(&SWEEP_COLUMNS.join(",")));
    }

    #[test]
    fn energy_sweep_reports_feasible_fraction() {
        let mut cfg = small(OnlineKind::Energy);
        cfg.dp = None;
        let rows = run_sweep(&cfg).unwrap();
        for r in &rows {
            assert!((0.0..=1.0).contains(&r.feasible_fraction));
            assert!(r.dp_mean.is_nan());
            assert_eq!(r.dominance_violations, 0);
        }
    }

    #[test]
    fn dp_failure_is_recorded_not_fatal() {
        let mut cfg = small(OnlineKind::Throughput);
        cfg.dp = Some(DpSettings { state_cap: 10, ..DpSettings::default() });
        let rows = run_sweep(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.dp_error.is_some() && r.offline_mean > 0.0));
    }

    #[test]
    fn rejects_bad_grids() {
        let mut cfg = small(OnlineKind::Throughput);
        cfg.grid = vec![1.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.grid = vec![];
        assert!(cfg.validate().is_err());
        cfg.grid = vec![6.0];
        assert!(cfg.validate().is_err(), "packets above the battery");
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(mean_stderr(&[]).0.is_nan());
    }
}
