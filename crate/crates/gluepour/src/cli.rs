//! Command-line front end.
//!
//! Exit status: 0 on success, 1 when a solver fails or a check does not
//! pass, 2 on invalid input or usage.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gluepour_core::{
    audit_policy, check_feasibility, kkt_residuals, solve_offline_energy, solve_offline_throughput, solve_tct,
    verify_energy_structure, verify_throughput_structure, Policy, ProblemKind, Scenario,
};
use serde_json::{json, Value};

use crate::error::{HarnessError, Result};
use crate::experiment::{
    build_dp, cost_sweep, evaluate_seed, run_sweep, summarize, with_workers, write_cost_csv, write_seed_csv,
    write_sweep_csv, DpSettings, ExperimentConfig, OnlineKind, SweepVariable,
};
use crate::format::sig6;
use crate::golden::Registry;
use crate::io::{read_json, read_policy, read_scenario, PolicyFile};
use crate::montecarlo::FadingParams;

#[derive(Debug, Parser)]
#[command(name = "gluepour", version, about = "Transmission policies for energy-harvesting multi-channel transmitters")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ScenarioSource {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Scenario from the built-in registry.
    #[arg(long)]
    pub golden: Option<String>,
}

impl ScenarioSource {
    fn load(&self) -> Result<Scenario> {
        match (&self.scenario, &self.golden) {
            (Some(path), _) => read_scenario(path),
            (_, Some(name)) => Registry::builtin().scenario(name),
            _ => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: ScenarioSource,
    /// Replace the scenario's processing cost, μW.
    #[arg(long)]
    pub eps_override: Option<f64>,
    /// Write the policy to this JSON file.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

impl SolveArgs {
    fn load(&self) -> Result<Scenario> {
        let s = self.source.load()?;
        Ok(match self.eps_override {
            Some(e) => s.with_processing_cost(e),
            None => s,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Throughput,
    Energy,
    Tct,
}

impl From<KindArg> for ProblemKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Throughput => ProblemKind::Throughput,
            KindArg::Energy => ProblemKind::Energy,
            KindArg::Tct => ProblemKind::Tct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Myopic,
    Dp,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximize data delivered by the deadline.
    SolveThroughput(SolveArgs),
    /// Maximize energy left at the deadline while delivering all data.
    SolveEnergy(SolveArgs),
    /// Whether all data arrivals can be delivered by the deadline.
    CheckFeasibility(SolveArgs),
    /// Minimize the time to deliver all data.
    SolveTct(SolveArgs),
    /// Audit a policy and check its optimality conditions.
    Verify {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Tolerance for the structural and KKT checks.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Play an online policy on random realizations.
    SimulateOnline {
        #[arg(long, value_enum)]
        kind: OnlineKind,
        #[arg(long, value_enum)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1000)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Realization parameters (JSON); defaults depend on the kind.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-seed CSV; the aggregate row goes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep described by an experiment file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; overrides the file's `output`, else stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Offline objective and airtime of one scenario over processing costs.
    CostSweep {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long, value_enum, default_value = "throughput")]
        kind: OnlineKind,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the built-in registry of reference checks.
    Golden,
}

/// Parses `args` and runs the command, returning the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(out: &mut dyn Write, json: bool, value: Value, text: String) -> Result<()> {
    let r = if json { writeln!(out, "{}", serde_json::to_string_pretty(&value).expect("json")) } else { write!(out, "{text}") };
    r.map_err(|source| HarnessError::Io { path: "<stdout>".into(), source })
}

fn save_policy(path: Option<&Path>, p: &Policy) -> Result<()> {
    match path {
        Some(path) => crate::io::write_json(path, &PolicyFile::from(p)),
        None => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| HarnessError::Io { path: path.into(), source })
}

fn policy_json(p: &Policy) -> Value {
    json!({ "power": p.power.to_rows(), "duration": p.duration.to_rows() })
}

fn policy_text(p: &Policy) -> String {
    let mut t = String::new();
    for i in 0..p.power.rows() {
        let cells: Vec<String> =
            (0..p.power.cols()).map(|k| format!("({}, {})", sig6(p.power[(i, k)]), sig6(p.duration[(i, k)]))).collect();
        t += &format!("  epoch {i}: {}\n", cells.join(" "));
    }
    t
}

fn levels_json(levels: &[Option<f64>]) -> Value {
    json!(levels)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let json = cli.json;
    match &cli.command {
        Command::SolveThroughput(a) => {
            let s = a.load()?;
            let r = solve_offline_throughput(&s)?;
            save_policy(a.policy_out.as_deref(), &r.policy)?;
            let v = json!({
                "throughput": r.throughput,
                "processing_cost": s.processing_cost(),
                "glue_levels": levels_json(&r.glue_levels),
                "residuals": r.residuals,
                "policy": policy_json(&r.policy),
            });
            let t = format!("throughput {} nats\n{}", sig6(r.throughput), policy_text(&r.policy));
            emit(out, json, v, t)?;
        }
        Command::SolveEnergy(a) => {
            let s = a.load()?;
            let r = solve_offline_energy(&s)?;
            save_policy(a.policy_out.as_deref(), &r.policy)?;
            let v = json!({
                "remaining_energy": r.remaining_energy,
                "delivered": r.delivered,
                "processing_cost": s.processing_cost(),
                "glue_levels": levels_json(&r.glue_levels),
                "policy": policy_json(&r.policy),
            });
            let t = format!(
                "remaining energy {} uJ, delivered {} nats\n{}",
                sig6(r.remaining_energy),
                sig6(r.delivered),
                policy_text(&r.policy)
            );
            emit(out, json, v, t)?;
        }
        Command::CheckFeasibility(a) => {
            let s = a.load()?;
            let r = check_feasibility(&s)?;
            let v = json!({ "feasible": r.feasible, "slack": r.slack, "processing_cost": s.processing_cost() });
            let t = format!("{} (slack {} nats)\n", if r.feasible { "feasible" } else { "infeasible" }, sig6(r.slack));
            emit(out, json, v, t)?;
        }
        Command::SolveTct(a) => {
            let s = a.load()?;
            let r = solve_tct(&s)?;
            save_policy(a.policy_out.as_deref(), &r.policy)?;
            let v = json!({
                "t_min": r.t_min,
                "bracket_epoch": r.bracket_epoch,
                "t_star": r.t_star,
                "remaining_energy": r.remaining_energy,
                "policy": policy_json(&r.policy),
            });
            let t = format!(
                "completion time {} s (epoch {}, {} s into it), remaining energy {} uJ\n{}",
                sig6(r.t_min),
                r.bracket_epoch,
                sig6(r.t_star),
                sig6(r.remaining_energy),
                policy_text(&r.policy)
            );
            emit(out, json, v, t)?;
        }
        Command::Verify { source, policy, kind, tol } => return verify(out, json, source, policy, *kind, *tol),
        Command::SimulateOnline { kind, policy, seeds, first_seed, config, output } => {
            let params = match config {
                Some(p) => read_json::<FadingParams>(p)?,
                None => FadingParams::for_kind((*kind).into()),
            };
            let cfg = ExperimentConfig {
                kind: *kind,
                sweep: SweepVariable::ProcessingCost,
                grid: vec![params.processing_cost],
                seeds: *seeds,
                first_seed: *first_seed,
                dp: None,
                output: None,
                params: params.clone(),
            };
            cfg.validate()?;
            let dp = match policy {
                PolicyArg::Dp => Some(build_dp(*kind, &params, &DpSettings::default())?),
                PolicyArg::Myopic => None,
            };
            let seeds: Vec<u64> = (0..*seeds as u64).map(|j| first_seed + j).collect();
            let results: Vec<_> = with_workers(|| {
                use rayon::prelude::*;
                seeds.par_iter().map(|&s| evaluate_seed(s, *kind, &params, dp.as_ref())).collect()
            });
            let name = match policy {
                PolicyArg::Dp => "dp",
                PolicyArg::Myopic => "myopic",
            };
            if let Some(path) = output {
                write_seed_csv(create(path)?, name, params.processing_cost, &results)?;
            }
            let row = summarize(SweepVariable::ProcessingCost, params.processing_cost, &results, None);
            if json {
                let online = if dp.is_some() { (row.dp_mean, row.dp_stderr) } else { (row.myopic_mean, row.myopic_stderr) };
                let v = json!({
                    "policy": name,
                    "seeds": row.seeds,
                    "feasible_fraction": row.feasible_fraction,
                    "offline_mean": row.offline_mean,
                    "offline_stderr": row.offline_stderr,
                    "online_mean": online.0,
                    "online_stderr": online.1,
                    "dominance_violations": row.dominance_violations,
                    "errors": row.errors,
                });
                emit(out, true, v, String::new())?;
            } else {
                write_sweep_csv(&mut *out, &[row])?;
            }
        }
        Command::Sweep { config, output } => {
            let cfg: ExperimentConfig = read_json(config)?;
            let rows = run_sweep(&cfg)?;
            match output.as_ref().or(cfg.output.as_ref()) {
                Some(path) => write_sweep_csv(create(path)?, &rows)?,
                None => write_sweep_csv(&mut *out, &rows)?,
            }
        }
        Command::CostSweep { source, kind, from, to, points, output } => {
            if *points < 2 || !(to > from) || *from < 0.0 {
                return Err(HarnessError::Config("need at least two points and 0 <= from < to".into()));
            }
            let grid: Vec<f64> = (0..*points).map(|j| from + (to - from) * j as f64 / (*points - 1) as f64).collect();
            let pts = cost_sweep(&source.load()?, *kind, &grid)?;
            match output {
                Some(path) => write_cost_csv(create(path)?, &pts)?,
                None => write_cost_csv(&mut *out, &pts)?,
            }
        }
        Command::Golden => {
            let outcomes = Registry::builtin().run();
            let all = outcomes.iter().all(|o| o.passed);
            let mut t = String::new();
            for o in &outcomes {
                let got = o.actual.map_or_else(|| o.error.clone().unwrap_or_default(), sig6);
                t += &format!(
                    "{} {}: expected {} ± {}, got {}\n",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    sig6(o.expected),
                    sig6(o.tolerance),
                    got
                );
            }
            emit(out, json, json!({ "passed": all, "checks": outcomes }), t)?;
            return Ok(if all { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn verify(out: &mut dyn Write, json: bool, source: &ScenarioSource, policy: &Path, kind: KindArg, tol: f64) -> Result<i32> {
    let s = source.load()?;
    let pol = read_policy(policy)?;
    let pk: ProblemKind = kind.into();
    let audit = audit_policy(&s, &pol, pk)?;
    let structure = match kind {
        KindArg::Throughput => Some(verify_throughput_structure(&s, &pol, tol)?),
        KindArg::Energy => Some(verify_energy_structure(&s, &pol, tol)?),
        KindArg::Tct => None,
    };
    let kkt = kkt_residuals(&s, &pol, pk)?;
    let structure_ok = structure.as_ref().map_or(true, |r| r.passed());
    let kkt_ok = kkt.max_residual <= tol;
    let ok = audit.feasible() && structure_ok && kkt_ok;
    let violations: Vec<String> =
        audit.violations.iter().map(|v| format!("{:?} at epoch {} by {}", v.constraint, v.epoch, sig6(v.magnitude))).collect();
    let failures: Vec<String> = structure
        .iter()
        .flat_map(|r| &r.failures)
        .map(|f| {
            let ch = f.channel.map_or(String::new(), |k| format!(", channel {k}"));
            format!("{:?} at epoch {}{ch} by {}", f.clause, f.epoch, sig6(f.magnitude))
        })
        .collect();
    let v = json!({
        "passed": ok,
        "feasible": audit.feasible(),
        "violations": violations,
        "structure_checked": structure.is_some(),
        "structure_failures": failures,
        "kkt_max_residual": kkt.max_residual,
        "kkt_stationarity": kkt.stationarity,
        "kkt_complementarity": kkt.complementarity,
        "kkt_degenerate": kkt.degenerate,
    });
    let mut t = format!("{}\n", if ok { "PASS" } else { "FAIL" });
    t += &format!("  ledger: {}\n", if audit.feasible() { "feasible".into() } else { violations.join("; ") });
    t += &match &structure {
        None => "  structure: not checked for completion time\n".into(),
        Some(_) if failures.is_empty() => "  structure: all clauses hold\n".into(),
        Some(_) => format!("  structure: {}\n", failures.join("; ")),
    };
    t += &format!("  kkt residual: {}\n", sig6(kkt.max_residual));
    emit(out, json, v, t)?;
    Ok(if ok { 0 } else { 1 })
}
