//! Perspective-variable convex programs for the three objectives, solved by
//! the barrier method.
//!
//! Throughput uses `(α, Θ)` with `α = Θ·p` the transmit energy of a cell;
//! energy and completion time use `(β, Θ)` with `β` the data sent by a cell.

use alloc::vec;
use alloc::vec::Vec;

use super::barrier::{self, Function, Program, Term};
use super::kkt::KktCertificate;
use crate::error::{Error, Result};
use crate::math::exp_m1;
use crate::model::{validate_scenario, Matrix, Policy, ProblemKind, Scenario};

/// Durations below this are reported as zero.
pub const SNAP_DURATION: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolution {
    pub policy: Policy,
    /// Throughput (nats), remaining energy (μJ) or completion time (s).
    pub objective: f64,
    pub certificate: KktCertificate,
    /// Zero-based epoch in which transmission completes (completion time only).
    pub bracket_epoch: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct CellVars {
    epoch: usize,
    channel: usize,
    first: usize,
    theta: usize,
    upper: usize,
    lower_theta: usize,
    lower_first: usize,
}

struct Built {
    prog: Program,
    cells: Vec<CellVars>,
    x0: Vec<f64>,
    energy_rows: Vec<Option<usize>>,
    second_rows: Vec<Option<usize>>,
    delivery_row: Option<usize>,
}

/// Epochs that cannot carry anything: no energy or (with data) no data yet.
fn usable(s: &Scenario, kind: ProblemKind) -> Vec<bool> {
    let cum_e = s.cumulative_energy();
    let cum_b = s.cumulative_data();
    (0..s.num_epochs())
        .map(|i| cum_e[i] > 0.0 && (kind == ProblemKind::Throughput || cum_b[i] > 0.0))
        .collect()
}

fn add_cells(s: &Scenario, kind: ProblemKind, prog: &mut Program, x0: &mut Vec<f64>) -> Vec<CellVars> {
    let ok = usable(s, kind);
    let mut cells = Vec::new();
    for i in 0..s.num_epochs() {
        if !ok[i] {
            continue;
        }
        for k in 0..s.num_channels() {
            let first = x0.len();
            x0.push(1e-4 * s.duration(i));
            x0.push(0.5 * s.duration(i));
            cells.push(CellVars {
                epoch: i,
                channel: k,
                first,
                theta: first + 1,
                upper: 0,
                lower_theta: 0,
                lower_first: 0,
            });
        }
    }
    prog.n = x0.len();
    for c in &mut cells {
        c.lower_first = prog.push(Function::linear(vec![(c.first, -1.0)], 0.0), true);
        c.lower_theta = prog.push(Function::linear(vec![(c.theta, -1.0)], 0.0), true);
        c.upper = prog.push(Function::linear(vec![(c.theta, 1.0)], -s.duration(c.epoch)), true);
    }
    cells
}

fn energy_function(s: &Scenario, kind: ProblemKind, cells: &[CellVars], upto: usize) -> Function {
    let eps = s.processing_cost();
    let mut f = Function::default();
    for c in cells.iter().filter(|c| c.epoch <= upto) {
        f.lin.push((c.theta, eps));
        match kind {
            ProblemKind::Throughput => f.lin.push((c.first, 1.0)),
            _ => f.terms.push((
                1.0,
                Term::ExpCost { b: c.first, th: c.theta, gamma: s.gain(c.epoch, c.channel) },
            )),
        }
    }
    f
}

fn build_throughput(s: &Scenario) -> Built {
    let mut prog = Program::new(0, Function::default());
    let mut x0 = Vec::new();
    let cells = add_cells(s, ProblemKind::Throughput, &mut prog, &mut x0);
    for c in &cells {
        prog.objective.terms.push((-1.0, Term::Rate { a: c.first, th: c.theta, gamma: s.gain(c.epoch, c.channel) }));
    }
    let n = s.num_epochs();
    let cum_e = s.cumulative_energy();
    let mut energy_rows = vec![None; n];
    let mut second_rows = vec![None; n];
    for i in 0..n {
        let mut f = energy_function(s, ProblemKind::Throughput, &cells, i);
        if f.lin.is_empty() {
            continue;
        }
        f.constant = -cum_e[i];
        energy_rows[i] = Some(prog.push(f.clone(), false));
        if let (Some(cap), true) = (s.battery().limit(), i + 1 < n) {
            let mut g = Function::default();
            g.lin = f.lin.iter().map(|&(j, c)| (j, -c)).collect();
            g.constant = cum_e[i + 1] - cap;
            second_rows[i] = Some(prog.push(g, false));
        }
    }
    Built { prog, cells, x0, energy_rows, second_rows, delivery_row: None }
}

/// Energy program; with `completion` the last epoch's duration becomes a
/// variable `t` that is minimized.
fn build_energy(s: &Scenario, completion: bool) -> Built {
    let kind = if completion { ProblemKind::Tct } else { ProblemKind::Energy };
    let mut prog = Program::new(0, Function::default());
    let mut x0 = Vec::new();
    let mut cells = add_cells(s, kind, &mut prog, &mut x0);
    let n = s.num_epochs();
    let last = n - 1;
    if completion {
        let t = x0.len();
        let tau = s.duration(last);
        x0.push(0.75 * tau);
        prog.n = x0.len();
        prog.objective = Function::linear(vec![(t, 1.0)], 0.0);
        for c in cells.iter_mut().filter(|c| c.epoch == last) {
            x0[c.theta] = 0.25 * tau;
            prog.constraints[c.upper] = Function::linear(vec![(c.theta, 1.0), (t, -1.0)], 0.0);
        }
        prog.push(Function::linear(vec![(t, 1.0)], -tau), true);
        prog.push(Function::linear(vec![(t, -1.0)], 0.0), true);
    } else {
        prog.objective = energy_function(s, kind, &cells, last);
    }
    let cum_e = s.cumulative_energy();
    let cum_b = s.cumulative_data();
    let mut energy_rows = vec![None; n];
    let mut second_rows = vec![None; n];
    for i in 0..n {
        let mut f = energy_function(s, kind, &cells, i);
        if f.lin.is_empty() {
            continue;
        }
        f.constant = -cum_e[i];
        energy_rows[i] = Some(prog.push(f, false));
        if i < last {
            let lin: Vec<(usize, f64)> = cells.iter().filter(|c| c.epoch <= i).map(|c| (c.first, 1.0)).collect();
            second_rows[i] = Some(prog.push(Function::linear(lin, -cum_b[i]), false));
        }
    }
    let lin: Vec<(usize, f64)> = cells.iter().map(|c| (c.first, -1.0)).collect();
    let delivery_row = if lin.is_empty() {
        (s.total_data() > 0.0).then(|| prog.push(Function::linear(lin, s.total_data()), true))
    } else {
        Some(prog.push(Function::linear(lin, s.total_data()), false))
    };
    Built { prog, cells, x0, energy_rows, second_rows, delivery_row }
}

fn to_policy(s: &Scenario, kind: ProblemKind, b: &Built, x: &[f64]) -> Policy {
    let mut pol = Policy::zeros(s.num_epochs(), s.num_channels());
    for c in &b.cells {
        let th = x[c.theta];
        if th < SNAP_DURATION {
            continue;
        }
        let g = s.gain(c.epoch, c.channel);
        let p = match kind {
            ProblemKind::Throughput => x[c.first] / th,
            _ => exp_m1(2.0 * x[c.first] / th) / g,
        };
        pol.power[(c.epoch, c.channel)] = p.max(0.0);
        pol.duration[(c.epoch, c.channel)] = th;
    }
    pol.canonical()
}

fn certificate(s: &Scenario, b: &Built, r: &barrier::BarrierResult) -> KktCertificate {
    let (ni, nk) = s.shape();
    let pick = |rows: &[Option<usize>]| -> Vec<f64> {
        rows.iter().map(|row| row.map_or(0.0, |j| r.multipliers[j])).collect()
    };
    let mut phi = Matrix::zeros(ni, nk);
    let mut psi = Matrix::zeros(ni, nk);
    let mut sigma = Matrix::zeros(ni, nk);
    for c in &b.cells {
        phi[(c.epoch, c.channel)] = r.multipliers[c.upper];
        psi[(c.epoch, c.channel)] = r.multipliers[c.lower_theta];
        sigma[(c.epoch, c.channel)] = r.multipliers[c.lower_first];
    }
    let complementarity = if b.prog.constraints.is_empty() { 0.0 } else { r.gap / b.prog.constraints.len() as f64 };
    KktCertificate {
        lambda: pick(&b.energy_rows),
        mu: pick(&b.second_rows),
        delivery: b.delivery_row.map_or(0.0, |j| r.multipliers[j]),
        phi,
        psi,
        sigma,
        stationarity: r.stationarity,
        complementarity,
        max_residual: r.stationarity.max(complementarity),
        degenerate: false,
    }
}

/// Solves the convex program for `kind` with the barrier method.
pub fn solve_convex(s: &Scenario, kind: ProblemKind) -> Result<ConvexSolution> {
    validate_scenario(s, kind)?;
    match kind {
        ProblemKind::Throughput => {
            let b = build_throughput(s);
            let r = barrier::solve(&b.prog, &b.x0)?;
            Ok(ConvexSolution {
                policy: to_policy(s, kind, &b, &r.x),
                objective: -r.objective,
                certificate: certificate(s, &b, &r),
                bracket_epoch: None,
            })
        }
        ProblemKind::Energy => {
            let b = build_energy(s, false);
            let r = barrier::solve(&b.prog, &b.x0)?;
            Ok(ConvexSolution {
                policy: to_policy(s, kind, &b, &r.x),
                objective: s.total_energy() - r.objective,
                certificate: certificate(s, &b, &r),
                bracket_epoch: None,
            })
        }
        ProblemKind::Tct => {
            let first = s
                .epochs()
                .iter()
                .rposition(|e| e.data > 0.0)
                .ok_or(Error::InvalidArgument("no data arrivals to deliver"))?;
            let starts = s.start_times();
            for m in first..s.num_epochs() {
                let truncated = s.truncated(starts[m] + s.duration(m));
                let b = build_energy(&truncated, true);
                match barrier::solve(&b.prog, &b.x0) {
                    Ok(r) => {
                        let t = r.x[b.prog.n - 1];
                        let mut cut = truncated.truncated(starts[m] + t);
                        if cut.num_epochs() < truncated.num_epochs() {
                            cut = truncated.clone();
                        }
                        return Ok(ConvexSolution {
                            policy: to_policy(&cut, kind, &b, &r.x),
                            objective: starts[m] + t,
                            certificate: certificate(&truncated, &b, &r),
                            bracket_epoch: Some(m),
                        });
                    }
                    Err(Error::InfeasibleInstance) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::NeverFeasible)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gluekernel::v_star;
    use crate::model::{Capacity, Epoch};
    use crate::{solve_offline_energy, solve_offline_throughput, solve_tct};

    fn reference(eps: f64, cap: Capacity) -> Scenario {
        let gains = [[0.8, 0.35, 0.6, 0.55], [0.55, 0.9, 0.4, 0.35], [0.45, 0.6, 0.5, 0.4]];
        let tau = [3.5, 4.0, 2.5];
        let energy = [9.0, 8.0, 5.0];
        let data = [0.5, 2.0, 1.5];
        let epochs = (0..3).map(|i| Epoch::new(tau[i], energy[i], data[i], gains[i].to_vec())).collect();
        Scenario::new(epochs, eps, cap).unwrap()
    }

    #[test]
    fn throughput_reference() {
        for eps in [0.0, 0.25] {
            let s = reference(eps, Capacity::Finite(10.0));
            let c = solve_convex(&s, ProblemKind::Throughput).unwrap();
            let g = solve_offline_throughput(&s).unwrap();
            assert!((c.objective - g.throughput).abs() < 1e-6 * g.throughput, "{} {}", c.objective, g.throughput);
            assert!(c.certificate.max_residual < 1e-6, "{:?}", c.certificate);
        }
    }

    #[test]
    fn energy_reference() {
        for eps in [0.0, 0.25] {
            let s = reference(eps, Capacity::Unbounded);
            let c = solve_convex(&s, ProblemKind::Energy).unwrap();
            let g = solve_offline_energy(&s).unwrap();
            assert!((c.objective - g.remaining_energy).abs() < 1e-5, "{} {}", c.objective, g.remaining_energy);
        }
    }

    #[test]
    fn completion_reference() {
        let s = reference(0.25, Capacity::Unbounded);
        let c = solve_convex(&s, ProblemKind::Tct).unwrap();
        let g = solve_tct(&s).unwrap();
        assert_eq!(c.bracket_epoch, Some(2));
        assert!((c.objective - g.t_min).abs() < 1e-5, "{} {}", c.objective, g.t_min);
    }

    #[test]
    fn zero_energy_instance() {
        let s = reference(0.25, Capacity::Finite(10.0)).with_energy(&[0.0; 3]);
        let c = solve_convex(&s, ProblemKind::Throughput).unwrap();
        assert_eq!(c.objective, 0.0);
        assert_eq!(c.policy, Policy::zeros(3, 4));
    }

    #[test]
    fn single_cell_closed_forms() {
        // Bursty: the budget runs out before the epoch does.
        let s = Scenario::new(vec![Epoch::new(10.0, 1.0, 0.0, vec![1.0])], 0.25, Capacity::Unbounded).unwrap();
        let c = solve_convex(&s, ProblemKind::Throughput).unwrap();
        let v = v_star(1.0, 0.25);
        let expect = 1.0 / (v + 0.25) * 0.5 * (1.0 + v).ln();
        assert!((c.objective - expect).abs() < 1e-7);
        assert!((c.policy.power[(0, 0)] - v).abs() < 1e-4);
        // Full duration at E/T − ε.
        let s = Scenario::new(vec![Epoch::new(1.0, 5.0, 0.0, vec![1.0])], 0.25, Capacity::Unbounded).unwrap();
        let c = solve_convex(&s, ProblemKind::Throughput).unwrap();
        assert!((c.policy.power[(0, 0)] - 4.75).abs() < 1e-5);
        assert!((c.policy.duration[(0, 0)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_energy_instance() {
        let s = reference(0.6, Capacity::Unbounded);
        assert!(matches!(solve_convex(&s, ProblemKind::Energy), Err(Error::InfeasibleInstance)));
    }
}
