//! Offline remaining-energy maximization with data arrivals and an unbounded
//! battery.
//!
//! Consumption is bounded by cumulative harvested energy and delivery by
//! cumulative arrived data; all data must leave by the deadline. The optimal
//! glue level never drops, and it rises only where the battery empties or
//! the data buffer empties. The allocation is built forward: each run of
//! epochs takes the lowest glue level at which some prefix wall (energy or
//! data) or the final delivery target becomes binding.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gluekernel::{scenario_cells, v_star_matrix, write_cells, GluePath, Level, Metric};
use crate::math::abs;
use crate::model::{
    audit_policy, validate_scenario, Clause, Matrix, Policy, ProblemKind, Scenario, StructureReport,
};
use crate::offline_throughput::BATTERY_TOL;

/// Absolute tolerance, in nats, on delivering all arrived data.
pub const DELIVERY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// Extra data that could still be delivered in the last epoch, nats.
    /// Negative when the arrivals cannot all be delivered.
    pub slack: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergySolution {
    pub policy: Policy,
    /// Energy left in the battery at the deadline, μJ.
    pub remaining_energy: f64,
    /// Delivered data, nats.
    pub delivered: f64,
    /// Per-epoch glue level, `None` for idle epochs.
    pub glue_levels: Vec<Option<f64>>,
}

/// Largest extra amount of data deliverable in the last epoch on top of the
/// scheduled arrivals.
pub fn check_feasibility(s: &Scenario) -> Result<FeasibilityReport> {
    validate_scenario(s, ProblemKind::Energy)?;
    let pol = forward_allocation(s, &v_star_matrix(s), None);
    let slack = pol.total_data(s) - s.total_data();
    Ok(FeasibilityReport { slack, feasible: slack >= -DELIVERY_TOL })
}

/// Policy delivering every arrival by the deadline with the least energy.
pub fn solve_offline_energy(s: &Scenario) -> Result<EnergySolution> {
    validate_scenario(s, ProblemKind::Energy)?;
    let v_stars = v_star_matrix(s);
    let pol = forward_allocation(s, &v_stars, Some(s.total_data()));
    let audit = audit_policy(s, &pol, ProblemKind::Energy)?;
    let shortfall = s.total_data() - audit.total_delivered();
    if shortfall > DELIVERY_TOL || !audit.feasible() {
        let slack = forward_allocation(s, &v_stars, None).total_data(s) - s.total_data();
        return Err(Error::Infeasible { slack: slack.min(-shortfall) });
    }
    Ok(EnergySolution {
        remaining_energy: audit.final_residual(),
        delivered: audit.total_delivered(),
        glue_levels: pol.glue_levels(s),
        policy: pol,
    })
}

/// Forward construction of the minimum glue-level path.
///
/// With `target = Some(total)` the last epoch must bring delivery up to
/// `total`; with `None` it only exhausts the energy, which maximizes data.
fn forward_allocation(s: &Scenario, v_stars: &Matrix, target: Option<f64>) -> Policy {
    let n = s.num_epochs();
    let eps = s.processing_cost();
    let cum_e = s.cumulative_energy();
    let cum_b = s.cumulative_data();
    let mut pol = Policy::zeros(n, s.num_channels());
    let (mut start, mut consumed, mut delivered) = (0, 0.0, 0.0);
    while start < n {
        if target.is_some_and(|t| t - delivered <= DELIVERY_TOL * 1e-3) {
            break;
        }
        let mut best = (Level { xi: f64::INFINITY, fill: f64::INFINITY }, start);
        for j in start..n {
            let path = GluePath::new(scenario_cells(s, start..j + 1, v_stars), eps);
            let energy_wall = path.level_for(Metric::Energy, cum_e[j] - consumed);
            let data_wall = if j + 1 < n {
                path.level_for(Metric::Data, cum_b[j] - delivered)
            } else {
                match target {
                    Some(t) => path.level_for(Metric::Data, t - delivered),
                    None => Level { xi: f64::INFINITY, fill: f64::INFINITY },
                }
            };
            let wall = energy_wall.min(data_wall);
            if wall <= best.0 {
                best = (wall, j);
            }
        }
        let (level, end) = best;
        let path = GluePath::new(scenario_cells(s, start..end + 1, v_stars), eps);
        write_cells(&mut pol, start..end + 1, &path.allocation(level));
        consumed += path.value(level, Metric::Energy);
        delivered += path.value(level, Metric::Data);
        start = end + 1;
    }
    pol
}

/// Checks the optimality structure of an energy-maximizing policy: one glue
/// level per epoch, the bursty/full regime split, glue levels that never drop
/// and rise only after an emptied battery or data buffer that is then
/// refilled, and exact delivery of all arrivals.
pub fn verify_energy_structure(s: &Scenario, pol: &Policy, tol: f64) -> Result<StructureReport> {
    let audit = audit_policy(s, pol, ProblemKind::Energy)?;
    let mut report = StructureReport::default();
    for v in &audit.violations {
        report.push(Clause::Infeasible, v.epoch, None, v.magnitude);
    }
    let miss = s.total_data() - audit.total_delivered();
    if abs(miss) > tol.max(DELIVERY_TOL) {
        report.push(Clause::Infeasible, s.num_epochs() - 1, None, miss);
    }
    report.check_epochs(s, pol, &v_star_matrix(s), tol);
    let levels = pol.glue_levels(s);
    let mut prev: Option<(usize, f64)> = None;
    for (i, level) in levels.iter().enumerate() {
        let Some(xi) = *level else { continue };
        if let Some((j, before)) = prev {
            if xi < before - tol {
                report.push(Clause::Decrease, i, None, before - xi);
            } else if xi > before + tol {
                let bound = (j..i).any(|m| {
                    let next = &s.epochs()[m + 1];
                    (audit.residual[m] <= BATTERY_TOL && next.energy > 0.0)
                        || (audit.buffer[m] <= BATTERY_TOL && next.data > 0.0)
                });
                if !bound {
                    report.push(Clause::IncreaseWithoutBinding, i, None, xi - before);
                }
            }
        }
        prev = Some((i, xi));
    }
    Ok(report)
}
