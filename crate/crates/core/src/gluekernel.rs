//! Single-epoch power allocation: the bursty threshold power and glue
//! pouring across sub-channels.
//!
//! A sub-channel `k` with gain `γ` runs at glue level `ξ = 1/γ + p`. For a
//! common level `ξ` every channel is in one of three regimes relative to its
//! threshold `c = 1/γ + v*`: idle below it, on for the whole epoch above it,
//! and bursty (`p = v*`, any duration) exactly at it. Both energy use and
//! delivered data are nondecreasing along this path, so a budget or a data
//! target picks out a unique point on it.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_1p};
use crate::model::{Matrix, Policy};

/// Bursty threshold power: the root of `(p + ε) = (1/γ + p)·ln(1 + γp)`.
///
/// Returns 0 when `ε = 0`.
pub fn v_star(gamma: f64, epsilon: f64) -> f64 {
    if epsilon <= 0.0 {
        return 0.0;
    }
    let h = |p: f64| (1.0 / gamma + p) * ln_1p(gamma * p) - (p + epsilon);
    let mut hi = 1.0;
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Allocation of one epoch's energy over its sub-channels.
#[derive(Debug, Clone, PartialEq)]
pub struct GlueAllocation {
    /// Common `1/γ + p` of the active channels, `None` when nothing is sent.
    pub glue_level: Option<f64>,
    pub v_star: Vec<f64>,
    pub power: Vec<f64>,
    pub duration: Vec<f64>,
    pub energy_used: f64,
}

impl GlueAllocation {
    pub fn data(&self, gains: &[f64]) -> f64 {
        self.power
            .iter()
            .zip(&self.duration)
            .zip(gains)
            .map(|((&p, &d), &g)| d * 0.5 * ln_1p(g * p))
            .sum()
    }
}

/// Glue pouring of `budget` μJ into one epoch of length `tau`.
///
/// Channels activate in decreasing-gain order; among equal gains the lowest
/// index fills first. The whole budget is always spent.
pub fn epoch_glue_pour(gains: &[f64], tau: f64, epsilon: f64, budget: f64) -> GlueAllocation {
    let path = GluePath::new(epoch_cells(gains, tau, epsilon), epsilon);
    let level = if budget < 1e-12 { Level::BOTTOM } else { path.level_for(Metric::Energy, budget) };
    path.glue_allocation(level)
}

/// Least-energy allocation delivering `data` nats within one epoch.
pub fn min_energy_for_data(gains: &[f64], tau: f64, epsilon: f64, data: f64) -> GlueAllocation {
    let path = GluePath::new(epoch_cells(gains, tau, epsilon), epsilon);
    let level = if data < 1e-15 { Level::BOTTOM } else { path.level_for(Metric::Data, data) };
    path.glue_allocation(level)
}

fn epoch_cells(gains: &[f64], tau: f64, epsilon: f64) -> Vec<Cell> {
    gains.iter().map(|&g| Cell::new(g, tau, epsilon)).collect()
}

/// Case-by-case solution for one channel, one energy packet `E1` and two
/// fading levels `gamma1 > gamma2` lasting `tau1` and `tau2`.
///
/// Row 0 of the returned policy is the stronger level.
pub fn two_level_reference(
    gamma1: f64,
    gamma2: f64,
    tau1: f64,
    tau2: f64,
    epsilon: f64,
    e1: f64,
) -> Result<Policy> {
    if !(gamma1 > gamma2 && gamma2 > 0.0) {
        return Err(Error::GainOrderViolation);
    }
    let p1s = v_star(gamma1, epsilon);
    let p2s = v_star(gamma2, epsilon);
    let lift = p2s + 1.0 / gamma2 - 1.0 / gamma1;
    let b1 = tau1 * (p1s + epsilon);
    let b2 = tau1 * (lift + epsilon);
    let b3 = b2 + tau2 * (p2s + epsilon);
    let (p1, d1, p2, d2) = if e1 <= b1 {
        (p1s, e1 / (p1s + epsilon), 0.0, 0.0)
    } else if e1 <= b2 {
        (e1 / tau1 - epsilon, tau1, 0.0, 0.0)
    } else if e1 <= b3 {
        (lift, tau1, p2s, (e1 - b2) / (p2s + epsilon))
    } else {
        let xi = (e1 + tau1 / gamma1 + tau2 / gamma2 - (tau1 + tau2) * epsilon) / (tau1 + tau2);
        (xi - 1.0 / gamma1, tau1, xi - 1.0 / gamma2, tau2)
    };
    let mut pol = Policy::zeros(2, 1);
    pol.power[(0, 0)] = p1;
    pol.duration[(0, 0)] = d1;
    pol.power[(1, 0)] = p2;
    pol.duration[(1, 0)] = d2;
    Ok(pol.canonical())
}

/// One (epoch, sub-channel) slot as seen by the pouring path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Cell {
    pub gain: f64,
    pub tau: f64,
    pub v_star: f64,
}

impl Cell {
    pub fn new(gain: f64, tau: f64, epsilon: f64) -> Self {
        Self { gain, tau, v_star: v_star(gain, epsilon) }
    }

    pub fn with_v_star(gain: f64, tau: f64, v_star: f64) -> Self {
        Self { gain, tau, v_star }
    }

    fn threshold(&self) -> f64 {
        1.0 / self.gain + self.v_star
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Metric {
    Energy,
    Data,
}

/// A point on the pouring path: glue level `xi` and, when `xi` sits exactly
/// on a threshold, the airtime `fill` already given to that threshold's
/// bursty channels (filled in cell order). Off-threshold levels carry
/// `fill = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Level {
    pub xi: f64,
    pub fill: f64,
}

impl Level {
    pub const BOTTOM: Level = Level { xi: 0.0, fill: 0.0 };

    pub fn min(self, other: Level) -> Level {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.xi.partial_cmp(&other.xi)? {
            Ordering::Equal => self.fill.partial_cmp(&other.fill),
            o => Some(o),
        }
    }
}

#[derive(Debug, Clone)]
struct Group {
    threshold: f64,
    cells: Vec<usize>,
}

/// Pouring path over an ordered set of cells.
#[derive(Debug, Clone)]
pub(crate) struct GluePath {
    cells: Vec<Cell>,
    groups: Vec<Group>,
    epsilon: f64,
}

impl GluePath {
    pub fn new(cells: Vec<Cell>, epsilon: f64) -> Self {
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| cells[a].threshold().total_cmp(&cells[b].threshold()));
        let mut groups: Vec<Group> = Vec::new();
        for idx in order {
            let c = cells[idx].threshold();
            match groups.last_mut() {
                Some(g) if g.threshold == c => g.cells.push(idx),
                _ => groups.push(Group { threshold: c, cells: vec![idx] }),
            }
        }
        Self { cells, groups, epsilon }
    }

    /// Metric delivered per second of bursty airtime at threshold.
    fn unit(&self, cell: &Cell, metric: Metric) -> f64 {
        match metric {
            Metric::Energy => cell.v_star + self.epsilon,
            Metric::Data => 0.5 * ln_1p(cell.gain * cell.v_star),
        }
    }

    /// Lowest level at which `metric` reaches `target`.
    ///
    /// Returns [`Level::BOTTOM`] for nonpositive targets and when the path has
    /// no cells.
    pub fn level_for(&self, metric: Metric, target: f64) -> Level {
        if target <= 0.0 || self.groups.is_empty() {
            return Level::BOTTOM;
        }
        // Linear coefficients of the metric over cells that are fully on:
        // energy = a·ξ + b, data = a·ln ξ + b.
        let (mut a, mut b) = (0.0, 0.0);
        for (gi, g) in self.groups.iter().enumerate() {
            let below = if a > 0.0 { self.eval_full(a, b, g.threshold, metric) } else { 0.0 };
            if target <= below {
                let xi = self.invert_full(a, b, target, metric);
                if xi >= g.threshold {
                    return Level { xi: g.threshold, fill: 0.0 };
                }
                return Level { xi, fill: f64::INFINITY }.max_with(self.groups[gi - 1].threshold);
            }
            let mut remaining = target - below;
            let mut fill = 0.0;
            for &idx in &g.cells {
                let cell = &self.cells[idx];
                let u = self.unit(cell, metric);
                let jump = cell.tau * u;
                if u > 0.0 && remaining <= jump {
                    return Level { xi: g.threshold, fill: fill + remaining / u };
                }
                remaining -= jump;
                fill += cell.tau;
            }
            for &idx in &g.cells {
                let cell = &self.cells[idx];
                a += match metric {
                    Metric::Energy => cell.tau,
                    Metric::Data => 0.5 * cell.tau,
                };
                b += match metric {
                    Metric::Energy => cell.tau * (self.epsilon - 1.0 / cell.gain),
                    Metric::Data => 0.5 * cell.tau * ln(cell.gain),
                };
            }
        }
        let top = self.groups[self.groups.len() - 1].threshold;
        Level { xi: self.invert_full(a, b, target, metric), fill: f64::INFINITY }.max_with(top)
    }

    fn eval_full(&self, a: f64, b: f64, xi: f64, metric: Metric) -> f64 {
        match metric {
            Metric::Energy => a * xi + b,
            Metric::Data => a * ln(xi) + b,
        }
    }

    fn invert_full(&self, a: f64, b: f64, target: f64, metric: Metric) -> f64 {
        match metric {
            Metric::Energy => (target - b) / a,
            Metric::Data => exp((target - b) / a),
        }
    }

    /// Per-cell `(power, duration)` at `level`.
    pub fn allocation(&self, level: Level) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.cells.len()];
        for g in &self.groups {
            match g.threshold.partial_cmp(&level.xi) {
                Some(Ordering::Less) => {
                    for &idx in &g.cells {
                        let cell = &self.cells[idx];
                        let p = (level.xi - 1.0 / cell.gain).max(cell.v_star);
                        out[idx] = if p > 0.0 { (p, cell.tau) } else { (0.0, 0.0) };
                    }
                }
                Some(Ordering::Equal) => {
                    let mut left = level.fill;
                    for &idx in &g.cells {
                        let cell = &self.cells[idx];
                        let d = left.min(cell.tau);
                        left -= d;
                        if cell.v_star > 0.0 && d > 0.0 {
                            out[idx] = (cell.v_star, d);
                        }
                    }
                }
                _ => break,
            }
        }
        out
    }

    pub fn value(&self, level: Level, metric: Metric) -> f64 {
        self.allocation(level)
            .iter()
            .zip(&self.cells)
            .map(|(&(p, d), cell)| match metric {
                Metric::Energy => d * (p + self.epsilon),
                Metric::Data => d * 0.5 * ln_1p(cell.gain * p),
            })
            .sum()
    }

    /// Largest glue level among active cells.
    pub fn active_level(&self, level: Level) -> Option<f64> {
        self.allocation(level)
            .iter()
            .zip(&self.cells)
            .filter(|(&(p, d), _)| p > 0.0 && d > 0.0)
            .map(|(&(p, _), cell)| 1.0 / cell.gain + p)
            .reduce(f64::max)
    }

    fn glue_allocation(&self, level: Level) -> GlueAllocation {
        let alloc = self.allocation(level);
        GlueAllocation {
            glue_level: self.active_level(level),
            v_star: self.cells.iter().map(|c| c.v_star).collect(),
            power: alloc.iter().map(|a| a.0).collect(),
            duration: alloc.iter().map(|a| a.1).collect(),
            energy_used: self.value(level, Metric::Energy),
        }
    }
}

impl Level {
    /// Clamp an off-threshold level that rounding pushed below `floor`.
    fn max_with(self, floor: f64) -> Level {
        if self.xi <= floor {
            Level { xi: floor, fill: f64::INFINITY }
        } else {
            self
        }
    }
}

/// Writes a per-cell allocation into rows `epochs` of a policy.
pub(crate) fn write_cells(pol: &mut Policy, epochs: core::ops::Range<usize>, alloc: &[(f64, f64)]) {
    let k = pol.power.cols();
    for (n, &(p, d)) in alloc.iter().enumerate() {
        let (i, ch) = (epochs.start + n / k, n % k);
        pol.power[(i, ch)] = p;
        pol.duration[(i, ch)] = d;
    }
}

/// Cells of rows `epochs` of a scenario, epoch-major.
pub(crate) fn scenario_cells(
    s: &crate::model::Scenario,
    epochs: core::ops::Range<usize>,
    v_stars: &Matrix,
) -> Vec<Cell> {
    let mut cells = Vec::new();
    for i in epochs {
        for k in 0..s.num_channels() {
            cells.push(Cell::with_v_star(s.gain(i, k), s.duration(i), v_stars[(i, k)]));
        }
    }
    cells
}

/// `v*` for every cell of a scenario.
pub(crate) fn v_star_matrix(s: &crate::model::Scenario) -> Matrix {
    let (ni, nk) = s.shape();
    let mut m = Matrix::zeros(ni, nk);
    for i in 0..ni {
        for k in 0..nk {
            m[(i, k)] = v_star(s.gain(i, k), s.processing_cost());
        }
    }
    m
}
