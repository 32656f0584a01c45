//! Scenario and policy types, validation and constraint accounting.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result, ValidationError};
use crate::math::{abs, ln_1p};
use crate::AUDIT_TOL;

/// Dense row-major matrix indexed by `(epoch, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged matrix rows"));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, k): (usize, usize)) -> &f64 {
        assert!(k < self.cols);
        &self.data[i * self.cols + k]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, k): (usize, usize)) -> &mut f64 {
        assert!(k < self.cols);
        &mut self.data[i * self.cols + k]
    }
}

/// Battery capacity. Energy maximization and completion-time problems use
/// [`Capacity::Unbounded`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Unbounded,
}

impl Capacity {
    pub fn limit(self) -> Option<f64> {
        match self {
            Capacity::Finite(c) => Some(c),
            Capacity::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Capacity::Unbounded)
    }

    /// `value` clipped to the capacity.
    pub fn clip(self, value: f64) -> f64 {
        match self {
            Capacity::Finite(c) => value.min(c),
            Capacity::Unbounded => value,
        }
    }
}

/// One interval between consecutive events.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    /// Duration in seconds.
    pub duration: f64,
    /// Energy arriving at the epoch start, μJ.
    pub energy: f64,
    /// Data arriving at the epoch start, nats.
    pub data: f64,
    /// Per-μW gain of each sub-channel during the epoch.
    pub gains: Vec<f64>,
}

impl Epoch {
    pub fn new(duration: f64, energy: f64, data: f64, gains: Vec<f64>) -> Self {
        Self { duration, energy, data, gains }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    /// Backlogged deadline throughput maximization with a finite battery.
    Throughput,
    /// Remaining-energy maximization with data arrivals and an unbounded battery.
    Energy,
    /// Transmission-completion-time minimization with an unbounded battery.
    Tct,
}

/// Piecewise-constant energy-harvesting scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    epochs: Vec<Epoch>,
    processing_cost: f64,
    battery: Capacity,
}

impl Scenario {
    /// Builds a scenario; every epoch must list the same number of gains.
    pub fn new(epochs: Vec<Epoch>, processing_cost: f64, battery: Capacity) -> Result<Self> {
        let k = epochs.first().map_or(0, |e| e.gains.len());
        if epochs.iter().any(|e| e.gains.len() != k) {
            return Err(Error::InvalidArgument("every epoch must have the same number of gains"));
        }
        Ok(Self { epochs, processing_cost, battery })
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn num_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn num_channels(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.gains.len())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_epochs(), self.num_channels())
    }

    pub fn processing_cost(&self) -> f64 {
        self.processing_cost
    }

    pub fn battery(&self) -> Capacity {
        self.battery
    }

    pub fn duration(&self, i: usize) -> f64 {
        self.epochs[i].duration
    }

    pub fn gain(&self, i: usize, k: usize) -> f64 {
        self.epochs[i].gains[k]
    }

    /// Deadline `T`, the sum of epoch durations.
    pub fn deadline(&self) -> f64 {
        self.epochs.iter().map(|e| e.duration).sum()
    }

    /// Start time of every epoch (`t_1 = 0`).
    pub fn start_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        self.epochs
            .iter()
            .map(|e| {
                let start = t;
                t += e.duration;
                start
            })
            .collect()
    }

    pub fn total_energy(&self) -> f64 {
        self.epochs.iter().map(|e| e.energy).sum()
    }

    pub fn total_data(&self) -> f64 {
        self.epochs.iter().map(|e| e.data).sum()
    }

    /// Cumulative energy arrived by the start of each epoch.
    pub fn cumulative_energy(&self) -> Vec<f64> {
        prefix_sums(self.epochs.iter().map(|e| e.energy))
    }

    /// Cumulative data arrived by the start of each epoch.
    pub fn cumulative_data(&self) -> Vec<f64> {
        prefix_sums(self.epochs.iter().map(|e| e.data))
    }

    pub fn with_processing_cost(&self, eps: f64) -> Self {
        Self { processing_cost: eps, ..self.clone() }
    }

    pub fn with_battery(&self, battery: Capacity) -> Self {
        Self { battery, ..self.clone() }
    }

    pub fn with_data(&self, data: &[f64]) -> Self {
        let mut s = self.clone();
        for (e, &b) in s.epochs.iter_mut().zip(data) {
            e.data = b;
        }
        s
    }

    pub fn with_energy(&self, energy: &[f64]) -> Self {
        let mut s = self.clone();
        for (e, &x) in s.epochs.iter_mut().zip(energy) {
            e.energy = x;
        }
        s
    }

    /// The scenario cut at `deadline`: epochs starting at or after it are
    /// dropped and the last kept epoch is shortened.
    pub fn truncated(&self, deadline: f64) -> Self {
        let mut epochs = Vec::new();
        let mut t = 0.0;
        for e in &self.epochs {
            if t >= deadline {
                break;
            }
            let mut e = e.clone();
            e.duration = e.duration.min(deadline - t);
            t += self.epochs[epochs.len()].duration;
            epochs.push(e);
        }
        Self { epochs, ..self.clone() }
    }
}

pub(crate) fn prefix_sums(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// Checks the scenario invariants and the assumptions each objective makes.
///
/// Throughput treats data as backlogged and ignores `data` arrivals. Energy
/// and completion-time problems require an unbounded battery.
pub fn validate_scenario(s: &Scenario, kind: ProblemKind) -> Result<(), ValidationError> {
    if s.epochs.is_empty() {
        return Err(ValidationError::Empty);
    }
    if !(s.processing_cost.is_finite() && s.processing_cost >= 0.0) {
        return Err(ValidationError::NegativeProcessingCost);
    }
    if let Capacity::Finite(c) = s.battery {
        if !(c.is_finite() && c >= 0.0) {
            return Err(ValidationError::KindMismatch("battery capacity must be nonnegative"));
        }
    }
    for (i, e) in s.epochs.iter().enumerate() {
        if !(e.duration.is_finite() && e.duration > 0.0) {
            return Err(ValidationError::NonPositiveDuration { epoch: i });
        }
        if let Some(k) = e.gains.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(ValidationError::GainNonPositive { epoch: i, channel: k });
        }
        let data_ok = kind == ProblemKind::Throughput || (e.data.is_finite() && e.data >= 0.0);
        if !(e.energy.is_finite() && e.energy >= 0.0) || !data_ok {
            return Err(ValidationError::NegativeArrival { epoch: i });
        }
        if let Capacity::Finite(c) = s.battery {
            if e.energy > c {
                return Err(ValidationError::ArrivalExceedsCapacity {
                    epoch: i,
                    energy: e.energy,
                    capacity: c,
                });
            }
        }
    }
    match kind {
        ProblemKind::Throughput => Ok(()),
        ProblemKind::Energy | ProblemKind::Tct if s.battery.is_unbounded() => Ok(()),
        ProblemKind::Energy => {
            Err(ValidationError::KindMismatch("energy maximization requires an unbounded battery"))
        }
        ProblemKind::Tct => {
            Err(ValidationError::KindMismatch("completion-time minimization requires an unbounded battery"))
        }
    }
}

/// Shannon rate `½ ln(1 + gain·power)` in nats per second.
#[inline]
pub fn rate(gain: f64, power: f64) -> f64 {
    0.5 * ln_1p(gain * power)
}

/// Per-epoch, per-sub-channel powers (μW) and transmission durations (s).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub power: Matrix,
    pub duration: Matrix,
}

impl Policy {
    pub fn zeros(epochs: usize, channels: usize) -> Self {
        Self { power: Matrix::zeros(epochs, channels), duration: Matrix::zeros(epochs, channels) }
    }

    pub fn new(power: Matrix, duration: Matrix) -> Result<Self> {
        if power.shape() != duration.shape() {
            return Err(Error::ShapeMismatch { expected: power.shape(), got: duration.shape() });
        }
        Ok(Self { power, duration })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.power.shape()
    }

    /// Zeroes durations of idle cells and powers of cells with no airtime.
    pub fn canonicalize(&mut self) {
        for (p, d) in self.power.data.iter_mut().zip(self.duration.data.iter_mut()) {
            if *p <= 0.0 || *d <= 0.0 {
                *p = 0.0;
                *d = 0.0;
            }
        }
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    /// Transmission energy `Θ·p` per cell, μJ.
    pub fn energy_alloc(&self) -> Matrix {
        let mut m = self.power.clone();
        for (a, d) in m.data.iter_mut().zip(&self.duration.data) {
            *a *= d;
        }
        m
    }

    /// Data `Θ/2·ln(1+γp)` per cell, nats.
    pub fn data_sent(&self, s: &Scenario) -> Matrix {
        let (ni, nk) = self.shape();
        let mut m = Matrix::zeros(ni, nk);
        for i in 0..ni {
            for k in 0..nk {
                m[(i, k)] = self.duration[(i, k)] * rate(s.gain(i, k), self.power[(i, k)]);
            }
        }
        m
    }

    /// Total energy `Θ(p + ε)` drawn from the battery in epoch `i`.
    pub fn epoch_energy(&self, i: usize, eps: f64) -> f64 {
        self.power.row(i).iter().zip(self.duration.row(i)).map(|(p, d)| d * (p + eps)).sum()
    }

    pub fn epoch_data(&self, s: &Scenario, i: usize) -> f64 {
        self.power
            .row(i)
            .iter()
            .zip(self.duration.row(i))
            .zip(&s.epochs[i].gains)
            .map(|((&p, &d), &g)| d * rate(g, p))
            .sum()
    }

    pub fn total_energy(&self, eps: f64) -> f64 {
        (0..self.power.rows).map(|i| self.epoch_energy(i, eps)).sum()
    }

    pub fn total_data(&self, s: &Scenario) -> f64 {
        (0..self.power.rows).map(|i| self.epoch_data(s, i)).sum()
    }

    /// Glue level `1/γ + p` of each epoch's active channels (the largest one
    /// when they disagree), `None` for idle epochs.
    pub fn glue_levels(&self, s: &Scenario) -> Vec<Option<f64>> {
        (0..self.power.rows)
            .map(|i| {
                (0..self.power.cols)
                    .filter(|&k| self.power[(i, k)] > 0.0 && self.duration[(i, k)] > 0.0)
                    .map(|k| 1.0 / s.gain(i, k) + self.power[(i, k)])
                    .reduce(f64::max)
            })
            .collect()
    }

    /// Sum over epochs of the longest sub-channel duration.
    pub fn total_airtime(&self) -> f64 {
        (0..self.duration.rows)
            .map(|i| self.duration.row(i).iter().copied().fold(0.0, f64::max))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    EnergyCausality,
    BatteryOverflow,
    DataCausality,
    DurationBounds,
    NegativePower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: Constraint,
    pub epoch: usize,
    /// Signed excess over the constraint bound.
    pub magnitude: f64,
}

/// Cumulative ledgers of a policy against its scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerReport {
    /// Energy consumed up to the end of each epoch, μJ.
    pub consumed: Vec<f64>,
    /// Battery content at the end of each epoch (before the next arrival), μJ.
    pub residual: Vec<f64>,
    /// Data delivered up to the end of each epoch, nats.
    pub delivered: Vec<f64>,
    /// Data arrived but not yet delivered at the end of each epoch, nats.
    pub buffer: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl LedgerReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn final_residual(&self) -> f64 {
        self.residual.last().copied().unwrap_or(0.0)
    }

    pub fn total_delivered(&self) -> f64 {
        self.delivered.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    /// Active channels of an epoch run at different glue levels.
    CommonGlueLevel,
    /// Glue level drops across a boundary while the battery is not full.
    DecreaseWithoutFullBattery,
    /// Glue level rises across a boundary with no binding constraint.
    IncreaseWithoutBinding,
    /// Glue level drops where the objective forbids it.
    Decrease,
    /// Partial-duration channel not at its threshold power.
    BurstyOffThreshold,
    /// Full-duration channel below its threshold power.
    BelowThreshold,
    /// Energy left in the battery at the deadline.
    LeftoverEnergy,
    /// The policy fails its audit.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureFailure {
    pub clause: Clause,
    pub epoch: usize,
    pub channel: Option<usize>,
    pub magnitude: f64,
}

/// Failed structural clauses of a policy; empty when all hold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructureReport {
    pub failures: Vec<StructureFailure>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn has(&self, clause: Clause) -> bool {
        self.failures.iter().any(|f| f.clause == clause)
    }

    pub(crate) fn push(&mut self, clause: Clause, epoch: usize, channel: Option<usize>, magnitude: f64) {
        self.failures.push(StructureFailure { clause, epoch, channel, magnitude });
    }

    /// Within-epoch clauses shared by every objective: common glue level and
    /// the bursty/full regime split.
    pub(crate) fn check_epochs(&mut self, s: &Scenario, pol: &Policy, v_stars: &Matrix, tol: f64) {
        let levels = pol.glue_levels(s);
        for i in 0..s.num_epochs() {
            for k in 0..s.num_channels() {
                let (p, d) = (pol.power[(i, k)], pol.duration[(i, k)]);
                if p <= 0.0 || d <= 0.0 {
                    continue;
                }
                let xi = 1.0 / s.gain(i, k) + p;
                if let Some(top) = levels[i] {
                    if top - xi > tol {
                        self.push(Clause::CommonGlueLevel, i, Some(k), top - xi);
                    }
                }
                let v = v_stars[(i, k)];
                if d < s.duration(i) - tol {
                    if abs(p - v) > tol {
                        self.push(Clause::BurstyOffThreshold, i, Some(k), p - v);
                    }
                } else if p < v - tol {
                    self.push(Clause::BelowThreshold, i, Some(k), v - p);
                }
            }
        }
    }
}

/// Evaluates energy causality, battery overflow and (for data-carrying
/// problems) data causality for `pol`.
///
/// Throughput problems are backlogged, so their data ledger is reported but
/// never flagged.
pub fn audit_policy(s: &Scenario, pol: &Policy, kind: ProblemKind) -> Result<LedgerReport> {
    if pol.shape() != s.shape() {
        return Err(Error::ShapeMismatch { expected: s.shape(), got: pol.shape() });
    }
    let eps = s.processing_cost;
    let n = s.num_epochs();
    let cum_e = s.cumulative_energy();
    let cum_b = s.cumulative_data();
    let mut report = LedgerReport {
        consumed: Vec::with_capacity(n),
        residual: Vec::with_capacity(n),
        delivered: Vec::with_capacity(n),
        buffer: Vec::with_capacity(n),
        violations: Vec::new(),
    };
    let mut consumed = 0.0;
    let mut delivered = 0.0;
    for i in 0..n {
        for k in 0..s.num_channels() {
            let (p, d) = (pol.power[(i, k)], pol.duration[(i, k)]);
            if !d.is_finite() || d < -AUDIT_TOL || d > s.duration(i) + AUDIT_TOL {
                let over = if d < 0.0 { -d } else { d - s.duration(i) };
                report.violations.push(Violation {
                    constraint: Constraint::DurationBounds,
                    epoch: i,
                    magnitude: over,
                });
            }
            if !p.is_finite() || p < -AUDIT_TOL {
                report.violations.push(Violation {
                    constraint: Constraint::NegativePower,
                    epoch: i,
                    magnitude: -p,
                });
            }
        }
        consumed += pol.epoch_energy(i, eps);
        delivered += pol.epoch_data(s, i);
        let residual = cum_e[i] - consumed;
        report.consumed.push(consumed);
        report.residual.push(residual);
        report.delivered.push(delivered);
        report.buffer.push(cum_b[i] - delivered);
        if -residual > AUDIT_TOL {
            report.violations.push(Violation {
                constraint: Constraint::EnergyCausality,
                epoch: i,
                magnitude: -residual,
            });
        }
        if let (Some(cap), true) = (s.battery.limit(), i + 1 < n) {
            let excess = residual + s.epochs[i + 1].energy - cap;
            if excess > AUDIT_TOL {
                report.violations.push(Violation {
                    constraint: Constraint::BatteryOverflow,
                    epoch: i,
                    magnitude: excess,
                });
            }
        }
        if kind != ProblemKind::Throughput && delivered - cum_b[i] > AUDIT_TOL {
            report.violations.push(Violation {
                constraint: Constraint::DataCausality,
                epoch: i,
                magnitude: delivered - cum_b[i],
            });
        }
    }
    Ok(report)
}
