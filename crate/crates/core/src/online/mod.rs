//! Causal policies and the event-driven simulator that plays them.
//!
//! A policy sees only an [`OnlineState`]: the battery, the data buffer and
//! the current gains at an event, plus the time left until the deadline.

mod dp;

use alloc::vec;
use alloc::vec::Vec;

use crate::gluekernel::{epoch_glue_pour, min_energy_for_data};
use crate::math::{abs, ln_1p};
use crate::model::{Policy, ProblemKind, Scenario};

pub use dp::{dp_solve, exponential_bins, ArrivalLaw, DpConfig, DpPolicy};

/// What a causal policy knows at an event.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineState {
    /// Event time, s.
    pub time: f64,
    /// Battery content after the arrival, μJ.
    pub battery: f64,
    /// Data waiting to be sent, nats.
    pub data_buffer: f64,
    pub gains: Vec<f64>,
    /// Time until the deadline, s.
    pub remaining: f64,
}

/// Per-channel `(power, duration)` decided at an event. Durations count from
/// the event and are cut short by the next one.
pub type Allocation = Vec<(f64, f64)>;

fn zip(power: &[f64], duration: &[f64]) -> Allocation {
    power.iter().copied().zip(duration.iter().copied()).collect()
}

/// Spends the battery (capped at `e_max`) over the remaining horizon as if
/// nothing else will arrive and the gains will not change.
pub fn online_throughput_step(state: &OnlineState, eps: f64, e_max: f64) -> Allocation {
    let budget = state.battery.min(e_max);
    if state.remaining <= 0.0 || budget <= 0.0 {
        return vec![(0.0, 0.0); state.gains.len()];
    }
    let a = epoch_glue_pour(&state.gains, state.remaining, eps, budget);
    zip(&a.power, &a.duration)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStep {
    pub allocation: Allocation,
    /// The battery covers the least-energy plan for the whole buffer.
    pub sufficient: bool,
}

/// Least-energy plan for the buffered data over the remaining horizon; when
/// the battery cannot pay for it, the whole battery is spent instead.
pub fn online_energy_step(state: &OnlineState, eps: f64) -> EnergyStep {
    let k = state.gains.len();
    if state.remaining <= 0.0 || state.data_buffer <= 0.0 {
        return EnergyStep { allocation: vec![(0.0, 0.0); k], sufficient: true };
    }
    let plan = min_energy_for_data(&state.gains, state.remaining, eps, state.data_buffer);
    if plan.energy_used <= state.battery * (1.0 + 1e-12) {
        return EnergyStep { allocation: zip(&plan.power, &plan.duration), sufficient: true };
    }
    let all = epoch_glue_pour(&state.gains, state.remaining, eps, state.battery);
    EnergyStep { allocation: zip(&all.power, &all.duration), sufficient: false }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub epoch: usize,
    /// State handed to the policy.
    pub state: OnlineState,
    /// Battery before the arrival, μJ.
    pub battery_in: f64,
    pub arrival: f64,
    /// Harvested energy lost to a full battery, μJ.
    pub overflow: f64,
    /// Executed `(power, duration)` per channel.
    pub executed: Allocation,
    pub consumed: f64,
    pub delivered: f64,
    pub battery_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub kind: ProblemKind,
    pub events: Vec<TraceEvent>,
    /// Executed schedule in scenario layout.
    pub policy: Policy,
    /// Data delivered, nats.
    pub throughput: f64,
    /// Battery at the deadline, μJ.
    pub remaining_energy: f64,
    pub total_overflow: f64,
    /// All arrived data was delivered (always true for throughput).
    pub feasible: bool,
    /// Largest battery bookkeeping mismatch over all events, μJ.
    pub conservation_error: f64,
}

/// Plays `step` on the realization `s`, recomputing at every epoch start.
///
/// Throughput runs are backlogged: the buffer never limits delivery.
pub fn simulate<F>(s: &Scenario, kind: ProblemKind, mut step: F) -> Trace
where
    F: FnMut(&OnlineState) -> Allocation,
{
    let (n, nk) = s.shape();
    let eps = s.processing_cost();
    let cap = s.battery().limit().unwrap_or(f64::INFINITY);
    let starts = s.start_times();
    let horizon = s.deadline();
    let mut policy = Policy::zeros(n, nk);
    let mut events = Vec::with_capacity(n);
    let mut battery = 0.0;
    let mut buffer = 0.0;
    let mut delivered_total = 0.0;
    let mut overflow_total = 0.0;
    let mut conservation: f64 = 0.0;
    for i in 0..n {
        let epoch = &s.epochs()[i];
        let battery_in = battery;
        let filled = battery_in + epoch.energy;
        let overflow = (filled - cap).max(0.0);
        battery = filled - overflow;
        buffer += epoch.data;
        let state = OnlineState {
            time: starts[i],
            battery,
            data_buffer: if kind == ProblemKind::Throughput { 0.0 } else { buffer },
            gains: epoch.gains.clone(),
            remaining: horizon - starts[i],
        };
        let plan = step(&state);
        let tau = epoch.duration;
        let mut exec: Allocation = (0..nk)
            .map(|k| {
                let (p, d) = plan.get(k).copied().unwrap_or((0.0, 0.0));
                if p.is_finite() && d.is_finite() && p >= 0.0 && d > 0.0 {
                    (p, d.min(tau))
                } else {
                    (0.0, 0.0)
                }
            })
            .collect();
        let energy_of = |a: &Allocation| a.iter().map(|&(p, d)| (p + eps) * d).sum::<f64>();
        let data_of = |a: &Allocation| {
            a.iter().zip(&epoch.gains).map(|(&(p, d), &g)| 0.5 * d * ln_1p(g * p)).sum::<f64>()
        };
        // The battery runs dry or the buffer empties before the plan ends.
        let mut scale: f64 = 1.0;
        let planned_energy = energy_of(&exec);
        if planned_energy > battery {
            scale = scale.min(battery / planned_energy);
        }
        let planned_data = data_of(&exec);
        if kind != ProblemKind::Throughput && planned_data > buffer {
            scale = scale.min(buffer / planned_data);
        }
        if scale < 1.0 {
            for a in &mut exec {
                a.1 *= scale;
            }
        }
        let consumed = energy_of(&exec).min(battery);
        let delivered = match kind {
            ProblemKind::Throughput => data_of(&exec),
            _ => data_of(&exec).min(buffer),
        };
        let battery_out = battery - consumed;
        conservation = conservation.max(abs(battery_in + epoch.energy - consumed - overflow - battery_out));
        buffer = (buffer - delivered).max(0.0);
        delivered_total += delivered;
        overflow_total += overflow;
        for (k, &(p, d)) in exec.iter().enumerate() {
            if d > 0.0 {
                policy.power[(i, k)] = p;
                policy.duration[(i, k)] = d;
            }
        }
        events.push(TraceEvent {
            time: starts[i],
            epoch: i,
            state,
            battery_in,
            arrival: epoch.energy,
            overflow,
            executed: exec,
            consumed,
            delivered,
            battery_out,
        });
        battery = battery_out;
    }
    let feasible = kind == ProblemKind::Throughput || buffer <= 1e-9 * s.total_data().max(1.0);
    Trace {
        kind,
        events,
        policy,
        throughput: delivered_total,
        remaining_energy: battery,
        total_overflow: overflow_total,
        feasible,
        conservation_error: conservation,
    }
}

/// Replays a fixed schedule, for example an offline optimum.
pub fn replay(s: &Scenario, kind: ProblemKind, pol: &Policy) -> Trace {
    let starts = s.start_times();
    simulate(s, kind, |st| {
        let i = starts.iter().rposition(|&t| t <= st.time).unwrap_or(0);
        (0..pol.power.cols()).map(|k| (pol.power[(i, k)], pol.duration[(i, k)])).collect()
    })
}
