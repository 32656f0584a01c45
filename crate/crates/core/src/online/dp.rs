//! Backward induction over a quantized battery, buffer and gain state.
//!
//! Gains are i.i.d. exponential per channel and block and are represented
//! by equiprobable quantile bins. Continuous arrivals are mapped onto the
//! battery and buffer grids by mean-preserving rounding to the two nearest
//! grid points.

use alloc::vec;
use alloc::vec::Vec;

use super::{Allocation, OnlineState};
use crate::error::{Error, Result};
use crate::gluekernel::{epoch_glue_pour, min_energy_for_data};
use crate::math::{ceil, exp, floor, ln, round};
use crate::model::ProblemKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalLaw {
    /// Uniform on `[0, max]`.
    Uniform { max: f64 },
    Fixed(f64),
}

impl ArrivalLaw {
    fn max(self) -> f64 {
        match self {
            ArrivalLaw::Uniform { max } => max,
            ArrivalLaw::Fixed(v) => v,
        }
    }

    /// Probability of each multiple of `step`, preserving the mean.
    fn grid_pmf(self, step: f64) -> Vec<f64> {
        match self {
            ArrivalLaw::Fixed(v) => {
                let x = v / step;
                let lo = floor(x);
                let frac = x - lo;
                let mut pmf = vec![0.0; lo as usize + 2];
                pmf[lo as usize] = 1.0 - frac;
                pmf[lo as usize + 1] = frac;
                pmf
            }
            ArrivalLaw::Uniform { max } => {
                let u = max / step;
                if u <= 0.0 {
                    return vec![1.0];
                }
                let top = floor(u) as usize + 1;
                // Mass of the hat function centred at j over [0, u], divided by u.
                (0..=top)
                    .map(|j| {
                        let j = j as f64;
                        let left = |x: f64| 0.5 * (x - j + 1.0) * (x - j + 1.0);
                        let right = |x: f64| -0.5 * (j + 1.0 - x) * (j + 1.0 - x);
                        let (a, b) = ((j - 1.0).max(0.0), j.min(u));
                        let mut m = if b > a { left(b) - left(a) } else { 0.0 };
                        let (a, b) = (j.max(0.0), (j + 1.0).min(u));
                        if b > a {
                            m += right(b) - right(a);
                        }
                        m / u
                    })
                    .collect()
            }
        }
    }
}

/// Boundaries and conditional means of `levels` equiprobable bins of an
/// exponential distribution with the given rate.
pub fn exponential_bins(rate: f64, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let l = levels as f64;
    let edges: Vec<f64> = (1..levels).map(|j| -ln(1.0 - j as f64 / l) / rate).collect();
    let means = (0..levels)
        .map(|j| {
            let a = if j == 0 { 0.0 } else { edges[j - 1] };
            let head = (a + 1.0 / rate) * exp(-rate * a);
            let tail = if j + 1 == levels {
                0.0
            } else {
                let b = edges[j];
                (b + 1.0 / rate) * exp(-rate * b)
            };
            (head - tail) * l
        })
        .collect();
    (edges, means)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpConfig {
    pub kind: ProblemKind,
    pub channels: usize,
    pub blocks: usize,
    /// Block length, s.
    pub block_length: f64,
    /// Processing cost, μW.
    pub eps: f64,
    /// Battery capacity, μJ; `None` for an unbounded battery.
    pub battery_cap: Option<f64>,
    pub energy: ArrivalLaw,
    /// Data arrivals; ignored for throughput.
    pub data: ArrivalLaw,
    /// Rate of the exponential gain distribution.
    pub gain_rate: f64,
    pub gain_levels: usize,
    /// Battery grid step, μJ.
    pub battery_step: f64,
    /// Buffer grid step, nats.
    pub buffer_step: f64,
    /// Largest number of states per block.
    pub state_cap: usize,
}

impl DpConfig {
    /// Two channels, ten 1 s blocks, unit-rate fading on eight levels, 1 μJ
    /// battery grid and 0.01 nat buffer grid.
    pub fn new(kind: ProblemKind) -> Self {
        Self {
            kind,
            channels: 2,
            blocks: 10,
            block_length: 1.0,
            eps: 1.0,
            battery_cap: match kind {
                ProblemKind::Throughput => Some(10.0),
                _ => None,
            },
            energy: ArrivalLaw::Uniform { max: 10.0 },
            data: ArrivalLaw::Uniform { max: 0.1 },
            gain_rate: 1.0,
            gain_levels: 8,
            battery_step: 1.0,
            buffer_step: 0.01,
            state_cap: 2_000_000,
        }
    }
}

/// Value tables of a solved DP and the greedy policy they induce.
#[derive(Debug, Clone)]
pub struct DpPolicy {
    config: DpConfig,
    levels: Vec<f64>,
    battery_bins: usize,
    buffer_bins: usize,
    /// `continuation[t]`: expected value before the arrival of block `t`,
    /// indexed by battery bin (and buffer bin for energy kinds).
    continuation: Vec<Vec<f64>>,
}

fn gain_combos(levels: usize, channels: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..channels {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..levels).map(move |l| {
                    let mut c = c.clone();
                    c.push(l);
                    c
                })
            })
            .collect();
    }
    out
}

/// Integer splits of at most `total` units over `channels` channels.
fn splits(total: usize, channels: usize) -> Vec<Vec<usize>> {
    if channels == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in splits(total - first, channels - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Solves the DP by backward induction.
pub fn dp_solve(cfg: &DpConfig) -> Result<DpPolicy> {
    if cfg.channels == 0 || cfg.blocks == 0 || cfg.gain_levels == 0 {
        return Err(Error::InvalidArgument("DP needs at least one channel, block and gain level"));
    }
    if !(cfg.block_length > 0.0 && cfg.battery_step > 0.0 && cfg.buffer_step > 0.0 && cfg.gain_rate > 0.0) {
        return Err(Error::InvalidArgument("DP steps, block length and gain rate must be positive"));
    }
    let cap = match (cfg.kind, cfg.battery_cap) {
        (ProblemKind::Tct, _) => return Err(Error::InvalidArgument("no DP for completion time")),
        (_, Some(c)) => c,
        (ProblemKind::Throughput, None) => {
            return Err(Error::InvalidArgument("throughput DP needs a finite battery"))
        }
        (_, None) => cfg.blocks as f64 * cfg.energy.max(),
    };
    let battery_bins = round(cap / cfg.battery_step) as usize + 1;
    let buffer_bins = match cfg.kind {
        ProblemKind::Throughput => 1,
        _ => round(cfg.blocks as f64 * cfg.data.max() / cfg.buffer_step) as usize + 1,
    };
    let combos = (0..cfg.channels).fold(1.0, |acc, _| acc * cfg.gain_levels as f64);
    let states = battery_bins as f64 * buffer_bins as f64 * combos;
    if states > cfg.state_cap as f64 {
        return Err(Error::StateSpaceTooLarge { states: states.min(usize::MAX as f64) as usize, cap: cfg.state_cap });
    }
    let (_, levels) = exponential_bins(cfg.gain_rate, cfg.gain_levels);
    let mut dp = DpPolicy {
        config: cfg.clone(),
        levels,
        battery_bins,
        buffer_bins,
        continuation: vec![Vec::new(); cfg.blocks + 1],
    };
    match cfg.kind {
        ProblemKind::Throughput => dp.build_throughput(),
        _ => dp.build_energy(),
    }
    Ok(dp)
}

impl DpPolicy {
    pub fn config(&self) -> &DpConfig {
        &self.config
    }

    /// Expected objective of the DP policy under the quantized model.
    pub fn expected_value(&self) -> f64 {
        self.continuation[0][0]
    }

    /// Representative gain of each bin.
    pub fn gain_levels(&self) -> &[f64] {
        &self.levels
    }

    /// Averages `value(battery_bin, buffer_bin, combo)` over the arrival laws
    /// and gains, for every starting (battery, buffer) bin.
    fn expectation(&self, value: &[f64]) -> Vec<f64> {
        let cfg = &self.config;
        let (nb, nq) = (self.battery_bins, self.buffer_bins);
        let ng = value.len() / (nb * nq);
        let mean_g: Vec<f64> = (0..nb * nq)
            .map(|s| value[s * ng..(s + 1) * ng].iter().sum::<f64>() / ng as f64)
            .collect();
        let pe = cfg.energy.grid_pmf(cfg.battery_step);
        let pb = if nq == 1 { vec![1.0] } else { cfg.data.grid_pmf(cfg.buffer_step) };
        let mut out = vec![0.0; nb * nq];
        for b in 0..nb {
            for q in 0..nq {
                let mut acc = 0.0;
                for (j, &wj) in pe.iter().enumerate() {
                    if wj == 0.0 {
                        continue;
                    }
                    let b2 = (b + j).min(nb - 1);
                    for (m, &wm) in pb.iter().enumerate() {
                        if wm == 0.0 {
                            continue;
                        }
                        let q2 = (q + m).min(nq - 1);
                        acc += wj * wm * mean_g[b2 * nq + q2];
                    }
                }
                out[b * nq + q] = acc;
            }
        }
        out
    }

    fn build_throughput(&mut self) {
        let cfg = self.config.clone();
        let nb = self.battery_bins;
        let combos = gain_combos(cfg.gain_levels, cfg.channels);
        // reward[l][a]: data from a battery units on one channel at gain level l.
        let reward: Vec<Vec<f64>> = self
            .levels
            .iter()
            .map(|&g| {
                (0..nb)
                    .map(|a| epoch_glue_pour(&[g], cfg.block_length, cfg.eps, a as f64 * cfg.battery_step).data(&[g]))
                    .collect()
            })
            .collect();
        let all_splits: Vec<Vec<Vec<usize>>> = (0..nb).map(|b| splits(b, cfg.channels)).collect();
        self.continuation[cfg.blocks] = vec![0.0; nb];
        for t in (0..cfg.blocks).rev() {
            let next = &self.continuation[t + 1];
            let mut value = vec![0.0; nb * combos.len()];
            for b in 0..nb {
                for (gi, combo) in combos.iter().enumerate() {
                    let mut best = f64::NEG_INFINITY;
                    for split in &all_splits[b] {
                        let spent: usize = split.iter().sum();
                        let r: f64 = split.iter().zip(combo).map(|(&a, &l)| reward[l][a]).sum();
                        best = best.max(r + next[b - spent]);
                    }
                    value[b * combos.len() + gi] = best;
                }
            }
            self.continuation[t] = self.expectation(&value);
        }
    }

    /// Linear interpolation of a continuation table in the battery axis.
    fn interp(&self, table: &[f64], battery: f64, q: usize) -> f64 {
        let nq = self.buffer_bins;
        let x = (battery / self.config.battery_step).max(0.0);
        let lo = (floor(x) as usize).min(self.battery_bins - 1);
        let hi = (lo + 1).min(self.battery_bins - 1);
        let w = (x - lo as f64).min(1.0);
        table[lo * nq + q] * (1.0 - w) + table[hi * nq + q] * w
    }

    fn build_energy(&mut self) {
        let cfg = self.config.clone();
        let (nb, nq) = (self.battery_bins, self.buffer_bins);
        let combos = gain_combos(cfg.gain_levels, cfg.channels);
        // cost[g][d]: least energy delivering d buffer units at gain combo g.
        let cost: Vec<Vec<f64>> = combos
            .iter()
            .map(|combo| {
                let gains: Vec<f64> = combo.iter().map(|&l| self.levels[l]).collect();
                (0..nq)
                    .map(|d| {
                        min_energy_for_data(&gains, cfg.block_length, cfg.eps, d as f64 * cfg.buffer_step).energy_used
                    })
                    .collect()
            })
            .collect();
        let mut terminal = vec![0.0; nb * nq];
        for b in 0..nb {
            terminal[b * nq] = b as f64 * cfg.battery_step;
        }
        self.continuation[cfg.blocks] = terminal;
        for t in (0..cfg.blocks).rev() {
            let next = &self.continuation[t + 1];
            let mut value = vec![0.0; nb * nq * combos.len()];
            for b in 0..nb {
                let battery = b as f64 * cfg.battery_step;
                for q in 0..nq {
                    for gi in 0..combos.len() {
                        let mut best = f64::NEG_INFINITY;
                        for d in 0..=q {
                            let e = cost[gi][d];
                            if e > battery + 1e-12 {
                                break;
                            }
                            best = best.max(self.interp(next, battery - e, q - d));
                        }
                        value[(b * nq + q) * combos.len() + gi] = best;
                    }
                }
            }
            self.continuation[t] = self.expectation(&value);
        }
    }

    /// Greedy action at `state`, executed with the actual gains.
    pub fn decide(&self, state: &OnlineState) -> Allocation {
        let cfg = &self.config;
        let k = state.gains.len();
        let t = floor(state.time / cfg.block_length + 1e-9) as usize;
        if t >= cfg.blocks || k != cfg.channels {
            return vec![(0.0, 0.0); k];
        }
        let next = &self.continuation[t + 1];
        match cfg.kind {
            ProblemKind::Throughput => {
                let nb = self.battery_bins;
                let b = (floor(state.battery / cfg.battery_step + 1e-9) as usize).min(nb - 1);
                let mut best = (f64::NEG_INFINITY, Vec::new());
                for split in splits(b, k) {
                    let spent: usize = split.iter().sum();
                    let r: f64 = split
                        .iter()
                        .zip(&state.gains)
                        .map(|(&a, &g)| {
                            epoch_glue_pour(&[g], cfg.block_length, cfg.eps, a as f64 * cfg.battery_step).data(&[g])
                        })
                        .sum();
                    let v = r + next[b - spent];
                    if v > best.0 {
                        best = (v, split);
                    }
                }
                best.1
                    .iter()
                    .zip(&state.gains)
                    .map(|(&a, &g)| {
                        let x = epoch_glue_pour(&[g], cfg.block_length, cfg.eps, a as f64 * cfg.battery_step);
                        (x.power[0], x.duration[0])
                    })
                    .collect()
            }
            _ => {
                let nq = self.buffer_bins;
                let q = (ceil((state.data_buffer / cfg.buffer_step - 1e-9).max(0.0)) as usize).min(nq - 1);
                let mut best = (f64::NEG_INFINITY, 0);
                for d in 0..=q {
                    let data = (d as f64 * cfg.buffer_step).min(state.data_buffer);
                    let e = min_energy_for_data(&state.gains, cfg.block_length, cfg.eps, data).energy_used;
                    if e > state.battery {
                        break;
                    }
                    let v = self.interp(next, state.battery - e, q - d);
                    if v > best.0 {
                        best = (v, d);
                    }
                }
                let data = (best.1 as f64 * cfg.buffer_step).min(state.data_buffer);
                let mut plan = min_energy_for_data(&state.gains, cfg.block_length, cfg.eps, data);
                if plan.energy_used > state.battery {
                    plan = epoch_glue_pour(&state.gains, cfg.block_length, cfg.eps, state.battery);
                }
                plan.power.iter().copied().zip(plan.duration.iter().copied()).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::online::{online_throughput_step, simulate};
    use crate::model::{Capacity, Epoch, Scenario};
    use crate::solve_offline_throughput;

    #[test]
    fn exponential_bins_are_equiprobable() {
        let (edges, means) = exponential_bins(1.0, 8);
        assert_eq!(edges.len(), 7);
        assert!((edges[3] - 2.0f64.ln()).abs() < 1e-12);
        // Bin means average to the distribution mean.
        let avg: f64 = means.iter().sum::<f64>() / 8.0;
        assert!((avg - 1.0).abs() < 1e-12);
        for j in 0..8 {
            let lo = if j == 0 { 0.0 } else { edges[j - 1] };
            assert!(means[j] > lo);
            if j < 7 {
                assert!(means[j] < edges[j]);
            }
        }
    }

    #[test]
    fn arrival_pmf_preserves_mass_and_mean() {
        for law in [ArrivalLaw::Uniform { max: 3.0 }, ArrivalLaw::Uniform { max: 0.37 }, ArrivalLaw::Fixed(2.4)] {
            let pmf = law.grid_pmf(1.0);
            let mass: f64 = pmf.iter().sum();
            let mean: f64 = pmf.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
            let expect = match law {
                ArrivalLaw::Uniform { max } => max / 2.0,
                ArrivalLaw::Fixed(v) => v,
            };
            assert!((mass - 1.0).abs() < 1e-12);
            assert!((mean - expect).abs() < 1e-12, "{law:?}");
        }
    }

    #[test]
    fn single_block_matches_myopic_up_to_quantization() {
        let mut cfg = DpConfig::new(ProblemKind::Throughput);
        cfg.blocks = 1;
        let dp = dp_solve(&cfg).unwrap();
        let st = OnlineState { time: 0.0, battery: 6.0, data_buffer: 0.0, gains: vec![1.3, 0.4], remaining: 1.0 };
        let a = dp.decide(&st);
        let m = online_throughput_step(&st, cfg.eps, 10.0);
        let data = |x: &Allocation| -> f64 {
            x.iter().zip(&st.gains).map(|(&(p, d), &g)| 0.5 * d * (g * p).ln_1p()).sum()
        };
        assert!(data(&a) <= data(&m) + 1e-12);
        assert!(data(&m) - data(&a) < 0.05, "{} {}", data(&a), data(&m));
    }

    #[test]
    fn fixed_arrivals_approach_offline_optimum() {
        let mut cfg = DpConfig::new(ProblemKind::Throughput);
        cfg.gain_levels = 1;
        cfg.blocks = 4;
        cfg.energy = ArrivalLaw::Fixed(3.0);
        let dp = dp_solve(&cfg).unwrap();
        let g = dp.gain_levels()[0];
        let epochs = (0..4).map(|_| Epoch::new(1.0, 3.0, 0.0, vec![g, g])).collect();
        let s = Scenario::new(epochs, cfg.eps, Capacity::Finite(10.0)).unwrap();
        let offline = solve_offline_throughput(&s).unwrap().throughput;
        let trace = simulate(&s, ProblemKind::Throughput, |st| dp.decide(st));
        assert!(trace.throughput <= offline + 1e-9);
        assert!(offline - trace.throughput < 1e-6, "{} {offline}", trace.throughput);
        assert!((dp.expected_value() - offline).abs() < 1e-6);
    }

    #[test]
    fn energy_dp_runs_and_delivers() {
        let mut cfg = DpConfig::new(ProblemKind::Energy);
        cfg.blocks = 3;
        cfg.gain_levels = 4;
        cfg.energy = ArrivalLaw::Uniform { max: 3.0 };
        cfg.data = ArrivalLaw::Uniform { max: 0.1 };
        let dp = dp_solve(&cfg).unwrap();
        assert!(dp.expected_value() > 0.0);
        let epochs = vec![
            Epoch::new(1.0, 2.5, 0.05, vec![1.2, 0.3]),
            Epoch::new(1.0, 1.0, 0.08, vec![0.5, 0.9]),
            Epoch::new(1.0, 0.5, 0.02, vec![2.0, 1.0]),
        ];
        let s = Scenario::new(epochs, cfg.eps, Capacity::Unbounded).unwrap();
        let trace = simulate(&s, ProblemKind::Energy, |st| dp.decide(st));
        assert!(trace.feasible);
        let offline = crate::solve_offline_energy(&s).unwrap().remaining_energy;
        assert!(trace.remaining_energy <= offline + 1e-9);
    }

    #[test]
    fn state_cap_is_enforced() {
        let mut cfg = DpConfig::new(ProblemKind::Energy);
        cfg.state_cap = 1000;
        assert!(matches!(dp_solve(&cfg), Err(Error::StateSpaceTooLarge { cap: 1000, .. })));
    }
}
