//! Random block-fading realizations.
//!
//! Every block has i.i.d. exponential gains per channel and one uniform
//! energy and data packet at its start. Packets are drawn as fractions of
//! their upper bound, so realizations for the same seed under different
//! bounds share every random number.

use gluepour_core::{ArrivalLaw, Capacity, DpConfig, Epoch, ProblemKind, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingParams {
    pub channels: usize,
    pub blocks: usize,
    /// Block length, s.
    pub block_length: f64,
    /// Rate of the exponential gain distribution, per μW.
    pub gain_rate: f64,
    /// Energy packets are uniform on `[0, energy_max]` μJ.
    pub energy_max: f64,
    /// Data packets are uniform on `[0, data_max]` nats.
    pub data_max: f64,
    /// Processing cost, μW.
    pub processing_cost: f64,
    /// Battery capacity, μJ; `None` for an unbounded battery.
    pub battery: Option<f64>,
}

impl FadingParams {
    /// Two channels, ten 1 s blocks, unit-rate fading, ε = 1 μW, a 10 μJ
    /// battery and energy packets up to 10 μJ.
    pub fn throughput() -> Self {
        Self {
            channels: 2,
            blocks: 10,
            block_length: 1.0,
            gain_rate: 1.0,
            energy_max: 10.0,
            data_max: 0.0,
            processing_cost: 1.0,
            battery: Some(10.0),
        }
    }

    /// As [`throughput`](Self::throughput) with an unbounded battery, energy
    /// packets up to 3 μJ and data packets up to 0.18 nats.
    pub fn energy() -> Self {
        Self { energy_max: 3.0, data_max: 0.18, battery: None, ..Self::throughput() }
    }

    pub fn for_kind(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Throughput => Self::throughput(),
            _ => Self::energy(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.channels == 0 || self.blocks == 0 {
            return bad("channels and blocks must be at least 1");
        }
        if !(self.block_length > 0.0 && self.block_length.is_finite()) {
            return bad("block_length must be positive");
        }
        if !(self.gain_rate > 0.0 && self.gain_rate.is_finite()) {
            return bad("gain_rate must be positive");
        }
        for (name, v) in [("energy_max", self.energy_max), ("data_max", self.data_max), ("processing_cost", self.processing_cost)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be nonnegative"));
            }
        }
        if let Some(cap) = self.battery {
            if !(cap >= self.energy_max && cap.is_finite()) {
                return bad("battery must hold the largest energy packet");
            }
        }
        Ok(())
    }

    /// DP configuration with the same laws as the generator.
    pub fn dp_config(&self, kind: ProblemKind) -> DpConfig {
        DpConfig {
            channels: self.channels,
            blocks: self.blocks,
            block_length: self.block_length,
            eps: self.processing_cost,
            battery_cap: self.battery,
            energy: ArrivalLaw::Uniform { max: self.energy_max },
            data: ArrivalLaw::Uniform { max: self.data_max },
            gain_rate: self.gain_rate,
            ..DpConfig::new(kind)
        }
    }
}

/// Deterministic realization for `seed`.
pub fn gen_fading_scenario(seed: u64, p: &FadingParams) -> Result<Scenario> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fading = Exp::new(p.gain_rate).map_err(|e| HarnessError::Config(e.to_string()))?;
    let epochs = (0..p.blocks)
        .map(|_| {
            let gains: Vec<f64> =
                (0..p.channels).map(|_| rng.sample::<f64, _>(fading).max(f64::MIN_POSITIVE)).collect();
            let energy = rng.random::<f64>() * p.energy_max;
            let data = rng.random::<f64>() * p.data_max;
            Epoch::new(p.block_length, energy, data, gains)
        })
        .collect();
    let battery = p.battery.map_or(Capacity::Unbounded, Capacity::Finite);
    Ok(Scenario::new(epochs, p.processing_cost, battery)?)
}
