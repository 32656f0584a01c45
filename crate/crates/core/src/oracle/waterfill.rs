//! Directional water-filling for throughput without processing cost.
//!
//! With ε = 0 every used cell transmits for the whole epoch and each epoch
//! is a classical water-filling problem. Energy can only move forward in
//! time; transfers between pairs of epochs are repeated until the water
//! levels agree or a battery limit binds.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::ln_1p;
use crate::model::{validate_scenario, Policy, ProblemKind, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub policy: Policy,
    pub throughput: f64,
    /// Water level per epoch, `None` for epochs that transmit nothing.
    pub levels: Vec<Option<f64>>,
}

/// Water level reached by spreading `energy` over an epoch of length `tau`.
/// An empty epoch reports its lowest floor `min 1/γ`.
fn water_level(gains: &[f64], tau: f64, energy: f64) -> f64 {
    let mut floors: Vec<f64> = gains.iter().map(|g| 1.0 / g).collect();
    floors.sort_by(f64::total_cmp);
    if energy <= 0.0 {
        return floors[0];
    }
    let mut sum = 0.0;
    let mut level = floors[0];
    for (m, &f) in floors.iter().enumerate() {
        sum += f;
        level = (energy / tau + sum) / (m + 1) as f64;
        if floors.get(m + 1).map_or(true, |&next| level <= next) {
            break;
        }
    }
    level
}

fn epoch_rate(gains: &[f64], tau: f64, level: f64) -> f64 {
    gains.iter().map(|&g| 0.5 * tau * ln_1p(g * (level - 1.0 / g).max(0.0))).sum()
}

/// Solves throughput maximization with `ε = 0` by directional water-filling.
pub fn directional_waterfill(s: &Scenario) -> Result<WaterfillSolution> {
    validate_scenario(s, ProblemKind::Throughput)?;
    if s.processing_cost() != 0.0 {
        return Err(Error::InvalidArgument("water-filling requires zero processing cost"));
    }
    let n = s.num_epochs();
    let arrivals: Vec<f64> = s.epochs().iter().map(|e| e.energy).collect();
    let cap = s.battery().limit().unwrap_or(f64::INFINITY);
    // carry[i]: energy left in the battery at the end of epoch i.
    let mut carry = vec![0.0; n];
    let level_at = |i: usize, e: f64| water_level(&s.epochs()[i].gains, s.duration(i), e);
    let used = |carry: &[f64], i: usize| arrivals[i] + if i == 0 { 0.0 } else { carry[i - 1] } - carry[i];
    let scale = 1.0 + s.total_energy();
    for _ in 0..100_000 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                // Shift x from epoch i to epoch j through the boundaries between them.
                let (ei, ej) = (used(&carry, i), used(&carry, j));
                let mut lo = -ej;
                let mut hi = ei;
                for l in i..j {
                    lo = lo.max(-carry[l]);
                    hi = hi.min(cap - arrivals[l + 1] - carry[l]);
                }
                if hi <= lo {
                    continue;
                }
                let gap = |x: f64| level_at(i, ei - x) - level_at(j, ej + x);
                let x = if gap(lo) <= 0.0 {
                    lo
                } else if gap(hi) >= 0.0 {
                    hi
                } else {
                    let (mut a, mut b) = (lo, hi);
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        if mid <= a || mid >= b {
                            break;
                        }
                        if gap(mid) > 0.0 {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    0.5 * (a + b)
                };
                moved = moved.max(x.abs());
                for c in &mut carry[i..j] {
                    *c = (*c + x).max(0.0);
                }
            }
        }
        if moved <= 1e-15 * scale {
            break;
        }
    }
    let mut policy = Policy::zeros(n, s.num_channels());
    let mut levels = vec![None; n];
    let mut throughput = 0.0;
    for i in 0..n {
        let energy = used(&carry, i);
        if energy <= 0.0 {
            continue;
        }
        let gains = &s.epochs()[i].gains;
        let w = level_at(i, energy);
        levels[i] = Some(w);
        throughput += epoch_rate(gains, s.duration(i), w);
        for (k, &g) in gains.iter().enumerate() {
            let p = w - 1.0 / g;
            if p > 0.0 {
                policy.power[(i, k)] = p;
                policy.duration[(i, k)] = s.duration(i);
            }
        }
    }
    Ok(WaterfillSolution { policy, throughput, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Capacity, Epoch};

    #[test]
    fn single_epoch_classical_waterfill() {
        // Floors 1 and 2; energy 3 over unit time gives level 3.
        let s = Scenario::new(vec![Epoch::new(1.0, 3.0, 0.0, vec![1.0, 0.5])], 0.0, Capacity::Unbounded).unwrap();
        let w = directional_waterfill(&s).unwrap();
        assert!((w.levels[0].unwrap() - 3.0).abs() < 1e-12);
        assert!((w.policy.power[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((w.policy.power[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((w.throughput - 0.5 * (3.0f64.ln() + 1.5f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn energy_flows_forward_only() {
        // Late energy cannot help the first epoch.
        let epochs = vec![Epoch::new(1.0, 0.0, 0.0, vec![1.0]), Epoch::new(1.0, 4.0, 0.0, vec![1.0])];
        let s = Scenario::new(epochs, 0.0, Capacity::Unbounded).unwrap();
        let w = directional_waterfill(&s).unwrap();
        assert_eq!(w.levels[0], None);
        assert!((w.levels[1].unwrap() - 5.0).abs() < 1e-12);
        // Early energy is shared.
        let epochs = vec![Epoch::new(1.0, 4.0, 0.0, vec![1.0]), Epoch::new(1.0, 0.0, 0.0, vec![1.0])];
        let s = Scenario::new(epochs, 0.0, Capacity::Unbounded).unwrap();
        let w = directional_waterfill(&s).unwrap();
        assert!((w.levels[0].unwrap() - 3.0).abs() < 1e-9);
        assert!((w.levels[1].unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn battery_limit_caps_carry_over() {
        let epochs = vec![Epoch::new(1.0, 2.0, 0.0, vec![1.0]), Epoch::new(3.0, 1.5, 0.0, vec![1.0])];
        let s = Scenario::new(epochs, 0.0, Capacity::Finite(4.0)).unwrap();
        let w = directional_waterfill(&s).unwrap();
        assert!((w.levels[0].unwrap() - 1.875).abs() < 1e-9);
        assert!((w.levels[1].unwrap() - 1.875).abs() < 1e-9);
        // Only 0.5 μJ fits next to the second arrival.
        let w = directional_waterfill(&s.with_battery(Capacity::Finite(2.0))).unwrap();
        assert!((w.levels[0].unwrap() - 2.5).abs() < 1e-9);
        assert!((w.levels[1].unwrap() - 2.0 / 3.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_processing_cost() {
        let s = Scenario::new(vec![Epoch::new(1.0, 3.0, 0.0, vec![1.0])], 0.1, Capacity::Unbounded).unwrap();
        assert!(directional_waterfill(&s).is_err());
    }
}
