//! Transmission completion time minimization.
//!
//! The earliest epoch whose end admits a feasible schedule brackets the
//! completion time; inside it the deadline is bisected on the feasibility
//! slack, and the policy is the energy-maximizing one at that deadline,
//! which leaves the battery empty.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{validate_scenario, Policy, ProblemKind, Scenario};
use crate::offline_energy::{check_feasibility, solve_offline_energy};

#[derive(Debug, Clone, PartialEq)]
pub struct TctResult {
    /// Zero-based index of the epoch in which transmission completes.
    pub bracket_epoch: usize,
    /// Time spent in the bracket epoch, s.
    pub t_star: f64,
    /// Minimum completion time: start of the bracket epoch plus `t_star`, s.
    pub t_min: f64,
    /// Policy over the scenario truncated at `t_min`.
    pub policy: Policy,
    /// Energy left at `t_min`, μJ.
    pub remaining_energy: f64,
}

fn last_data_epoch(s: &Scenario) -> Result<usize> {
    s.epochs().iter().rposition(|e| e.data > 0.0).ok_or(Error::InvalidArgument("no data arrivals to deliver"))
}

fn feasible_until(s: &Scenario, deadline: f64) -> Result<bool> {
    Ok(check_feasibility(&s.truncated(deadline))?.slack >= 0.0)
}

/// Earliest epoch, at or after the last data arrival, whose end is a
/// feasible deadline.
pub fn find_bracket_epoch(s: &Scenario) -> Result<usize> {
    validate_scenario(s, ProblemKind::Tct)?;
    let first = last_data_epoch(s)?;
    let starts = s.start_times();
    for m in first..s.num_epochs() {
        if feasible_until(s, starts[m] + s.duration(m))? {
            return Ok(m);
        }
    }
    Err(Error::NeverFeasible)
}

/// Minimum completion time and a policy achieving it.
pub fn solve_tct(s: &Scenario) -> Result<TctResult> {
    let m = find_bracket_epoch(s)?;
    let start = s.start_times()[m];
    let (mut lo, mut hi) = (0.0, s.duration(m));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 {
            break;
        }
        if feasible_until(s, start + mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t_min = start + hi;
    let truncated = s.truncated(t_min);
    let sol = solve_offline_energy(&truncated)?;
    let mut policy = sol.policy;
    equalize_last_epoch(&truncated, &mut policy);
    Ok(TctResult { bracket_epoch: m, t_star: hi, t_min, policy, remaining_energy: sol.remaining_energy })
}

/// Spreads airtime evenly over equal-gain channels of the last epoch.
fn equalize_last_epoch(s: &Scenario, pol: &mut Policy) {
    let i = s.num_epochs() - 1;
    let gains = &s.epochs()[i].gains;
    let mut seen: Vec<usize> = Vec::new();
    for k in 0..gains.len() {
        if seen.contains(&k) {
            continue;
        }
        let group: Vec<usize> = (k..gains.len()).filter(|&j| gains[j] == gains[k]).collect();
        seen.extend(&group);
        if group.len() < 2 {
            continue;
        }
        let total: f64 = group.iter().map(|&j| pol.duration[(i, j)]).sum();
        let power = group.iter().map(|&j| pol.power[(i, j)]).fold(0.0, f64::max);
        if total <= 0.0 {
            continue;
        }
        let share = total / group.len() as f64;
        for &j in &group {
            pol.power[(i, j)] = power;
            pol.duration[(i, j)] = share;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{audit_policy, Capacity, Epoch};
    use alloc::vec;

    fn reference(eps: f64) -> Scenario {
        let gains = [[0.8, 0.35, 0.6, 0.55], [0.55, 0.9, 0.4, 0.35], [0.45, 0.6, 0.5, 0.4]];
        let tau = [3.5, 4.0, 2.5];
        let energy = [9.0, 8.0, 5.0];
        let data = [0.5, 2.0, 1.5];
        let epochs = (0..3).map(|i| Epoch::new(tau[i], energy[i], data[i], gains[i].to_vec())).collect();
        Scenario::new(epochs, eps, Capacity::Unbounded).unwrap()
    }

    #[test]
    fn reference_completion_time() {
        let s = reference(0.25);
        assert_eq!(find_bracket_epoch(&s).unwrap(), 2);
        let r = solve_tct(&s).unwrap();
        assert!((r.t_min - 8.2658).abs() < 1e-3, "{}", r.t_min);
        assert!(r.remaining_energy <= 1e-6);
        assert!(r.t_star > 0.0 && r.t_star <= 2.5);
        // Every channel of the last epoch runs until completion.
        for k in 0..4 {
            assert!((r.policy.duration[(2, k)] - r.t_star).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_consistency() {
        let s = reference(0.25);
        let t = solve_tct(&s).unwrap().t_min;
        assert!(feasible_until(&s, t + 1e-4).unwrap());
        assert!(!feasible_until(&s, t - 1e-4).unwrap());
    }

    #[test]
    fn single_epoch() {
        let s = Scenario::new(vec![Epoch::new(5.0, 10.0, 1.0, vec![1.0, 0.5])], 0.1, Capacity::Unbounded).unwrap();
        assert_eq!(find_bracket_epoch(&s).unwrap(), 0);
        let r = solve_tct(&s).unwrap();
        assert!(r.t_min < 5.0);
        let truncated = s.truncated(r.t_min);
        let audit = audit_policy(&truncated, &r.policy, ProblemKind::Tct).unwrap();
        assert!(audit.feasible());
        assert!((audit.total_delivered() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tiny_packet_finishes_early() {
        let s = Scenario::new(
            vec![Epoch::new(5.0, 100.0, 1e-3, vec![1.0]), Epoch::new(5.0, 0.0, 0.0, vec![1.0])],
            0.0,
            Capacity::Unbounded,
        )
        .unwrap();
        let r = solve_tct(&s).unwrap();
        assert!(r.t_min < 1e-3);
        assert_eq!(r.bracket_epoch, 0);
    }

    #[test]
    fn heavy_data_needs_full_horizon_or_fails() {
        let base = reference(0.25);
        // Find the largest first packet that the whole horizon can carry.
        let feasible_b1 = |b1: f64| check_feasibility(&base.with_data(&[b1, 2.0, 1.5])).unwrap().feasible;
        let (mut lo, mut hi) = (0.5, 50.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible_b1(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let s = base.with_data(&[lo * 0.999, 2.0, 1.5]);
        assert_eq!(find_bracket_epoch(&s).unwrap(), 2);
        let s = base.with_data(&[hi * 1.001, 2.0, 1.5]);
        assert!(matches!(find_bracket_epoch(&s), Err(Error::NeverFeasible)));
    }

    #[test]
    fn equal_gains_share_last_epoch() {
        let s = Scenario::new(vec![Epoch::new(5.0, 6.0, 0.4, vec![0.5, 0.5, 0.3])], 0.3, Capacity::Unbounded)
            .unwrap();
        let r = solve_tct(&s).unwrap();
        assert!((r.policy.duration[(0, 0)] - r.policy.duration[(0, 1)]).abs() < 1e-12);
        assert_eq!(r.policy.power[(0, 0)], r.policy.power[(0, 1)]);
    }

    #[test]
    fn no_data_is_an_error() {
        let s = reference(0.25).with_data(&[0.0; 3]);
        assert!(matches!(find_bracket_epoch(&s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn matches_deadline_grid_scan() {
        let epochs = vec![
            Epoch::new(1.5, 3.0, 0.4, vec![0.9, 0.4]),
            Epoch::new(1.0, 1.0, 0.3, vec![0.5, 1.1]),
            Epoch::new(2.0, 2.0, 0.0, vec![0.7, 0.6]),
        ];
        let s = Scenario::new(epochs, 0.2, Capacity::Unbounded).unwrap();
        let r = solve_tct(&s).unwrap();
        // Deadlines before the last arrival cannot count.
        let mut t = 1.5 + 1e-3;
        while !feasible_until(&s, t).unwrap() {
            t += 1e-3;
        }
        assert!((r.t_min - t).abs() <= 2e-3, "{} vs {t}", r.t_min);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scenario() -> impl Strategy<Value = Scenario> {
            (1usize..4, 1usize..3).prop_flat_map(|(ni, nk)| {
                (
                    proptest::collection::vec(0.3f64..3.0, ni),
                    proptest::collection::vec(0.5f64..8.0, ni),
                    proptest::collection::vec(0.05f64..0.8, ni),
                    proptest::collection::vec(proptest::collection::vec(0.2f64..2.0, nk), ni),
                    0.0f64..0.4,
                )
                    .prop_map(|(tau, energy, data, gains, eps)| {
                        let epochs = (0..tau.len())
                            .map(|i| Epoch::new(tau[i], energy[i], data[i], gains[i].clone()))
                            .collect();
                        Scenario::new(epochs, eps, Capacity::Unbounded).unwrap()
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn depleted_and_monotone(s in scenario(), d in 0.01f64..0.2, i in 0usize..3, x in 0.0f64..1.0) {
                let Ok(r) = solve_tct(&s) else { return Ok(()); };
                prop_assert!(r.remaining_energy <= 1e-6);
                if let Ok(r2) = solve_tct(&s.with_processing_cost(s.processing_cost() + d)) {
                    prop_assert!(r2.t_min >= r.t_min - 1e-9);
                }
                let i = i % s.num_epochs();
                let mut energy: Vec<f64> = s.epochs().iter().map(|e| e.energy).collect();
                energy[i] += x;
                let r3 = solve_tct(&s.with_energy(&energy)).unwrap();
                prop_assert!(r3.t_min <= r.t_min + 1e-9);
                let mut data: Vec<f64> = s.epochs().iter().map(|e| e.data).collect();
                data[i] += 0.1 * x;
                if let Ok(r4) = solve_tct(&s.with_data(&data)) {
                    prop_assert!(r4.t_min >= r.t_min - 1e-9);
                }
            }
        }
    }
}
