//! Exhaustive grid search over per-cell `(p, Θ)` for very small instances.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp_m1, ln_1p, round};
use crate::model::{validate_scenario, Policy, ProblemKind, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub policy: Policy,
    /// Throughput (nats) or remaining energy (μJ) of the best grid point.
    pub objective: f64,
    /// Heuristic bound on how far the grid optimum can sit below the true one.
    pub gap: f64,
}

/// Largest number of cells the search accepts.
pub const MAX_CELLS: usize = 4;
/// Largest number of enumerated combinations.
pub const MAX_COMBINATIONS: f64 = 1e8;

#[derive(Debug, Clone, Copy)]
struct Point {
    energy: f64,
    data: f64,
    power: f64,
    duration: f64,
}

const IDLE: Point = Point { energy: 0.0, data: 0.0, power: 0.0, duration: 0.0 };

/// Grid points of one cell that are not dominated in (less energy, more data).
fn frontier(gamma: f64, tau: f64, eps: f64, budget: f64, data_cap: f64, step: f64) -> Vec<Point> {
    let n_theta = round(1.0 / step) as usize;
    let mut pts = vec![IDLE];
    for j in 1..=n_theta {
        let theta = tau * (j as f64 / n_theta as f64);
        let mut m = 1usize;
        loop {
            let p = m as f64 * step;
            let energy = (p + eps) * theta;
            if energy > budget {
                break;
            }
            let data = 0.5 * theta * ln_1p(gamma * p);
            pts.push(Point { energy, data, power: p, duration: theta });
            if data > data_cap {
                break;
            }
            m += 1;
        }
    }
    pts.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(b.data.total_cmp(&a.data)));
    let mut out: Vec<Point> = Vec::new();
    for p in pts {
        if out.last().map_or(true, |q| p.data > q.data) {
            out.push(p);
        }
    }
    out
}

struct Search<'a> {
    s: &'a Scenario,
    kind: ProblemKind,
    cells: Vec<(usize, usize)>,
    options: Vec<Vec<Point>>,
    cum_e: Vec<f64>,
    cum_b: Vec<f64>,
    chosen: Vec<Point>,
    best: Option<(f64, Vec<Point>)>,
}

impl Search<'_> {
    /// Ledger checks for epoch `i` once all of its cells are fixed.
    fn epoch_ok(&self, i: usize, upto: usize) -> bool {
        let eps_tol = 1e-12;
        let consumed: f64 = self.chosen[..upto].iter().map(|p| p.energy).sum();
        let delivered: f64 = self.chosen[..upto].iter().map(|p| p.data).sum();
        let n = self.s.num_epochs();
        if consumed > self.cum_e[i] + eps_tol {
            return false;
        }
        if let (Some(cap), true) = (self.s.battery().limit(), i + 1 < n) {
            if self.cum_e[i + 1] - consumed > cap + eps_tol {
                return false;
            }
        }
        self.kind == ProblemKind::Throughput || i + 1 == n || delivered <= self.cum_b[i] + eps_tol
    }

    fn run(&mut self, c: usize) {
        let last = self.cells.len() - 1;
        if c == last {
            self.finish();
            return;
        }
        for idx in 0..self.options[c].len() {
            self.chosen[c] = self.options[c][idx];
            let (i, _) = self.cells[c];
            if self.cells[c + 1].0 != i && !self.epoch_ok(i, c + 1) {
                continue;
            }
            self.run(c + 1);
        }
    }

    fn finish(&mut self) {
        let last = self.cells.len() - 1;
        let consumed: f64 = self.chosen[..last].iter().map(|p| p.energy).sum();
        let delivered: f64 = self.chosen[..last].iter().map(|p| p.data).sum();
        let opts = &self.options[last];
        let room = self.cum_e[self.s.num_epochs() - 1] - consumed + 1e-12;
        let pick = match self.kind {
            ProblemKind::Throughput => {
                let j = opts.partition_point(|p| p.energy <= room);
                (j > 0).then(|| opts[j - 1])
            }
            _ => {
                let need = self.s.total_data() - delivered;
                let j = opts.partition_point(|p| p.data < need);
                opts.get(j).copied().filter(|p| p.energy <= room)
            }
        };
        let Some(pt) = pick else { return };
        self.chosen[last] = pt;
        let mut chosen = self.chosen.clone();
        if self.kind != ProblemKind::Throughput {
            trim(self.s, &self.cells, &mut chosen);
        }
        let used: f64 = chosen.iter().map(|p| p.energy).sum();
        let value = match self.kind {
            ProblemKind::Throughput => chosen.iter().map(|p| p.data).sum(),
            _ => self.s.total_energy() - used,
        };
        if self.best.as_ref().map_or(true, |(b, _)| value > *b) {
            self.best = Some((value, chosen));
        }
    }
}

/// Removes over-delivery from the latest cells by lowering their power.
fn trim(s: &Scenario, cells: &[(usize, usize)], chosen: &mut [Point]) {
    let eps = s.processing_cost();
    let mut excess = chosen.iter().map(|p| p.data).sum::<f64>() - s.total_data();
    for (c, pt) in chosen.iter_mut().enumerate().rev() {
        if excess <= 0.0 {
            break;
        }
        if pt.data <= 0.0 {
            continue;
        }
        let cut = excess.min(pt.data);
        excess -= cut;
        let data = pt.data - cut;
        if data <= 0.0 {
            *pt = IDLE;
            continue;
        }
        let gamma = s.gain(cells[c].0, cells[c].1);
        let power = exp_m1(2.0 * data / pt.duration) / gamma;
        *pt = Point { energy: (power + eps) * pt.duration, data, power, duration: pt.duration };
    }
}

/// Best grid policy for a scenario with at most [`MAX_CELLS`] cells.
///
/// Powers take values on a `grid_step` μW lattice and durations on a
/// `grid_step·τ` lattice. Completion time is not supported.
pub fn brute_force_small(s: &Scenario, kind: ProblemKind, grid_step: f64) -> Result<BruteForceResult> {
    validate_scenario(s, kind)?;
    if kind == ProblemKind::Tct {
        return Err(Error::InvalidArgument("grid search covers throughput and energy only"));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidArgument("grid step must lie in (0, 0.5]"));
    }
    let (ni, nk) = s.shape();
    if ni * nk > MAX_CELLS {
        return Err(Error::TooLarge { cells: ni * nk });
    }
    let eps = s.processing_cost();
    let cum_e = s.cumulative_energy();
    let cum_b = s.cumulative_data();
    let mut cells = Vec::new();
    let mut options = Vec::new();
    for i in 0..ni {
        for k in 0..nk {
            let cap = match kind {
                ProblemKind::Throughput => f64::INFINITY,
                _ => cum_b[i],
            };
            cells.push((i, k));
            options.push(frontier(s.gain(i, k), s.duration(i), eps, cum_e[i], cap, grid_step));
        }
    }
    let combos: f64 = options[..options.len() - 1].iter().map(|o| o.len() as f64).product();
    if combos > MAX_COMBINATIONS {
        return Err(Error::TooLarge { cells: ni * nk });
    }
    let mut search = Search {
        s,
        kind,
        chosen: vec![IDLE; cells.len()],
        cells,
        options,
        cum_e: cum_e.clone(),
        cum_b,
        best: None,
    };
    search.run(0);
    let (objective, chosen) = search.best.ok_or(Error::InfeasibleInstance)?;
    let mut policy = Policy::zeros(ni, nk);
    let mut gap = 0.0;
    let e_tot = s.total_energy();
    for (c, pt) in chosen.iter().enumerate() {
        let (i, k) = search.cells[c];
        policy.power[(i, k)] = pt.power;
        policy.duration[(i, k)] = pt.duration;
        let tau = s.duration(i);
        let g = s.gain(i, k);
        gap += match kind {
            ProblemKind::Throughput => {
                tau * grid_step * 0.5 * (g + ln_1p(g * e_tot / (grid_step * tau)))
            }
            _ => tau * grid_step * (pt.power + grid_step + eps + 1.0),
        };
    }
    Ok(BruteForceResult { policy: policy.canonical(), objective, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gluekernel::{epoch_glue_pour, two_level_reference};
    use crate::model::{audit_policy, Capacity, Epoch};
    use crate::{solve_offline_energy, solve_offline_throughput};

    #[test]
    fn single_cell_matches_glue_pour() {
        let s = Scenario::new(vec![Epoch::new(10.0, 1.0, 0.0, vec![1.0])], 0.25, Capacity::Unbounded).unwrap();
        let b = brute_force_small(&s, ProblemKind::Throughput, 1e-3).unwrap();
        let g = epoch_glue_pour(&[1.0], 10.0, 0.25, 1.0);
        let exact = g.data(&[1.0]);
        assert!((b.objective - exact).abs() < 1e-3, "{} {exact}", b.objective);
        assert!(b.objective <= exact + 1e-12);
    }

    #[test]
    fn zero_energy() {
        let s = Scenario::new(vec![Epoch::new(2.0, 0.0, 0.0, vec![1.0, 0.5])], 0.25, Capacity::Unbounded).unwrap();
        let b = brute_force_small(&s, ProblemKind::Throughput, 0.05).unwrap();
        assert_eq!(b.objective, 0.0);
    }

    #[test]
    fn two_level_instance() {
        let epochs = vec![Epoch::new(2.0, 3.0, 0.0, vec![1.0]), Epoch::new(1.0, 0.0, 0.0, vec![0.6])];
        let s = Scenario::new(epochs, 0.1, Capacity::Unbounded).unwrap();
        let b = brute_force_small(&s, ProblemKind::Throughput, 0.01).unwrap();
        let exact = two_level_reference(1.0, 0.6, 2.0, 1.0, 0.1, 3.0).unwrap().total_data(&s);
        assert!(b.objective <= exact + 1e-9 && exact <= b.objective + b.gap, "{} {exact} {}", b.objective, b.gap);
    }

    #[test]
    fn bounds_structural_solutions() {
        let epochs = vec![Epoch::new(1.5, 3.0, 0.3, vec![0.8]), Epoch::new(1.0, 2.0, 0.4, vec![0.5])];
        let s = Scenario::new(epochs, 0.2, Capacity::Unbounded).unwrap();
        let b = brute_force_small(&s, ProblemKind::Throughput, 0.01).unwrap();
        let t = solve_offline_throughput(&s).unwrap().throughput;
        assert!(b.objective <= t + 1e-9 && t <= b.objective + b.gap);
        let b = brute_force_small(&s, ProblemKind::Energy, 0.01).unwrap();
        let audit = audit_policy(&s, &b.policy, ProblemKind::Energy).unwrap();
        assert!(audit.feasible());
        assert!((audit.total_delivered() - 0.7).abs() < 1e-9);
        let e = solve_offline_energy(&s).unwrap().remaining_energy;
        assert!(b.objective <= e + 1e-9 && e <= b.objective + b.gap, "{} {e} {}", b.objective, b.gap);
    }

    #[test]
    fn rejects_large_instances() {
        let epochs = (0..5).map(|_| Epoch::new(1.0, 1.0, 0.0, vec![1.0])).collect();
        let s = Scenario::new(epochs, 0.1, Capacity::Unbounded).unwrap();
        assert!(matches!(brute_force_small(&s, ProblemKind::Throughput, 0.1), Err(Error::TooLarge { .. })));
    }
}
