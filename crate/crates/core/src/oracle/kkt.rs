//! Post-hoc optimality certificates.
//!
//! Epoch-level multipliers are fitted from the glue levels of the active
//! cells (least squares on the per-cell stationarity equations reduces to a
//! mean); residuals then measure how far the policy is from satisfying the
//! remaining conditions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::gluekernel::v_star_matrix;
use crate::math::{abs, ln_1p};
use crate::model::{audit_policy, LedgerReport, Matrix, Policy, ProblemKind, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct KktCertificate {
    /// Energy causality multiplier per epoch.
    pub lambda: Vec<f64>,
    /// Battery overflow (throughput) or data causality (energy) multiplier.
    pub mu: Vec<f64>,
    /// Multiplier of the total delivery constraint (energy kinds).
    pub delivery: f64,
    /// Duration cap multipliers.
    pub phi: Matrix,
    /// Zero-duration multipliers.
    pub psi: Matrix,
    /// Zero-allocation multipliers.
    pub sigma: Matrix,
    pub stationarity: f64,
    pub complementarity: f64,
    pub max_residual: f64,
    /// Some multiplier was fixed by convention rather than by the data.
    pub degenerate: bool,
}

/// Relative tolerance on durations and ledgers when classifying cells and
/// binding constraints.
const ACTIVE_TOL: f64 = 1e-9;

/// `∂/∂Θ` of the rate perspective at fixed transmit energy, per unit time.
fn rate_margin(gamma: f64, p: f64) -> f64 {
    let u = gamma * p;
    0.5 * ln_1p(u) - u / (2.0 * (1.0 + u))
}

/// `(1/γ + p)·ln(1 + γp) − p`; equals ε exactly at the threshold power.
fn cost_margin(gamma: f64, p: f64) -> f64 {
    (1.0 / gamma + p) * ln_1p(gamma * p) - p
}

#[derive(Clone, Copy, PartialEq)]
enum CellState {
    Idle,
    Partial,
    Full,
}

fn classify(s: &Scenario, pol: &Policy, i: usize, k: usize) -> CellState {
    let tau = s.duration(i);
    let d = pol.duration[(i, k)];
    if d <= ACTIVE_TOL * tau {
        CellState::Idle
    } else if d >= tau * (1.0 - ACTIVE_TOL) {
        CellState::Full
    } else {
        CellState::Partial
    }
}

/// Smallest activation threshold `1/γ + v*` in each epoch.
fn min_thresholds(s: &Scenario, v: &Matrix) -> Vec<f64> {
    (0..s.num_epochs())
        .map(|i| {
            (0..s.num_channels())
                .map(|k| 1.0 / s.gain(i, k) + v[(i, k)])
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Mean glue level of the active cells of epoch `i`.
fn mean_level(s: &Scenario, pol: &Policy, i: usize) -> Option<f64> {
    let levels: Vec<f64> = (0..s.num_channels())
        .filter(|&k| classify(s, pol, i, k) != CellState::Idle)
        .map(|k| 1.0 / s.gain(i, k) + pol.power[(i, k)])
        .collect();
    (!levels.is_empty()).then(|| levels.iter().sum::<f64>() / levels.len() as f64)
}

fn tight(slack: f64, scale: f64) -> bool {
    abs(slack) <= 1e-7 * scale.max(1.0)
}

/// Evaluates the optimality conditions of `kind` at `pol`.
///
/// For completion time, `s` must already be truncated at the completion
/// time; the conditions checked are those of energy maximization there.
pub fn kkt_residuals(s: &Scenario, pol: &Policy, kind: ProblemKind) -> Result<KktCertificate> {
    let audit = audit_policy(s, pol, kind)?;
    Ok(match kind {
        ProblemKind::Throughput => throughput_certificate(s, pol, &audit),
        ProblemKind::Energy | ProblemKind::Tct => energy_certificate(s, pol, &audit),
    })
}

fn empty_certificate(s: &Scenario) -> KktCertificate {
    let (ni, nk) = s.shape();
    KktCertificate {
        lambda: vec![0.0; ni],
        mu: vec![0.0; ni],
        delivery: 0.0,
        phi: Matrix::zeros(ni, nk),
        psi: Matrix::zeros(ni, nk),
        sigma: Matrix::zeros(ni, nk),
        stationarity: 0.0,
        complementarity: 0.0,
        max_residual: 0.0,
        degenerate: false,
    }
}

fn throughput_certificate(s: &Scenario, pol: &Policy, audit: &LedgerReport) -> KktCertificate {
    let n = s.num_epochs();
    let eps = s.processing_cost();
    let v = v_star_matrix(s);
    let c_min = min_thresholds(s, &v);
    let mut cert = empty_certificate(s);
    // Λ_i = Σ_{j≥i} (λ_j − μ_j) is the inverse of twice the glue level.
    let mut big = vec![0.0; n + 1];
    for i in (0..n).rev() {
        big[i] = match mean_level(s, pol, i) {
            Some(xi) => 1.0 / (2.0 * xi),
            None => {
                cert.degenerate = true;
                let floor = 1.0 / (2.0 * c_min[i]);
                if i + 1 < n { big[i + 1].max(floor) } else { floor }
            }
        };
    }
    let cum_e = s.cumulative_energy();
    let mut station: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for i in 0..n {
        let d = big[i] - big[i + 1];
        cert.lambda[i] = d.max(0.0);
        cert.mu[i] = (-d).max(0.0);
        let energy_slack = audit.residual[i];
        comp = comp.max(cert.lambda[i] * abs(energy_slack));
        if let (Some(cap), true) = (s.battery().limit(), i + 1 < n) {
            let overflow_slack = cap - energy_slack - s.epochs()[i + 1].energy;
            comp = comp.max(cert.mu[i] * abs(overflow_slack));
            if tight(energy_slack, cum_e[i]) && tight(overflow_slack, cap) {
                cert.degenerate = true;
            }
        }
        for k in 0..s.num_channels() {
            let g = s.gain(i, k);
            let p = pol.power[(i, k)];
            match classify(s, pol, i, k) {
                CellState::Idle => {
                    let psi = big[i] - 1.0 / (2.0 * (1.0 / g + v[(i, k)]));
                    cert.psi[(i, k)] = psi.max(0.0);
                    station = station.max((-psi).max(0.0) / big[i].max(f64::MIN_POSITIVE));
                }
                state => {
                    let xi = 1.0 / g + p;
                    station = station.max(abs(1.0 / (2.0 * xi) - big[i]) / big[i]);
                    let phi = rate_margin(g, p) - eps * big[i];
                    if state == CellState::Full {
                        cert.phi[(i, k)] = phi.max(0.0);
                        station = station.max((-phi).max(0.0));
                    } else {
                        station = station.max(abs(phi));
                    }
                }
            }
        }
    }
    cert.stationarity = station;
    cert.complementarity = comp;
    cert.max_residual = station.max(comp);
    cert
}

fn energy_certificate(s: &Scenario, pol: &Policy, audit: &LedgerReport) -> KktCertificate {
    let n = s.num_epochs();
    let eps = s.processing_cost();
    let v = v_star_matrix(s);
    let c_min = min_thresholds(s, &v);
    let mut cert = empty_certificate(s);
    let mut target = vec![0.0; n];
    for i in (0..n).rev() {
        target[i] = match mean_level(s, pol, i) {
            Some(xi) => xi,
            None => {
                cert.degenerate = true;
                if i + 1 < n { target[i + 1].min(c_min[i]) } else { c_min[i] }
            }
        };
    }
    // D_i = ν − Σ_{j≥i} μ_j and 1 + L_i = 1 + Σ_{j≥i} λ_j, with D_i = 2ξ_i(1 + L_i).
    let mut d = vec![0.0; n];
    let mut one_l = vec![1.0; n];
    d[n - 1] = 2.0 * target[n - 1];
    cert.delivery = d[n - 1];
    let cum_e = s.cumulative_energy();
    let cum_b = s.cumulative_data();
    for i in (0..n - 1).rev() {
        d[i] = d[i + 1];
        one_l[i] = one_l[i + 1];
        let r = d[i + 1] - 2.0 * target[i] * one_l[i + 1];
        if r <= 0.0 {
            continue;
        }
        let buffer_empty = tight(audit.buffer[i], cum_b[i]);
        let battery_empty = tight(audit.residual[i], cum_e[i]);
        if buffer_empty && battery_empty {
            cert.degenerate = true;
        }
        let lam = d[i + 1] / (2.0 * target[i]) - one_l[i + 1];
        let use_mu = buffer_empty || (!battery_empty && r * abs(audit.buffer[i]) <= lam * abs(audit.residual[i]));
        if use_mu {
            cert.mu[i] = r;
            d[i] -= r;
        } else {
            cert.lambda[i] = lam;
            one_l[i] += lam;
        }
    }
    let mut station: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for i in 0..n {
        comp = comp.max(cert.lambda[i] * abs(audit.residual[i]));
        comp = comp.max(cert.mu[i] * abs(audit.buffer[i]));
        let level = d[i] / (2.0 * one_l[i]);
        for k in 0..s.num_channels() {
            let g = s.gain(i, k);
            let p = pol.power[(i, k)];
            match classify(s, pol, i, k) {
                CellState::Idle => {
                    let psi = 2.0 * (1.0 / g + v[(i, k)]) - level;
                    cert.psi[(i, k)] = psi.max(0.0);
                    station = station.max((-psi).max(0.0) / level.max(f64::MIN_POSITIVE));
                }
                state => {
                    station = station.max(abs(1.0 / g + p - level) / level);
                    let phi = one_l[i] * (cost_margin(g, p) - eps);
                    if state == CellState::Full {
                        cert.phi[(i, k)] = phi.max(0.0);
                        station = station.max((-phi).max(0.0));
                    } else {
                        station = station.max(abs(phi));
                    }
                }
            }
        }
    }
    comp = comp.max(cert.delivery * abs(audit.total_delivered() - s.total_data()));
    cert.stationarity = station;
    cert.complementarity = comp;
    cert.max_residual = station.max(comp);
    cert
}
