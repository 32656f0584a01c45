//! Log-barrier interior-point method for small dense convex programs whose
//! nonlinear parts are perspective functions of the rate and of its inverse.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{solve_spd, Dense};
use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_1p};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Term {
    /// `Θ/2·ln(1 + γα/Θ)` over `(α, Θ)`; concave.
    Rate { a: usize, th: usize, gamma: f64 },
    /// `Θ/γ·(exp(2β/Θ) − 1)` over `(β, Θ)`; convex.
    ExpCost { b: usize, th: usize, gamma: f64 },
}

impl Term {
    fn value(&self, x: &[f64]) -> Option<f64> {
        match *self {
            Term::Rate { a, th, gamma } => {
                let (al, t) = (x[a], x[th]);
                (t > 0.0 && al > -t / gamma).then(|| 0.5 * t * ln_1p(gamma * al / t))
            }
            Term::ExpCost { b, th, gamma } => {
                let t = x[th];
                if t <= 0.0 {
                    return None;
                }
                let v = t / gamma * (exp(2.0 * x[b] / t) - 1.0);
                v.is_finite().then_some(v)
            }
        }
    }

    fn grad(&self, x: &[f64], w: f64, g: &mut [f64]) {
        match *self {
            Term::Rate { a, th, gamma } => {
                let (al, t) = (x[a], x[th]);
                let u = t + gamma * al;
                g[a] += w * gamma * t / (2.0 * u);
                g[th] += w * (0.5 * ln(u / t) - gamma * al / (2.0 * u));
            }
            Term::ExpCost { b, th, gamma } => {
                let t = x[th];
                let z = 2.0 * x[b] / t;
                let ez = exp(z);
                g[b] += w * 2.0 / gamma * ez;
                g[th] += w * ((ez - 1.0) - z * ez) / gamma;
            }
        }
    }

    fn hess(&self, x: &[f64], w: f64, h: &mut Dense) {
        match *self {
            Term::Rate { a, th, gamma } => {
                let (al, t) = (x[a], x[th]);
                let u = t + gamma * al;
                let c = -w * gamma * gamma / (2.0 * u * u);
                h.add(a, a, c * t);
                h.add(a, th, -c * al);
                h.add(th, a, -c * al);
                h.add(th, th, c * al * al / t);
            }
            Term::ExpCost { b, th, gamma } => {
                let t = x[th];
                let z = 2.0 * x[b] / t;
                let c = w * exp(z) / (gamma * t);
                h.add(b, b, 4.0 * c);
                h.add(b, th, -2.0 * z * c);
                h.add(th, b, -2.0 * z * c);
                h.add(th, th, z * z * c);
            }
        }
    }
}

/// `Σ lin·x + constant + Σ coef·term`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Function {
    pub lin: Vec<(usize, f64)>,
    pub constant: f64,
    pub terms: Vec<(f64, Term)>,
}

impl Function {
    pub fn linear(lin: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { lin, constant, terms: Vec::new() }
    }

    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.constant;
        for &(i, c) in &self.lin {
            v += c * x[i];
        }
        for (c, t) in &self.terms {
            v += c * t.value(x)?;
        }
        v.is_finite().then_some(v)
    }

    pub fn grad(&self, x: &[f64], w: f64, g: &mut [f64]) {
        for &(i, c) in &self.lin {
            g[i] += w * c;
        }
        for (c, t) in &self.terms {
            t.grad(x, w * c, g);
        }
    }

    fn hess(&self, x: &[f64], w: f64, h: &mut Dense) {
        for (c, t) in &self.terms {
            t.hess(x, w * c, h);
        }
    }

    fn is_empty(&self) -> bool {
        self.lin.is_empty() && self.terms.is_empty()
    }
}

/// `minimize objective(x)` subject to `constraints[i](x) ≤ 0`.
///
/// Constraints flagged `hard` must hold strictly at the starting point and
/// are never relaxed during phase I.
#[derive(Debug, Clone)]
pub(crate) struct Program {
    pub n: usize,
    pub objective: Function,
    pub constraints: Vec<Function>,
    pub hard: Vec<bool>,
}

impl Program {
    pub fn new(n: usize, objective: Function) -> Self {
        Self { n, objective, constraints: Vec::new(), hard: Vec::new() }
    }

    pub fn push(&mut self, f: Function, hard: bool) -> usize {
        self.constraints.push(f);
        self.hard.push(hard);
        self.constraints.len() - 1
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Dual estimate for each constraint.
    pub multipliers: Vec<f64>,
    /// `‖∇f₀ + Σ λᵢ∇fᵢ‖∞` at the returned point.
    pub stationarity: f64,
    /// Duality gap bound `m/t`.
    pub gap: f64,
}

const ALPHA: f64 = 0.25;
const BETA: f64 = 0.5;
const MU: f64 = 10.0;
const MAX_OUTER: usize = 50;
const MAX_NEWTON: usize = 200;
const GAP_TOL: f64 = 1e-7;

struct Barrier<'a> {
    prog: &'a Program,
    t: f64,
}

impl Barrier<'_> {
    fn phi(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.t * self.prog.objective.value(x)?;
        for f in &self.prog.constraints {
            let fi = f.value(x)?;
            if fi >= 0.0 {
                return None;
            }
            v -= ln(-fi);
        }
        v.is_finite().then_some(v)
    }

    fn newton_system(&self, x: &[f64]) -> (Vec<f64>, Dense) {
        let n = self.prog.n;
        let mut g = vec![0.0; n];
        let mut h = Dense::zeros(n);
        self.prog.objective.grad(x, self.t, &mut g);
        self.prog.objective.hess(x, self.t, &mut h);
        let mut gi = vec![0.0; n];
        for f in &self.prog.constraints {
            let fi = f.value(x).unwrap_or(f64::NAN);
            gi.iter_mut().for_each(|v| *v = 0.0);
            f.grad(x, 1.0, &mut gi);
            for j in 0..n {
                g[j] += gi[j] / -fi;
            }
            h.add_outer(&gi, 1.0 / (fi * fi));
            f.hess(x, 1.0 / -fi, &mut h);
        }
        (g, h)
    }

    /// Damped Newton centering. Returns early once `stop` holds.
    fn center(&self, x: &mut Vec<f64>, stop: &dyn Fn(&[f64]) -> bool) {
        for _ in 0..MAX_NEWTON {
            if stop(x) {
                return;
            }
            let (g, h) = self.newton_system(x);
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(dx) = solve_spd(&h, &neg) else { return };
            let dec: f64 = -g.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
            if !(dec > 2e-14) {
                return;
            }
            let Some(f0) = self.phi(x) else { return };
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + step * d).collect();
                if let Some(f1) = self.phi(&trial) {
                    if f1 <= f0 - ALPHA * step * dec {
                        *x = trial;
                        moved = true;
                        break;
                    }
                }
                step *= BETA;
            }
            if !moved {
                return;
            }
        }
    }
}

fn max_violation(prog: &Program, x: &[f64], soft_only: bool) -> Option<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (f, &hard) in prog.constraints.iter().zip(&prog.hard) {
        if soft_only && hard {
            continue;
        }
        worst = worst.max(f.value(x)?);
    }
    Some(worst)
}

/// Finds a point where every constraint holds strictly, starting from `x0`,
/// which must satisfy the hard constraints strictly.
fn phase_one(prog: &Program, x0: &[f64]) -> Result<Vec<f64>> {
    let worst = max_violation(prog, x0, true).ok_or(Error::InfeasibleInstance)?;
    if worst < 0.0 {
        return Ok(x0.to_vec());
    }
    let n = prog.n;
    let s = n;
    let mut aug = Program::new(n + 1, Function::linear(vec![(s, 1.0)], 0.0));
    for (f, &hard) in prog.constraints.iter().zip(&prog.hard) {
        let mut g = f.clone();
        if !hard {
            g.lin.push((s, -1.0));
        }
        aug.push(g, true);
    }
    aug.push(Function::linear(vec![(s, -1.0)], -1.0 - worst.abs()), true);
    let mut x = x0.to_vec();
    x.push(worst + 1.0);
    let feasible = |z: &[f64]| max_violation(prog, &z[..n], true).is_some_and(|w| w < 0.0);
    let mut t = 1.0;
    for _ in 0..MAX_OUTER {
        let bar = Barrier { prog: &aug, t };
        bar.center(&mut x, &feasible);
        if feasible(&x) {
            x.truncate(n);
            return Ok(x);
        }
        if aug.constraints.len() as f64 / t < 1e-12 {
            break;
        }
        t *= MU;
    }
    Err(Error::InfeasibleInstance)
}

/// Solves `prog` by the barrier method from `x0`.
pub(crate) fn solve(prog: &Program, x0: &[f64]) -> Result<BarrierResult> {
    if prog.n == 0 {
        return Ok(BarrierResult {
            x: Vec::new(),
            objective: prog.objective.constant,
            multipliers: vec![0.0; prog.constraints.len()],
            stationarity: 0.0,
            gap: 0.0,
        });
    }
    for (f, &hard) in prog.constraints.iter().zip(&prog.hard) {
        if f.is_empty() && f.constant > 0.0 && hard {
            return Err(Error::InfeasibleInstance);
        }
    }
    let mut x = phase_one(prog, x0)?;
    let m = prog.constraints.len() as f64;
    let scale = 1.0 + prog.objective.value(&x).map_or(0.0, f64::abs);
    let mut t = 1.0;
    let never = |_: &[f64]| false;
    for _ in 0..MAX_OUTER {
        let bar = Barrier { prog, t };
        bar.center(&mut x, &never);
        if m / t < GAP_TOL * scale {
            break;
        }
        t *= MU;
    }
    let gap = m / t;
    let objective = prog.objective.value(&x).ok_or(Error::NoConvergence { residual: f64::INFINITY })?;
    let multipliers: Vec<f64> = prog
        .constraints
        .iter()
        .map(|f| 1.0 / (t * -f.value(&x).unwrap_or(f64::NEG_INFINITY)))
        .collect();
    let mut r = vec![0.0; prog.n];
    prog.objective.grad(&x, 1.0, &mut r);
    for (f, &l) in prog.constraints.iter().zip(&multipliers) {
        f.grad(&x, l, &mut r);
    }
    let stationarity = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if gap > 1e-6 * scale {
        return Err(Error::NoConvergence { residual: gap });
    }
    Ok(BarrierResult { x, objective, multipliers, stationarity, gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_program() {
        // minimize -x0 - x1 s.t. x0 + 2 x1 <= 2, 2 x0 + x1 <= 2, x >= 0.
        let mut p = Program::new(2, Function::linear(vec![(0, -1.0), (1, -1.0)], 0.0));
        p.push(Function::linear(vec![(0, 1.0), (1, 2.0)], -2.0), false);
        p.push(Function::linear(vec![(0, 2.0), (1, 1.0)], -2.0), false);
        p.push(Function::linear(vec![(0, -1.0)], 0.0), true);
        p.push(Function::linear(vec![(1, -1.0)], 0.0), true);
        let r = solve(&p, &[0.1, 0.1]).unwrap();
        assert!((r.objective + 4.0 / 3.0).abs() < 1e-6);
        assert!((r.multipliers[0] - 1.0 / 3.0).abs() < 1e-6);
        assert!(r.stationarity < 1e-6);
    }

    #[test]
    fn phase_one_from_infeasible_start() {
        // minimize x s.t. x >= 3 (soft), x <= 10 (hard).
        let mut p = Program::new(1, Function::linear(vec![(0, 1.0)], 0.0));
        p.push(Function::linear(vec![(0, -1.0)], 3.0), false);
        p.push(Function::linear(vec![(0, 1.0)], -10.0), true);
        let r = solve(&p, &[0.0]).unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn detects_empty_interior() {
        let mut p = Program::new(1, Function::linear(vec![(0, 1.0)], 0.0));
        p.push(Function::linear(vec![(0, -1.0)], 3.0), false);
        p.push(Function::linear(vec![(0, 1.0)], -2.0), true);
        assert!(matches!(solve(&p, &[0.0]), Err(Error::InfeasibleInstance)));
    }

    #[test]
    fn perspective_terms_match_finite_differences() {
        let x = [0.7, 1.3];
        let terms = [Term::Rate { a: 0, th: 1, gamma: 0.8 }, Term::ExpCost { b: 0, th: 1, gamma: 0.8 }];
        for t in terms {
            let mut g = [0.0; 2];
            t.grad(&x, 1.0, &mut g);
            let mut h = Dense::zeros(2);
            t.hess(&x, 1.0, &mut h);
            let d = 1e-6;
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += d;
                xm[j] -= d;
                let fd = (t.value(&xp).unwrap() - t.value(&xm).unwrap()) / (2.0 * d);
                assert!((fd - g[j]).abs() < 1e-7, "{t:?} grad {j}");
                let mut gp = [0.0; 2];
                let mut gm = [0.0; 2];
                t.grad(&xp, 1.0, &mut gp);
                t.grad(&xm, 1.0, &mut gm);
                for i in 0..2 {
                    let fd = (gp[i] - gm[i]) / (2.0 * d);
                    assert!((fd - h.get(i, j)).abs() < 1e-6, "{t:?} hess {i}{j}");
                }
            }
        }
    }
}
