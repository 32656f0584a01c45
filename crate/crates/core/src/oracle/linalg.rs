use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Square dense matrix stored row-major.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Adds `w·g·gᵀ`.
    pub fn add_outer(&mut self, g: &[f64], w: f64) {
        let nz: Vec<usize> = (0..self.n).filter(|&i| g[i] != 0.0).collect();
        for &i in &nz {
            for &j in &nz {
                self.add(i, j, w * g[i] * g[j]);
            }
        }
    }
}

/// In-place Cholesky factor; `None` if a pivot is not positive.
fn cholesky(m: &Dense) -> Option<Vec<f64>> {
    let n = m.n;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = sqrt(d);
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Some(l)
}

/// Solves `m·x = b` for symmetric positive (semi)definite `m`, adding a
/// growing diagonal shift until the factorization succeeds.
pub(crate) fn solve_spd(m: &Dense, b: &[f64]) -> Option<Vec<f64>> {
    let n = m.n;
    let scale = (0..n).map(|i| m.get(i, i).abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..40 {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted.add(i, i, shift);
        }
        if let Some(l) = cholesky(&shifted) {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = b[i];
                for k in 0..i {
                    s -= l[i * n + k] * y[k];
                }
                y[i] = s / l[i * n + i];
            }
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[k * n + i] * x[k];
                }
                x[i] = s / l[i * n + i];
            }
            return Some(x);
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 10.0 };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let mut m = Dense::zeros(3);
        let vals = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.add(i, j, vals[i][j]);
            }
        }
        let x = solve_spd(&m, &[1.0, 2.0, 3.0]).unwrap();
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| vals[i][j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_is_regularized() {
        let mut m = Dense::zeros(2);
        m.add_outer(&[1.0, 1.0], 1.0);
        let x = solve_spd(&m, &[1.0, 1.0]).unwrap();
        assert!((x[0] + x[1] - 1.0).abs() < 1e-6);
    }
}
