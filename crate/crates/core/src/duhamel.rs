//! Dense matrix-exponential oracle for the time stepper:
//! `v(t) = e^{tA} v₀ + ∫₀ᵗ e^{sA} F(t − s) ds`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::cn::CrankNicolson;
use crate::error::{Error, Result};
use crate::field::C64;
use crate::sparse::CsrMatrix;

/// Largest system the dense oracle accepts.
pub const ORACLE_LIMIT: usize = 500;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub a: Vec<C64>,
}

impl Dense {
    pub fn identity(n: usize) -> Self {
        let mut a = vec![C64::default(); n * n];
        for i in 0..n {
            a[i * n + i] = C64::from(1.0);
        }
        Self { n, a }
    }

    pub fn from_csr(m: &CsrMatrix) -> Self {
        let n = m.n_rows;
        let mut a = vec![C64::default(); n * n];
        for r in 0..n {
            for (c, v) in m.row(r) {
                a[r * n + c] += v;
            }
        }
        Self { n, a }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, a: self.a.iter().map(|v| v * c).collect() }
    }

    pub fn matmul(&self, o: &Dense) -> Dense {
        let n = self.n;
        let mut out = vec![C64::default(); n * n];
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x == C64::default() {
                    continue;
                }
                let row = &o.a[k * n..(k + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, y) in dst.iter_mut().zip(row) {
                    *d += x * y;
                }
            }
        }
        Dense { n, a: out }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n).map(|i| self.a[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn norm1(&self) -> f64 {
        let n = self.n;
        (0..n).map(|j| (0..n).map(|i| self.a[i * n + j].norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `e^{self}` by Taylor series with scaling and squaring.
    pub fn expm(&self) -> Dense {
        let norm = self.norm1();
        let mut squarings = 0u32;
        while norm / (2f64).powi(squarings as i32) > 0.25 {
            squarings += 1;
        }
        let b = self.scaled((2f64).powi(-(squarings as i32)));
        let mut term = Dense::identity(self.n);
        let mut sum = term.clone();
        for k in 1..=18 {
            term = term.matmul(&b).scaled(1.0 / k as f64);
            for (s, t) in sum.a.iter_mut().zip(&term.a) {
                *s += t;
            }
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

/// Five-point Gauss–Legendre rule on `[0, 1]`.
const GL_X: [f64; 5] = [
    0.046_910_077_030_668_0,
    0.230_765_344_947_158_5,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_332_0,
];
const GL_W: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelReport {
    /// `max_n ‖v_CN(t_n) − v(t_n)‖ / max_n ‖v(t_n)‖`.
    pub max_rel_deviation: f64,
    pub per_step: Vec<f64>,
}

/// Compares Crank–Nicolson (source sampled at half steps) with the exact
/// Duhamel formula, integrated per step by Gauss–Legendre quadrature.
pub fn duhamel_check(
    v0: &[C64],
    source: &dyn Fn(f64) -> Vec<C64>,
    a: &CsrMatrix,
    dt: f64,
    steps: usize,
) -> Result<DuhamelReport> {
    let n = a.n_rows;
    if n > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge { unknowns: n, limit: ORACLE_LIMIT });
    }
    if v0.len() != n {
        return Err(Error::ShapeMismatch { expected: n, found: v0.len() });
    }
    let dense = Dense::from_csr(a);
    let step_exp = dense.scaled(dt).expm();
    // e^{(1 − x_q) dt A} applied to F(t_n + x_q dt).
    let node_exp: Vec<Dense> = GL_X.iter().map(|x| dense.scaled((1.0 - x) * dt).expm()).collect();
    let cn = CrankNicolson::new(a, dt)?;
    let (mut exact, mut approx) = (v0.to_vec(), v0.to_vec());
    let mut errs = Vec::with_capacity(steps);
    let mut peak: f64 = norm(v0);
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut next = step_exp.apply(&exact);
        for q in 0..GL_X.len() {
            let f = source(t + GL_X[q] * dt);
            for (x, y) in next.iter_mut().zip(node_exp[q].apply(&f)) {
                *x += y * (GL_W[q] * dt);
            }
        }
        exact = next;
        let f_half = source(t + 0.5 * dt);
        approx = cn.step(&approx, Some(&f_half))?;
        let d: Vec<C64> = exact.iter().zip(&approx).map(|(a, b)| a - b).collect();
        errs.push(norm(&d));
        peak = peak.max(norm(&exact));
    }
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let per_step: Vec<f64> = errs.iter().map(|e| e / scale).collect();
    let max_rel_deviation = per_step.iter().cloned().fold(0.0, f64::max);
    Ok(DuhamelReport { max_rel_deviation, per_step })
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        // [[0, -θ], [θ, 0]] exponentiates to a rotation by θ.
        let th = 2.7;
        let m = Dense { n: 2, a: vec![C64::default(), C64::from(-th), C64::from(th), C64::default()] };
        let e = m.expm();
        assert!((e.a[0] - th.cos()).norm() < 1e-13);
        assert!((e.a[2] - th.sin()).norm() < 1e-13);
    }

    #[test]
    fn oracle_refuses_large_systems() {
        let a = CsrMatrix::from_triplets(ORACLE_LIMIT + 1, ORACLE_LIMIT + 1, vec![]);
        let v = vec![C64::default(); ORACLE_LIMIT + 1];
        let r = duhamel_check(&v, &|_| vec![C64::default(); ORACLE_LIMIT + 1], &a, 0.1, 1);
        assert!(matches!(r, Err(Error::OracleTooLarge { .. })));
    }
}
