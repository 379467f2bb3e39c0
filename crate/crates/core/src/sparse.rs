//! Complex CSR matrices and a banded LU with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self { n_rows, n_cols, indptr, indices, values }
    }

    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or_default()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `e^{-λ} M (e^{λ} x)` evaluated entrywise as `Σ m_pq e^{λ_q - λ_p} x_q`.
    pub fn apply_conj(&self, x: &[C64], shift: &[f64]) -> Vec<C64> {
        (0..self.n_rows)
            .map(|r| {
                let lr = shift[r];
                self.row(r)
                    .filter(|&(c, _)| x[c] != C64::default())
                    .map(|(c, v)| v * (x[c] * (shift[c] - lr).exp()))
                    .sum()
            })
            .collect()
    }

    /// `M* x`.
    pub fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[c] += v.conj() * x[r];
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                trip.push((c, r, v.conj()));
            }
        }
        Self::from_triplets(self.n_cols, self.n_rows, trip)
    }

    /// Keeps entries whose row and column both map to `Some`.
    pub fn restrict(&self, map: &[Option<usize>], n: usize) -> Self {
        let mut trip = Vec::new();
        for r in 0..self.n_rows {
            if let Some(rr) = map[r] {
                for (c, v) in self.row(r) {
                    if let Some(cc) = map[c] {
                        trip.push((rr, cc, v));
                    }
                }
            }
        }
        Self::from_triplets(n, n, trip)
    }

    /// `α I + β M` for a square matrix.
    pub fn shifted(&self, alpha: C64, beta: C64) -> Self {
        let mut trip: Vec<_> = (0..self.n_rows).map(|i| (i, i, alpha)).collect();
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                trip.push((r, c, beta * v));
            }
        }
        Self::from_triplets(self.n_rows, self.n_cols, trip)
    }

    pub fn scale_rows(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.values[k] *= d[r];
            }
        }
        out
    }

    pub fn scale_cols(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for k in 0..out.values.len() {
            out.values[k] *= d[out.indices[k]];
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut m = vec![vec![C64::default(); self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[r][c] += v;
            }
        }
        m
    }

    /// Lower and upper bandwidths.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for r in 0..self.n_rows {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factors of a banded matrix, `P A = L U`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i`, column `j` at `i * w + (j + kl - i)`, `w = 2 kl + ku + 1`.
    u: Vec<C64>,
    l: Vec<C64>,
    piv: Vec<usize>,
    source: CsrMatrix,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::ShapeMismatch { expected: a.n_rows, found: a.n_cols });
        }
        let n = a.n_rows;
        let (kl, ku) = a.bandwidth();
        let w = 2 * kl + ku + 1;
        let mut u = vec![C64::default(); n * w];
        for r in 0..n {
            for (c, v) in a.row(r) {
                u[r * w + (c + kl - r)] += v;
            }
        }
        let mut l = vec![C64::default(); n * kl.max(1)];
        let mut piv = vec![0usize; n];
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        let mut scale: f64 = 0.0;
        for v in &u {
            scale = scale.max(v.norm());
        }
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = u[at(k, k)].norm();
            for i in k + 1..=last {
                let m = u[at(i, k)].norm();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if !(best > 1e-300 * scale.max(1e-300)) {
                return Err(Error::Solver { residual: f64::INFINITY });
            }
            piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    u.swap(at(k, j), at(p, j));
                }
            }
            let d = u[at(k, k)];
            for i in k + 1..=last {
                let f = u[at(i, k)] / d;
                l[k * kl + (i - k - 1)] = f;
                u[at(i, k)] = C64::default();
                if f != C64::default() {
                    for j in k + 1..=jmax {
                        let ukj = u[at(k, j)];
                        u[at(i, j)] -= f * ukj;
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, u, l, piv, source: a.clone() })
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, w) = (self.n, self.kl, 2 * self.kl + self.ku + 1);
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.l[k * kl + (i - k - 1)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + kl + self.ku).min(n - 1) {
                acc -= self.u[i * w + (j + kl - i)] * b[j];
            }
            b[i] = acc / self.u[i * w + kl];
        }
    }

    /// Solves and checks the relative residual against `tol`.
    pub fn solve_checked(&self, b: &[C64], tol: f64) -> Result<Vec<C64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        let ax = self.source.apply(&x);
        let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let residual = if den > 0.0 { num / den } else { num };
        if !(residual <= tol) {
            return Err(Error::Solver { residual });
        }
        Ok(x)
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}
