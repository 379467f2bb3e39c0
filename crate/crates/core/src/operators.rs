//! Differential operators of the chart geometry.
//!
//! `Δ_g` and the magnetic operator `L` have a divergence (flux) form, a
//! Hermitian matrix `S` with `L = S / √|g|` on interior rows, and an expanded
//! nodal form. `laplace_beltrami` uses the flux form on interior nodes and
//! the expanded form on the two boundary rings.

use alloc::vec::Vec;

use num_traits::Float;

use crate::diff::{d1, first_taps, Axis, Jet};
use crate::error::{Error, Result};
use crate::field::{CovectorField, Scalar, ScalarField, C64};
use crate::grid::{Boundary, ChartGrid};
use crate::metric::{sym_entry, MetricData};
use crate::sparse::CsrMatrix;

/// Full-grid Hermitian flux matrix `S` of the magnetic operator.
///
/// `v* S u = -Σ K^{kl} (D_l u) conj(D_k v)` with `D = ∂ + i a`, so that
/// `(L u)_p = (S u)_p / √|g|_p` at every interior node. Rows belonging to
/// the boundary rings are incomplete and must not be used as operator values.
pub fn assemble_flux(grid: &ChartGrid, metric: &MetricData, a: Option<&CovectorField>) -> Result<CsrMatrix> {
    if metric.g.len() != grid.n_space() {
        return Err(Error::ShapeMismatch { expected: grid.n_space(), found: metric.g.len() });
    }
    if let Some(a) = a {
        a.check_grid(grid)?;
    }
    let (nr, na) = (grid.nr, grid.na);
    let (hr, ha) = (grid.hr(), grid.ha());
    let pot = |n: usize| a.map(|a| a.at(n)).unwrap_or([0.0, 0.0]);
    let kt: Vec<_> = (0..grid.n_space()).map(|n| metric.flux_tensor(n)).collect();
    let mut trip = Vec::with_capacity(grid.n_space() * 13);
    let ii = C64::i();

    let edge = |p: usize, q: usize, k: f64, a_e: f64, h: f64, trip: &mut Vec<(usize, usize, C64)>| {
        let alpha = C64::new(1.0 / h, 0.5 * a_e);
        let beta = C64::new(-1.0 / h, 0.5 * a_e);
        trip.push((p, p, C64::from(-k * beta.norm_sqr())));
        trip.push((q, q, C64::from(-k * alpha.norm_sqr())));
        trip.push((p, q, -k * beta.conj() * alpha));
        trip.push((q, p, -k * alpha.conj() * beta));
    };
    for i in 0..nr {
        for j in 0..na {
            let p = grid.idx(i, j);
            if i + 1 < nr {
                let q = grid.idx(i + 1, j);
                let k = 0.5 * (kt[p][0] + kt[q][0]);
                let a_e = 0.5 * (pot(p)[0] + pot(q)[0]);
                edge(p, q, k, a_e, hr, &mut trip);
            }
            let q = grid.idx(i, (j + 1) % na);
            let k = 0.5 * (kt[p][2] + kt[q][2]);
            let a_e = 0.5 * (pot(p)[1] + pot(q)[1]);
            edge(p, q, k, a_e, ha, &mut trip);
        }
    }

    // Cross terms use nodal centered rows; rows on the boundary rings drop
    // the missing neighbour, which only touches boundary rows of S.
    for i in 0..nr {
        for j in 0..na {
            let m = grid.idx(i, j);
            let k = kt[m][1];
            if k == 0.0 {
                continue;
            }
            let am = pot(m);
            let mut cr: Vec<(usize, C64)> = Vec::with_capacity(3);
            if i > 0 {
                cr.push((grid.idx(i - 1, j), C64::from(-0.5 / hr)));
            }
            if i + 1 < nr {
                cr.push((grid.idx(i + 1, j), C64::from(0.5 / hr)));
            }
            cr.push((m, ii * am[0]));
            let ct = [
                (grid.idx(i, (j + na - 1) % na), C64::from(-0.5 / ha)),
                (grid.idx(i, (j + 1) % na), C64::from(0.5 / ha)),
                (m, ii * am[1]),
            ];
            for &(p, x) in &cr {
                for &(q, y) in &ct {
                    trip.push((p, q, -k * x.conj() * y));
                    trip.push((q, p, -k * y.conj() * x));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(grid.n_space(), grid.n_space(), trip))
}

/// Sampled geometry with cached flux matrices.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub grid: ChartGrid,
    pub metric: MetricData,
    pub potential: CovectorField,
    /// Flux matrix with `a = 0`.
    pub flux0: CsrMatrix,
    /// Flux matrix with the potential.
    pub flux_a: CsrMatrix,
}

impl Geometry {
    pub fn new(grid: ChartGrid, metric: MetricData, potential: CovectorField) -> Result<Self> {
        let flux0 = assemble_flux(&grid, &metric, None)?;
        let flux_a = if potential.is_zero() {
            flux0.clone()
        } else {
            assemble_flux(&grid, &metric, Some(&potential))?
        };
        Ok(Self { grid, metric, potential, flux0, flux_a })
    }

    pub fn without_potential(grid: ChartGrid, metric: MetricData) -> Result<Self> {
        let a = CovectorField::zeros(&grid);
        Self::new(grid, metric, a)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.grid.n_space() {
            return Err(Error::ShapeMismatch { expected: self.grid.n_space(), found: len });
        }
        Ok(())
    }

    #[inline]
    fn is_boundary_row(&self, n: usize) -> bool {
        let i = n / self.grid.na;
        i == 0 || i == self.grid.nr - 1
    }

    /// `Δ_g u`: flux form on interior nodes, expanded form on the boundary.
    pub fn laplace_beltrami(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.laplace_beltrami_conj(u, None)
    }

    /// `e^{-λ} Δ_g (e^{λ} u)` without forming `e^{λ}`.
    pub fn laplace_beltrami_conj(&self, u: &[C64], shift: Option<&[f64]>) -> Result<Vec<C64>> {
        self.check(u.len())?;
        let flux = match shift {
            Some(l) => self.flux0.apply_conj(u, l),
            None => self.flux0.apply(u),
        };
        let mut out: Vec<C64> = flux.iter().zip(&self.metric.sqrt_det).map(|(v, w)| v / w).collect();
        let grid = &self.grid;
        let jet = Jet::of_conj(u, grid, shift);
        for b in Boundary::BOTH {
            let i = grid.ring(b);
            for j in 0..grid.na {
                let n = grid.idx(i, j);
                out[n] = expanded_at(&jet, &self.metric, n);
            }
        }
        Ok(out)
    }

    /// `Δ_g u` in expanded form `g^{kl}(∂_k∂_l u − Γ^m_{kl}∂_m u)` at every node.
    pub fn laplace_beltrami_expanded<T: Scalar>(&self, u: &[T]) -> Result<Vec<T>> {
        self.check(u.len())?;
        let jet = Jet::of_conj(u, &self.grid, None);
        Ok((0..u.len()).map(|n| expanded_at(&jet, &self.metric, n)).collect())
    }

    /// `L u` in the expanded form.
    pub fn magnetic(&self, u: &[C64]) -> Result<Vec<C64>> {
        let mut out = self.laplace_beltrami(u)?;
        if self.potential.is_zero() {
            return Ok(out);
        }
        let grid = &self.grid;
        let a = &self.potential;
        let ur = d1(u, grid, Axis::R);
        let ua = d1(u, grid, Axis::A);
        let dar = [d1(&a.a_r.data, grid, Axis::R), d1(&a.a_r.data, grid, Axis::A)];
        let dat = [d1(&a.a_t.data, grid, Axis::R), d1(&a.a_t.data, grid, Axis::A)];
        let ii = C64::i();
        for n in 0..u.len() {
            let gi = self.metric.g_inv[n];
            let am = a.at(n);
            let c = &self.metric.christoffel[n];
            let grad = [ur[n], ua[n]];
            let mut first = C64::default();
            let mut zeroth = C64::default();
            for k in 0..2 {
                for l in 0..2 {
                    let gkl = sym_entry(gi, k, l);
                    first += grad[l] * (2.0 * gkl * am[k]);
                    let dk_al = if l == 0 { dar[k][n] } else { dat[k][n] };
                    let gam = c[0][k][l] * am[0] + c[1][k][l] * am[1];
                    zeroth += gkl * (ii * (dk_al - gam) - am[k] * am[l]);
                }
            }
            out[n] += ii * first + zeroth * u[n];
        }
        Ok(out)
    }

    /// `L u` from the flux matrix; only interior entries are meaningful.
    pub fn magnetic_flux(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.check(u.len())?;
        let s = self.flux_a.apply(u);
        Ok(s.iter()
            .zip(&self.metric.sqrt_det)
            .enumerate()
            .map(|(n, (v, w))| if self.is_boundary_row(n) { C64::default() } else { v / w })
            .collect())
    }

    /// `∇_g u` as contravariant components `g^{kl} ∂_k u`.
    pub fn gradient<T: Scalar>(&self, u: &[T]) -> Vec<[T; 2]> {
        let ur = d1(u, &self.grid, Axis::R);
        let ua = d1(u, &self.grid, Axis::A);
        (0..u.len()).map(|n| raise(self.metric.g_inv[n], [ur[n], ua[n]])).collect()
    }

    /// `|∇_g u|²_g = g^{kl} ∂_k u conj(∂_l u)` (real, nonnegative).
    pub fn grad_norm_sq<T: Scalar>(&self, u: &[T]) -> Vec<f64> {
        let ur = d1(u, &self.grid, Axis::R);
        let ua = d1(u, &self.grid, Axis::A);
        (0..u.len()).map(|n| cov_norm_sq(self.metric.g_inv[n], [ur[n], ua[n]])).collect()
    }

    /// `(∇²_g u)_{kl} = ∂_k∂_l u − Γ^m_{kl} ∂_m u`.
    pub fn hessian<T: Scalar>(&self, u: &[T]) -> Vec<[[T; 2]; 2]> {
        let jet = Jet::of_conj(u, &self.grid, None);
        (0..u.len()).map(|n| hessian_at(&jet, &self.metric, n)).collect()
    }

    /// `g^{k₁l₁} g^{k₂l₂} H_{k₁k₂} conj(H_{l₁l₂})`.
    pub fn hessian_norm_sq<T: Scalar>(&self, u: &[T]) -> Vec<f64> {
        self.hessian(u)
            .iter()
            .enumerate()
            .map(|(n, h)| {
                let gi = self.metric.g_inv[n];
                let mut acc = 0.0;
                for k1 in 0..2 {
                    for l1 in 0..2 {
                        for k2 in 0..2 {
                            for l2 in 0..2 {
                                let w = sym_entry(gi, k1, l1) * sym_entry(gi, k2, l2);
                                acc += w * (h[k1][k2].to_c64() * h[l1][l2].to_c64().conj()).re;
                            }
                        }
                    }
                }
                acc
            })
            .collect()
    }

    /// Outward unit normal `ν_g` (contravariant) on a boundary ring.
    pub fn boundary_normal(&self, b: Boundary) -> Vec<[f64; 2]> {
        boundary_normal(&self.metric, &self.grid, b)
    }

    /// `∂_{ν_g} u` on a ring, one-sided second order in `r`.
    pub fn normal_derivative<T: Scalar>(&self, u: &[T], b: Boundary) -> Vec<T> {
        self.normal_derivative_conj(u, b, None)
    }

    pub fn normal_derivative_conj<T: Scalar>(&self, u: &[T], b: Boundary, shift: Option<&[f64]>) -> Vec<T> {
        let (ur, ua) = ring_partials(u, &self.grid, self.grid.ring(b), shift);
        let nu = self.boundary_normal(b);
        (0..self.grid.na).map(|j| ur[j] * nu[j][0] + ua[j] * nu[j][1]).collect()
    }

    /// `∇_{τ_g} u = ∇_g u − (∂_{ν_g} u) ν_g` on a ring.
    pub fn tangential_gradient<T: Scalar>(&self, u: &[T], b: Boundary) -> Vec<[T; 2]> {
        let i = self.grid.ring(b);
        let (ur, ua) = ring_partials(u, &self.grid, i, None);
        let nu = self.boundary_normal(b);
        (0..self.grid.na)
            .map(|j| {
                let n = self.grid.idx(i, j);
                let g = raise(self.metric.g_inv[n], [ur[j], ua[j]]);
                let dn = ur[j] * nu[j][0] + ua[j] * nu[j][1];
                [g[0] - dn * nu[j][0], g[1] - dn * nu[j][1]]
            })
            .collect()
    }

    /// `|∇_{τ_g} f|²_g` for ring data: `|∂_θ f|² / g_θθ`.
    pub fn tangential_norm_sq_ring<T: Scalar>(&self, ring: &[T], b: Boundary) -> Vec<f64> {
        let i = self.grid.ring(b);
        let da = crate::diff::da_ring(ring, self.grid.ha());
        (0..self.grid.na).map(|j| da[j].abs2() / self.metric.g[self.grid.idx(i, j)][2]).collect()
    }

    /// `|X|²_g = g_{kl} X^k conj(X^l)` for a vector field value at node `n`.
    pub fn vector_norm_sq<T: Scalar>(&self, n: usize, x: [T; 2]) -> f64 {
        let g = self.metric.g[n];
        let (a, b) = (x[0].to_c64(), x[1].to_c64());
        g[0] * a.norm_sqr() + 2.0 * g[1] * (a * b.conj()).re + g[2] * b.norm_sqr()
    }
}

/// `⟨X, Y⟩_g = g_{kl} X^k Y^l` (bilinear, no conjugation).
pub fn inner_g<T: Scalar>(metric: &MetricData, x: &[[T; 2]], y: &[[T; 2]]) -> Vec<T> {
    x.iter()
        .zip(y)
        .enumerate()
        .map(|(n, (a, b))| {
            let g = metric.g[n];
            a[0] * b[0] * g[0] + (a[0] * b[1] + a[1] * b[0]) * g[1] + a[1] * b[1] * g[2]
        })
        .collect()
}

#[inline]
pub(crate) fn raise<T: Scalar>(gi: [f64; 3], d: [T; 2]) -> [T; 2] {
    [d[0] * gi[0] + d[1] * gi[1], d[0] * gi[1] + d[1] * gi[2]]
}

#[inline]
pub(crate) fn cov_norm_sq<T: Scalar>(gi: [f64; 3], d: [T; 2]) -> f64 {
    let (a, b) = (d[0].to_c64(), d[1].to_c64());
    gi[0] * a.norm_sqr() + 2.0 * gi[1] * (a * b.conj()).re + gi[2] * b.norm_sqr()
}

fn hessian_at<T: Scalar>(jet: &Jet<T>, metric: &MetricData, n: usize) -> [[T; 2]; 2] {
    let c = &metric.christoffel[n];
    let d = jet.grad(n);
    let s = jet.second(n);
    let mut h = s;
    for k in 0..2 {
        for l in 0..2 {
            h[k][l] = s[k][l] - d[0] * c[0][k][l] - d[1] * c[1][k][l];
        }
    }
    h
}

fn expanded_at<T: Scalar>(jet: &Jet<T>, metric: &MetricData, n: usize) -> T {
    let gi = metric.g_inv[n];
    let s = jet.second(n);
    let d = jet.grad(n);
    let cc = metric.contracted_christoffel(n);
    s[0][0] * gi[0] + s[0][1] * (2.0 * gi[1]) + s[1][1] * gi[2] - d[0] * cc[0] - d[1] * cc[1]
}

/// Radial and angular partials on ring `i`, optionally conjugated.
fn ring_partials<T: Scalar>(u: &[T], grid: &ChartGrid, i: usize, shift: Option<&[f64]>) -> (Vec<T>, Vec<T>) {
    let na = grid.na;
    let tr = first_taps(i, grid.nr, grid.hr());
    let c = 0.5 / grid.ha();
    let mut ur = Vec::with_capacity(na);
    let mut ua = Vec::with_capacity(na);
    for j in 0..na {
        let p = grid.idx(i, j);
        let w = |q: usize| match shift {
            Some(_) if u[q] == T::zero() => 0.0,
            Some(l) => (l[q] - l[p]).exp(),
            None => 1.0,
        };
        let mut acc = T::zero();
        for (k, coef) in tr.iter() {
            let q = grid.idx(k, j);
            acc += u[q] * (coef * w(q));
        }
        ur.push(acc);
        let (qm, qp) = (grid.idx(i, (j + na - 1) % na), grid.idx(i, (j + 1) % na));
        ua.push(u[qp] * (c * w(qp)) - u[qm] * (c * w(qm)));
    }
    (ur, ua)
}

/// Adjoint of `Geometry::normal_derivative` on ring `b`: scatters ring
/// values `y` back onto the full grid.
pub(crate) fn normal_derivative_adjoint(geo: &Geometry, b: Boundary, y: &[C64]) -> Vec<C64> {
    let grid = &geo.grid;
    let na = grid.na;
    let i = grid.ring(b);
    let tr = first_taps(i, grid.nr, grid.hr());
    let c = 0.5 / grid.ha();
    let nu = geo.boundary_normal(b);
    let mut out = alloc::vec![C64::default(); grid.n_space()];
    for j in 0..na {
        let yr = y[j] * nu[j][0];
        let ya = y[j] * nu[j][1];
        for (k, coef) in tr.iter() {
            out[grid.idx(k, j)] += yr * coef;
        }
        out[grid.idx(i, (j + 1) % na)] += ya * c;
        out[grid.idx(i, (j + na - 1) % na)] -= ya * c;
    }
    out
}

/// Outward unit normal `ν_g^k = g^{kr} σ / √(g^{rr})` with `σ = ±1`.
pub fn boundary_normal(metric: &MetricData, grid: &ChartGrid, b: Boundary) -> Vec<[f64; 2]> {
    let i = grid.ring(b);
    let s = b.outward_sign();
    (0..grid.na)
        .map(|j| {
            let gi = metric.g_inv[grid.idx(i, j)];
            let norm = gi[0].sqrt();
            [s * gi[0] / norm, s * gi[1] / norm]
        })
        .collect()
}

/// Convenience wrappers mirroring the operator names.
pub fn laplace_beltrami(u: &ScalarField<C64>, metric: &MetricData, grid: &ChartGrid) -> Result<ScalarField<C64>> {
    u.check_grid(grid)?;
    let geo = Geometry::without_potential(*grid, metric.clone())?;
    Ok(ScalarField { nr: grid.nr, na: grid.na, data: geo.laplace_beltrami(&u.data)? })
}

pub fn magnetic_operator(
    u: &ScalarField<C64>,
    a: &CovectorField,
    metric: &MetricData,
    grid: &ChartGrid,
) -> Result<ScalarField<C64>> {
    u.check_grid(grid)?;
    let geo = Geometry::new(*grid, metric.clone(), a.clone())?;
    Ok(ScalarField { nr: grid.nr, na: grid.na, data: geo.magnetic(&u.data)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricPreset;
    use alloc::vec;

    fn geo(n: usize, preset: MetricPreset, a: crate::field::PotentialPreset) -> Geometry {
        let grid = ChartGrid::new(n + 1, n, 0.5, 1.0, 4, 1.0).unwrap();
        let metric = MetricData::from_preset(&grid, preset).unwrap();
        let pot = a.sample(&grid);
        Geometry::new(grid, metric, pot).unwrap()
    }

    fn sample(g: &Geometry, f: impl Fn(f64, f64) -> C64) -> Vec<C64> {
        ScalarField::from_fn(&g.grid, |r, t| f(r, t)).data
    }

    fn max_err(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn order(e: &[f64]) -> f64 {
        (e[e.len() - 2] / e[e.len() - 1]).log2()
    }

    use crate::field::PotentialPreset as Pot;

    #[test]
    fn constants_are_harmonic() {
        for preset in [MetricPreset::Polar, MetricPreset::PerturbedPolar { eps: 0.1 }, MetricPreset::Sheared { eps: 0.3 }] {
            let g = geo(16, preset, Pot::Zero);
            let one = vec![C64::from(1.0); g.grid.n_space()];
            let lap = g.laplace_beltrami(&one).unwrap();
            assert!(lap.iter().all(|v| v.norm() < 1e-10), "{preset:?}");
        }
    }

    #[test]
    fn polar_radial_square_has_laplacian_four() {
        let g = geo(16, MetricPreset::Polar, Pot::Zero);
        let u = sample(&g, |r, _| C64::from(r * r));
        let lap = g.laplace_beltrami(&u).unwrap();
        assert!(lap.iter().all(|v| (v - 4.0).norm() < 1e-9));
    }

    #[test]
    fn flat_affine_is_harmonic() {
        let g = geo(12, MetricPreset::Flat, Pot::Zero);
        let u = sample(&g, |r, _| C64::from(3.0 * r - 1.0));
        let lap = g.laplace_beltrami(&u).unwrap();
        assert!(lap.iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn polar_laplacian_second_order_on_manufactured_mode() {
        // u = sin(3r) cos 2θ, Δu = (p'' + p'/r − 4p/r²) cos 2θ.
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = geo(n, MetricPreset::Polar, Pot::Zero);
            let u = sample(&g, |r, t| C64::from((3.0 * r).sin() * (2.0 * t).cos()));
            let exact = sample(&g, |r, t| {
                let (p, dp, ddp) = ((3.0 * r).sin(), 3.0 * (3.0 * r).cos(), -9.0 * (3.0 * r).sin());
                C64::from((ddp + dp / r - 4.0 * p / (r * r)) * (2.0 * t).cos())
            });
            errs.push(max_err(&g.laplace_beltrami(&u).unwrap(), &exact));
        }
        assert!(order(&errs) > 1.9, "{errs:?}");
    }

    #[test]
    fn flux_and_expanded_forms_agree_under_refinement() {
        for preset in [MetricPreset::PerturbedPolar { eps: 0.1 }, MetricPreset::Sheared { eps: 0.3 }] {
            let mut el = Vec::new();
            let mut em = Vec::new();
            for n in [16, 32, 64] {
                let g = geo(n, preset, Pot::Swirl);
                let u = sample(&g, |r, t| C64::new((2.0 * r).cos() * t.sin(), r * (2.0 * t).cos()));
                let flux = g.laplace_beltrami(&u).unwrap();
                let exp = g.laplace_beltrami_expanded(&u).unwrap();
                el.push(max_err(&flux, &exp));
                let lf = g.magnetic_flux(&u).unwrap();
                let le = g.magnetic(&u).unwrap();
                let interior = g.grid.na..(g.grid.nr - 1) * g.grid.na;
                em.push(max_err(&lf[interior.clone()], &le[interior]));
            }
            // Exact metric derivatives can make both forms agree to round-off.
            let ok = |e: &[f64]| e.iter().all(|v| *v < 1e-10) || order(e) > 1.9;
            assert!(ok(&el), "{preset:?} {el:?}");
            assert!(ok(&em), "{preset:?} {em:?}");
        }
    }

    #[test]
    fn zero_potential_reduces_to_laplace_beltrami() {
        let g = geo(12, MetricPreset::PerturbedPolar { eps: 0.1 }, Pot::Zero);
        let u = sample(&g, |r, t| C64::new(r * t.cos(), t.sin()));
        assert_eq!(g.magnetic(&u).unwrap(), g.laplace_beltrami(&u).unwrap());
    }

    #[test]
    fn constant_potential_on_constant_field() {
        let a = [0.4, -0.7];
        let g = geo(12, MetricPreset::Flat, Pot::Constant(a));
        let one = vec![C64::from(1.0); g.grid.n_space()];
        let want = -(a[0] * a[0] + a[1] * a[1]);
        for v in g.magnetic(&one).unwrap() {
            assert!((v - want).norm() < 1e-12);
        }
        let lf = g.magnetic_flux(&one).unwrap();
        for v in &lf[g.grid.na..(g.grid.nr - 1) * g.grid.na] {
            // Half-node averaging reproduces |a|² only to O(h²).
            assert!((v - want).norm() < 0.05, "{v}");
        }
    }

    #[test]
    fn gauge_transform_reproduces_laplacian() {
        // L(e^{-i a·x} u) = e^{-i a·x} Δu for constant a on the flat chart.
        let a = [0.7, 1.0];
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = geo(n, MetricPreset::Flat, Pot::Constant(a));
            let phase = |r: f64, t: f64| C64::from_polar(1.0, -(a[0] * r + a[1] * t));
            let u = |r: f64, t: f64| (2.0 * r).sin() * (3.0 * t).cos();
            let lap = |r: f64, t: f64| (-4.0 - 9.0) * u(r, t);
            let w = sample(&g, |r, t| phase(r, t) * u(r, t));
            let want = sample(&g, |r, t| phase(r, t) * lap(r, t));
            errs.push(max_err(&g.magnetic(&w).unwrap(), &want));
        }
        assert!(order(&errs) > 1.9, "{errs:?}");
    }

    fn interior_inner(g: &Geometry, u: &[C64], v: &[C64]) -> C64 {
        let (nr, na) = (g.grid.nr, g.grid.na);
        let mut acc = C64::default();
        for n in na..(nr - 1) * na {
            acc += u[n] * v[n].conj() * g.metric.sqrt_det[n];
        }
        acc * g.grid.hr() * g.grid.ha()
    }

    fn random_interior(g: &Geometry, seed: u64) -> Vec<C64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let na = g.grid.na;
        (0..g.grid.n_space())
            .map(|n| {
                let i = n / na;
                if i == 0 || i == g.grid.nr - 1 {
                    C64::default()
                } else {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                }
            })
            .collect()
    }

    #[test]
    fn dirichlet_laplacian_is_symmetric_in_volume_product() {
        let g = geo(20, MetricPreset::Sheared { eps: 0.3 }, Pot::Swirl);
        let u = random_interior(&g, 1);
        let v = random_interior(&g, 2);
        let lu = g.laplace_beltrami(&u).unwrap();
        let lv = g.laplace_beltrami(&v).unwrap();
        let d = (interior_inner(&g, &lu, &v) - interior_inner(&g, &u, &lv)).norm();
        let scale = interior_inner(&g, &lu, &lu).norm().sqrt() * interior_inner(&g, &v, &v).norm().sqrt();
        assert!(d < 1e-12 * scale, "{d} {scale}");
        // i L has a purely imaginary quadratic form.
        let mu = g.magnetic_flux(&u).unwrap();
        let q = interior_inner(&g, &mu.iter().map(|x| x * C64::i()).collect::<Vec<_>>(), &u);
        assert!(q.re.abs() < 1e-12 * q.norm().max(1.0));
    }

    #[test]
    fn gradient_and_norm_examples() {
        let g = geo(12, MetricPreset::Flat, Pot::Zero);
        let u = sample(&g, |r, _| C64::from(r));
        assert!(g.grad_norm_sq(&u).iter().all(|v| (v - 1.0).abs() < 1e-12));
        let c = vec![C64::from(2.0); g.grid.n_space()];
        assert!(g.grad_norm_sq(&c).iter().all(|&v| v == 0.0));

        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = geo(n, MetricPreset::Polar, Pot::Zero);
            let u: Vec<f64> = ScalarField::from_fn(&g.grid, |r, _| (2.0 * r).sin()).data;
            let want: Vec<f64> = ScalarField::from_fn(&g.grid, |r, _| (2.0 * (2.0 * r).cos()).powi(2)).data;
            let got = g.grad_norm_sq(&u);
            errs.push(got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        assert!(order(&errs) > 1.9, "{errs:?}");
    }

    #[test]
    fn hessian_examples() {
        let g = geo(16, MetricPreset::Polar, Pot::Zero);
        let u: Vec<f64> = ScalarField::from_fn(&g.grid, |r, _| r).data;
        for (n, h) in g.hessian(&u).iter().enumerate() {
            let r = g.grid.r(n / g.grid.na);
            assert!((h[1][1] - r).abs() < 1e-9 && h[0][0].abs() < 1e-9 && h[0][1].abs() < 1e-9);
        }
        let f = geo(16, MetricPreset::Flat, Pot::Zero);
        let v: Vec<f64> = ScalarField::from_fn(&f.grid, |r, _| 1.0 + 3.0 * r).data;
        assert!(f.hessian(&v).iter().all(|h| h.iter().flatten().all(|x| x.abs() < 1e-9)));
        // x² is periodic, so x¹ sin x² stands in for the bilinear monomial.
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let f = geo(n, MetricPreset::Flat, Pot::Zero);
            let w: Vec<f64> = ScalarField::from_fn(&f.grid, |r, t| r * t.sin()).data;
            let h = f.hessian(&w);
            let mut e: f64 = 0.0;
            for n in 0..w.len() {
                let t = f.grid.theta(n % f.grid.na);
                let r = f.grid.r(n / f.grid.na);
                e = e.max((h[n][0][1] - t.cos()).abs()).max((h[n][1][1] + r * t.sin()).abs()).max(h[n][0][0].abs());
            }
            errs.push(e);
        }
        assert!(order(&errs) > 1.9, "{errs:?}");
    }

    #[test]
    fn boundary_calculus() {
        let g = geo(24, MetricPreset::Sheared { eps: 0.4 }, Pot::Zero);
        for b in Boundary::BOTH {
            let i = g.grid.ring(b);
            for (j, nu) in g.boundary_normal(b).iter().enumerate() {
                let n = g.grid.idx(i, j);
                assert!((g.vector_norm_sq(n, *nu) - 1.0).abs() < 1e-14);
            }
        }
        let mut tang = Vec::new();
        let mut norm = Vec::new();
        for n in [16, 32, 64] {
            let g = geo(n, MetricPreset::Polar, Pot::Zero);
            let radial = sample(&g, |r, _| C64::from((2.0 * r).cos()));
            let tg = g.tangential_gradient(&radial, Boundary::Inner);
            let i0 = g.grid.ring(Boundary::Inner);
            tang.push((0..g.grid.na).map(|j| g.vector_norm_sq(g.grid.idx(i0, j), tg[j]).sqrt()).fold(0.0, f64::max));
            let harmonic = sample(&g, |_, t| C64::from_polar(1.0, t));
            norm.push(g.normal_derivative(&harmonic, Boundary::Inner).iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
        assert!(tang.iter().all(|&e| e < 1e-12), "{tang:?}");
        assert!(norm.iter().all(|&e| e < 1e-12), "{norm:?}");

        // Pythagorean split on a full field.
        let g = geo(24, MetricPreset::Sheared { eps: 0.4 }, Pot::Zero);
        let u = sample(&g, |r, t| C64::new(r * r * t.cos(), (r + t.sin()).sin()));
        for b in Boundary::BOTH {
            let i = g.grid.ring(b);
            let dn = g.normal_derivative(&u, b);
            let tg = g.tangential_gradient(&u, b);
            let ring: Vec<C64> = (0..g.grid.na).map(|j| u[g.grid.idx(i, j)]).collect();
            let tn = g.tangential_norm_sq_ring(&ring, b);
            let (ur, ua) = ring_partials(&u, &g.grid, i, None);
            for j in 0..g.grid.na {
                let n = g.grid.idx(i, j);
                let full = cov_norm_sq(g.metric.g_inv[n], [ur[j], ua[j]]);
                let t2 = g.vector_norm_sq(n, tg[j]);
                assert!((full - t2 - dn[j].norm_sqr()).abs() < 1e-12 * full.max(1.0));
                assert!((t2 - tn[j]).abs() < 1e-12 * full.max(1.0));
            }
        }
    }
}
