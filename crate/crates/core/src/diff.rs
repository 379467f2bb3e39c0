//! Second-order finite-difference stencils on the chart.
//!
//! Radial derivatives are centered in the interior and one-sided
//! second-order on the two boundary rings; angular derivatives are periodic
//! centered differences; time derivatives act on the midpoint sample grid and
//! are one-sided second-order at its two ends.
//!
//! Every operator also has a *conjugated* form: given a log-scale `λ` per node
//! it returns `e^{-λ} D(e^{λ} u)` evaluated tap by tap as
//! `Σ c_j e^{λ_j - λ_i} u_j`, which stays finite when `e^{λ}` alone would
//! overflow.

use alloc::vec::Vec;

use num_traits::Float;

use crate::field::{Scalar, ScalarField, SpaceTimeField};
use crate::grid::ChartGrid;

/// Up to four stencil taps along one axis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Taps {
    pub n: usize,
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

impl Taps {
    fn new(list: &[(usize, f64)]) -> Self {
        let mut t = Taps { n: list.len(), idx: [0; 4], w: [0.0; 4] };
        for (k, &(i, w)) in list.iter().enumerate() {
            t.idx[k] = i;
            t.w[k] = w;
        }
        t
    }

    #[inline]
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n).map(move |k| (self.idx[k], self.w[k]))
    }
}

/// First derivative along a non-periodic axis with `n` samples, spacing `h`.
pub(crate) fn first_taps(i: usize, n: usize, h: f64) -> Taps {
    let c = 0.5 / h;
    if n < 3 {
        return Taps::new(&[(0, -1.0 / h), (1, 1.0 / h)]);
    }
    if i == 0 {
        Taps::new(&[(0, -3.0 * c), (1, 4.0 * c), (2, -c)])
    } else if i == n - 1 {
        Taps::new(&[(n - 1, 3.0 * c), (n - 2, -4.0 * c), (n - 3, c)])
    } else {
        Taps::new(&[(i - 1, -c), (i + 1, c)])
    }
}

/// Second derivative along a non-periodic axis.
pub(crate) fn second_taps(i: usize, n: usize, h: f64) -> Taps {
    let c = 1.0 / (h * h);
    if n >= 4 && i == 0 {
        Taps::new(&[(0, 2.0 * c), (1, -5.0 * c), (2, 4.0 * c), (3, -c)])
    } else if n >= 4 && i == n - 1 {
        Taps::new(&[(n - 1, 2.0 * c), (n - 2, -5.0 * c), (n - 3, 4.0 * c), (n - 4, -c)])
    } else {
        let m = i.clamp(1, n - 2);
        Taps::new(&[(m - 1, c), (m, -2.0 * c), (m + 1, c)])
    }
}

#[inline]
pub(crate) fn periodic_first(j: usize, n: usize, h: f64) -> Taps {
    let c = 0.5 / h;
    Taps::new(&[((j + n - 1) % n, -c), ((j + 1) % n, c)])
}

#[inline]
fn periodic_second(j: usize, n: usize, h: f64) -> Taps {
    let c = 1.0 / (h * h);
    Taps::new(&[((j + n - 1) % n, c), (j, -2.0 * c), ((j + 1) % n, c)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    R,
    A,
}

fn apply_space<T: Scalar>(
    u: &[T],
    grid: &ChartGrid,
    shift: Option<&[f64]>,
    taps: impl Fn(usize, usize) -> (Taps, bool),
) -> Vec<T> {
    let na = grid.na;
    let mut out = Vec::with_capacity(u.len());
    for i in 0..grid.nr {
        for j in 0..na {
            let (tp, radial) = taps(i, j);
            let c = i * na + j;
            let mut acc = T::zero();
            for (k, w) in tp.iter() {
                let n = if radial { k * na + j } else { i * na + k };
                let coef = match shift {
                    // skip zeros so an overflowing factor never meets an underflowed value
                    Some(_) if u[n] == T::zero() => continue,
                    Some(l) => w * (l[n] - l[c]).exp(),
                    None => w,
                };
                acc += u[n] * coef;
            }
            out.push(acc);
        }
    }
    out
}

/// `∂_r u` or `∂_θ u` at every node.
pub fn d1<T: Scalar>(u: &[T], grid: &ChartGrid, axis: Axis) -> Vec<T> {
    d1_conj(u, grid, axis, None)
}

pub fn d1_conj<T: Scalar>(u: &[T], grid: &ChartGrid, axis: Axis, shift: Option<&[f64]>) -> Vec<T> {
    let (hr, ha) = (grid.hr(), grid.ha());
    apply_space(u, grid, shift, |i, j| match axis {
        Axis::R => (first_taps(i, grid.nr, hr), true),
        Axis::A => (periodic_first(j, grid.na, ha), false),
    })
}

/// Pure second derivative along one axis.
pub fn d2<T: Scalar>(u: &[T], grid: &ChartGrid, axis: Axis) -> Vec<T> {
    d2_conj(u, grid, axis, None)
}

pub fn d2_conj<T: Scalar>(u: &[T], grid: &ChartGrid, axis: Axis, shift: Option<&[f64]>) -> Vec<T> {
    let (hr, ha) = (grid.hr(), grid.ha());
    apply_space(u, grid, shift, |i, j| match axis {
        Axis::R => (second_taps(i, grid.nr, hr), true),
        Axis::A => (periodic_second(j, grid.na, ha), false),
    })
}

/// All first and second partials of a spatial field.
#[derive(Debug, Clone)]
pub struct Jet<T> {
    pub dr: Vec<T>,
    pub da: Vec<T>,
    pub drr: Vec<T>,
    pub dra: Vec<T>,
    pub daa: Vec<T>,
}

impl<T: Scalar> Jet<T> {
    pub fn of(u: &ScalarField<T>, grid: &ChartGrid) -> Self {
        Self::of_conj(&u.data, grid, None)
    }

    pub fn of_conj(u: &[T], grid: &ChartGrid, shift: Option<&[f64]>) -> Self {
        let dr = d1_conj(u, grid, Axis::R, shift);
        let da = d1_conj(u, grid, Axis::A, shift);
        let dra = d1_conj(&dr, grid, Axis::A, shift);
        Self {
            drr: d2_conj(u, grid, Axis::R, shift),
            daa: d2_conj(u, grid, Axis::A, shift),
            dr,
            da,
            dra,
        }
    }

    #[inline]
    pub fn grad(&self, n: usize) -> [T; 2] {
        [self.dr[n], self.da[n]]
    }

    #[inline]
    pub fn second(&self, n: usize) -> [[T; 2]; 2] {
        [[self.drr[n], self.dra[n]], [self.dra[n], self.daa[n]]]
    }
}

/// Taps of the time derivative on the midpoint grid (`nt` samples).
pub(crate) fn time_taps(k: usize, nt: usize, dt: f64) -> Taps {
    first_taps(k, nt, dt)
}

/// `∂_t u` on the midpoint grid.
pub fn dt_field<T: Scalar>(u: &SpaceTimeField<T>, grid: &ChartGrid) -> SpaceTimeField<T> {
    dt_field_conj(u, grid, None)
}

/// Conjugated time derivative; `shift.slices[k].data[n]` is the log-scale.
pub fn dt_field_conj<T: Scalar>(
    u: &SpaceTimeField<T>,
    grid: &ChartGrid,
    shift: Option<&SpaceTimeField<f64>>,
) -> SpaceTimeField<T> {
    let nt = u.nt();
    let dt = grid.dt();
    let slices = (0..nt)
        .map(|k| {
            let tp = time_taps(k, nt, dt);
            let mut data = alloc::vec![T::zero(); grid.n_space()];
            for (m, w) in tp.iter() {
                let src = &u.slices[m].data;
                match shift {
                    Some(l) => {
                        let (lm, lk) = (&l.slices[m].data, &l.slices[k].data);
                        for n in 0..data.len() {
                            if src[n] != T::zero() {
                                data[n] += src[n] * (w * (lm[n] - lk[n]).exp());
                            }
                        }
                    }
                    None => {
                        for n in 0..data.len() {
                            data[n] += src[n] * w;
                        }
                    }
                }
            }
            ScalarField { nr: grid.nr, na: grid.na, data }
        })
        .collect();
    SpaceTimeField { slices }
}

/// First derivative of a sequence of ring values in time (`[k][j]` layout).
pub fn dt_rings<T: Scalar>(rings: &[Vec<T>], dt: f64) -> Vec<Vec<T>> {
    let nt = rings.len();
    (0..nt)
        .map(|k| {
            let tp = time_taps(k, nt, dt);
            let mut row = alloc::vec![T::zero(); rings[k].len()];
            for (m, w) in tp.iter() {
                for (o, &v) in row.iter_mut().zip(&rings[m]) {
                    *o += v * w;
                }
            }
            row
        })
        .collect()
}

/// Periodic angular derivative of a ring.
pub fn da_ring<T: Scalar>(ring: &[T], ha: f64) -> Vec<T> {
    let n = ring.len();
    (0..n)
        .map(|j| {
            let tp = periodic_first(j, n, ha);
            tp.iter().fold(T::zero(), |acc, (k, w)| acc + ring[k] * w)
        })
        .collect()
}
