//! Sampled fields on the chart.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Boundary, ChartGrid};

pub type C64 = Complex64;

/// Real or complex nodal values.
pub trait Scalar:
    Copy
    + Default
    + PartialEq
    + core::fmt::Debug
    + Add<Output = Self>
    + AddAssign
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + Mul<Self, Output = Self>
    + Send
    + Sync
{
    fn zero() -> Self {
        Self::default()
    }
    fn conj(self) -> Self;
    fn abs2(self) -> f64;
    fn to_c64(self) -> C64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn abs2(self) -> f64 {
        self * self
    }
    #[inline]
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for C64 {
    #[inline]
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    #[inline]
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn to_c64(self) -> C64 {
        self
    }
    #[inline]
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// Values at every spatial node, radial-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    pub nr: usize,
    pub na: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn zeros(grid: &ChartGrid) -> Self {
        Self { nr: grid.nr, na: grid.na, data: alloc::vec![T::zero(); grid.n_space()] }
    }

    pub fn from_fn(grid: &ChartGrid, mut f: impl FnMut(f64, f64) -> T) -> Self {
        let mut data = Vec::with_capacity(grid.n_space());
        for i in 0..grid.nr {
            let r = grid.r(i);
            for j in 0..grid.na {
                data.push(f(r, grid.theta(j)));
            }
        }
        Self { nr: grid.nr, na: grid.na, data }
    }

    pub fn from_vec(grid: &ChartGrid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.n_space() {
            return Err(Error::ShapeMismatch { expected: grid.n_space(), found: data.len() });
        }
        let field = Self { nr: grid.nr, na: grid.na, data };
        field.check_finite()?;
        Ok(field)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Precondition("field contains non-finite entries"))
        }
    }

    pub fn check_grid(&self, grid: &ChartGrid) -> Result<()> {
        if self.nr != grid.nr || self.na != grid.na || self.data.len() != grid.n_space() {
            return Err(Error::ShapeMismatch { expected: grid.n_space(), found: self.data.len() });
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.na + j]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> ScalarField<U> {
        ScalarField { nr: self.nr, na: self.na, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with<U: Scalar, V: Scalar>(&self, other: &ScalarField<U>, f: impl Fn(T, U) -> V) -> ScalarField<V> {
        debug_assert_eq!(self.data.len(), other.data.len());
        ScalarField {
            nr: self.nr,
            na: self.na,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Values on one boundary ring.
    pub fn ring(&self, grid: &ChartGrid, b: Boundary) -> Vec<T> {
        let i = grid.ring(b);
        self.data[i * self.na..(i + 1) * self.na].to_vec()
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }
}

impl ScalarField<f64> {
    pub fn to_complex(&self) -> ScalarField<C64> {
        self.map(|v| C64::new(v, 0.0))
    }
}

/// Space-time field sampled on the midpoint time grid: one spatial slice per
/// time sample `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField<T> {
    pub slices: Vec<ScalarField<T>>,
}

impl<T: Scalar> SpaceTimeField<T> {
    pub fn from_fn(grid: &ChartGrid, mut f: impl FnMut(f64, f64, f64) -> T) -> Self {
        let slices = (0..grid.nt)
            .map(|k| {
                let t = grid.t_mid(k);
                ScalarField::from_fn(grid, |r, th| f(r, th, t))
            })
            .collect();
        Self { slices }
    }

    pub fn zeros(grid: &ChartGrid) -> Self {
        Self { slices: (0..grid.nt).map(|_| ScalarField::zeros(grid)).collect() }
    }

    pub fn nt(&self) -> usize {
        self.slices.len()
    }

    pub fn check_grid(&self, grid: &ChartGrid) -> Result<()> {
        if self.slices.len() != grid.nt {
            return Err(Error::ShapeMismatch { expected: grid.nt, found: self.slices.len() });
        }
        self.slices.iter().try_for_each(|s| s.check_grid(grid))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U + Copy) -> SpaceTimeField<U> {
        SpaceTimeField { slices: self.slices.iter().map(|s| s.map(f)).collect() }
    }

    pub fn zip_with<U: Scalar, V: Scalar>(&self, other: &SpaceTimeField<U>, f: impl Fn(T, U) -> V + Copy) -> SpaceTimeField<V> {
        SpaceTimeField {
            slices: self.slices.iter().zip(&other.slices).map(|(a, b)| a.zip_with(b, f)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(move |v| v * c)
    }

    /// Ring values over time, `[k][j]`.
    pub fn ring(&self, grid: &ChartGrid, b: Boundary) -> Vec<Vec<T>> {
        self.slices.iter().map(|s| s.ring(grid, b)).collect()
    }
}

/// Real covector `a = a_r dr + a_θ dθ` sampled at nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorField {
    pub a_r: ScalarField<f64>,
    pub a_t: ScalarField<f64>,
}

impl CovectorField {
    pub fn zeros(grid: &ChartGrid) -> Self {
        Self { a_r: ScalarField::zeros(grid), a_t: ScalarField::zeros(grid) }
    }

    pub fn from_fn(grid: &ChartGrid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        Self {
            a_r: ScalarField::from_fn(grid, |r, t| f(r, t)[0]),
            a_t: ScalarField::from_fn(grid, |r, t| f(r, t)[1]),
        }
    }

    pub fn check_grid(&self, grid: &ChartGrid) -> Result<()> {
        self.a_r.check_grid(grid)?;
        self.a_t.check_grid(grid)?;
        self.a_r.check_finite()?;
        self.a_t.check_finite()
    }

    #[inline]
    pub fn at(&self, n: usize) -> [f64; 2] {
        [self.a_r.data[n], self.a_t.data[n]]
    }

    pub fn is_zero(&self) -> bool {
        self.a_r.data.iter().chain(&self.a_t.data).all(|&v| v == 0.0)
    }
}

/// Named magnetic potential presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialPreset {
    Zero,
    Constant([f64; 2]),
    /// `a = 0.3 r cos θ dr + 0.5 r² dθ`.
    Swirl,
}

impl PotentialPreset {
    pub fn eval(&self, r: f64, theta: f64) -> [f64; 2] {
        use num_traits::Float;
        match *self {
            PotentialPreset::Zero => [0.0, 0.0],
            PotentialPreset::Constant(a) => a,
            PotentialPreset::Swirl => [0.3 * r * theta.cos(), 0.5 * r * r],
        }
    }

    pub fn sample(&self, grid: &ChartGrid) -> CovectorField {
        CovectorField::from_fn(grid, |r, t| self.eval(r, t))
    }
}
