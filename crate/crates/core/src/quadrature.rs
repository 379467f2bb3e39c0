//! Trapezoidal quadrature on the chart and the norms built from it.
//!
//! Space: trapezoid in `r` (half weight on the rings), periodic trapezoid in
//! `θ`. Time: midpoint rule on the sample grid `t_k = (k + 1/2) dt`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::diff::dt_rings;
use crate::error::{Error, Result};
use crate::field::{Scalar, SpaceTimeField};
use crate::grid::{Boundary, ChartGrid};
use crate::metric::MetricData;
use crate::operators::Geometry;

/// Density used for boundary integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurfaceMeasure {
    /// `√|g| dS` with `dS = r dθ` the chart arc length.
    #[default]
    Literal,
    /// Arc length of the metric restricted to the ring, `√(g_θθ) dθ`.
    Induced,
}

/// Open time window `(t0, t1)`; samples with `t0 < t_k < t1` are included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub t0: f64,
    pub t1: f64,
}

impl TimeWindow {
    pub fn full(grid: &ChartGrid) -> Self {
        Self { t0: 0.0, t1: grid.horizon }
    }

    /// `(ε, T − ε)`.
    pub fn inset(grid: &ChartGrid, eps: f64) -> Self {
        Self { t0: eps, t1: grid.horizon - eps }
    }

    pub fn samples(&self, grid: &ChartGrid) -> Result<Vec<usize>> {
        let ks: Vec<usize> = (0..grid.nt)
            .filter(|&k| {
                let t = grid.t_mid(k);
                t > self.t0 && t < self.t1
            })
            .collect();
        if ks.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(ks)
    }
}

/// `dV_g` weight of every node, `w_r h_θ √|g|`.
pub fn volume_weights(metric: &MetricData, grid: &ChartGrid) -> Vec<f64> {
    let ha = grid.ha();
    (0..grid.n_space()).map(|n| grid.radial_weight(n / grid.na) * ha * metric.sqrt_det[n]).collect()
}

/// Boundary weight of every node of a ring, including `h_θ`.
pub fn surface_weights(metric: &MetricData, grid: &ChartGrid, b: Boundary, measure: SurfaceMeasure) -> Vec<f64> {
    let i = grid.ring(b);
    let (ha, r) = (grid.ha(), grid.r(i));
    (0..grid.na)
        .map(|j| {
            let n = grid.idx(i, j);
            match measure {
                SurfaceMeasure::Literal => metric.sqrt_det[n] * r * ha,
                SurfaceMeasure::Induced => metric.sqrt_det[n] * metric.g_inv[n][0].sqrt() * ha,
            }
        })
        .collect()
}

fn weighted_sum<T: Scalar>(u: &[T], w: &[f64]) -> Result<T> {
    if u.len() != w.len() {
        return Err(Error::ShapeMismatch { expected: w.len(), found: u.len() });
    }
    if u.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(u.iter().zip(w).fold(T::zero(), |acc, (&v, &c)| acc + v * c))
}

pub fn quad_volume<T: Scalar>(u: &[T], metric: &MetricData, grid: &ChartGrid) -> Result<T> {
    weighted_sum(u, &volume_weights(metric, grid))
}

pub fn quad_surface<T: Scalar>(ring: &[T], metric: &MetricData, grid: &ChartGrid, b: Boundary, measure: SurfaceMeasure) -> Result<T> {
    weighted_sum(ring, &surface_weights(metric, grid, b, measure))
}

/// `∫∫ u dS_g dt` over a window, ring values `[k][j]`.
pub fn quad_surface_time<T: Scalar>(
    rings: &[Vec<T>],
    metric: &MetricData,
    grid: &ChartGrid,
    b: Boundary,
    measure: SurfaceMeasure,
    window: TimeWindow,
) -> Result<T> {
    if rings.len() != grid.nt {
        return Err(Error::ShapeMismatch { expected: grid.nt, found: rings.len() });
    }
    let w = surface_weights(metric, grid, b, measure);
    let mut acc = T::zero();
    for k in window.samples(grid)? {
        acc += weighted_sum(&rings[k], &w)?;
    }
    Ok(acc * grid.dt())
}

pub fn quad_volume_time<T: Scalar>(u: &SpaceTimeField<T>, metric: &MetricData, grid: &ChartGrid, window: TimeWindow) -> Result<T> {
    u.check_grid(grid)?;
    let w = volume_weights(metric, grid);
    let mut acc = T::zero();
    for k in window.samples(grid)? {
        acc += weighted_sum(&u.slices[k].data, &w)?;
    }
    Ok(acc * grid.dt())
}

pub fn l2_volume<T: Scalar>(u: &[T], geo: &Geometry) -> Result<f64> {
    let a: Vec<f64> = u.iter().map(|v| v.abs2()).collect();
    Ok(quad_volume(&a, &geo.metric, &geo.grid)?.sqrt())
}

/// `(∫ |u|² + |∇_g u|²_g dV_g)^{1/2}`.
pub fn h1_volume<T: Scalar>(u: &[T], geo: &Geometry) -> Result<f64> {
    let g = geo.grad_norm_sq(u);
    let a: Vec<f64> = u.iter().zip(&g).map(|(v, d)| v.abs2() + d).collect();
    Ok(quad_volume(&a, &geo.metric, &geo.grid)?.sqrt())
}

/// `(∫ |u|² + |∇_g u|²_g + |∇²_g u|²_g dV_g)^{1/2}`.
pub fn h2_volume<T: Scalar>(u: &[T], geo: &Geometry) -> Result<f64> {
    let g = geo.grad_norm_sq(u);
    let h = geo.hessian_norm_sq(u);
    let a: Vec<f64> = u.iter().zip(&g).zip(&h).map(|((v, d), e)| v.abs2() + d + e).collect();
    Ok(quad_volume(&a, &geo.metric, &geo.grid)?.sqrt())
}

pub fn l2_boundary<T: Scalar>(ring: &[T], geo: &Geometry, b: Boundary, measure: SurfaceMeasure) -> Result<f64> {
    let a: Vec<f64> = ring.iter().map(|v| v.abs2()).collect();
    Ok(quad_surface(&a, &geo.metric, &geo.grid, b, measure)?.sqrt())
}

/// `‖w‖_{L²(b × window)}` for ring values `[k][j]`.
pub fn l2_lateral<T: Scalar>(rings: &[Vec<T>], geo: &Geometry, b: Boundary, window: TimeWindow, measure: SurfaceMeasure) -> Result<f64> {
    let a: Vec<Vec<f64>> = rings.iter().map(|r| r.iter().map(|v| v.abs2()).collect()).collect();
    Ok(quad_surface_time(&a, &geo.metric, &geo.grid, b, measure, window)?.sqrt())
}

/// `(∫∫ |w|² + |∂_t w|² + |∇_{τ_g} w|²_g dS_g dt)^{1/2}` over `b × window`.
///
/// `∂_t` is taken on the full sample series before restricting to the window.
pub fn h1_lateral<T: Scalar>(rings: &[Vec<T>], geo: &Geometry, b: Boundary, window: TimeWindow, measure: SurfaceMeasure) -> Result<f64> {
    let sq = h1_lateral_density(rings, geo, b)?;
    Ok(quad_surface_time(&sq, &geo.metric, &geo.grid, b, measure, window)?.sqrt())
}

/// Pointwise `|w|² + |∂_t w|² + |∇_τ w|²` on the ring.
pub fn h1_lateral_density<T: Scalar>(rings: &[Vec<T>], geo: &Geometry, b: Boundary) -> Result<Vec<Vec<f64>>> {
    let grid = &geo.grid;
    if rings.len() != grid.nt {
        return Err(Error::ShapeMismatch { expected: grid.nt, found: rings.len() });
    }
    let dt = dt_rings(rings, grid.dt());
    Ok(rings
        .iter()
        .zip(&dt)
        .map(|(r, d)| {
            let tn = geo.tangential_norm_sq_ring(r, b);
            r.iter().zip(d).zip(&tn).map(|((v, w), t)| v.abs2() + w.abs2() + t).collect()
        })
        .collect())
}
