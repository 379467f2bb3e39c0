//! Random smooth space-time fields for the weighted-estimate harness.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;

use crate::error::Result;
use crate::field::{SpaceTimeField, C64};
use crate::forward::{solve_ibvp, RadialCutoff};
use crate::admissible::{make_admissible_f, SourcePreset};
use crate::grid::ChartGrid;
use crate::operators::Geometry;

/// `sin⁴(π (t − t0) / (t1 − t0))` on `[t0, t1]`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBump {
    pub t0: f64,
    pub t1: f64,
}

impl TimeBump {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t1 {
            return 0.0;
        }
        let x = (PI * (t - self.t0) / (self.t1 - self.t0)).sin();
        let x2 = x * x;
        x2 * x2
    }
}

/// `p(ρ) e^{ikθ} b(t)` with `ρ = (r − r_in)/(r_out − r_in)` and `p` a
/// complex polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub poly: Vec<C64>,
    pub k: i32,
    pub bump: TimeBump,
}

impl Mode {
    pub fn eval(&self, grid: &ChartGrid, r: f64, theta: f64, t: f64) -> C64 {
        let b = self.bump.eval(t);
        if b == 0.0 {
            return C64::default();
        }
        let rho = (r - grid.r_in) / (grid.r_out - grid.r_in);
        let p = self.poly.iter().rev().fold(C64::default(), |acc, &c| acc * rho + c);
        p * C64::from_polar(1.0, self.k as f64 * theta) * b
    }
}

/// Sum of a few modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothSample {
    pub modes: Vec<Mode>,
}

impl SmoothSample {
    pub fn eval(&self, grid: &ChartGrid, r: f64, theta: f64, t: f64) -> C64 {
        self.modes.iter().map(|m| m.eval(grid, r, theta, t)).sum()
    }

    pub fn sample(&self, grid: &ChartGrid) -> SpaceTimeField<C64> {
        SpaceTimeField::from_fn(grid, |r, th, t| self.eval(grid, r, th, t))
    }

    /// Random sample with `modes` terms, cubic radial factors and
    /// harmonics `|k| ≤ 3`. With `compact`, every time bump sits strictly
    /// inside `(0, T)`; otherwise bumps span `[0, T]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, horizon: f64, modes: usize, compact: bool) -> Self {
        let modes = (0..modes)
            .map(|_| {
                let poly = (0..4).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
                let k = rng.random_range(-3..=3);
                let bump = if compact {
                    TimeBump {
                        t0: horizon * rng.random_range(0.1..0.25),
                        t1: horizon * rng.random_range(0.75..0.9),
                    }
                } else {
                    TimeBump { t0: 0.0, t1: horizon }
                };
                Mode { poly, k, bump }
            })
            .collect();
        Self { modes }
    }
}

/// Solution of the boundary value problem for a random admissible source,
/// restricted to the midpoint samples.
pub fn ibvp_sample<R: Rng + ?Sized>(rng: &mut R, geo: &Geometry, alpha: f64, beta: f64) -> Result<SpaceTimeField<C64>> {
    let preset = SourcePreset::random_trig(rng, 3, 0.5);
    let src = make_admissible_f(&preset, alpha, beta, geo, RadialCutoff::default())?;
    Ok(solve_ibvp(&src.lift, geo)?.u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn bump_vanishes_outside_and_peaks_at_centre() {
        let b = TimeBump { t0: 1.0, t1: 3.0 };
        assert_eq!(b.eval(0.5), 0.0);
        assert_eq!(b.eval(3.0), 0.0);
        assert!((b.eval(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn compact_samples_vanish_near_endpoints() {
        let grid = ChartGrid::new(9, 8, 0.5, 1.0, 40, 4.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s = SmoothSample::random(&mut rng, 4.0, 3, true);
        let u = s.sample(&grid);
        assert!(u.slices[0].data.iter().all(|v| v.norm() == 0.0));
        assert!(u.slices[39].data.iter().all(|v| v.norm() == 0.0));
        assert!(u.slices[20].data.iter().any(|v| v.norm() > 0.0));
    }

    #[test]
    fn mode_evaluates_polynomial_in_rho() {
        let grid = ChartGrid::new(9, 8, 0.5, 1.0, 4, 4.0).unwrap();
        let m = Mode { poly: alloc::vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)], k: 0, bump: TimeBump { t0: 0.0, t1: 4.0 } };
        let v = m.eval(&grid, 1.0, 0.3, 2.0);
        assert!((v.re - 3.0).abs() < 1e-14);
    }
}
