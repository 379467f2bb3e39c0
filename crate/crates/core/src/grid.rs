//! Logically rectangular annulus chart: radial nodes from the obstacle
//! boundary Γ (`r = r_in`) to the outer boundary ∂Ω (`r = r_out`), a periodic
//! angular index, and a time axis.
//!
//! Spatial nodes are stored radial-major: node `(i, j)` lives at `i * na + j`.
//! Space-time quantities are sampled on the open midpoint grid
//! `t_k = (k + 1/2) T / nt`, so the Carleman weight `ℓ(t)` is finite at every
//! sample. The time stepper additionally uses the full levels `t_n = n T / nt`.

use core::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartGrid {
    pub nr: usize,
    pub na: usize,
    pub r_in: f64,
    pub r_out: f64,
    pub nt: usize,
    pub horizon: f64,
}

/// One of the two boundary components of the annulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Boundary {
    /// Obstacle boundary Γ at `r = r_in`; outward normal of D is `-e_r`.
    Inner,
    /// Observation boundary ∂Ω at `r = r_out`; outward normal is `+e_r`.
    Outer,
}

impl Boundary {
    pub const BOTH: [Boundary; 2] = [Boundary::Inner, Boundary::Outer];

    /// Sign of the radial component of the outward Euclidean normal.
    pub fn outward_sign(self) -> f64 {
        match self {
            Boundary::Inner => -1.0,
            Boundary::Outer => 1.0,
        }
    }
}

impl ChartGrid {
    pub fn new(nr: usize, na: usize, r_in: f64, r_out: f64, nt: usize, horizon: f64) -> Result<Self> {
        if nr < 3 {
            return Err(Error::InvalidGrid("nr must be at least 3"));
        }
        if na < 3 {
            return Err(Error::InvalidGrid("na must be at least 3"));
        }
        if nt < 2 {
            return Err(Error::InvalidGrid("nt must be at least 2"));
        }
        if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
            return Err(Error::InvalidGrid("radii must satisfy 0 < r_in < r_out"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid("time horizon must be positive"));
        }
        Ok(Self { nr, na, r_in, r_out, nt, horizon })
    }

    /// Same spatial chart with a different time resolution.
    pub fn with_nt(&self, nt: usize) -> Result<Self> {
        Self::new(self.nr, self.na, self.r_in, self.r_out, nt, self.horizon)
    }

    #[inline]
    pub fn hr(&self) -> f64 {
        (self.r_out - self.r_in) / (self.nr - 1) as f64
    }

    #[inline]
    pub fn ha(&self) -> f64 {
        2.0 * PI / self.na as f64
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r_in + i as f64 * self.hr()
    }

    #[inline]
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.ha()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.na + j
    }

    #[inline]
    pub fn n_space(&self) -> usize {
        self.nr * self.na
    }

    /// Midpoint sample time `(k + 1/2) dt`.
    #[inline]
    pub fn t_mid(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    /// Full time level `n dt`, `n = 0..=nt`.
    #[inline]
    pub fn t_step(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Radial index of a boundary ring.
    #[inline]
    pub fn ring(&self, b: Boundary) -> usize {
        match b {
            Boundary::Inner => 0,
            Boundary::Outer => self.nr - 1,
        }
    }

    #[inline]
    pub fn r_of(&self, b: Boundary) -> f64 {
        self.r(self.ring(b))
    }

    /// Number of interior (non-boundary) spatial nodes.
    #[inline]
    pub fn n_interior(&self) -> usize {
        (self.nr - 2) * self.na
    }

    /// Trapezoidal radial weight (half weight on the two boundary rings).
    #[inline]
    pub fn radial_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nr - 1 {
            0.5 * self.hr()
        } else {
            self.hr()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(ChartGrid::new(2, 8, 0.5, 1.0, 4, 1.0).is_err());
        assert!(ChartGrid::new(8, 2, 0.5, 1.0, 4, 1.0).is_err());
        assert!(ChartGrid::new(8, 8, 0.5, 1.0, 1, 1.0).is_err());
        assert!(ChartGrid::new(8, 8, 1.0, 1.0, 4, 1.0).is_err());
        assert!(ChartGrid::new(8, 8, 0.0, 1.0, 4, 1.0).is_err());
        assert!(ChartGrid::new(8, 8, 0.5, 1.0, 4, 0.0).is_err());
    }

    #[test]
    fn midpoint_times_avoid_endpoints() {
        let g = ChartGrid::new(5, 4, 0.5, 1.0, 10, 2.0).unwrap();
        assert!(g.t_mid(0) > 0.0);
        assert!(g.t_mid(g.nt - 1) < g.horizon);
        assert!((g.t_mid(0) - 0.1).abs() < 1e-15);
        assert_eq!(g.r(g.nr - 1), 1.0);
    }
}
