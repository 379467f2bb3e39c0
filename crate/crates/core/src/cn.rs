//! Crank–Nicolson time stepping `(I − dt/2 A) v⁺ = (I + dt/2 A) v + dt F`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::C64;
use crate::sparse::{BandLu, CsrMatrix};

/// Relative residual accepted from each linear solve.
pub const SOLVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CrankNicolson {
    pub dt: f64,
    /// `M = I − dt/2 A`.
    pub m: CsrMatrix,
    /// `N = I + dt/2 A`.
    pub n: CsrMatrix,
    lu: BandLu,
    lu_adj: Option<BandLu>,
}

impl CrankNicolson {
    pub fn new(a: &CsrMatrix, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::OutOfRange { what: "dt", value: dt });
        }
        let one = C64::from(1.0);
        let h = C64::from(0.5 * dt);
        let m = a.shifted(one, -h);
        let n = a.shifted(one, h);
        let lu = BandLu::factor(&m)?;
        Ok(Self { dt, m, n, lu, lu_adj: None })
    }

    /// Also factors `M*` for adjoint sweeps.
    pub fn with_adjoint(mut self) -> Result<Self> {
        self.lu_adj = Some(BandLu::factor(&self.m.adjoint())?);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.m.n_rows
    }

    /// One step; `f_half` is the source at the half step.
    pub fn step(&self, v: &[C64], f_half: Option<&[C64]>) -> Result<Vec<C64>> {
        let mut rhs = self.n.apply(v);
        if let Some(f) = f_half {
            if f.len() != rhs.len() {
                return Err(Error::ShapeMismatch { expected: rhs.len(), found: f.len() });
            }
            for (r, x) in rhs.iter_mut().zip(f) {
                *r += x * self.dt;
            }
        }
        self.lu.solve_checked(&rhs, SOLVE_TOL)
    }

    /// `y = M⁻* x`.
    pub fn solve_adjoint(&self, x: &[C64]) -> Result<Vec<C64>> {
        let lu = self.lu_adj.as_ref().ok_or(Error::Precondition("adjoint factor not prepared"))?;
        lu.solve_checked(x, SOLVE_TOL)
    }

    /// `(M⁻¹ N)* x = N* M⁻* x`.
    pub fn step_adjoint(&self, x: &[C64]) -> Result<Vec<C64>> {
        let y = self.solve_adjoint(x)?;
        Ok(self.n.apply_adjoint(&y))
    }
}

/// Single Crank–Nicolson step with a freshly factored system.
pub fn step_crank_nicolson(v: &[C64], a: &CsrMatrix, f_half: Option<&[C64]>, dt: f64) -> Result<Vec<C64>> {
    CrankNicolson::new(a, dt)?.step(v, f_half)
}
