//! Inhomogeneous boundary problem via lifting: `u = H + v` where `v` solves
//! `v' = A v + F`, `F = −(∂_t − iL) H`, with zero Dirichlet data.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::cn::CrankNicolson;
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpaceTimeField, C64};
use crate::generator::{assemble_generator, Generator};
use crate::grid::{Boundary, ChartGrid};
use crate::operators::Geometry;

/// `C^∞` step: 1 for `x ≤ 0`, 0 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    let bump = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        let (a, b) = (bump(1.0 - x), bump(x));
        a / (a + b)
    }
}

/// Radial cutoff `χ(r) = step((r − r_in) / (w (r_out − r_in)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCutoff {
    pub width: f64,
}

impl Default for RadialCutoff {
    fn default() -> Self {
        Self { width: 0.6 }
    }
}

impl RadialCutoff {
    pub fn eval(&self, grid: &ChartGrid, r: f64) -> f64 {
        smooth_step((r - grid.r_in) / (self.width * (grid.r_out - grid.r_in)))
    }
}

/// Lifting `H` sampled at the full time levels `t_n = n dt`, `n = 0..=nt`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftField {
    pub levels: Vec<ScalarField<C64>>,
    /// `f = H|_Γ` per level, `[n][j]`.
    pub f: Vec<Vec<C64>>,
    pub u0: ScalarField<C64>,
}

impl LiftField {
    /// Takes `H` from a closed form; `f` and `u0` are its traces.
    pub fn from_fn(grid: &ChartGrid, h: impl Fn(f64, f64, f64) -> C64) -> Self {
        let levels: Vec<ScalarField<C64>> =
            (0..=grid.nt).map(|n| ScalarField::from_fn(grid, |r, th| h(r, th, grid.t_step(n)))).collect();
        Self::from_levels(grid, levels)
    }

    pub fn from_levels(grid: &ChartGrid, levels: Vec<ScalarField<C64>>) -> Self {
        let f = levels.iter().map(|l| l.ring(grid, Boundary::Inner)).collect();
        let u0 = levels[0].clone();
        Self { levels, f, u0 }
    }

    /// `H = χ(r) f(θ, t)` from boundary samples `[n][j]` on the full levels.
    pub fn from_trace(grid: &ChartGrid, f: Vec<Vec<C64>>, cutoff: RadialCutoff) -> Result<Self> {
        if f.len() != grid.nt + 1 {
            return Err(Error::ShapeMismatch { expected: grid.nt + 1, found: f.len() });
        }
        let chi: Vec<f64> = (0..grid.nr).map(|i| cutoff.eval(grid, grid.r(i))).collect();
        let mut levels = Vec::with_capacity(f.len());
        for row in &f {
            if row.len() != grid.na {
                return Err(Error::ShapeMismatch { expected: grid.na, found: row.len() });
            }
            let mut data = Vec::with_capacity(grid.n_space());
            for &c in &chi {
                data.extend(row.iter().map(|v| v * c));
            }
            levels.push(ScalarField { nr: grid.nr, na: grid.na, data });
        }
        Ok(Self::from_levels(grid, levels))
    }

    pub fn from_boundary_fn(grid: &ChartGrid, f: impl Fn(f64, f64) -> C64, cutoff: RadialCutoff) -> Self {
        let rows = (0..=grid.nt)
            .map(|n| (0..grid.na).map(|j| f(grid.theta(j), grid.t_step(n))).collect())
            .collect();
        Self::from_trace(grid, rows, cutoff).expect("rows sized from the grid")
    }

    pub fn zeros(grid: &ChartGrid) -> Self {
        Self::from_levels(grid, vec![ScalarField::zeros(grid); grid.nt + 1])
    }

    /// Checks `H|_Γ = f` and `H(·, 0) = u0`.
    pub fn validate(&self, grid: &ChartGrid) -> Result<()> {
        if self.levels.len() != grid.nt + 1 || self.f.len() != grid.nt + 1 {
            return Err(Error::Precondition("lift must have nt + 1 time levels"));
        }
        for l in &self.levels {
            l.check_grid(grid)?;
            l.check_finite()?;
        }
        for (l, f) in self.levels.iter().zip(&self.f) {
            if l.ring(grid, Boundary::Inner) != *f {
                return Err(Error::Precondition("lift trace on Γ differs from f"));
            }
        }
        if self.levels[0] != self.u0 {
            return Err(Error::Precondition("lift initial slice differs from u0"));
        }
        Ok(())
    }

    /// `f` at the midpoint samples, `[k][j]`.
    pub fn trace_mid(&self) -> Vec<Vec<C64>> {
        self.f.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a + b) * 0.5).collect()).collect()
    }

    pub fn scale(&self, c: C64) -> Self {
        let levels = self.levels.iter().map(|l| l.map(|v| v * c)).collect();
        let f = self.f.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        Self { levels, f, u0: self.u0.map(|v| v * c) }
    }

    pub fn add(&self, other: &Self) -> Self {
        let levels = self.levels.iter().zip(&other.levels).map(|(a, b)| a.zip_with(b, |x, y| x + y)).collect();
        let f = self.f.iter().zip(&other.f).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        Self { levels, f, u0: self.u0.zip_with(&other.u0, |x, y| x + y) }
    }
}

/// Traces on `Σ₀ = ∂Ω × (0, T)` at the midpoint samples, `[k][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub trace: Vec<Vec<C64>>,
    pub normal: Vec<Vec<C64>>,
}

impl CauchyData {
    pub fn zeros(grid: &ChartGrid) -> Self {
        let z = vec![vec![C64::default(); grid.na]; grid.nt];
        Self { trace: z.clone(), normal: z }
    }

    pub fn nt(&self) -> usize {
        self.trace.len()
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        let m = |a: &Vec<Vec<C64>>, b: &Vec<Vec<C64>>| -> Vec<Vec<C64>> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| f(*p, *q)).collect()).collect()
        };
        Self { trace: m(&self.trace, &other.trace), normal: m(&self.normal, &other.normal) }
    }
}

#[derive(Debug, Clone)]
pub struct SchrodingerSolution {
    /// `u(t_n)` on the full grid, `n = 0..=nt`.
    pub levels: Vec<Vec<C64>>,
    /// `u` at the midpoint samples.
    pub u: SpaceTimeField<C64>,
    pub cauchy: CauchyData,
    /// `max_Γ |i ∂_t H + L H|` at `t = 0`; nonzero values only degrade
    /// accuracy near `t = 0`.
    pub compatibility: f64,
}

/// Generator and factored stepper for one geometry and time step.
#[derive(Debug, Clone)]
pub struct ForwardSolver {
    pub geo: Geometry,
    pub generator: Generator,
    pub stepper: CrankNicolson,
}

impl ForwardSolver {
    pub fn new(geo: Geometry) -> Result<Self> {
        let generator = assemble_generator(&geo)?;
        let stepper = CrankNicolson::new(&generator.a, geo.grid.dt())?;
        Ok(Self { geo, generator, stepper })
    }

    /// Also prepares the adjoint factorization.
    pub fn with_adjoint(geo: Geometry) -> Result<Self> {
        let mut s = Self::new(geo)?;
        s.stepper = s.stepper.with_adjoint()?;
        Ok(s)
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.geo.grid
    }

    /// `F_{n+1/2}` on interior unknowns.
    pub fn source(&self, lift: &LiftField, n: usize) -> Result<Vec<C64>> {
        let dt = self.grid().dt();
        let (h0, h1) = (&lift.levels[n].data, &lift.levels[n + 1].data);
        let mid: Vec<C64> = h0.iter().zip(h1).map(|(a, b)| (a + b) * 0.5).collect();
        let lh = self.geo.magnetic_flux(&mid)?;
        Ok(self
            .generator
            .nodes
            .iter()
            .map(|&p| -((h1[p] - h0[p]) / dt - C64::i() * lh[p]))
            .collect())
    }

    pub fn solve(&self, lift: &LiftField) -> Result<SchrodingerSolution> {
        let grid = *self.grid();
        lift.validate(&grid)?;
        let gen = &self.generator;
        let mut v = vec![C64::default(); gen.dim()];
        let mut levels = Vec::with_capacity(grid.nt + 1);
        levels.push(lift.levels[0].data.clone());
        for n in 0..grid.nt {
            let f = self.source(lift, n)?;
            v = self.stepper.step(&v, Some(&f))?;
            let mut u = lift.levels[n + 1].data.clone();
            for (&p, x) in gen.nodes.iter().zip(&v) {
                u[p] += x;
            }
            levels.push(u);
        }
        let compatibility = self.compatibility(lift)?;
        Ok(self.finish(levels, compatibility))
    }

    /// Midpoint fields and Cauchy data from full levels.
    pub fn finish(&self, levels: Vec<Vec<C64>>, compatibility: f64) -> SchrodingerSolution {
        let grid = *self.grid();
        let slices: Vec<ScalarField<C64>> = levels
            .windows(2)
            .map(|w| ScalarField {
                nr: grid.nr,
                na: grid.na,
                data: w[0].iter().zip(&w[1]).map(|(a, b)| (a + b) * 0.5).collect(),
            })
            .collect();
        let cauchy = CauchyData {
            trace: slices.iter().map(|s| s.ring(&grid, Boundary::Outer)).collect(),
            normal: slices.iter().map(|s| self.geo.normal_derivative(&s.data, Boundary::Outer)).collect(),
        };
        SchrodingerSolution { levels, u: SpaceTimeField { slices }, cauchy, compatibility }
    }

    fn compatibility(&self, lift: &LiftField) -> Result<f64> {
        let grid = self.grid();
        let dt = grid.dt();
        let lh = self.geo.magnetic(&lift.levels[0].data)?;
        let (h0, h1) = (&lift.levels[0].data, &lift.levels[1].data);
        Ok((0..grid.na)
            .map(|j| {
                let p = grid.idx(0, j);
                (C64::i() * (h1[p] - h0[p]) / dt + lh[p]).norm()
            })
            .fold(0.0, f64::max))
    }
}

/// One-shot solve on a fresh geometry.
pub fn solve_ibvp(lift: &LiftField, geo: &Geometry) -> Result<SchrodingerSolution> {
    ForwardSolver::new(geo.clone())?.solve(lift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{MetricData, MetricPreset};

    fn solver(n: usize, nt: usize, horizon: f64, preset: MetricPreset) -> ForwardSolver {
        let grid = ChartGrid::new(n + 1, n, 0.5, 1.0, nt, horizon).unwrap();
        let metric = MetricData::from_preset(&grid, preset).unwrap();
        let pot = crate::field::PotentialPreset::Swirl.sample(&grid);
        ForwardSolver::new(Geometry::new(grid, metric, pot).unwrap()).unwrap()
    }

    #[test]
    fn zero_lift_gives_zero_solution() {
        let s = solver(8, 8, 1.0, MetricPreset::Polar);
        let sol = s.solve(&LiftField::zeros(s.grid())).unwrap();
        assert!(sol.levels.iter().flatten().all(|v| *v == C64::default()));
        assert!(sol.cauchy.trace.iter().chain(&sol.cauchy.normal).flatten().all(|v| *v == C64::default()));
    }

    #[test]
    fn boundary_and_initial_values_are_kept() {
        let s = solver(10, 12, 1.0, MetricPreset::PerturbedPolar { eps: 0.1 });
        let g = *s.grid();
        let lift = LiftField::from_boundary_fn(&g, |th, t| C64::new(1.0 + 0.3 * th.cos(), t), RadialCutoff::default());
        let sol = s.solve(&lift).unwrap();
        assert_eq!(sol.levels[0], lift.u0.data);
        for (n, level) in sol.levels.iter().enumerate() {
            for j in 0..g.na {
                assert_eq!(level[g.idx(0, j)], lift.f[n][j]);
                assert_eq!(level[g.idx(g.nr - 1, j)], C64::default());
            }
        }
    }

    #[test]
    fn mismatched_lift_is_rejected() {
        let s = solver(8, 4, 1.0, MetricPreset::Polar);
        let mut lift = LiftField::from_boundary_fn(s.grid(), |_, _| C64::from(1.0), RadialCutoff::default());
        lift.f[2][1] = C64::from(5.0);
        assert!(matches!(s.solve(&lift), Err(Error::Precondition(_))));
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(-0.1), 1.0);
        assert_eq!(smooth_step(1.5), 0.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }
}
