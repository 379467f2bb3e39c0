//! Tikhonov-regularized recovery of the boundary source from Cauchy data on
//! `Σ₀`, with exact discrete gradients from one backward sweep.

use alloc::vec::Vec;

use num_traits::Float;

use crate::admissible::admissibility_values;
use crate::diff::{periodic_first, time_taps};
use crate::error::{Error, Result};
use crate::field::C64;
use crate::forward::{CauchyData, ForwardSolver, LiftField, RadialCutoff};
use crate::grid::{Boundary, ChartGrid};
use crate::operators::{normal_derivative_adjoint, Geometry};
use crate::quadrature::{surface_weights, SurfaceMeasure};

/// Clamped uniform cubic B-splines on `[0, T]`; `count ≥ 4` functions.
pub fn cubic_bsplines(count: usize, t: f64, horizon: f64) -> Vec<f64> {
    const P: usize = 3;
    let inner = count - P - 1;
    let mut knots = Vec::with_capacity(count + P + 1);
    knots.extend([0.0; P + 1]);
    for i in 1..=inner {
        knots.push(horizon * i as f64 / (inner + 1) as f64);
    }
    knots.extend([horizon; P + 1]);
    let t = t.clamp(0.0, horizon);
    // degree-0 basis, with the last interval closed on the right
    let mut b: Vec<f64> = (0..knots.len() - 1)
        .map(|i| {
            let (a, c) = (knots[i], knots[i + 1]);
            let last = c == horizon && a < c;
            if (t >= a && t < c) || (last && t == horizon) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for d in 1..=P {
        for i in 0..knots.len() - 1 - d {
            let l = knots[i + d] - knots[i];
            let r = knots[i + d + 1] - knots[i + 1];
            let left = if l > 0.0 { (t - knots[i]) / l * b[i] } else { 0.0 };
            let right = if r > 0.0 { (knots[i + d + 1] - t) / r * b[i + 1] } else { 0.0 };
            b[i] = left + right;
        }
    }
    b.truncate(count);
    b
}

/// Weights of the discrete `H¹(Γ × (0,T))` form on midpoint ring samples.
struct LateralForm {
    ws: Vec<f64>,
    /// `ws / g_θθ`.
    wt: Vec<f64>,
    dt: f64,
    ha: f64,
}

impl LateralForm {
    fn new(geo: &Geometry, b: Boundary) -> Self {
        let grid = &geo.grid;
        let ws = surface_weights(&geo.metric, grid, b, SurfaceMeasure::Literal);
        let i = grid.ring(b);
        let wt = (0..grid.na).map(|j| ws[j] / geo.metric.g[grid.idx(i, j)][2]).collect();
        Self { ws, wt, dt: grid.dt(), ha: grid.ha() }
    }

    fn time_derivative(&self, e: &[Vec<C64>]) -> Vec<Vec<C64>> {
        crate::diff::dt_rings(e, self.dt)
    }

    fn angle_derivative(&self, row: &[C64]) -> Vec<C64> {
        crate::diff::da_ring(row, self.ha)
    }

    /// `Re Σ dt ws (e ḡ + ∂_t e ∂_t ḡ) + dt wt ∂_θ e ∂_θ ḡ`.
    fn inner(&self, e: &[Vec<C64>], g: &[Vec<C64>], h1: bool) -> f64 {
        let mut acc = 0.0;
        for (re, rg) in e.iter().zip(g) {
            for j in 0..re.len() {
                acc += self.ws[j] * (re[j] * rg[j].conj()).re;
            }
        }
        if h1 {
            let (de, dg) = (self.time_derivative(e), self.time_derivative(g));
            for (re, rg) in de.iter().zip(&dg) {
                for j in 0..re.len() {
                    acc += self.ws[j] * (re[j] * rg[j].conj()).re;
                }
            }
            for (re, rg) in e.iter().zip(g) {
                let (ae, ag) = (self.angle_derivative(re), self.angle_derivative(rg));
                for j in 0..re.len() {
                    acc += self.wt[j] * (ae[j] * ag[j].conj()).re;
                }
            }
        }
        acc * self.dt
    }

    /// `Q e` with `Re⟨d, Q e⟩ = inner(d, e)` for every `d`.
    fn apply(&self, e: &[Vec<C64>], h1: bool) -> Vec<Vec<C64>> {
        let nt = e.len();
        let na = self.ws.len();
        let mut out: Vec<Vec<C64>> = e.iter().map(|r| r.iter().zip(&self.ws).map(|(v, w)| v * (w * self.dt)).collect()).collect();
        if h1 {
            let de = self.time_derivative(e);
            for k in 0..nt {
                for (m, c) in time_taps(k, nt, self.dt).iter() {
                    for j in 0..na {
                        out[m][j] += de[k][j] * (c * self.ws[j] * self.dt);
                    }
                }
            }
            for k in 0..nt {
                let ae = self.angle_derivative(&e[k]);
                for j in 0..na {
                    let y = ae[j] * (self.wt[j] * self.dt);
                    for (q, c) in periodic_first(j, na, self.ha).iter() {
                        out[k][q] += y * c;
                    }
                }
            }
        }
        out
    }
}

fn midpoints(f: &[Vec<C64>]) -> Vec<Vec<C64>> {
    f.windows(2).map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a + b) * 0.5).collect()).collect()
}

/// Discrete `H¹(Σ)` inner product of two sources sampled on the full levels.
pub fn sigma_inner(f: &[Vec<C64>], g: &[Vec<C64>], geo: &Geometry) -> f64 {
    LateralForm::new(geo, Boundary::Inner).inner(&midpoints(f), &midpoints(g), true)
}

pub fn sigma_norm(f: &[Vec<C64>], geo: &Geometry) -> f64 {
    sigma_inner(f, f, geo).max(0.0).sqrt()
}

/// Source basis orthonormal in the discrete `H¹(Σ)` inner product, each
/// function sampled `[n][j]` on the full levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceBasis {
    pub functions: Vec<Vec<Vec<C64>>>,
    pub max_harmonic: usize,
    pub splines: usize,
}

impl SourceBasis {
    pub fn empty() -> Self {
        Self { functions: Vec::new(), max_harmonic: 0, splines: 0 }
    }

    /// `e^{ikθ} B_p(t)` and `i e^{ikθ} B_p(t)` for `|k| ≤ max_harmonic`,
    /// `p < splines`: `2 (2K + 1) P` functions before orthonormalization.
    pub fn harmonic_spline(geo: &Geometry, max_harmonic: usize, splines: usize) -> Result<Self> {
        if splines < 4 {
            return Err(Error::OutOfRange { what: "spline count", value: splines as f64 });
        }
        let grid = &geo.grid;
        let bs: Vec<Vec<f64>> = (0..=grid.nt).map(|n| cubic_bsplines(splines, grid.t_step(n), grid.horizon)).collect();
        let mut raw = Vec::new();
        let km = max_harmonic as i32;
        for k in -km..=km {
            for p in 0..splines {
                for phase in [C64::from(1.0), C64::i()] {
                    let f: Vec<Vec<C64>> = (0..=grid.nt)
                        .map(|n| (0..grid.na).map(|j| phase * C64::from_polar(bs[n][p], k as f64 * grid.theta(j))).collect())
                        .collect();
                    raw.push(f);
                }
            }
        }
        let functions = orthonormalize(raw, geo)?;
        Ok(Self { functions, max_harmonic, splines })
    }

    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    /// `Σ c_i ψ_i` on the full levels.
    pub fn assemble(&self, grid: &ChartGrid, c: &[f64]) -> Result<Vec<Vec<C64>>> {
        if c.len() != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), found: c.len() });
        }
        let mut f = alloc::vec![alloc::vec![C64::default(); grid.na]; grid.nt + 1];
        for (ci, psi) in c.iter().zip(&self.functions) {
            for (row, prow) in f.iter_mut().zip(psi) {
                for (v, p) in row.iter_mut().zip(prow) {
                    *v += p * *ci;
                }
            }
        }
        Ok(f)
    }

    /// `Re⟨ψ_i, g⟩` in the Euclidean pairing of sampled values.
    pub fn pair(&self, g: &[Vec<C64>]) -> Vec<f64> {
        self.functions
            .iter()
            .map(|psi| psi.iter().flatten().zip(g.iter().flatten()).map(|(p, v)| (p.conj() * v).re).sum())
            .collect()
    }
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
fn orthonormalize(raw: Vec<Vec<Vec<C64>>>, geo: &Geometry) -> Result<Vec<Vec<Vec<C64>>>> {
    let mut out: Vec<Vec<Vec<C64>>> = Vec::with_capacity(raw.len());
    for mut v in raw {
        let n0 = sigma_norm(&v, geo);
        for _ in 0..2 {
            for q in &out {
                let c = sigma_inner(&v, q, geo);
                for (rv, rq) in v.iter_mut().zip(q) {
                    for (x, y) in rv.iter_mut().zip(rq) {
                        *x -= y * c;
                    }
                }
            }
        }
        let n = sigma_norm(&v, geo);
        if !(n > 1e-10 * n0) {
            return Err(Error::Precondition("basis functions are linearly dependent in H1(Sigma)"));
        }
        for row in &mut v {
            for x in row.iter_mut() {
                *x /= n;
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Misfit parts of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub trace: f64,
    pub normal: f64,
    pub penalty: f64,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.trace + self.normal + self.penalty
    }
}

#[derive(Debug, Clone)]
pub struct InverseProblem {
    pub solver: ForwardSolver,
    pub basis: SourceBasis,
    pub data: CauchyData,
    pub lambda: f64,
    pub cutoff: RadialCutoff,
}

impl InverseProblem {
    pub fn new(geo: Geometry, basis: SourceBasis, data: CauchyData, lambda: f64, cutoff: RadialCutoff) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain { what: "lambda", value: lambda });
        }
        let grid = geo.grid;
        if data.nt() != grid.nt || data.normal.len() != grid.nt {
            return Err(Error::ShapeMismatch { expected: grid.nt, found: data.nt() });
        }
        if basis.functions.iter().any(|f| f.len() != grid.nt + 1 || f.iter().any(|r| r.len() != grid.na)) {
            return Err(Error::Precondition("basis sampled on a different grid"));
        }
        let solver = ForwardSolver::with_adjoint(geo)?;
        Ok(Self { solver, basis, data, lambda, cutoff })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn lift(&self, c: &[f64]) -> Result<LiftField> {
        let f = self.basis.assemble(self.solver.grid(), c)?;
        LiftField::from_trace(self.solver.grid(), f, self.cutoff)
    }

    /// Cauchy data predicted by the coefficients.
    pub fn predict(&self, c: &[f64]) -> Result<CauchyData> {
        Ok(self.solver.solve(&self.lift(c)?)?.cauchy)
    }

    fn check(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), found: c.len() });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("coefficients must be finite"));
        }
        Ok(())
    }

    fn residual(&self, c: &[f64]) -> Result<(CauchyData, LiftField)> {
        let lift = self.lift(c)?;
        let pred = self.solver.solve(&lift)?.cauchy;
        Ok((pred.zip_map(&self.data, |a, b| a - b), lift))
    }

    pub fn objective(&self, c: &[f64]) -> Result<Objective> {
        self.check(c)?;
        let (e, _) = self.residual(c)?;
        let form = LateralForm::new(&self.solver.geo, Boundary::Outer);
        Ok(Objective {
            trace: form.inner(&e.trace, &e.trace, true),
            normal: form.inner(&e.normal, &e.normal, false),
            penalty: self.lambda * c.iter().map(|v| v * v).sum::<f64>(),
        })
    }

    /// Objective and its gradient from one forward and one backward sweep.
    pub fn gradient(&self, c: &[f64]) -> Result<(Objective, Vec<f64>)> {
        self.check(c)?;
        let solver = &self.solver;
        let geo = &solver.geo;
        let grid = *solver.grid();
        let gen = &solver.generator;
        let (e, _) = self.residual(c)?;
        let form = LateralForm::new(geo, Boundary::Outer);
        let obj = Objective {
            trace: form.inner(&e.trace, &e.trace, true),
            normal: form.inner(&e.normal, &e.normal, false),
            penalty: self.lambda * c.iter().map(|v| v * v).sum::<f64>(),
        };
        let qt = form.apply(&e.trace, true);
        let qn = form.apply(&e.normal, false);
        let outer = grid.ring(Boundary::Outer);
        // gradient with respect to each midpoint slice
        let ebar: Vec<Vec<C64>> = (0..grid.nt)
            .map(|k| {
                let mut g = normal_derivative_adjoint(geo, Boundary::Outer, &qn[k]);
                for j in 0..grid.na {
                    g[grid.idx(outer, j)] += qt[k][j];
                }
                g
            })
            .collect();
        let mut lam_h: Vec<Vec<C64>> = (0..=grid.nt).map(|n| observation_part(&ebar, n, grid.nt)).collect();
        let mut a = gen.gather(&lam_h[grid.nt]);
        let dt = grid.dt();
        let inv_w: Vec<f64> = geo.metric.sqrt_det.iter().map(|w| 1.0 / w).collect();
        for n in (0..grid.nt).rev() {
            let y = solver.stepper.solve_adjoint(&a)?;
            let gfv: Vec<C64> = y.iter().map(|v| v * dt).collect();
            let mut scat = alloc::vec![C64::default(); grid.n_space()];
            gen.scatter(&gfv, &mut scat);
            let weighted: Vec<C64> = scat.iter().zip(&inv_w).map(|(v, w)| v * *w).collect();
            let kstar = geo.flux_a.apply_adjoint(&weighted);
            let mi = C64::new(0.0, -0.5);
            for p in 0..grid.n_space() {
                let ks = kstar[p] * mi;
                let et = scat[p] / dt;
                lam_h[n + 1][p] += ks - et;
                lam_h[n][p] += ks + et;
            }
            let ny = solver.stepper.n.apply_adjoint(&y);
            let lu_n = gen.gather(&observation_part(&ebar, n, grid.nt));
            a = lu_n.iter().zip(&ny).map(|(p, q)| p + q).collect();
        }
        let chi: Vec<f64> = (0..grid.nr).map(|i| self.cutoff.eval(&grid, grid.r(i))).collect();
        let gf: Vec<Vec<C64>> = lam_h
            .iter()
            .map(|l| {
                (0..grid.na)
                    .map(|j| (0..grid.nr).map(|i| l[grid.idx(i, j)] * chi[i]).sum::<C64>())
                    .collect()
            })
            .collect();
        let grad = self.basis.pair(&gf).iter().zip(c).map(|(g, ci)| 2.0 * g + 2.0 * self.lambda * ci).collect();
        Ok((obj, grad))
    }
}

/// Gradient with respect to the full level `n` through the midpoint
/// averages alone.
fn observation_part(ebar: &[Vec<C64>], n: usize, nt: usize) -> Vec<C64> {
    let len = ebar[0].len();
    let mut g = alloc::vec![C64::default(); len];
    let half = C64::from(0.5);
    if n >= 1 {
        for (x, y) in g.iter_mut().zip(&ebar[n - 1]) {
            *x += y * half;
        }
    }
    if n < nt {
        for (x, y) in g.iter_mut().zip(&ebar[n]) {
            *x += y * half;
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `‖∇J‖ ≤ grad_tol · max(1, ‖∇J(0)‖)`.
    pub grad_tol: f64,
    pub armijo: f64,
    pub max_backtrack: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 32, max_iter: 200, grad_tol: 1e-9, armijo: 1e-4, max_backtrack: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// `‖f − f_true‖ / ‖f_true‖` in `H¹(Σ)` when the truth is known.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub lambda: f64,
    pub coeffs: Vec<f64>,
    /// Recovered source on the full levels.
    pub f: Vec<Vec<C64>>,
    pub objective: Objective,
    pub status: SolveStatus,
    pub trace: Vec<IterationRecord>,
    pub rel_error: Option<f64>,
    /// Achieved `(α, β)` of `f*`, checked after the fact.
    pub admissibility: (f64, f64),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `‖f − g‖ / ‖g‖` in the discrete `H¹(Σ)` norm.
pub fn relative_sigma_error(f: &[Vec<C64>], truth: &[Vec<C64>], geo: &Geometry) -> f64 {
    let d: Vec<Vec<C64>> = f.iter().zip(truth).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let n = sigma_norm(truth, geo);
    if n > 0.0 {
        sigma_norm(&d, geo) / n
    } else {
        sigma_norm(&d, geo)
    }
}

impl InverseProblem {
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain { what: "lambda", value: lambda });
        }
        Ok(Self { lambda, ..self.clone() })
    }

    fn record(&self, iter: usize, c: &[f64], obj: &Objective, g: &[f64], step: f64, truth: Option<&[Vec<C64>]>) -> Result<IterationRecord> {
        let rel_error = match truth {
            Some(t) => Some(relative_sigma_error(&self.basis.assemble(self.solver.grid(), c)?, t, &self.solver.geo)),
            None => None,
        };
        Ok(IterationRecord { iter, objective: obj.total(), grad_norm: dot(g, g).sqrt(), step, rel_error })
    }

    /// Minimizes the objective from `c = 0` by L-BFGS with Armijo backtracking.
    pub fn reconstruct(&self, opts: &LbfgsOptions, truth: Option<&[Vec<C64>]>) -> Result<Reconstruction> {
        let grid = *self.solver.grid();
        let dim = self.dim();
        let mut c = alloc::vec![0.0; dim];
        let (mut obj, mut g) = self.gradient(&c)?;
        let mut trace = alloc::vec![self.record(0, &c, &obj, &g, 0.0, truth)?];
        let g0 = dot(&g, &g).sqrt().max(1.0);
        let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
        let mut status = SolveStatus::MaxIterations;
        let mut stalled = 0;
        for iter in 1..=opts.max_iter {
            if dot(&g, &g).sqrt() <= opts.grad_tol * g0 {
                status = SolveStatus::Converged;
                break;
            }
            // two-loop recursion
            let mut q: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut alphas = Vec::with_capacity(mem.len());
            for (s, y, rho) in mem.iter().rev() {
                let a = rho * dot(s, &q);
                for (qi, yi) in q.iter_mut().zip(y) {
                    *qi -= a * yi;
                }
                alphas.push(a);
            }
            let scale = match mem.last() {
                Some((s, y, _)) => dot(s, y) / dot(y, y),
                None => 1.0 / dot(&g, &g).sqrt(),
            };
            for v in q.iter_mut() {
                *v *= scale;
            }
            for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
                let b = rho * dot(y, &q);
                for (qi, si) in q.iter_mut().zip(s) {
                    *qi += (a - b) * si;
                }
            }
            let mut slope = dot(&g, &q);
            if !(slope < 0.0) {
                mem.clear();
                q = g.iter().map(|v| -v / dot(&g, &g).sqrt()).collect();
                slope = dot(&g, &q);
            }
            let j0 = obj.total();
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..opts.max_backtrack {
                let trial: Vec<f64> = c.iter().zip(&q).map(|(x, d)| x + step * d).collect();
                let (o, gt) = self.gradient(&trial)?;
                if o.total() <= j0 + opts.armijo * step * slope {
                    accepted = Some((trial, o, gt));
                    break;
                }
                step *= 0.5;
            }
            let Some((cn, on, gn)) = accepted else {
                status = SolveStatus::LineSearchFailed;
                break;
            };
            let s: Vec<f64> = cn.iter().zip(&c).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-300 {
                if mem.len() == opts.memory.max(1) {
                    mem.remove(0);
                }
                mem.push((s, y, 1.0 / sy));
            }
            stalled = if j0 - on.total() <= 1e-14 * j0.abs() { stalled + 1 } else { 0 };
            c = cn;
            obj = on;
            g = gn;
            trace.push(self.record(iter, &c, &obj, &g, step, truth)?);
            if stalled >= 3 {
                status = SolveStatus::Converged;
                break;
            }
        }
        if status == SolveStatus::MaxIterations && dot(&g, &g).sqrt() <= opts.grad_tol * g0 {
            status = SolveStatus::Converged;
        }
        let f = self.basis.assemble(&grid, &c)?;
        let rel_error = truth.map(|t| relative_sigma_error(&f, t, &self.solver.geo));
        let admissibility = admissibility_values(&f, &self.solver.geo)?;
        Ok(Reconstruction { lambda: self.lambda, coeffs: c, f, objective: obj, status, trace, rel_error, admissibility })
    }

    /// One reconstruction per regularization parameter, in the given order.
    pub fn lambda_sweep(&self, lambdas: &[f64], opts: &LbfgsOptions, truth: Option<&[Vec<C64>]>) -> Result<Vec<Reconstruction>> {
        lambdas.iter().map(|&l| self.with_lambda(l)?.reconstruct(opts, truth)).collect()
    }
}

/// Project a sampled source onto the basis: the coefficients of its
/// `H¹(Σ)`-orthogonal projection.
pub fn project(basis: &SourceBasis, f: &[Vec<C64>], geo: &Geometry) -> Vec<f64> {
    basis.functions.iter().map(|psi| sigma_inner(f, psi, geo)).collect()
}
