//! Sampled Riemannian metric on the chart and its Christoffel symbols.

use alloc::vec::Vec;

use num_traits::Float;

use crate::diff::{d1, Axis};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ChartGrid;

/// Symmetric 2×2 matrix stored as `[m_rr, m_ra, m_aa]`.
pub type Sym2 = [f64; 3];

/// Closed-form metric tensors in chart coordinates `(x¹, x²) = (r, θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricPreset {
    /// `g = I` in chart coordinates.
    Flat,
    /// `g = c I`.
    Scaled(f64),
    /// `g = diag(1, r²)`, the Euclidean plane in polar coordinates.
    Polar,
    /// `g = diag(1 + ε s, r² (1 + ε s))` with `s = cos θ sin 3r`.
    PerturbedPolar { eps: f64 },
    /// Polar metric with an off-diagonal term `g_rθ = ε r cos θ`.
    Sheared { eps: f64 },
}

impl MetricPreset {
    pub fn eval(&self, r: f64, theta: f64) -> Sym2 {
        match *self {
            MetricPreset::Flat => [1.0, 0.0, 1.0],
            MetricPreset::Scaled(c) => [c, 0.0, c],
            MetricPreset::Polar => [1.0, 0.0, r * r],
            MetricPreset::PerturbedPolar { eps } => {
                let f = 1.0 + eps * theta.cos() * (3.0 * r).sin();
                [f, 0.0, r * r * f]
            }
            MetricPreset::Sheared { eps } => [1.0, eps * r * theta.cos(), r * r],
        }
    }

    /// `[∂_r g, ∂_θ g]` in closed form.
    pub fn derivatives(&self, r: f64, theta: f64) -> [Sym2; 2] {
        match *self {
            MetricPreset::Flat | MetricPreset::Scaled(_) => [[0.0; 3]; 2],
            MetricPreset::Polar => [[0.0, 0.0, 2.0 * r], [0.0; 3]],
            MetricPreset::PerturbedPolar { eps } => {
                let f = 1.0 + eps * theta.cos() * (3.0 * r).sin();
                let fr = 3.0 * eps * theta.cos() * (3.0 * r).cos();
                let fa = -eps * theta.sin() * (3.0 * r).sin();
                [[fr, 0.0, 2.0 * r * f + r * r * fr], [fa, 0.0, r * r * fa]]
            }
            MetricPreset::Sheared { eps } => [[0.0, eps * theta.cos(), 2.0 * r], [0.0, -eps * r * theta.sin(), 0.0]],
        }
    }
}

#[inline]
pub fn det2(m: Sym2) -> f64 {
    m[0] * m[2] - m[1] * m[1]
}

#[inline]
pub fn inv2(m: Sym2) -> Sym2 {
    let d = det2(m);
    [m[2] / d, -m[1] / d, m[0] / d]
}

/// Smallest eigenvalue of a symmetric 2×2 matrix.
#[inline]
pub fn min_eig2(m: Sym2) -> f64 {
    let mean = 0.5 * (m[0] + m[2]);
    let half = 0.5 * (m[0] - m[2]);
    mean - (half * half + m[1] * m[1]).sqrt()
}

/// Smallest generalized eigenvalue `μ` of `h v = μ g v` (g positive definite).
pub fn min_generalized_eig2(h: Sym2, g: Sym2) -> f64 {
    // Reduce to L⁻¹ h L⁻ᵀ with g = L Lᵀ so equal eigenvalues stay accurate.
    let l00 = g[0].sqrt();
    let l10 = g[1] / l00;
    let l11 = (g[2] - l10 * l10).sqrt();
    let a = h[0] / (l00 * l00);
    let b = (h[1] - l10 * h[0] / l00) / (l00 * l11);
    let c = (h[2] - 2.0 * l10 * h[1] / l00 + l10 * l10 * h[0] / (l00 * l00)) / (l11 * l11);
    min_eig2([a, b, c])
}

#[inline]
pub fn sym_quad(m: Sym2, x: [f64; 2], y: [f64; 2]) -> f64 {
    m[0] * x[0] * y[0] + m[1] * (x[0] * y[1] + x[1] * y[0]) + m[2] * x[1] * y[1]
}

#[inline]
pub fn sym_entry(m: Sym2, k: usize, l: usize) -> f64 {
    match (k, l) {
        (0, 0) => m[0],
        (1, 1) => m[2],
        _ => m[1],
    }
}

/// Metric sampled at every node, with derived quantities.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub g: Vec<Sym2>,
    pub g_inv: Vec<Sym2>,
    pub det: Vec<f64>,
    pub sqrt_det: Vec<f64>,
    /// `christoffel[n][m][k][l] = Γ^m_{kl}` at node `n`.
    pub christoffel: Vec<[[[f64; 2]; 2]; 2]>,
    /// Minimum eigenvalue of `g` over the nodes.
    pub kappa: f64,
}

impl MetricData {
    /// Presets use exact metric derivatives, so the Christoffel symbols stay
    /// smooth up to the radial boundaries.
    pub fn from_preset(grid: &ChartGrid, preset: MetricPreset) -> Result<Self> {
        let mut out = Self::from_fn(grid, |r, t| preset.eval(r, t))?;
        let mut dg = [[Vec::new(), Vec::new(), Vec::new()], [Vec::new(), Vec::new(), Vec::new()]];
        for i in 0..grid.nr {
            for j in 0..grid.na {
                let d = preset.derivatives(grid.r(i), grid.theta(j));
                for (axis, da) in d.iter().enumerate() {
                    for c in 0..3 {
                        dg[axis][c].push(da[c]);
                    }
                }
            }
        }
        out.christoffel = christoffel_from_derivatives(&out.g_inv, &dg);
        Ok(out)
    }

    pub fn from_fn(grid: &ChartGrid, f: impl Fn(f64, f64) -> Sym2) -> Result<Self> {
        let mut g = Vec::with_capacity(grid.n_space());
        for i in 0..grid.nr {
            for j in 0..grid.na {
                g.push(f(grid.r(i), grid.theta(j)));
            }
        }
        Self::from_samples(grid, g)
    }

    pub fn from_samples(grid: &ChartGrid, g: Vec<Sym2>) -> Result<Self> {
        if g.len() != grid.n_space() {
            return Err(Error::ShapeMismatch { expected: grid.n_space(), found: g.len() });
        }
        let mut kappa = f64::INFINITY;
        let mut det = Vec::with_capacity(g.len());
        for (n, m) in g.iter().enumerate() {
            let d = det2(*m);
            let lam = min_eig2(*m);
            if !(d > 0.0) || !(lam > 0.0) || !d.is_finite() {
                return Err(Error::DegenerateMetric { node: n, det: d });
            }
            kappa = kappa.min(lam);
            det.push(d);
        }
        let g_inv: Vec<Sym2> = g.iter().map(|&m| inv2(m)).collect();
        let sqrt_det = det.iter().map(|d| d.sqrt()).collect();
        let christoffel = christoffel_symbols(&g, &g_inv, grid);
        Ok(Self { g, g_inv, det, sqrt_det, christoffel, kappa })
    }

    /// Flux tensor `√|g| g^{kl}` at a node.
    #[inline]
    pub fn flux_tensor(&self, n: usize) -> Sym2 {
        let s = self.sqrt_det[n];
        let gi = self.g_inv[n];
        [s * gi[0], s * gi[1], s * gi[2]]
    }

    /// `g^{kl} Γ^m_{kl}` for `m = r, θ`.
    #[inline]
    pub fn contracted_christoffel(&self, n: usize) -> [f64; 2] {
        let gi = self.g_inv[n];
        let c = &self.christoffel[n];
        let mut out = [0.0; 2];
        for (m, o) in out.iter_mut().enumerate() {
            *o = gi[0] * c[m][0][0] + 2.0 * gi[1] * c[m][0][1] + gi[2] * c[m][1][1];
        }
        out
    }
}

/// `Γ^m_{kl} = ½ g^{jm}(∂_k g_{jl} + ∂_l g_{jk} − ∂_j g_{kl})` with centered
/// differences of the sampled metric (one-sided on the radial boundaries).
/// Symmetry in `(k, l)` is exact: only `k ≤ l` is computed.
pub fn christoffel_symbols(g: &[Sym2], g_inv: &[Sym2], grid: &ChartGrid) -> Vec<[[[f64; 2]; 2]; 2]> {
    // dg[axis][component][node]
    let mut dg = [[Vec::new(), Vec::new(), Vec::new()], [Vec::new(), Vec::new(), Vec::new()]];
    for c in 0..3 {
        let comp = ScalarField { nr: grid.nr, na: grid.na, data: g.iter().map(|m| m[c]).collect() };
        dg[0][c] = d1(&comp.data, grid, Axis::R);
        dg[1][c] = d1(&comp.data, grid, Axis::A);
    }
    christoffel_from_derivatives(g_inv, &dg)
}

/// Christoffel symbols from `dg[axis][component][node]`.
fn christoffel_from_derivatives(g_inv: &[Sym2], dg: &[[Vec<f64>; 3]; 2]) -> Vec<[[[f64; 2]; 2]; 2]> {
    let comp_index = |k: usize, l: usize| if k == l { if k == 0 { 0 } else { 2 } } else { 1 };
    (0..g_inv.len())
        .map(|n| {
            let d = |axis: usize, k: usize, l: usize| dg[axis][comp_index(k, l)][n];
            let gi = g_inv[n];
            let mut out = [[[0.0; 2]; 2]; 2];
            for m in 0..2 {
                for k in 0..2 {
                    for l in k..2 {
                        let mut acc = 0.0;
                        for j in 0..2 {
                            acc += sym_entry(gi, j, m) * (d(k, j, l) + d(l, j, k) - d(j, k, l));
                        }
                        out[m][k][l] = 0.5 * acc;
                        out[m][l][k] = 0.5 * acc;
                    }
                }
            }
            out
        })
        .collect()
}
