//! Spatial convexity function `ψ` and the Carleman weight family.
//!
//! With `E(x) = e^{γ(ψ(x) + 2m)}` and `ℓ(t) = [t(T − t)]^{-1}`:
//! `φ = (E − e^{4γm}) ℓ`, `ξ = E ℓ`, `σ = s γ ξ`.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::field::{ScalarField, SpaceTimeField, C64};
use crate::grid::{Boundary, ChartGrid};
use crate::metric::{min_generalized_eig2, sym_quad, MetricData, Sym2};
use crate::operators::{cov_norm_sq, raise, Geometry};

/// Largest exponent accepted before `e^x` is considered unsafe.
pub const MAX_EXPONENT: f64 = 700.0;

/// Value, chart gradient and chart second partials of `ψ` at a point:
/// `[ψ, ψ_r, ψ_θ, ψ_rr, ψ_rθ, ψ_θθ]`.
pub type PsiJet = [f64; 6];

#[derive(Debug, Clone, Copy)]
pub enum PsiPreset {
    /// `ψ = (r² − r_B²) / 2`.
    RadialQuadratic { r_b: f64 },
    /// User-supplied closed form with exact derivatives.
    Custom(fn(f64, f64) -> PsiJet),
}

impl PsiPreset {
    pub fn jet(&self, r: f64, theta: f64) -> PsiJet {
        match *self {
            PsiPreset::RadialQuadratic { r_b } => [0.5 * (r * r - r_b * r_b), r, 0.0, 1.0, 0.0, 0.0],
            PsiPreset::Custom(f) => f(r, theta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MRule {
    /// `m = 1.1 sup ψ`.
    #[default]
    Auto,
    Explicit(f64),
}

#[derive(Debug, Clone)]
pub struct SpatialWeight {
    pub preset: PsiPreset,
    pub m: f64,
    pub psi: ScalarField<f64>,
    /// Chart gradient `(ψ_r, ψ_θ)`.
    pub grad: Vec<[f64; 2]>,
    /// Covariant Hessian `∇²_g ψ` as `[h_rr, h_rθ, h_θθ]`.
    pub hess: Vec<Sym2>,
    pub sup_psi: f64,
}

impl SpatialWeight {
    pub fn from_preset(preset: PsiPreset, m_rule: MRule, grid: &ChartGrid, metric: &MetricData) -> Result<Self> {
        let n = grid.n_space();
        let mut psi = Vec::with_capacity(n);
        let mut grad = Vec::with_capacity(n);
        let mut hess = Vec::with_capacity(n);
        for i in 0..grid.nr {
            for j in 0..grid.na {
                let node = grid.idx(i, j);
                let q = preset.jet(grid.r(i), grid.theta(j));
                let c = &metric.christoffel[node];
                let h = |k: usize, l: usize, raw: f64| raw - c[0][k][l] * q[1] - c[1][k][l] * q[2];
                psi.push(q[0]);
                grad.push([q[1], q[2]]);
                hess.push([h(0, 0, q[3]), h(0, 1, q[4]), h(1, 1, q[5])]);
            }
        }
        if psi.iter().chain(grad.iter().flatten()).chain(hess.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::WeightInvalid { reason: "non-finite ψ sample", value: f64::NAN });
        }
        let sup_psi = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let m = match m_rule {
            MRule::Auto => 1.1 * sup_psi,
            MRule::Explicit(m) => m,
        };
        let inf_psi = psi.iter().cloned().fold(f64::INFINITY, f64::min);
        // 0 < ψ + 2m < 4m on the grid keeps φ < 0 and ξ bounded below.
        if !(m > 0.0) || !(sup_psi < 2.0 * m) || !(inf_psi + 2.0 * m > 0.0) {
            return Err(Error::WeightInvalid { reason: "m violates 0 < ψ + 2m < 4m", value: m });
        }
        Ok(Self { preset, m, psi: ScalarField { nr: grid.nr, na: grid.na, data: psi }, grad, hess, sup_psi })
    }

    /// `|∇_g ψ|_g` at node `n`.
    pub fn grad_norm(&self, metric: &MetricData, n: usize) -> f64 {
        cov_norm_sq(metric.g_inv[n], self.grad[n]).sqrt()
    }

    /// `Δ_g ψ = g^{kl} (∇²ψ)_{kl}`.
    pub fn laplacian(&self, metric: &MetricData, n: usize) -> f64 {
        let gi = metric.g_inv[n];
        let h = self.hess[n];
        gi[0] * h[0] + 2.0 * gi[1] * h[1] + gi[2] * h[2]
    }
}

/// Radial quadratic `ψ` vanishing on `Γ`, followed by the structural check.
pub fn make_spatial_weight(r_b: f64, grid: &ChartGrid, metric: &MetricData, m_rule: MRule) -> Result<SpatialWeight> {
    if (r_b - grid.r_in).abs() > 1e-14 * grid.r_in {
        return Err(Error::Precondition("r_B must equal the inner radius"));
    }
    let sw = SpatialWeight::from_preset(PsiPreset::RadialQuadratic { r_b }, m_rule, grid, metric)?;
    check_phi_conditions(&sw, metric, grid)?;
    Ok(sw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiReport {
    /// `min |∇_g ψ|_g` over nodes with `ψ ≥ 0`.
    pub delta: f64,
    /// Smallest generalized eigenvalue of `∇²_g ψ` relative to `g` there.
    pub hessian_margin: f64,
    pub nodes_checked: usize,
}

/// Gradient and convexity conditions on the nodes of `{ψ ≥ 0}`.
///
/// The closure is used so that the infimum attained on `Γ` (where `ψ = 0`)
/// is part of the sample set.
pub fn check_phi_conditions(sw: &SpatialWeight, metric: &MetricData, grid: &ChartGrid) -> Result<PhiReport> {
    let (mut delta, mut margin, mut count) = (f64::INFINITY, f64::INFINITY, 0);
    for n in 0..grid.n_space() {
        if sw.psi.data[n] < 0.0 {
            continue;
        }
        count += 1;
        delta = delta.min(sw.grad_norm(metric, n));
        margin = margin.min(min_generalized_eig2(sw.hess[n], metric.g[n]));
    }
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    if !(delta > 0.0) {
        return Err(Error::WeightInvalid { reason: "|∇ψ| vanishes on {ψ ≥ 0}", value: delta });
    }
    if !(margin > 0.0) {
        return Err(Error::WeightInvalid { reason: "∇²ψ is not positive on {ψ ≥ 0}", value: margin });
    }
    Ok(PhiReport { delta, hessian_margin: margin, nodes_checked: count })
}

/// `ℓ(t) = 1 / (t (T − t))`.
pub fn ell(t: f64, horizon: f64) -> Result<f64> {
    if !(t > 0.0 && t < horizon) {
        return Err(Error::Domain { what: "ℓ(t) needs 0 < t < T", value: t });
    }
    Ok(1.0 / (t * (horizon - t)))
}

/// `(ℓ, ℓ', ℓ'')`.
pub fn ell_jet(t: f64, horizon: f64) -> Result<[f64; 3]> {
    let l = ell(t, horizon)?;
    let p = t * (horizon - t);
    let dp = horizon - 2.0 * t;
    Ok([l, -dp / (p * p), 2.0 / (p * p) + 2.0 * dp * dp / (p * p * p)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanParams {
    pub gamma: f64,
    pub s: f64,
    pub horizon: f64,
}

impl CarlemanParams {
    /// `γ ≥ 1`; `s ≥ 0` (zero disables the conjugation).
    pub fn new(gamma: f64, s: f64, horizon: f64) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::OutOfRange { what: "gamma", value: gamma });
        }
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::OutOfRange { what: "s", value: s });
        }
        if !(horizon > 0.0) {
            return Err(Error::OutOfRange { what: "T", value: horizon });
        }
        Ok(Self { gamma, s, horizon })
    }
}

/// Spatial and temporal factors of the weights on a grid, with every
/// derivative the harnesses need.
#[derive(Debug, Clone)]
pub struct WeightFields {
    pub params: CarlemanParams,
    pub m: f64,
    /// `γ(ψ + 2m)`, i.e. `ln E`.
    pub log_e: Vec<f64>,
    /// `4γm`.
    pub log_e4: f64,
    /// `γ E ∇ψ` (covariant); `∇φ = ℓ ·` this.
    pub grad_space: Vec<[f64; 2]>,
    /// `γ E (∇²ψ + γ dψ⊗dψ)`.
    pub hess_space: Vec<Sym2>,
    /// `Λ = γ E (Δ_g ψ + γ |∇ψ|²)`.
    pub lap_space: Vec<f64>,
    /// `Δ_g Λ` by finite differences.
    pub bilap_space: Vec<f64>,
    /// `∂_{ν_g} Λ` on each ring.
    pub dnu_lap_space: [Vec<f64>; 2],
    /// `(ℓ, ℓ', ℓ'')` at each time sample.
    pub ell: Vec<[f64; 3]>,
}

impl WeightFields {
    pub fn new(sw: &SpatialWeight, params: CarlemanParams, geo: &Geometry) -> Result<Self> {
        let grid = &geo.grid;
        let metric = &geo.metric;
        if (params.horizon - grid.horizon).abs() > 1e-12 * grid.horizon {
            return Err(Error::Precondition("weight horizon differs from the grid horizon"));
        }
        let gamma = params.gamma;
        let exponent = gamma * (sw.sup_psi + 2.0 * sw.m);
        let log_e4 = 4.0 * gamma * sw.m;
        if exponent > MAX_EXPONENT || log_e4 > MAX_EXPONENT {
            return Err(Error::ParameterOverflow { exponent: exponent.max(log_e4) });
        }
        let n = grid.n_space();
        let log_e: Vec<f64> = sw.psi.data.iter().map(|p| gamma * (p + 2.0 * sw.m)).collect();
        let mut grad_space = Vec::with_capacity(n);
        let mut hess_space = Vec::with_capacity(n);
        let mut lap_space = Vec::with_capacity(n);
        for k in 0..n {
            let ge = gamma * log_e[k].exp();
            let d = sw.grad[k];
            let h = sw.hess[k];
            grad_space.push([ge * d[0], ge * d[1]]);
            hess_space.push([
                ge * (h[0] + gamma * d[0] * d[0]),
                ge * (h[1] + gamma * d[0] * d[1]),
                ge * (h[2] + gamma * d[1] * d[1]),
            ]);
            let g2 = cov_norm_sq(metric.g_inv[k], d);
            lap_space.push(ge * (sw.laplacian(metric, k) + gamma * g2));
        }
        let lap_c: Vec<C64> = lap_space.iter().map(|&v| C64::from(v)).collect();
        let bilap_space = geo.laplace_beltrami(&lap_c)?.iter().map(|v| v.re).collect();
        let dnu_lap_space = [
            geo.normal_derivative(&lap_space, Boundary::Inner),
            geo.normal_derivative(&lap_space, Boundary::Outer),
        ];
        let ell = (0..grid.nt).map(|k| ell_jet(grid.t_mid(k), grid.horizon)).collect::<Result<Vec<_>>>()?;
        Ok(Self { params, m: sw.m, log_e, log_e4, grad_space, hess_space, lap_space, bilap_space, dnu_lap_space, ell })
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.params.s
    }

    /// `E − e^{4γm}` (negative).
    #[inline]
    pub fn phi_space(&self, n: usize) -> f64 {
        self.log_e[n].exp() - self.log_e4.exp()
    }

    #[inline]
    pub fn phi(&self, k: usize, n: usize) -> f64 {
        self.phi_space(n) * self.ell[k][0]
    }

    #[inline]
    pub fn phi_t(&self, k: usize, n: usize) -> f64 {
        self.phi_space(n) * self.ell[k][1]
    }

    #[inline]
    pub fn phi_tt(&self, k: usize, n: usize) -> f64 {
        self.phi_space(n) * self.ell[k][2]
    }

    #[inline]
    pub fn log_xi(&self, k: usize, n: usize) -> f64 {
        self.log_e[n] + self.ell[k][0].ln()
    }

    #[inline]
    pub fn xi(&self, k: usize, n: usize) -> f64 {
        self.log_xi(k, n).exp()
    }

    /// `ln σ = ln(sγ) + ln ξ`; `-∞` when `s = 0`.
    #[inline]
    pub fn log_sigma(&self, k: usize, n: usize) -> f64 {
        (self.params.s * self.params.gamma).ln() + self.log_xi(k, n)
    }

    #[inline]
    pub fn sigma(&self, k: usize, n: usize) -> f64 {
        self.params.s * self.params.gamma * self.xi(k, n)
    }

    /// Covariant `∇φ`.
    #[inline]
    pub fn grad_phi(&self, k: usize, n: usize) -> [f64; 2] {
        let l = self.ell[k][0];
        [self.grad_space[n][0] * l, self.grad_space[n][1] * l]
    }

    /// Covariant `∇φ'`.
    #[inline]
    pub fn grad_phi_t(&self, k: usize, n: usize) -> [f64; 2] {
        let l = self.ell[k][1];
        [self.grad_space[n][0] * l, self.grad_space[n][1] * l]
    }

    #[inline]
    pub fn hess_phi(&self, k: usize, n: usize) -> Sym2 {
        let l = self.ell[k][0];
        let h = self.hess_space[n];
        [h[0] * l, h[1] * l, h[2] * l]
    }

    #[inline]
    pub fn lap_phi(&self, k: usize, n: usize) -> f64 {
        self.lap_space[n] * self.ell[k][0]
    }

    #[inline]
    pub fn bilap_phi(&self, k: usize, n: usize) -> f64 {
        self.bilap_space[n] * self.ell[k][0]
    }

    #[inline]
    pub fn dnu_lap_phi(&self, k: usize, b: Boundary, j: usize) -> f64 {
        let idx = match b {
            Boundary::Inner => 0,
            Boundary::Outer => 1,
        };
        self.dnu_lap_space[idx][j] * self.ell[k][0]
    }

    /// `|∇φ|²_g`.
    #[inline]
    pub fn grad_phi_sq(&self, metric: &MetricData, k: usize, n: usize) -> f64 {
        cov_norm_sq(metric.g_inv[n], self.grad_phi(k, n))
    }

    /// `∇φ` as a contravariant vector.
    #[inline]
    pub fn grad_phi_vec(&self, metric: &MetricData, k: usize, n: usize) -> [f64; 2] {
        raise(metric.g_inv[n], self.grad_phi(k, n))
    }

    /// `∇²φ(X, Y)` for contravariant `X, Y`.
    #[inline]
    pub fn hess_phi_on(&self, k: usize, n: usize, x: [f64; 2], y: [f64; 2]) -> f64 {
        sym_quad(self.hess_phi(k, n), x, y)
    }

    /// Log-scale `-sφ` used to conjugate operators onto `z = e^{sφ} u`.
    pub fn neg_s_phi(&self, k: usize) -> Vec<f64> {
        let s = self.params.s;
        (0..self.log_e.len()).map(|n| -s * self.phi(k, n)).collect()
    }
}

/// `(φ, ξ, σ)` as space-time fields.
pub fn weight_fields(
    sw: &SpatialWeight,
    params: CarlemanParams,
    geo: &Geometry,
) -> Result<(SpaceTimeField<f64>, SpaceTimeField<f64>, SpaceTimeField<f64>)> {
    let w = WeightFields::new(sw, params, geo)?;
    let grid = &geo.grid;
    let build = |f: &dyn Fn(usize, usize) -> f64| SpaceTimeField {
        slices: (0..grid.nt)
            .map(|k| ScalarField { nr: grid.nr, na: grid.na, data: (0..grid.n_space()).map(|n| f(k, n)).collect() })
            .collect(),
    };
    Ok((build(&|k, n| w.phi(k, n)), build(&|k, n| w.xi(k, n)), build(&|k, n| w.sigma(k, n))))
}

/// Decay bound on `Σ₀`: checks `e^{2sφ} ω³ ≤ e^{9γm} s³ ℓ³ e^{−2csℓ}` with
/// `ω = sξ`, `c = e^{4γm} − e^{3γm}` at every outer-ring sample.
/// Returns the largest log-excess (nonpositive when the bound holds).
pub fn outer_decay_excess(w: &WeightFields, grid: &ChartGrid) -> f64 {
    let (gamma, m, s) = (w.params.gamma, w.m, w.params.s);
    let c = (4.0 * gamma * m).exp() - (3.0 * gamma * m).exp();
    let i = grid.ring(Boundary::Outer);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..grid.nt {
        let l = w.ell[k][0];
        for j in 0..grid.na {
            let n = grid.idx(i, j);
            let lhs = 2.0 * s * w.phi(k, n) + 3.0 * (s.ln() + w.log_xi(k, n));
            let rhs = 9.0 * gamma * m + 3.0 * (s * l).ln() - 2.0 * c * s * l;
            worst = worst.max(lhs - rhs);
        }
    }
    worst
}

/// Lower bound on `Γ × (ε, T − ε)`: `2sφ ≥ −cs/ε` with
/// `c = 4(e^{4γm} − e^{2γm}) / T`. Returns the smallest margin.
pub fn inner_lower_margin(w: &WeightFields, grid: &ChartGrid, eps: f64) -> f64 {
    let (gamma, m, s) = (w.params.gamma, w.m, w.params.s);
    let c = 4.0 * ((4.0 * gamma * m).exp() - (2.0 * gamma * m).exp()) / grid.horizon;
    let mut worst = f64::INFINITY;
    for k in 0..grid.nt {
        let t = grid.t_mid(k);
        if !(t > eps && t < grid.horizon - eps) {
            continue;
        }
        for j in 0..grid.na {
            let n = grid.idx(0, j);
            worst = worst.min(2.0 * s * w.phi(k, n) + c * s / eps);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{d1, Axis};
    use crate::metric::MetricPreset;

    fn setup(preset: MetricPreset, r_out: f64) -> (Geometry, SpatialWeight) {
        let grid = ChartGrid::new(25, 24, 0.5, r_out, 32, 4.0).unwrap();
        let metric = MetricData::from_preset(&grid, preset).unwrap();
        let geo = Geometry::without_potential(grid, metric).unwrap();
        let sw = make_spatial_weight(0.5, &geo.grid, &geo.metric, MRule::Auto).unwrap();
        (geo, sw)
    }

    #[test]
    fn ell_examples() {
        let t_big = 3.0;
        assert!((ell(1.5, t_big).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        for t in [0.1, 0.7, 1.2, 2.9] {
            assert!((ell(t, t_big).unwrap() - ell(t_big - t, t_big).unwrap()).abs() < 1e-13);
            assert!(ell(t, t_big).unwrap() > 4.0 / 9.0);
        }
        assert!(ell(0.0, t_big).is_err() && ell(t_big, t_big).is_err() && ell(-1.0, t_big).is_err());
        let h = 1e-4;
        for t in [0.3, 1.0, 2.2] {
            let j = ell_jet(t, t_big).unwrap();
            let fd1 = (ell(t + h, t_big).unwrap() - ell(t - h, t_big).unwrap()) / (2.0 * h);
            let fd2 = (ell(t + h, t_big).unwrap() - 2.0 * j[0] + ell(t - h, t_big).unwrap()) / (h * h);
            assert!((j[1] - fd1).abs() < 1e-6 * j[1].abs().max(1.0));
            assert!((j[2] - fd2).abs() < 1e-4 * j[2].abs().max(1.0));
        }
    }

    #[test]
    fn polar_quadratic_weight_report() {
        let (geo, sw) = setup(MetricPreset::Polar, 1.0);
        let rep = check_phi_conditions(&sw, &geo.metric, &geo.grid).unwrap();
        assert!((rep.delta - 0.5).abs() < 1e-14);
        assert!((rep.hessian_margin - 1.0).abs() < 1e-10);
        let (geo2, sw2) = setup(MetricPreset::Polar, 2.0);
        let rep2 = check_phi_conditions(&sw2, &geo2.metric, &geo2.grid).unwrap();
        assert_eq!(rep.delta, rep2.delta);
        for j in 0..geo.grid.na {
            assert_eq!(sw.psi.data[geo.grid.idx(0, j)], 0.0);
        }
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let (geo, sw) = setup(MetricPreset::PerturbedPolar { eps: 0.1 }, 1.0);
        let dr = d1(&sw.psi.data, &geo.grid, Axis::R);
        let da = d1(&sw.psi.data, &geo.grid, Axis::A);
        for n in 0..dr.len() {
            assert!((dr[n] - sw.grad[n][0]).abs() < 1e-10 && (da[n] - sw.grad[n][1]).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_chart_fails_convexity() {
        let grid = ChartGrid::new(9, 8, 0.5, 1.0, 8, 1.0).unwrap();
        let metric = MetricData::from_preset(&grid, MetricPreset::Flat).unwrap();
        let err = make_spatial_weight(0.5, &grid, &metric, MRule::Auto).unwrap_err();
        assert!(matches!(err, Error::WeightInvalid { .. }));
        assert!(make_spatial_weight(0.4, &grid, &metric, MRule::Auto).is_err());
    }

    #[test]
    fn weight_fields_on_gamma_and_signs() {
        let (geo, sw) = setup(MetricPreset::PerturbedPolar { eps: 0.1 }, 1.0);
        let p = CarlemanParams::new(2.0, 16.0, 4.0).unwrap();
        let (phi, xi, sigma) = weight_fields(&sw, p, &geo).unwrap();
        let (g, m) = (2.0, sw.m);
        for k in 0..geo.grid.nt {
            let l = ell(geo.grid.t_mid(k), 4.0).unwrap();
            for j in 0..geo.grid.na {
                let n = geo.grid.idx(0, j);
                let want_phi = ((2.0 * g * m).exp() - (4.0 * g * m).exp()) * l;
                let want_xi = (2.0 * g * m).exp() * l;
                assert!((phi.slices[k].data[n] - want_phi).abs() <= 1e-14 * want_phi.abs());
                assert!((xi.slices[k].data[n] - want_xi).abs() <= 1e-14 * want_xi);
            }
            for n in 0..geo.grid.n_space() {
                let (f, x, s) = (phi.slices[k].data[n], xi.slices[k].data[n], sigma.slices[k].data[n]);
                assert!(f < 0.0 && x > 0.0 && s > 0.0);
                assert!((s / x - 32.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phi_decreases_in_gamma() {
        let (geo, sw) = setup(MetricPreset::Polar, 1.0);
        let a = WeightFields::new(&sw, CarlemanParams::new(2.0, 1.0, 4.0).unwrap(), &geo).unwrap();
        let b = WeightFields::new(&sw, CarlemanParams::new(4.0, 1.0, 4.0).unwrap(), &geo).unwrap();
        for k in 0..geo.grid.nt {
            for n in 0..geo.grid.n_space() {
                assert!(b.phi(k, n) < a.phi(k, n));
            }
        }
    }

    #[test]
    fn overflow_guard() {
        let (geo, sw) = setup(MetricPreset::Polar, 1.0);
        let err = WeightFields::new(&sw, CarlemanParams::new(500.0, 1.0, 4.0).unwrap(), &geo).unwrap_err();
        assert!(matches!(err, Error::ParameterOverflow { .. }));
    }

    #[test]
    fn decay_bounds_hold() {
        let (geo, sw) = setup(MetricPreset::PerturbedPolar { eps: 0.1 }, 1.0);
        for (g, s) in [(1.0, 1.0), (2.0, 8.0), (3.0, 64.0)] {
            let w = WeightFields::new(&sw, CarlemanParams::new(g, s, 4.0).unwrap(), &geo).unwrap();
            assert!(outer_decay_excess(&w, &geo.grid) <= 1e-9);
            for eps in [0.1, 0.5, 1.0] {
                assert!(inner_lower_margin(&w, &geo.grid, eps) >= 0.0);
            }
        }
    }

    #[test]
    fn derivatives_of_phi_match_differences() {
        let (geo, sw) = setup(MetricPreset::PerturbedPolar { eps: 0.1 }, 1.0);
        let w = WeightFields::new(&sw, CarlemanParams::new(2.0, 1.0, 4.0).unwrap(), &geo).unwrap();
        let k = geo.grid.nt / 3;
        let phi: Vec<f64> = (0..geo.grid.n_space()).map(|n| w.phi(k, n)).collect();
        let dr = d1(&phi, &geo.grid, Axis::R);
        let lap = geo.laplace_beltrami_expanded(&phi).unwrap();
        for n in 0..phi.len() {
            let g = w.grad_phi(k, n);
            assert!((dr[n] - g[0]).abs() < 2e-2 * (1.0 + g[0].abs()));
            assert!((lap[n] - w.lap_phi(k, n)).abs() < 5e-2 * (1.0 + w.lap_phi(k, n).abs()));
        }
    }
}
