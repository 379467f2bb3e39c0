//! Boundary sources in the admissible class: `‖f(t)‖_{L²(Γ)} ≥ α` and
//! `‖∂_t f(t)‖ + ‖∇_τ f(t)‖ ≤ β` at every time level.

use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use crate::diff::dt_rings;
use crate::error::{Error, Result};
use crate::field::C64;
use crate::forward::{LiftField, RadialCutoff};
use crate::grid::Boundary;
use crate::operators::Geometry;
use crate::quadrature::{quad_surface, SurfaceMeasure};

#[derive(Debug, Clone, PartialEq)]
pub enum SourcePreset {
    Constant,
    /// `(1 + p cos θ)(1 + q sin(π t / T))`.
    Separable { p: f64, q: f64 },
    /// `1 + amp e^{i(θ − c t)}`.
    Traveling { amp: f64, speed: f64 },
    /// `1 + Σ c_{kl} e^{ikθ} cos(l π t / T)` with small random `c`.
    Trig { terms: Vec<(i32, u32, C64)> },
}

impl SourcePreset {
    /// Low-frequency random trigonometric sum, total amplitude below `amp`.
    pub fn random_trig<R: Rng + ?Sized>(rng: &mut R, modes: usize, amp: f64) -> Self {
        let mut terms = Vec::with_capacity(modes);
        for _ in 0..modes {
            let k = rng.random_range(-3..=3);
            let l = rng.random_range(0..=2);
            let c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            terms.push((k, l, c));
        }
        let total: f64 = terms.iter().map(|t| t.2.norm()).sum::<f64>().max(1e-300);
        for t in &mut terms {
            t.2 *= amp / total;
        }
        SourcePreset::Trig { terms }
    }

    pub fn eval(&self, theta: f64, t: f64, horizon: f64) -> C64 {
        match self {
            SourcePreset::Constant => C64::from(1.0),
            SourcePreset::Separable { p, q } => {
                C64::from((1.0 + p * theta.cos()) * (1.0 + q * (core::f64::consts::PI * t / horizon).sin()))
            }
            SourcePreset::Traveling { amp, speed } => C64::from(1.0) + C64::from_polar(*amp, theta - speed * t),
            SourcePreset::Trig { terms } => {
                let w = core::f64::consts::PI / horizon;
                terms.iter().fold(C64::from(1.0), |acc, &(k, l, c)| {
                    acc + c * C64::from_polar(1.0, k as f64 * theta) * (l as f64 * w * t).cos()
                })
            }
        }
    }
}

/// Achieved `(α, β)` of boundary samples on the full levels, `[n][j]`.
pub fn admissibility_values(f: &[Vec<C64>], geo: &Geometry) -> Result<(f64, f64)> {
    let grid = &geo.grid;
    let dt = dt_rings(f, grid.dt());
    let (mut alpha, mut beta) = (f64::INFINITY, 0.0f64);
    for (row, drow) in f.iter().zip(&dt) {
        let sq: Vec<f64> = row.iter().map(|v| v.norm_sqr()).collect();
        let dsq: Vec<f64> = drow.iter().map(|v| v.norm_sqr()).collect();
        let tsq = geo.tangential_norm_sq_ring(row, Boundary::Inner);
        let q = |x: &[f64]| quad_surface(x, &geo.metric, grid, Boundary::Inner, SurfaceMeasure::Literal).map(|v| v.sqrt());
        alpha = alpha.min(q(&sq)?);
        beta = beta.max(q(&dsq)? + q(&tsq)?);
    }
    Ok((alpha, beta))
}

#[derive(Debug, Clone)]
pub struct AdmissibleSource {
    pub lift: LiftField,
    pub alpha: f64,
    pub beta: f64,
    /// Factor applied to the raw preset.
    pub scale: f64,
}

/// Samples the preset, rescales it so that `min_t ‖f(t)‖ = α`, and checks
/// the derivative bound.
pub fn make_admissible_f(
    preset: &SourcePreset,
    alpha: f64,
    beta: f64,
    geo: &Geometry,
    cutoff: RadialCutoff,
) -> Result<AdmissibleSource> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Admissibility { alpha, beta });
    }
    let grid = &geo.grid;
    let raw: Vec<Vec<C64>> = (0..=grid.nt)
        .map(|n| (0..grid.na).map(|j| preset.eval(grid.theta(j), grid.t_step(n), grid.horizon)).collect())
        .collect();
    let (a0, b0) = admissibility_values(&raw, geo)?;
    if !(a0 > 0.0) {
        return Err(Error::Admissibility { alpha: a0, beta: b0 });
    }
    let scale = alpha / a0;
    let achieved_beta = scale * b0;
    if achieved_beta > beta {
        return Err(Error::Admissibility { alpha, beta: achieved_beta });
    }
    let f: Vec<Vec<C64>> = raw.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
    let lift = LiftField::from_trace(grid, f, cutoff)?;
    Ok(AdmissibleSource { lift, alpha, beta: achieved_beta, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ChartGrid;
    use crate::metric::{MetricData, MetricPreset};
    use rand::SeedableRng;

    fn geo() -> Geometry {
        let grid = ChartGrid::new(17, 32, 0.5, 1.0, 40, 2.0).unwrap();
        Geometry::without_potential(grid, MetricData::from_preset(&grid, MetricPreset::Polar).unwrap()).unwrap()
    }

    #[test]
    fn constant_source_meets_both_bounds() {
        let g = geo();
        let src = make_admissible_f(&SourcePreset::Constant, 0.7, 1e-3, &g, RadialCutoff::default()).unwrap();
        assert!((src.alpha - 0.7).abs() < 1e-14);
        assert!(src.beta < 1e-12);
        // Value equals α / √area(Γ).
        let area = 2.0 * core::f64::consts::PI * 0.25;
        assert!((src.lift.f[3][5].re - 0.7 / area.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn separable_constraints_from_quadrature() {
        let g = geo();
        let p = SourcePreset::Separable { p: 0.3, q: 0.5 };
        let src = make_admissible_f(&p, 1.0, 10.0, &g, RadialCutoff::default()).unwrap();
        let (a, b) = admissibility_values(&src.lift.f, &g).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - src.beta).abs() < 1e-12);
        // min over t of 1 + 0.5 sin(πt/T) is 1 at the end points.
        let tn = |th: f64| (1.0 + 0.3 * th.cos()) * (1.0 + 0.3 * th.cos());
        let mut norm_a = 0.0;
        for j in 0..g.grid.na {
            norm_a += tn(g.grid.theta(j)) * 0.25 * g.grid.ha();
        }
        assert!((src.scale - 1.0 / norm_a.sqrt()).abs() < 1e-12);
        assert!(make_admissible_f(&p, 1.0, 0.1, &g, RadialCutoff::default()).is_err());
    }

    #[test]
    fn doubling_doubles_alpha_and_beta() {
        let g = geo();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = SourcePreset::random_trig(&mut rng, 4, 0.4);
        let src = make_admissible_f(&p, 1.0, 100.0, &g, RadialCutoff::default()).unwrap();
        let doubled: Vec<Vec<C64>> = src.lift.f.iter().map(|r| r.iter().map(|v| v * 2.0).collect()).collect();
        let (a2, b2) = admissibility_values(&doubled, &g).unwrap();
        assert!((a2 - 2.0 * src.alpha).abs() < 1e-12);
        assert!((b2 - 2.0 * src.beta).abs() < 1e-12 * b2);
    }
}
