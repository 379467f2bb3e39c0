//! Both sides of the stability inequalities over families of sources and
//! time insets.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::admissible::{make_admissible_f, AdmissibleSource, SourcePreset};
use crate::diff::dt_rings;
use crate::error::{Error, Result};
use crate::field::C64;
use crate::forward::{CauchyData, ForwardSolver, LiftField, RadialCutoff, SchrodingerSolution};
use crate::grid::Boundary;
use crate::operators::Geometry;
use crate::quadrature::{h1_lateral, l2_boundary, l2_lateral, SurfaceMeasure, TimeWindow};

/// `𝒟 = ‖u‖_{H¹(Σ₀)} + ‖∂_ν u‖_{L²(Σ₀)}` with its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataNorm {
    pub trace_h1: f64,
    pub normal_l2: f64,
}

impl DataNorm {
    pub fn value(&self) -> f64 {
        self.trace_h1 + self.normal_l2
    }
}

pub fn data_functional_of(data: &CauchyData, geo: &Geometry) -> Result<DataNorm> {
    let w = TimeWindow::full(&geo.grid);
    Ok(DataNorm {
        trace_h1: h1_lateral(&data.trace, geo, Boundary::Outer, w, SurfaceMeasure::Literal)?,
        normal_l2: l2_lateral(&data.normal, geo, Boundary::Outer, w, SurfaceMeasure::Literal)?,
    })
}

pub fn data_functional(sol: &SchrodingerSolution, geo: &Geometry) -> Result<DataNorm> {
    data_functional_of(&sol.cauchy, geo)
}

/// Adds independent complex Gaussian noise with standard deviation
/// `level · rms` to every sample, `rms` taken per component.
pub fn perturb_cauchy<R: Rng + ?Sized>(data: &CauchyData, level: f64, rng: &mut R) -> Result<CauchyData> {
    if !(level >= 0.0) {
        return Err(Error::Domain { what: "noise level", value: level });
    }
    let mut noisy = |rows: &Vec<Vec<C64>>| -> Result<Vec<Vec<C64>>> {
        let count = rows.iter().map(|r| r.len()).sum::<usize>().max(1);
        let rms = (rows.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() / count as f64).sqrt();
        let sd = level * rms / core::f64::consts::SQRT_2;
        if sd == 0.0 {
            return Ok(rows.clone());
        }
        let normal = Normal::new(0.0, sd).map_err(|_| Error::Domain { what: "noise level", value: level })?;
        Ok(rows
            .iter()
            .map(|r| r.iter().map(|v| v + C64::new(normal.sample(rng), normal.sample(rng))).collect())
            .collect())
    };
    Ok(CauchyData { trace: noisy(&data.trace)?, normal: noisy(&data.normal)? })
}

/// `‖f‖_{H¹(Γ × (ε, T − ε))}` of a lift's boundary values.
pub fn source_h1_window(lift: &LiftField, geo: &Geometry, eps: f64) -> Result<f64> {
    h1_lateral(&lift.trace_mid(), geo, Boundary::Inner, TimeWindow::inset(&geo.grid, eps), SurfaceMeasure::Literal)
}

/// `ε_k = (T/4) 2^{−k}`, `k = 0..count`.
pub fn default_eps_grid(horizon: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| horizon / 4.0 * 0.5f64.powi(k as i32)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRecord {
    pub f_id: String,
    pub eps: f64,
    pub lhs_h1: f64,
    pub data_norm: f64,
    pub fitted_c_mult: f64,
    pub fitted_c_exp: f64,
}

impl StabilityRecord {
    pub fn ratio(&self) -> f64 {
        self.lhs_h1 / self.data_norm
    }
}

/// Upper envelope `ln(lhs/𝒟) ≤ ln C + c/ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeFit {
    pub c_mult: f64,
    pub c_exp: f64,
    /// `min(ln C + c/ε − ln(lhs/𝒟))` over the fitted records.
    pub worst_margin: f64,
}

impl EnvelopeFit {
    pub fn bound(&self, eps: f64, data: f64) -> f64 {
        self.c_mult * (self.c_exp / eps).exp() * data
    }
}

/// Source that could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub f_id: String,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub records: Vec<StabilityRecord>,
    pub fit: Option<EnvelopeFit>,
    pub skipped: Vec<Skipped>,
}

/// Records of one source over the ε-grid, before fitting.
pub fn stability_records(f_id: &str, lift: &LiftField, sol: &SchrodingerSolution, eps_grid: &[f64], geo: &Geometry) -> Result<Vec<StabilityRecord>> {
    stability_records_of(f_id, lift, &sol.cauchy, eps_grid, geo)
}

/// As [`stability_records`], with `𝒟` taken from the given (possibly
/// perturbed) Cauchy data.
pub fn stability_records_of(f_id: &str, lift: &LiftField, data: &CauchyData, eps_grid: &[f64], geo: &Geometry) -> Result<Vec<StabilityRecord>> {
    let data = data_functional_of(data, geo)?.value();
    eps_grid
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps < geo.grid.horizon / 2.0) {
                return Err(Error::Domain { what: "eps", value: eps });
            }
            Ok(StabilityRecord {
                f_id: String::from(f_id),
                eps,
                lhs_h1: source_h1_window(lift, geo, eps)?,
                data_norm: data,
                fitted_c_mult: f64::NAN,
                fitted_c_exp: f64::NAN,
            })
        })
        .collect()
}

/// Least-squares line through the per-ε maxima of `ln(lhs/𝒟)` against
/// `1/ε`, then lifted so that every record lies under it.
pub fn fit_envelope(records: &[StabilityRecord]) -> Option<EnvelopeFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.data_norm > 0.0 && r.lhs_h1 > 0.0)
        .map(|r| (1.0 / r.eps, r.ratio().ln()))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let env: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| (x, pts.iter().filter(|p| p.0 == x).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    let slope = if env.len() < 2 {
        0.0
    } else {
        let n = env.len() as f64;
        let mx = env.iter().map(|p| p.0).sum::<f64>() / n;
        let my = env.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = env.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = env.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        sxy / sxx
    };
    let intercept = pts.iter().map(|p| p.1 - slope * p.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_margin = pts.iter().map(|p| intercept + slope * p.0 - p.1).fold(f64::INFINITY, f64::min);
    Some(EnvelopeFit { c_mult: intercept.exp(), c_exp: slope, worst_margin })
}

/// Sorts by `(f_id, ε)`, fits, and stamps the fit on every record.
pub fn assemble_report(mut records: Vec<StabilityRecord>, mut skipped: Vec<Skipped>) -> StabilityReport {
    records.sort_by(|a, b| a.f_id.cmp(&b.f_id).then(a.eps.total_cmp(&b.eps)));
    skipped.sort_by(|a, b| a.f_id.cmp(&b.f_id));
    let fit = fit_envelope(&records);
    if let Some(f) = fit {
        for r in &mut records {
            r.fitted_c_mult = f.c_mult;
            r.fitted_c_exp = f.c_exp;
        }
    }
    StabilityReport { records, fit, skipped }
}

/// One member of a source family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub f_id: String,
    pub preset: SourcePreset,
    pub alpha: f64,
    pub beta: f64,
}

/// Builds the admissible source of a member.
pub fn admit(member: &FamilyMember, geo: &Geometry, cutoff: RadialCutoff) -> Result<AdmissibleSource> {
    make_admissible_f(&member.preset, member.alpha, member.beta, geo, cutoff)
}

/// Sequential sweep; members failing admissibility are skipped.
pub fn stability_sweep(family: &[FamilyMember], eps_grid: &[f64], solver: &ForwardSolver, cutoff: RadialCutoff) -> Result<StabilityReport> {
    let geo = &solver.geo;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for m in family {
        let src = match admit(m, geo, cutoff) {
            Ok(s) => s,
            Err(e @ Error::Admissibility { .. }) => {
                skipped.push(Skipped { f_id: m.f_id.clone(), error: e });
                continue;
            }
            Err(e) => return Err(e),
        };
        let sol = solver.solve(&src.lift)?;
        records.extend(stability_records(&m.f_id, &src.lift, &sol, eps_grid, geo)?);
    }
    Ok(assemble_report(records, skipped))
}

/// Quantities of the separable corollary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableRecord {
    pub a_l2: f64,
    pub a_tangential: f64,
    pub a_h1: f64,
    pub eta: f64,
    pub data_norm: f64,
    /// `η √(T/2) (‖𝔞‖ + ‖∇_τ 𝔞‖)`.
    pub intermediate: f64,
    /// `‖f‖_{H¹(Γ × (T/4, 3T/4))}`.
    pub window_h1: f64,
    /// `√2 · window_h1 − intermediate`, nonnegative by the triangle and
    /// window-length bounds.
    pub margin: f64,
    /// Largest relative deviation of the sampled `f` from `𝔟 ⊗ 𝔞`.
    pub separability_defect: f64,
}

const SEPARABLE_TOL: f64 = 1e-10;

/// `f = 𝔞 ⊗ 𝔟` with `𝔞` on Γ and `𝔟` on the full time levels.
pub fn separable_bound(a: &[C64], b: &[C64], lift: &LiftField, sol: &SchrodingerSolution, geo: &Geometry) -> Result<SeparableRecord> {
    let grid = &geo.grid;
    if a.len() != grid.na {
        return Err(Error::ShapeMismatch { expected: grid.na, found: a.len() });
    }
    if b.len() != grid.nt + 1 {
        return Err(Error::ShapeMismatch { expected: grid.nt + 1, found: b.len() });
    }
    let eta = b.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if !(eta > 0.0) {
        return Err(Error::Precondition("time factor vanishes on the grid"));
    }
    let fmax = lift.f.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let defect = lift
        .f
        .iter()
        .zip(b)
        .flat_map(|(row, bn)| row.iter().zip(a).map(move |(f, aj)| (f - aj * bn).norm()))
        .fold(0.0, f64::max)
        / fmax;
    if defect > SEPARABLE_TOL {
        return Err(Error::Precondition("source is not the product of the given factors"));
    }
    let a_l2 = l2_boundary(a, geo, Boundary::Inner, SurfaceMeasure::Literal)?;
    let tn = geo.tangential_norm_sq_ring(a, Boundary::Inner);
    let tc: Vec<C64> = tn.iter().map(|&v| C64::from(v.sqrt())).collect();
    let a_tangential = l2_boundary(&tc, geo, Boundary::Inner, SurfaceMeasure::Literal)?;
    let a_h1 = (a_l2 * a_l2 + a_tangential * a_tangential).sqrt();
    let intermediate = eta * (grid.horizon / 2.0).sqrt() * (a_l2 + a_tangential);
    let window_h1 = source_h1_window(lift, geo, grid.horizon / 4.0)?;
    Ok(SeparableRecord {
        a_l2,
        a_tangential,
        a_h1,
        eta,
        data_norm: data_functional(sol, geo)?.value(),
        intermediate,
        window_h1,
        margin: core::f64::consts::SQRT_2 * window_h1 - intermediate,
        separability_defect: defect,
    })
}

/// Both sides of the interpolation inequality at one ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationRecord {
    pub eps: f64,
    /// `‖f‖_{L²(Γ × (0, ε))} + ‖f‖_{L²(Γ × (T − ε, T))}`.
    pub truncation: f64,
    /// `truncation / (ε^r ‖f‖_{H¹((0,T); L²(Γ))})`.
    pub hardy_ratio: f64,
    /// `C (e^{c/ε} 𝒟 + ε^r ‖f‖_{H¹((0,T); L²(Γ))})` with the fitted constants.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationReport {
    pub l2_full: f64,
    pub h1_time: f64,
    pub data_norm: f64,
    pub records: Vec<InterpolationRecord>,
    /// Smallest right side over the ε-grid and its ε.
    pub best_rhs: f64,
    pub best_eps: f64,
}

/// `‖f‖_{L²((t0, t1); L²(Γ))}` for midpoint ring samples.
pub fn windowed_l2(rings: &[Vec<C64>], geo: &Geometry, t0: f64, t1: f64) -> Result<f64> {
    match l2_lateral(rings, geo, Boundary::Inner, TimeWindow { t0, t1 }, SurfaceMeasure::Literal) {
        Err(Error::EmptyRegion) => Ok(0.0),
        other => other,
    }
}

pub fn interpolation_bound(
    lift: &LiftField,
    sol: &SchrodingerSolution,
    eps_grid: &[f64],
    r: f64,
    fit: EnvelopeFit,
    geo: &Geometry,
) -> Result<InterpolationReport> {
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::OutOfRange { what: "interpolation exponent", value: r });
    }
    let t = geo.grid.horizon;
    let rings = lift.trace_mid();
    let full = TimeWindow::full(&geo.grid);
    let l2_full = l2_lateral(&rings, geo, Boundary::Inner, full, SurfaceMeasure::Literal)?;
    let dl2 = l2_lateral(&dt_rings(&rings, geo.grid.dt()), geo, Boundary::Inner, full, SurfaceMeasure::Literal)?;
    let h1_time = (l2_full * l2_full + dl2 * dl2).sqrt();
    let data_norm = data_functional(sol, geo)?.value();
    let mut records = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        if !(eps > 0.0 && eps < t / 2.0) {
            return Err(Error::Domain { what: "eps", value: eps });
        }
        let truncation = windowed_l2(&rings, geo, 0.0, eps)? + windowed_l2(&rings, geo, t - eps, t)?;
        let scale = eps.powf(r) * h1_time;
        let hardy_ratio = if scale > 0.0 { truncation / scale } else { 0.0 };
        let rhs = fit.c_mult * ((fit.c_exp / eps).exp() * data_norm + scale);
        records.push(InterpolationRecord { eps, truncation, hardy_ratio, rhs });
    }
    let (best_eps, best_rhs) = records
        .iter()
        .map(|r| (r.eps, r.rhs))
        .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    Ok(InterpolationReport { l2_full, h1_time, data_norm, records, best_rhs, best_eps })
}
