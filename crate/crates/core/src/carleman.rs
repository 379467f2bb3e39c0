//! Conjugated operator, the integration-by-parts identities, and both sides
//! of the weighted estimate.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::diff::{dt_field, dt_field_conj, dt_rings, Jet};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SpaceTimeField, C64};
use crate::grid::Boundary;
use crate::logsum::LogSum;
use crate::metric::sym_quad;
use crate::operators::{cov_norm_sq, raise, Geometry};
use crate::quadrature::{surface_weights, volume_weights, SurfaceMeasure};
use crate::weights::WeightFields;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `z = e^{sφ} u` with both halves of the conjugated operator and the
/// directly conjugated `P_s z`.
#[derive(Debug, Clone)]
pub struct ConjugateSplit {
    pub z: SpaceTimeField<C64>,
    pub p_plus: SpaceTimeField<C64>,
    pub p_minus: SpaceTimeField<C64>,
    pub p_direct: SpaceTimeField<C64>,
}

impl ConjugateSplit {
    /// `‖P_s z − P⁺z − P⁻z‖ / ‖z‖` in `L²(Q)`.
    pub fn consistency_residual(&self, geo: &Geometry) -> f64 {
        let wv = volume_weights(&geo.metric, &geo.grid);
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.z.nt() {
            for (n, w) in wv.iter().enumerate() {
                let d = self.p_direct.slices[k].data[n] - self.p_plus.slices[k].data[n] - self.p_minus.slices[k].data[n];
                num += w * d.norm_sqr();
                den += w * self.z.slices[k].data[n].norm_sqr();
            }
        }
        if den == 0.0 {
            return if num == 0.0 { 0.0 } else { f64::INFINITY };
        }
        (num / den).sqrt()
    }
}

fn check_field(u: &SpaceTimeField<C64>, geo: &Geometry) -> Result<()> {
    u.check_grid(&geo.grid)
}

/// Forms `z = e^{sφ} u` and splits the conjugated operator.
pub fn conjugate_split(u: &SpaceTimeField<C64>, w: &WeightFields, geo: &Geometry) -> Result<ConjugateSplit> {
    check_field(u, geo)?;
    let s = w.s();
    let slices = u
        .slices
        .iter()
        .enumerate()
        .map(|(k, sl)| {
            let data = sl.data.iter().enumerate().map(|(n, v)| v * (s * w.phi(k, n)).exp()).collect();
            ScalarField { nr: sl.nr, na: sl.na, data }
        })
        .collect();
    split_conjugated(&SpaceTimeField { slices }, w, geo)
}

/// Splits the conjugated operator applied to a given `z`.
pub fn split_conjugated(z: &SpaceTimeField<C64>, w: &WeightFields, geo: &Geometry) -> Result<ConjugateSplit> {
    check_field(z, geo)?;
    let grid = &geo.grid;
    let s = w.s();
    let zt = dt_field(z, grid);
    let shifts = SpaceTimeField {
        slices: (0..grid.nt).map(|k| ScalarField { nr: grid.nr, na: grid.na, data: w.neg_s_phi(k) }).collect(),
    };
    let zt_conj = dt_field_conj(z, grid, Some(&shifts));
    let mut p_plus = Vec::with_capacity(grid.nt);
    let mut p_minus = Vec::with_capacity(grid.nt);
    let mut p_direct = Vec::with_capacity(grid.nt);
    for k in 0..grid.nt {
        let zk = &z.slices[k].data;
        let lap = geo.laplace_beltrami(zk)?;
        let lap_conj = geo.laplace_beltrami_conj(zk, Some(&shifts.slices[k].data))?;
        let jet = Jet::of_conj(zk, grid, None);
        let mut pp = Vec::with_capacity(zk.len());
        let mut pm = Vec::with_capacity(zk.len());
        let mut pd = Vec::with_capacity(zk.len());
        for n in 0..zk.len() {
            let gp = w.grad_phi_vec(&geo.metric, k, n);
            let dz = jet.grad(n);
            let gdot = dz[0] * gp[0] + dz[1] * gp[1];
            pp.push(I * zt.slices[k].data[n] + lap[n] + zk[n] * (s * s * w.grad_phi_sq(&geo.metric, k, n)));
            pm.push(-gdot * (2.0 * s) - zk[n] * (s * w.lap_phi(k, n)) - I * zk[n] * (s * w.phi_t(k, n)));
            pd.push(I * zt_conj.slices[k].data[n] + lap_conj[n]);
        }
        let wrap = |data| ScalarField { nr: grid.nr, na: grid.na, data };
        p_plus.push(wrap(pp));
        p_minus.push(wrap(pm));
        p_direct.push(wrap(pd));
    }
    Ok(ConjugateSplit {
        z: z.clone(),
        p_plus: SpaceTimeField { slices: p_plus },
        p_minus: SpaceTimeField { slices: p_minus },
        p_direct: SpaceTimeField { slices: p_direct },
    })
}

/// The identities, grouped the way they are integrated by parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum IdentityGroup {
    I12,
    I3,
    I4,
    I5,
    I6,
    I78,
    I9,
    /// The summed identity `Re(P⁺, P⁻) + 𝓑 + corrections = volume terms`.
    Total,
}

impl IdentityGroup {
    pub const ALL: [IdentityGroup; 8] = [
        IdentityGroup::I12,
        IdentityGroup::I3,
        IdentityGroup::I4,
        IdentityGroup::I5,
        IdentityGroup::I6,
        IdentityGroup::I78,
        IdentityGroup::I9,
        IdentityGroup::Total,
    ];

    /// Group containing `I_k`.
    pub fn of_index(k: usize) -> Result<Self> {
        Ok(match k {
            1 | 2 => IdentityGroup::I12,
            3 => IdentityGroup::I3,
            4 => IdentityGroup::I4,
            5 => IdentityGroup::I5,
            6 => IdentityGroup::I6,
            7 | 8 => IdentityGroup::I78,
            9 => IdentityGroup::I9,
            _ => return Err(Error::OutOfRange { what: "identity index", value: k as f64 }),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            IdentityGroup::I12 => "I1+I2",
            IdentityGroup::I3 => "I3",
            IdentityGroup::I4 => "I4",
            IdentityGroup::I5 => "I5",
            IdentityGroup::I6 => "I6",
            IdentityGroup::I78 => "I7+I8",
            IdentityGroup::I9 => "I9",
            IdentityGroup::Total => "total",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Both evaluation routes of one identity group.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub group: IdentityGroup,
    /// Integrand as defined, before integrating by parts.
    pub value_lhs: f64,
    /// Volume plus boundary terms after integrating by parts.
    pub value_rhs: f64,
    /// Boundary part of `value_rhs` on `Γ` and `∂Ω`.
    pub boundary: [f64; 2],
    /// Sum of the absolute values of every accumulated term.
    pub magnitude: f64,
    pub rel_error: f64,
    pub mesh_level: usize,
}

/// `𝓑 = 𝓑_Σ + 𝓑_Σ₀` evaluated ring by ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySplit {
    pub sigma: f64,
    pub sigma0: f64,
}

impl BoundarySplit {
    pub fn total(&self) -> f64 {
        self.sigma + self.sigma0
    }
}

#[derive(Debug, Clone, Default)]
struct Acc {
    lhs: f64,
    rhs_vol: f64,
    bnd: [f64; 2],
    mag: f64,
}

impl Acc {
    fn lhs(&mut self, v: f64) {
        self.lhs += v;
        self.mag += v.abs();
    }
    fn vol(&mut self, v: f64) {
        self.rhs_vol += v;
        self.mag += v.abs();
    }
    fn bnd(&mut self, b: usize, v: f64) {
        self.bnd[b] += v;
        self.mag += v.abs();
    }
}

fn ring_index(b: Boundary) -> usize {
    match b {
        Boundary::Inner => 0,
        Boundary::Outer => 1,
    }
}

/// Evaluates every identity group on `z`, with boundary terms in the
/// induced surface measure.
pub fn identity_suite(
    z: &SpaceTimeField<C64>,
    w: &WeightFields,
    geo: &Geometry,
    mesh_level: usize,
) -> Result<(Vec<IdentityReport>, BoundarySplit)> {
    check_field(z, geo)?;
    let grid = &geo.grid;
    let metric = &geo.metric;
    let s = w.s();
    let s3 = s * s * s;
    let dt = grid.dt();
    let zt = dt_field(z, grid);
    let wv = volume_weights(metric, grid);
    let ws = [
        surface_weights(metric, grid, Boundary::Inner, SurfaceMeasure::Induced),
        surface_weights(metric, grid, Boundary::Outer, SurfaceMeasure::Induced),
    ];
    let normals = [geo.boundary_normal(Boundary::Inner), geo.boundary_normal(Boundary::Outer)];
    let mut acc: Vec<Acc> = (0..IdentityGroup::ALL.len()).map(|_| Acc::default()).collect();
    let mut b_split = [0.0f64; 2];
    let (g12, g3, g4, g5, g6, g78, g9, gt) = (
        IdentityGroup::I12.slot(),
        IdentityGroup::I3.slot(),
        IdentityGroup::I4.slot(),
        IdentityGroup::I5.slot(),
        IdentityGroup::I6.slot(),
        IdentityGroup::I78.slot(),
        IdentityGroup::I9.slot(),
        IdentityGroup::Total.slot(),
    );

    for k in 0..grid.nt {
        let zk = &z.slices[k].data;
        let ztk = &zt.slices[k].data;
        let lap = geo.laplace_beltrami(zk)?;
        let jet = Jet::of_conj(zk, grid, None);
        for n in 0..zk.len() {
            let q = wv[n] * dt;
            let gi = metric.g_inv[n];
            let (zv, ztv, lz) = (zk[n], ztk[n], lap[n]);
            let dz = jet.grad(n);
            let gz = raise(gi, dz);
            let gp = w.grad_phi_vec(metric, k, n);
            let gpt = raise(gi, w.grad_phi_t(k, n));
            let hess = w.hess_phi(k, n);
            let (pt, ptt, lp, blp) = (w.phi_t(k, n), w.phi_tt(k, n), w.lap_phi(k, n), w.bilap_phi(k, n));
            let gp2 = cov_norm_sq(gi, w.grad_phi(k, n));
            let gz2 = cov_norm_sq(gi, dz);
            let z2 = zv.norm_sqr();
            // ⟨∇φ, ∇z̄⟩, ⟨∇φ', ∇z̄⟩, ⟨∇φ', ∇z⟩
            let phi_zb = dz[0].conj() * gp[0] + dz[1].conj() * gp[1];
            let phit_zb = dz[0].conj() * gpt[0] + dz[1].conj() * gpt[1];
            let phit_z = dz[0] * gpt[0] + dz[1] * gpt[1];
            let hzz = sym_quad(hess, [gz[0].re, gz[1].re], [gz[0].re, gz[1].re])
                + sym_quad(hess, [gz[0].im, gz[1].im], [gz[0].im, gz[1].im]);
            let hpp = sym_quad(hess, gp, gp);

            acc[g12].lhs(q * (-2.0 * s * I * ztv * phi_zb - s * I * ztv * lp * zv.conj()).re);
            acc[g12].vol(q * (s * I * zv * phit_zb).re);
            acc[g3].lhs(q * (-s * pt * (ztv * zv.conj()).re));
            acc[g3].vol(q * 0.5 * s * ptt * z2);
            acc[g4].lhs(q * (-2.0 * s * lz * phi_zb).re);
            acc[g4].vol(q * (2.0 * s * hzz - s * lp * gz2));
            acc[g5].lhs(q * (-s * (lz * lp * zv.conj()).re));
            acc[g5].vol(q * (s * lp * gz2 - 0.5 * s * blp * z2));
            acc[g6].lhs(q * (s * I * lz * pt * zv.conj()).re);
            acc[g6].vol(q * (-s * I * phit_z * zv.conj()).re);
            acc[g78].lhs(q * ((-2.0 * s3 * gp2 * zv * phi_zb).re - s3 * gp2 * lp * z2));
            acc[g78].vol(q * 2.0 * s3 * hpp * z2);
            let i9 = I * C64::from(s3 * gp2 * pt * z2);
            acc[g9].lhs(q * i9.re);
            acc[g9].mag += (q * s3 * gp2 * pt * z2).abs();

            let p_plus = I * ztv + lz + zv * (s * s * gp2);
            let p_minus = -(dz[0] * gp[0] + dz[1] * gp[1]) * (2.0 * s) - zv * (s * lp) - I * zv * (s * pt);
            acc[gt].lhs(q * (p_plus * p_minus.conj()).re);
            acc[gt].lhs(q * (-s * (I * zv * phit_zb).re + s * (I * phit_z * zv.conj()).re));
            acc[gt].vol(q * (2.0 * s * hzz + (2.0 * s3 * hpp + 0.5 * s * ptt - 0.5 * s * blp) * z2));
        }

        for b in Boundary::BOTH {
            let bi = ring_index(b);
            let i = grid.ring(b);
            let dnz = geo.normal_derivative(zk, b);
            for j in 0..grid.na {
                let n = grid.idx(i, j);
                let q = ws[bi][j] * dt;
                let gi = metric.g_inv[n];
                let nu = normals[bi][j];
                let (zv, ztv) = (zk[n], ztk[n]);
                let dz = jet.grad(n);
                let gp = w.grad_phi_vec(metric, k, n);
                let gpc = w.grad_phi(k, n);
                let dnphi = gpc[0] * nu[0] + gpc[1] * nu[1];
                let dnlap = w.dnu_lap_phi(k, b, j);
                let (pt, lp) = (w.phi_t(k, n), w.lap_phi(k, n));
                let gp2 = cov_norm_sq(gi, gpc);
                let gz2 = cov_norm_sq(gi, dz);
                let z2 = zv.norm_sqr();
                let phi_zb = dz[0].conj() * gp[0] + dz[1].conj() * gp[1];

                let t12 = (s * I * zv * dnphi * ztv.conj()).re;
                let t4 = -2.0 * s * (dnz[j] * phi_zb).re + s * dnphi * gz2;
                let t5 = -s * (dnz[j] * lp * zv.conj()).re + 0.5 * s * dnlap * z2;
                let t6 = (s * I * dnz[j] * pt * zv.conj()).re;
                let t78 = -s3 * gp2 * dnphi * z2;
                acc[g12].bnd(bi, q * t12);
                acc[g4].bnd(bi, q * t4);
                acc[g5].bnd(bi, q * t5);
                acc[g6].bnd(bi, q * t6);
                acc[g78].bnd(bi, q * t78);
                // 𝓑 integrand, written out independently of the grouped terms
                let bterm = -s * (I * zv * dnphi * ztv.conj()).re + 2.0 * s * (dnz[j] * phi_zb).re - s * dnphi * gz2
                    + s * (dnz[j] * lp * zv.conj()).re
                    - s * (I * dnz[j] * pt * zv.conj()).re
                    - 0.5 * s * dnlap * z2
                    + s3 * gp2 * dnphi * z2;
                b_split[bi] += q * bterm;
                acc[gt].lhs(q * bterm);
            }
        }
    }

    let reports = IdentityGroup::ALL
        .iter()
        .map(|&group| {
            let a = &acc[group.slot()];
            let value_rhs = a.rhs_vol + a.bnd[0] + a.bnd[1];
            let diff = (a.lhs - value_rhs).abs();
            let rel_error = if a.mag > 0.0 { diff / a.mag } else { diff };
            IdentityReport {
                group,
                value_lhs: a.lhs,
                value_rhs,
                boundary: a.bnd,
                magnitude: a.mag,
                rel_error,
                mesh_level,
            }
        })
        .collect();
    Ok((reports, BoundarySplit { sigma: b_split[0], sigma0: b_split[1] }))
}

/// The report of the group containing `I_k`, `k ∈ 1..=9`.
pub fn evaluate_identity(k: usize, z: &SpaceTimeField<C64>, w: &WeightFields, geo: &Geometry, mesh_level: usize) -> Result<IdentityReport> {
    let group = IdentityGroup::of_index(k)?;
    let (reports, _) = identity_suite(z, w, geo, mesh_level)?;
    Ok(reports.into_iter().find(|r| r.group == group).expect("every group is reported"))
}

/// Which spatial operator `P = i∂_t + L` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CarlemanOperator {
    /// Full magnetic operator.
    #[default]
    Magnetic,
    /// `a = 0` reduction, `L = Δ_g`.
    Laplacian,
}

/// Labels of the accumulated integrals, left side first.
pub const TERM_LABELS: [&str; 10] = [
    "lhs_q_grad",
    "lhs_q_zero",
    "lhs_sigma_normal",
    "lhs_sigma_zero",
    "rhs_q_pu",
    "rhs_sigma_dt",
    "rhs_sigma_tangential",
    "rhs_sigma0_dt",
    "rhs_sigma0_grad",
    "rhs_sigma0_zero",
];
const N_LHS: usize = 4;

/// Both sides of the weighted estimate for one sample and one `(s, γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanReport {
    pub sample_id: String,
    pub s: f64,
    pub gamma: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub log_lhs: f64,
    pub log_rhs: f64,
    /// `lhs / rhs`, `NaN` when both vanish.
    pub ratio: f64,
    /// `ln` of each integral, in the order of [`TERM_LABELS`].
    pub log_terms: [f64; 10],
    /// Right side vanishes while the left does not.
    pub anomalous: bool,
}

impl CarlemanReport {
    pub fn term(&self, label: &str) -> Option<f64> {
        TERM_LABELS.iter().position(|&l| l == label).map(|i| self.log_terms[i].exp())
    }
}

/// Evaluates every integral of the estimate in log space.
pub fn carleman_sides(
    u: &SpaceTimeField<C64>,
    w: &WeightFields,
    geo: &Geometry,
    op: CarlemanOperator,
    sample_id: &str,
) -> Result<CarlemanReport> {
    check_field(u, geo)?;
    let grid = &geo.grid;
    let metric = &geo.metric;
    let (s, gamma) = (w.params.s, w.params.gamma);
    let dt = grid.dt();
    let ut = dt_field(u, grid);
    let wv = volume_weights(metric, grid);
    let mut t: [LogSum; 10] = [LogSum::new(); 10];
    for k in 0..grid.nt {
        let uk = &u.slices[k].data;
        let lu = match op {
            CarlemanOperator::Magnetic => geo.magnetic(uk)?,
            CarlemanOperator::Laplacian => geo.laplace_beltrami(uk)?,
        };
        let jet = Jet::of_conj(uk, grid, None);
        for n in 0..uk.len() {
            let q = wv[n] * dt;
            let e = 2.0 * s * w.phi(k, n);
            let ls = w.log_sigma(k, n);
            t[0].add_scaled(q * cov_norm_sq(metric.g_inv[n], jet.grad(n)), e + ls);
            t[1].add_scaled(q * gamma * uk[n].norm_sqr(), e + 3.0 * ls);
            let pu = I * ut.slices[k].data[n] + lu[n];
            t[4].add_scaled(q * pu.norm_sqr(), e);
        }
    }
    for b in Boundary::BOTH {
        let i = grid.ring(b);
        let ws = surface_weights(metric, grid, b, SurfaceMeasure::Literal);
        let rings = u.ring(grid, b);
        let rings_t = dt_rings(&rings, dt);
        for k in 0..grid.nt {
            let uk = &u.slices[k].data;
            let tan = geo.tangential_norm_sq_ring(&rings[k], b);
            let (dn, jet) = match b {
                Boundary::Inner => (geo.normal_derivative(uk, b), None),
                Boundary::Outer => (Vec::new(), Some(Jet::of_conj(uk, grid, None))),
            };
            for j in 0..grid.na {
                let n = grid.idx(i, j);
                let q = ws[j] * dt;
                let e = 2.0 * s * w.phi(k, n);
                let ls = w.log_sigma(k, n);
                let u2 = rings[k][j].norm_sqr();
                let ut2 = rings_t[k][j].norm_sqr();
                match b {
                    Boundary::Inner => {
                        t[2].add_scaled(q * dn[j].norm_sqr(), e + ls);
                        t[3].add_scaled(q * u2, e + 3.0 * ls);
                        t[5].add_scaled(q * ut2, e + s.ln() - gamma.ln() - w.log_xi(k, n));
                        t[6].add_scaled(q * tan[j], e + ls);
                    }
                    Boundary::Outer => {
                        let g = jet.as_ref().map(|jt| jt.grad(n)).unwrap_or_default();
                        t[7].add_scaled(q * ut2, e - ls);
                        t[8].add_scaled(q * cov_norm_sq(metric.g_inv[n], g), e + ls);
                        t[9].add_scaled(q * u2, e + 3.0 * ls);
                    }
                }
            }
        }
    }
    let mut lhs_sum = LogSum::new();
    let mut rhs_sum = LogSum::new();
    for (idx, term) in t.iter().enumerate() {
        if idx < N_LHS {
            lhs_sum.merge(term);
        } else {
            rhs_sum.merge(term);
        }
    }
    let (log_lhs, log_rhs) = (lhs_sum.ln(), rhs_sum.ln());
    let ratio = if rhs_sum.is_zero() {
        if lhs_sum.is_zero() { f64::NAN } else { f64::INFINITY }
    } else {
        (log_lhs - log_rhs).exp()
    };
    let mut log_terms = [f64::NEG_INFINITY; 10];
    for (o, term) in log_terms.iter_mut().zip(&t) {
        *o = term.ln();
    }
    Ok(CarlemanReport {
        sample_id: String::from(sample_id),
        s,
        gamma,
        lhs: log_lhs.exp(),
        rhs: log_rhs.exp(),
        log_lhs,
        log_rhs,
        ratio,
        log_terms,
        anomalous: rhs_sum.is_zero() && !lhs_sum.is_zero(),
    })
}

/// Empirical constant for one `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEstimate {
    pub gamma: f64,
    /// `s` values of the sweep, ascending.
    pub s_grid: Vec<f64>,
    /// Largest ratio over the samples at each `s`.
    pub sup_ratio: Vec<f64>,
    /// Smallest `s` from which consecutive sup ratios change by less than
    /// the plateau tolerance.
    pub s_plateau: Option<f64>,
    /// Sup of the ratio over samples and `s ≥ s_plateau` (all `s` when no
    /// plateau is found).
    pub constant: f64,
}

pub const PLATEAU_TOL: f64 = 0.05;

/// Relative change between consecutive values.
pub fn relative_change(a: f64, b: f64) -> f64 {
    (b - a).abs() / a.abs().max(f64::MIN_POSITIVE)
}

/// Groups reports by `γ` and extracts the plateau and constant.
pub fn summarize_sweep(rows: &[CarlemanReport]) -> Vec<ConstantEstimate> {
    let mut gammas: Vec<f64> = rows.iter().map(|r| r.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    gammas
        .into_iter()
        .map(|gamma| {
            let mut s_grid: Vec<f64> = rows.iter().filter(|r| r.gamma == gamma).map(|r| r.s).collect();
            s_grid.sort_by(f64::total_cmp);
            s_grid.dedup();
            let sup_ratio: Vec<f64> = s_grid
                .iter()
                .map(|&s| {
                    rows.iter()
                        .filter(|r| r.gamma == gamma && r.s == s && r.ratio.is_finite())
                        .map(|r| r.ratio)
                        .fold(0.0, f64::max)
                })
                .collect();
            let mut start = None;
            for i in (0..s_grid.len().saturating_sub(1)).rev() {
                if relative_change(sup_ratio[i], sup_ratio[i + 1]) < PLATEAU_TOL {
                    start = Some(i);
                } else {
                    break;
                }
            }
            let from = start.unwrap_or(0);
            let constant = sup_ratio[from..].iter().cloned().fold(0.0, f64::max);
            ConstantEstimate { gamma, s_plateau: start.map(|i| s_grid[i]), s_grid, sup_ratio, constant }
        })
        .collect()
}

/// Runs `carleman_sides` over every sample and `(s, γ)` in a fixed order.
pub fn sweep(
    samples: &[(String, SpaceTimeField<C64>)],
    s_grid: &[f64],
    gamma_grid: &[f64],
    sw: &crate::weights::SpatialWeight,
    geo: &Geometry,
    op: CarlemanOperator,
) -> Result<(Vec<CarlemanReport>, Vec<ConstantEstimate>)> {
    if samples.is_empty() || s_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::Precondition("sweep grids must be nonempty"));
    }
    let mut rows = Vec::with_capacity(samples.len() * s_grid.len() * gamma_grid.len());
    for &gamma in gamma_grid {
        for &s in s_grid {
            let params = crate::weights::CarlemanParams::new(gamma, s, geo.grid.horizon)?;
            let w = WeightFields::new(sw, params, geo)?;
            for (id, u) in samples {
                rows.push(carleman_sides(u, &w, geo, op, id)?);
            }
        }
    }
    let est = summarize_sweep(&rows);
    Ok((rows, est))
}
