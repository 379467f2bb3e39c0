//! Discrete generator `A = i L` on interior nodes (homogeneous Dirichlet).

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::Result;
use crate::field::C64;
use crate::operators::Geometry;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct Generator {
    /// `A = i W⁻¹ S` on interior unknowns, `W = √|g|`.
    pub a: CsrMatrix,
    /// Interior part of `i W⁻¹ S` coupling to boundary unknowns, `[interior][full]`.
    pub to_boundary: CsrMatrix,
    /// `√|g|` per interior unknown.
    pub w: Vec<f64>,
    /// Full node of each interior unknown.
    pub nodes: Vec<usize>,
    /// Interior unknown of each full node.
    pub map: Vec<Option<usize>>,
    /// `h_r h_θ`.
    pub cell: f64,
}

/// Interior unknowns are ordered `(i − 1) na + j` for `i = 1..nr − 1`.
pub fn interior_map(nr: usize, na: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut nodes = Vec::with_capacity((nr - 2) * na);
    let mut map = alloc::vec![None; nr * na];
    for i in 1..nr - 1 {
        for j in 0..na {
            map[i * na + j] = Some(nodes.len());
            nodes.push(i * na + j);
        }
    }
    (nodes, map)
}

pub fn assemble_generator(geo: &Geometry) -> Result<Generator> {
    let grid = &geo.grid;
    let (nodes, map) = interior_map(grid.nr, grid.na);
    let inv_w: Vec<f64> = geo.metric.sqrt_det.iter().map(|w| 1.0 / w).collect();
    let l_full = geo.flux_a.scale_rows(&inv_w);
    let a = l_full.restrict(&map, nodes.len());
    let a = a.shifted(C64::default(), C64::i());
    let mut trip = Vec::new();
    for (row, &p) in nodes.iter().enumerate() {
        for (c, v) in l_full.row(p) {
            if map[c].is_none() {
                trip.push((row, c, C64::i() * v));
            }
        }
    }
    let to_boundary = CsrMatrix::from_triplets(nodes.len(), grid.n_space(), trip);
    let w = nodes.iter().map(|&n| geo.metric.sqrt_det[n]).collect();
    Ok(Generator { a, to_boundary, w, nodes, map, cell: grid.hr() * grid.ha() })
}

impl Generator {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// `W^{1/2} A W^{-1/2}`, skew-Hermitian in the Euclidean sense.
    pub fn symmetrized(&self) -> CsrMatrix {
        let s: Vec<f64> = self.w.iter().map(|w| w.sqrt()).collect();
        let inv: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
        self.a.scale_rows(&s).scale_cols(&inv)
    }

    /// `max |(Ã + Ã*)_{jk}|` of the symmetrized generator.
    pub fn skew_defect(&self) -> f64 {
        let s = self.symmetrized();
        let adj = s.adjoint();
        let mut worst: f64 = 0.0;
        for r in 0..s.n_rows {
            for (c, v) in s.row(r) {
                worst = worst.max((v + adj.get(r, c)).norm());
            }
            for (c, v) in adj.row(r) {
                worst = worst.max((v + s.get(r, c)).norm());
            }
        }
        worst
    }

    /// Discrete `‖v‖²_{L²(D)}` of an interior vector.
    pub fn norm_sq(&self, v: &[C64]) -> f64 {
        v.iter().zip(&self.w).map(|(x, w)| x.norm_sqr() * w).sum::<f64>() * self.cell
    }

    /// `⟨u, v⟩ = Σ u conj(v) W h_r h_θ`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        u.iter().zip(v).zip(&self.w).map(|((x, y), w)| x * y.conj() * *w).sum::<C64>() * self.cell
    }

    pub fn gather(&self, full: &[C64]) -> Vec<C64> {
        self.nodes.iter().map(|&n| full[n]).collect()
    }

    pub fn scatter(&self, interior: &[C64], full: &mut [C64]) {
        for (&n, &v) in self.nodes.iter().zip(interior) {
            full[n] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::PotentialPreset;
    use crate::grid::ChartGrid;
    use crate::metric::{MetricData, MetricPreset};

    fn build(preset: MetricPreset, pot: PotentialPreset, n: usize) -> (Geometry, Generator) {
        let grid = ChartGrid::new(n, n, 0.5, 1.0, 4, 1.0).unwrap();
        let metric = MetricData::from_preset(&grid, preset).unwrap();
        let geo = Geometry::new(grid, metric, pot.sample(&grid)).unwrap();
        let g = assemble_generator(&geo).unwrap();
        (geo, g)
    }

    #[test]
    fn generator_is_skew_in_weighted_product() {
        for preset in [MetricPreset::Polar, MetricPreset::PerturbedPolar { eps: 0.1 }, MetricPreset::Sheared { eps: 0.3 }] {
            let (_, g) = build(preset, PotentialPreset::Swirl, 16);
            assert!(g.skew_defect() <= 1e-12, "{preset:?} {}", g.skew_defect());
        }
    }

    #[test]
    fn flat_zero_potential_is_five_point_laplacian() {
        let (geo, g) = build(MetricPreset::Flat, PotentialPreset::Zero, 8);
        let (hr, ha) = (geo.grid.hr(), geo.grid.ha());
        let p = g.map[geo.grid.idx(3, 2)].unwrap();
        let q_r = g.map[geo.grid.idx(4, 2)].unwrap();
        let q_a = g.map[geo.grid.idx(3, 3)].unwrap();
        let i = C64::i();
        assert!((g.a.get(p, p) - i * (-2.0 / (hr * hr) - 2.0 / (ha * ha))).norm() < 1e-9);
        assert!((g.a.get(p, q_r) - i / (hr * hr)).norm() < 1e-9);
        assert!((g.a.get(p, q_a) - i / (ha * ha)).norm() < 1e-9);
        assert_eq!(g.a.row(p).count(), 5);
    }
}
