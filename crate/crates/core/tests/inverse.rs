use carlab_core::forward::{CauchyData, RadialCutoff};
use carlab_core::inverse::*;
use carlab_core::operators::Geometry;
use carlab_core::{ChartGrid, MetricData, MetricPreset, PotentialPreset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn geo(nr: usize, na: usize, nt: usize, pot: PotentialPreset) -> Geometry {
    let grid = ChartGrid::new(nr, na, 0.5, 1.0, nt, 4.0).unwrap();
    let metric = MetricData::from_preset(&grid, MetricPreset::Sheared { eps: 0.1 }).unwrap();
    Geometry::new(grid, metric, pot.sample(&grid)).unwrap()
}

fn problem(g: Geometry, seed: u64, lambda: f64) -> (InverseProblem, Vec<f64>) {
    let basis = SourceBasis::harmonic_spline(&g, 1, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..basis.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let tmp = InverseProblem::new(g.clone(), basis.clone(), CauchyData::zeros(&g.grid), lambda, RadialCutoff::default()).unwrap();
    let data = tmp.predict(&truth).unwrap();
    (InverseProblem::new(g, basis, data, lambda, RadialCutoff::default()).unwrap(), truth)
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let (p, _) = problem(geo(9, 8, 16, PotentialPreset::Swirl), 1, 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, g) = p.gradient(&c).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let d: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at = |t: f64| {
            let x: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            p.objective(&x).unwrap().total()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
    }
    println!("worst relative gradient error {worst:e}");
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn penalty_gradient_is_twice_lambda_c() {
    let (p, truth) = problem(geo(9, 8, 16, PotentialPreset::Zero), 3, 0.0);
    let q = p.with_lambda(0.7).unwrap();
    let (o0, g0) = p.gradient(&truth).unwrap();
    let (o1, g1) = q.gradient(&truth).unwrap();
    assert!(o0.trace < 1e-20 && o0.normal < 1e-20);
    for ((a, b), c) in g0.iter().zip(&g1).zip(&truth) {
        assert!((b - a - 1.4 * c).abs() < 1e-9);
    }
    assert!((o1.penalty - 0.7 * truth.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-12);
}

#[test]
fn objective_is_convex_along_segments() {
    let (p, _) = problem(geo(9, 8, 16, PotentialPreset::Swirl), 4, 1e-2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let a: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let j = |c: &[f64]| p.objective(c).unwrap().total();
        assert!(j(&m) <= 0.5 * (j(&a) + j(&b)) * (1.0 + 1e-12));
    }
}

#[test]
fn truth_has_vanishing_misfit() {
    let (p, truth) = problem(geo(9, 8, 16, PotentialPreset::Swirl), 5, 0.0);
    let o = p.objective(&truth).unwrap();
    assert!(o.total() < 1e-24, "{o:?}");
}

#[test]
fn wrong_length_coefficients_are_rejected() {
    let (p, _) = problem(geo(9, 8, 16, PotentialPreset::Zero), 6, 0.0);
    assert!(p.objective(&[0.0; 3]).is_err());
    assert!(p.with_lambda(-1.0).is_err());
}

#[test]
fn empty_basis_returns_zero_source() {
    let g = geo(9, 8, 16, PotentialPreset::Zero);
    let p = InverseProblem::new(g.clone(), SourceBasis::empty(), CauchyData::zeros(&g.grid), 1e-3, RadialCutoff::default()).unwrap();
    let r = p.reconstruct(&LbfgsOptions::default(), None).unwrap();
    assert_eq!(r.status, SolveStatus::Converged);
    assert!(r.f.iter().flatten().all(|v| v.norm() == 0.0));
}

#[test]
fn noiseless_reconstruction_recovers_the_source() {
    let (p, truth) = problem(geo(17, 16, 64, PotentialPreset::Swirl), 7, 1e-10);
    let f_true = p.basis.assemble(p.solver.grid(), &truth).unwrap();
    let r = p.reconstruct(&LbfgsOptions::default(), Some(&f_true)).unwrap();
    let last = r.trace.last().unwrap();
    println!("status {:?} iters {} J {:e} rel {:?}", r.status, r.trace.len(), last.objective, r.rel_error);
    assert!(r.rel_error.unwrap() <= 0.05);
}
