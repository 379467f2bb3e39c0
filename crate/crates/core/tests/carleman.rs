use carlab_core::carleman::{
    carleman_sides, conjugate_split, identity_suite, split_conjugated, sweep, CarlemanOperator, IdentityGroup,
};
use carlab_core::field::SpaceTimeField;
use carlab_core::operators::Geometry;
use carlab_core::samples::SmoothSample;
use carlab_core::weights::{make_spatial_weight, CarlemanParams, MRule, SpatialWeight, WeightFields};
use carlab_core::{ChartGrid, MetricData, MetricPreset, C64};
use rand::SeedableRng;

const LEVELS: [(usize, usize, usize); 3] = [(17, 16, 64), (33, 32, 128), (65, 64, 256)];

fn setup(nr: usize, na: usize, nt: usize, preset: MetricPreset) -> (Geometry, SpatialWeight) {
    let grid = ChartGrid::new(nr, na, 0.5, 1.0, nt, 4.0).unwrap();
    let metric = MetricData::from_preset(&grid, preset).unwrap();
    let geo = Geometry::without_potential(grid, metric).unwrap();
    let sw = make_spatial_weight(0.5, &geo.grid, &geo.metric, MRule::Auto).unwrap();
    (geo, sw)
}

fn weights(geo: &Geometry, sw: &SpatialWeight, s: f64, gamma: f64) -> WeightFields {
    WeightFields::new(sw, CarlemanParams::new(gamma, s, geo.grid.horizon).unwrap(), geo).unwrap()
}

fn order(e: &[f64]) -> f64 {
    (e[e.len() - 2] / e[e.len() - 1]).log2()
}

#[test]
fn grouped_identities_converge_on_curved_metric() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let sample = SmoothSample::random(&mut rng, 4.0, 2, true);
    let mut errs = vec![Vec::new(); IdentityGroup::ALL.len()];
    for (l, &(nr, na, nt)) in LEVELS.iter().enumerate() {
        let (geo, sw) = setup(nr, na, nt, MetricPreset::PerturbedPolar { eps: 0.2 });
        let w = weights(&geo, &sw, 3.0, 1.5);
        let (rep, _) = identity_suite(&sample.sample(&geo.grid), &w, &geo, l).unwrap();
        for r in rep {
            errs[r.group as usize].push(r.rel_error);
        }
    }
    for g in IdentityGroup::ALL {
        let e = &errs[g as usize];
        if g == IdentityGroup::I9 {
            assert!(e.iter().all(|&v| v <= 1e-12), "{e:?}");
        } else {
            assert!(order(e) >= 1.8, "{} {e:?}", g.label());
        }
    }
}

#[test]
fn boundary_split_adds_up_and_is_consistent_with_total() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let sample = SmoothSample::random(&mut rng, 4.0, 2, true);
    let (geo, sw) = setup(33, 32, 128, MetricPreset::Sheared { eps: 0.1 });
    let w = weights(&geo, &sw, 2.0, 1.0);
    let (rep, split) = identity_suite(&sample.sample(&geo.grid), &w, &geo, 0).unwrap();
    let total = rep.iter().find(|r| r.group == IdentityGroup::Total).unwrap();
    assert!(total.rel_error < 1e-2, "{total:?}");
    // 𝓑 equals minus the boundary parts of the grouped identities.
    let grouped: f64 = rep
        .iter()
        .filter(|r| r.group != IdentityGroup::Total)
        .map(|r| r.boundary[0] + r.boundary[1])
        .sum();
    assert!((split.total() + grouped).abs() <= 1e-10 * split.total().abs().max(1.0));
    assert!((split.sigma + split.sigma0 - split.total()).abs() == 0.0);
}

#[test]
fn zero_field_gives_zero_everywhere() {
    let (geo, sw) = setup(9, 8, 16, MetricPreset::Polar);
    let w = weights(&geo, &sw, 4.0, 2.0);
    let z = SpaceTimeField::<C64>::zeros(&geo.grid);
    let (rep, split) = identity_suite(&z, &w, &geo, 0).unwrap();
    for r in rep {
        assert_eq!(r.value_lhs, 0.0);
        assert_eq!(r.value_rhs, 0.0);
    }
    assert_eq!(split.total(), 0.0);
    let c = carleman_sides(&z, &w, &geo, CarlemanOperator::Magnetic, "zero").unwrap();
    assert_eq!((c.lhs, c.rhs), (0.0, 0.0));
    assert!(!c.anomalous);
}

#[test]
fn conjugation_residual_converges() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let sample = SmoothSample::random(&mut rng, 4.0, 2, true);
    let res: Vec<f64> = LEVELS
        .iter()
        .map(|&(nr, na, nt)| {
            let (geo, sw) = setup(nr, na, nt, MetricPreset::Polar);
            let w = weights(&geo, &sw, 8.0, 2.0);
            split_conjugated(&sample.sample(&geo.grid), &w, &geo).unwrap().consistency_residual(&geo)
        })
        .collect();
    assert!(order(&res) >= 1.8, "{res:?}");
}

#[test]
fn zero_weight_reduces_to_plain_operator() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let (geo, sw) = setup(17, 16, 40, MetricPreset::Polar);
    let u = SmoothSample::random(&mut rng, 4.0, 2, false).sample(&geo.grid);
    let w = weights(&geo, &sw, 0.0, 2.0);
    let cs = conjugate_split(&u, &w, &geo).unwrap();
    assert_eq!(cs.z, u);
    for k in 0..geo.grid.nt {
        assert!(cs.p_minus.slices[k].data.iter().all(|v| v.norm() == 0.0));
    }
    assert!(cs.consistency_residual(&geo) < 1e-12);
}

#[test]
fn real_field_has_only_time_term_imaginary() {
    let (geo, sw) = setup(17, 16, 40, MetricPreset::Polar);
    let u = SpaceTimeField::from_fn(&geo.grid, |r, th, t| C64::from(r * th.cos() * (t * 0.7).sin()));
    let w = weights(&geo, &sw, 2.0, 1.0);
    let cs = conjugate_split(&u, &w, &geo).unwrap();
    for k in 0..geo.grid.nt {
        for n in 0..geo.grid.n_space() {
            let expect = -w.s() * w.phi_t(k, n) * cs.z.slices[k].data[n].re;
            let got = cs.p_minus.slices[k].data[n].im;
            assert!((got - expect).abs() <= 1e-12 * (1.0 + expect.abs()), "{got} {expect}");
        }
    }
}

#[test]
fn sweep_rows_match_direct_evaluation_and_duplicates_agree() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let (geo, sw) = setup(17, 16, 40, MetricPreset::Polar);
    let u = SmoothSample::random(&mut rng, 4.0, 2, false).sample(&geo.grid);
    let samples = vec![("a".to_string(), u.clone()), ("b".to_string(), u.clone())];
    let (rows, est) = sweep(&samples, &[8.0], &[2.0], &sw, &geo, CarlemanOperator::Laplacian).unwrap();
    let direct = carleman_sides(&u, &weights(&geo, &sw, 8.0, 2.0), &geo, CarlemanOperator::Laplacian, "a").unwrap();
    assert_eq!(rows[0], direct);
    assert_eq!(rows[0].ratio, rows[1].ratio);
    assert_eq!(rows[0].log_terms, rows[1].log_terms);
    assert_eq!(est.len(), 1);
    assert_eq!(est[0].constant, direct.ratio);
}

#[test]
fn ratio_stays_bounded_as_s_grows() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
    let (geo, sw) = setup(24, 24, 80, MetricPreset::Polar);
    let samples: Vec<(String, SpaceTimeField<C64>)> = (0..3)
        .map(|i| (format!("s{i}"), SmoothSample::random(&mut rng, 4.0, 2, false).sample(&geo.grid)))
        .collect();
    let (rows, est) = sweep(&samples, &[8.0, 16.0, 32.0], &[2.0], &sw, &geo, CarlemanOperator::Laplacian).unwrap();
    assert!(rows.iter().all(|r| r.lhs >= 0.0 && r.rhs > 0.0 && r.ratio.is_finite()));
    let c = &est[0];
    assert!(c.sup_ratio.windows(2).all(|p| p[1] <= 1.5 * p[0]), "{c:?}");
}
