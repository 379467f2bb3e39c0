use carlab_core::admissible::{make_admissible_f, SourcePreset};
use carlab_core::forward::{CauchyData, ForwardSolver, LiftField, RadialCutoff};
use carlab_core::operators::Geometry;
use carlab_core::stability::*;
use carlab_core::{ChartGrid, MetricData, MetricPreset, C64};
use std::f64::consts::PI;

fn solver(nr: usize, na: usize, nt: usize) -> ForwardSolver {
    let grid = ChartGrid::new(nr, na, 0.5, 1.0, nt, 4.0).unwrap();
    let metric = MetricData::from_preset(&grid, MetricPreset::Polar).unwrap();
    ForwardSolver::new(Geometry::without_potential(grid, metric).unwrap()).unwrap()
}

fn member(id: &str, preset: SourcePreset) -> FamilyMember {
    FamilyMember { f_id: id.into(), preset, alpha: 1.0, beta: 5.0 }
}

#[test]
fn zero_solution_has_zero_data() {
    let s = solver(9, 8, 20);
    let sol = s.solve(&LiftField::zeros(s.grid())).unwrap();
    assert_eq!(data_functional(&sol, &s.geo).unwrap().value(), 0.0);
}

#[test]
fn doubling_the_source_doubles_data_and_keeps_ratio() {
    let s = solver(13, 12, 40);
    let src = make_admissible_f(&SourcePreset::Separable { p: 0.3, q: 0.5 }, 1.0, 50.0, &s.geo, RadialCutoff::default()).unwrap();
    let sol1 = s.solve(&src.lift).unwrap();
    let lift2 = src.lift.scale(C64::from(2.0));
    let sol2 = s.solve(&lift2).unwrap();
    let d1 = data_functional(&sol1, &s.geo).unwrap().value();
    let d2 = data_functional(&sol2, &s.geo).unwrap().value();
    assert!(d1 > 0.0);
    assert!((d2 - 2.0 * d1).abs() <= 1e-12 * d1);
    let eps = default_eps_grid(4.0, 3);
    let r1 = stability_records("a", &src.lift, &sol1, &eps, &s.geo).unwrap();
    let r2 = stability_records("a", &lift2, &sol2, &eps, &s.geo).unwrap();
    for (a, b) in r1.iter().zip(&r2) {
        assert!((a.ratio() - b.ratio()).abs() <= 1e-10 * a.ratio());
    }
}

#[test]
fn data_functional_matches_closed_form_quadrature() {
    let s8 = (8.0f64).sin();
    let exact = (PI * (2.0 - s8 / 4.0) * 2.0 + PI * (2.0 + s8 / 4.0)).sqrt() + (PI * (2.0 + s8 / 4.0)).sqrt();
    let mut errs = Vec::new();
    for (na, nt) in [(16, 40), (32, 80), (64, 160)] {
        let s = solver(9, na, nt);
        let g = *s.grid();
        let ring = |f: &dyn Fn(f64, f64) -> f64| -> Vec<Vec<C64>> {
            (0..nt).map(|k| (0..na).map(|j| C64::from(f(g.theta(j), g.t_mid(k)))).collect()).collect()
        };
        let data = CauchyData { trace: ring(&|th, t| th.cos() * t.sin()), normal: ring(&|th, t| th.sin() * t.cos()) };
        errs.push((data_functional_of(&data, &s.geo).unwrap().value() - exact).abs() / exact);
    }
    assert!(errs[2] < 1e-3, "{errs:?}");
    assert!((errs[1] / errs[2]).log2() > 1.8, "{errs:?}");
}

#[test]
fn constant_source_ratio_is_monotone_in_eps_and_envelope_holds() {
    let s = solver(13, 12, 80);
    let family = vec![
        member("const", SourcePreset::Constant),
        member("sep", SourcePreset::Separable { p: 0.3, q: 0.5 }),
        member("bad", SourcePreset::Traveling { amp: 0.9, speed: 40.0 }),
    ];
    let eps = default_eps_grid(4.0, 5);
    let rep = stability_sweep(&family, &eps, &s, RadialCutoff::default()).unwrap();
    assert_eq!(rep.skipped.len(), 1);
    assert_eq!(rep.skipped[0].f_id, "bad");
    let consts: Vec<&StabilityRecord> = rep.records.iter().filter(|r| r.f_id == "const").collect();
    // sorted by ascending eps
    for p in consts.windows(2) {
        assert!(p[0].eps < p[1].eps);
        assert!(p[1].ratio() <= p[0].ratio());
    }
    let fit = rep.fit.unwrap();
    assert!(fit.worst_margin >= -1e-12);
    for r in &rep.records {
        assert!(r.lhs_h1 <= fit.bound(r.eps, r.data_norm) * (1.0 + 1e-12));
        assert!(r.data_norm > 0.0);
    }
}

#[test]
fn separable_record_for_default_preset() {
    let s = solver(13, 12, 40);
    let g = *s.grid();
    let (p, q) = (0.3, 0.5);
    let src = make_admissible_f(&SourcePreset::Separable { p, q }, 1.0, 50.0, &s.geo, RadialCutoff::default()).unwrap();
    let a: Vec<C64> = (0..g.na).map(|j| C64::from(src.scale * (1.0 + p * g.theta(j).cos()))).collect();
    let b: Vec<C64> = (0..=g.nt).map(|n| C64::from(1.0 + q * (PI * g.t_step(n) / 4.0).sin())).collect();
    let sol = s.solve(&src.lift).unwrap();
    let rec = separable_bound(&a, &b, &src.lift, &sol, &s.geo).unwrap();
    assert!((rec.eta - 1.0).abs() < 1e-12);
    assert!(rec.margin > 0.0, "{rec:?}");
    assert!(rec.data_norm > 0.0);
    // Wrong factorization is rejected.
    let b2: Vec<C64> = b.iter().map(|v| v * 1.1).collect();
    assert!(separable_bound(&a, &b2, &src.lift, &sol, &s.geo).is_err());
}

#[test]
fn constant_factors_give_trivial_parts() {
    let s = solver(13, 12, 40);
    let g = *s.grid();
    let src = make_admissible_f(&SourcePreset::Constant, 1.0, 50.0, &s.geo, RadialCutoff::default()).unwrap();
    let c = src.lift.f[0][0];
    let a = vec![c; g.na];
    let b = vec![C64::from(1.0); g.nt + 1];
    let sol = s.solve(&src.lift).unwrap();
    let rec = separable_bound(&a, &b, &src.lift, &sol, &s.geo).unwrap();
    assert_eq!(rec.eta, 1.0);
    assert!(rec.a_tangential < 1e-12);
    // ‖f‖ over (T/4, 3T/4) is √(T/2) ‖𝔞‖ for a time-constant f.
    assert!((rec.window_h1 - (2.0f64).sqrt() * rec.a_l2).abs() < 1e-12 * rec.a_l2);
    let zero_b = vec![C64::from(0.0); g.nt + 1];
    assert!(separable_bound(&a, &zero_b, &src.lift, &sol, &s.geo).is_err());
}

#[test]
fn interpolation_truncation_two_routes() {
    let s = solver(9, 16, 80);
    let g = *s.grid();
    let fit = EnvelopeFit { c_mult: 1.0, c_exp: 0.5, worst_margin: 0.0 };
    let lift = LiftField::from_boundary_fn(&g, |th, t| C64::from((PI * t / 4.0).sin() * (1.0 + 0.2 * th.cos())), RadialCutoff::default());
    let sol = s.solve(&lift).unwrap();
    let eps = default_eps_grid(4.0, 4);
    let rep = interpolation_bound(&lift, &sol, &eps, 0.3, fit, &s.geo).unwrap();
    let rings = lift.trace_mid();
    let w = carlab_core::quadrature::surface_weights(&s.geo.metric, &g, carlab_core::Boundary::Inner, Default::default());
    for rec in &rep.records {
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for k in 0..g.nt {
            let t = g.t_mid(k);
            let row: f64 = rings[k].iter().zip(&w).map(|(v, w)| w * v.norm_sqr()).sum::<f64>() * g.dt();
            if t < rec.eps {
                acc += row;
            }
            if t > 4.0 - rec.eps {
                acc2 += row;
            }
        }
        let direct = acc.sqrt() + acc2.sqrt();
        assert!((direct - rec.truncation).abs() <= 1e-10 * direct.max(1e-300), "{direct} {}", rec.truncation);
        assert!(rec.hardy_ratio.is_finite());
    }
    assert!(rep.best_rhs <= rep.records.iter().map(|r| r.rhs).fold(f64::INFINITY, f64::min));
    assert!(interpolation_bound(&lift, &sol, &eps, 0.5, fit, &s.geo).is_err());
}

#[test]
fn interpolation_of_zero_and_of_late_source() {
    let s = solver(9, 8, 80);
    let g = *s.grid();
    let fit = EnvelopeFit { c_mult: 1.0, c_exp: 0.5, worst_margin: 0.0 };
    let zero = LiftField::zeros(&g);
    let sol = s.solve(&zero).unwrap();
    let rep = interpolation_bound(&zero, &sol, &[0.5], 0.25, fit, &s.geo).unwrap();
    assert_eq!((rep.l2_full, rep.h1_time, rep.data_norm, rep.records[0].truncation), (0.0, 0.0, 0.0, 0.0));
    let eps = 0.25;
    let bump = carlab_core::samples::TimeBump { t0: 2.0 * eps, t1: 4.0 - 2.0 * eps };
    let lift = LiftField::from_boundary_fn(&g, |_, t| C64::from(bump.eval(t)), RadialCutoff::default());
    let sol = s.solve(&lift).unwrap();
    let rep = interpolation_bound(&lift, &sol, &[eps], 0.25, fit, &s.geo).unwrap();
    assert_eq!(rep.records[0].truncation, 0.0);
    assert!(rep.l2_full > 0.0);
}
