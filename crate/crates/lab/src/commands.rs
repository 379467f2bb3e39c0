//! Subcommand bodies. Each one validates its inputs, runs the numerical
//! work on the ambient rayon pool and hands finished tables to one writer.

use std::path::{Path, PathBuf};

use carlab_core::admissible::{make_admissible_f, SourcePreset};
use carlab_core::carleman::{CarlemanOperator, IdentityGroup, TERM_LABELS};
use carlab_core::forward::{CauchyData, ForwardSolver, RadialCutoff};
use carlab_core::inverse::{InverseProblem, LbfgsOptions, Reconstruction, SourceBasis};
use carlab_core::operators::Geometry;
use carlab_core::samples::SmoothSample;
use carlab_core::stability::{interpolation_bound, perturb_cauchy};
use carlab_core::{ChartGrid, MetricData, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checks::{self, fitted_order, Scale};
use crate::config::ExperimentConfig;
use crate::error::{CoreContext, LabError};
use crate::output::{create_run_dir, fmt_f64, read_table, RunWriter, Table};

#[derive(Debug, Clone, PartialEq)]
pub enum Subcommand {
    Forward,
    Carleman,
    Identities,
    Stability,
    Invert { data: Option<PathBuf>, sweep: bool },
    Check { full: bool },
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Forward => "forward",
            Subcommand::Carleman => "carleman",
            Subcommand::Identities => "identities",
            Subcommand::Stability => "stability",
            Subcommand::Invert { .. } => "invert",
            Subcommand::Check { .. } => "check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// `None` for dry runs.
    pub dir: Option<PathBuf>,
    pub plan: Vec<String>,
    /// False when a check or a criterion inside the run failed.
    pub ok: bool,
}

pub fn build_geometry(cfg: &ExperimentConfig) -> Result<Geometry, LabError> {
    let g = &cfg.geometry;
    let grid = ChartGrid::new(g.nr, g.na, g.r_in, g.r_out, g.nt, g.horizon).ctx("geometry", "grid")?;
    let metric = cfg.metric().ok_or_else(|| LabError::Usage("unknown metric".into()))?;
    let pot = cfg.potential().ok_or_else(|| LabError::Usage("unknown potential".into()))?;
    let m = MetricData::from_preset(&grid, metric).ctx("geometry", "metric")?;
    Geometry::new(grid, m, pot.sample(&grid)).ctx("geometry", "operators")
}

fn source_preset(cfg: &ExperimentConfig) -> SourcePreset {
    match cfg.physics.source.as_str() {
        "constant" => SourcePreset::Constant,
        "traveling" => SourcePreset::Traveling { amp: 0.3, speed: 0.5 },
        "trig" => SourcePreset::random_trig(&mut ChaCha8Rng::seed_from_u64(cfg.run.seed), 3, 0.5),
        _ => SourcePreset::Separable { p: 0.3, q: 0.5 },
    }
}

/// Runs one subcommand. Dry runs only report the work plan.
pub fn run(sub: &Subcommand, cfg: &ExperimentConfig, threads: usize, dry_run: bool) -> Result<RunSummary, LabError> {
    let plan = plan(sub, cfg);
    if dry_run {
        return Ok(RunSummary { dir: None, plan, ok: true });
    }
    preflight(sub, cfg)?;
    let dir = create_run_dir(&cfg.run.out, sub.name())?;
    let mut w = RunWriter::open(dir.clone(), sub.name(), cfg, threads)?;
    let ok = match sub {
        Subcommand::Forward => forward(cfg, &mut w)?,
        Subcommand::Carleman => carleman(cfg, &mut w)?,
        Subcommand::Identities => identities(cfg, &mut w)?,
        Subcommand::Stability => stability(cfg, &mut w)?,
        Subcommand::Invert { data, sweep } => invert(cfg, data.as_deref(), *sweep, &mut w)?,
        Subcommand::Check { full } => check(cfg, *full, &mut w)?,
    };
    w.finish()?;
    Ok(RunSummary { dir: Some(dir), plan, ok })
}

/// Rejects inputs that would fail mid-run, before any directory exists.
fn preflight(sub: &Subcommand, cfg: &ExperimentConfig) -> Result<(), LabError> {
    build_geometry(cfg)?;
    match sub {
        Subcommand::Identities => {
            for (nr, na, nt) in identity_levels(cfg)? {
                ChartGrid::new(nr, na, cfg.geometry.r_in, cfg.geometry.r_out, nt, cfg.geometry.horizon).ctx("geometry", "coarse identity level")?;
            }
        }
        Subcommand::Invert { data: Some(p), .. } if !p.is_file() => {
            return Err(LabError::Usage(format!("data file {} not found", p.display())));
        }
        _ => {}
    }
    Ok(())
}

/// Human-readable work items, one per line.
pub fn plan(sub: &Subcommand, cfg: &ExperimentConfig) -> Vec<String> {
    let g = &cfg.geometry;
    let grid = format!("{}x{}x{}", g.nr, g.na, g.nt);
    match sub {
        Subcommand::Forward => vec![format!("forward grid={grid} source={} noise={}", cfg.physics.source, cfg.run.noise)],
        Subcommand::Carleman => {
            let mut out = Vec::new();
            for gamma in &cfg.weights.gamma_grid {
                for s in &cfg.weights.s_grid {
                    for i in 0..cfg.run.samples {
                        out.push(format!("s={s} gamma={gamma} sample=sample-{i:02}"));
                    }
                }
            }
            out
        }
        Subcommand::Identities => identity_levels(cfg)
            .map(|lv| {
                lv.iter()
                    .enumerate()
                    .flat_map(|(l, (nr, na, nt))| (0..cfg.run.samples).map(move |i| format!("level={l} grid={nr}x{na}x{nt} sample={i}")))
                    .collect()
            })
            .unwrap_or_else(|e| vec![format!("invalid: {e}")]),
        Subcommand::Stability => checks::stability_family(cfg.run.seed, cfg.physics.alpha, cfg.physics.beta)
            .iter()
            .flat_map(|m| cfg.run.eps_grid.iter().map(move |e| format!("f_id={} eps={e}", m.f_id)))
            .collect(),
        Subcommand::Invert { data, sweep } => {
            let lams = if *sweep { cfg.run.lambda_grid.clone() } else { vec![cfg.run.lambda] };
            let src = data.as_ref().map_or("synthetic".to_string(), |p| p.display().to_string());
            lams.iter()
                .map(|l| format!("invert data={src} harmonics={} splines={} lambda={l}", cfg.run.harmonics, cfg.run.splines))
                .collect()
        }
        Subcommand::Check { full } => (1..=11).map(|i| format!("check {i} scale={}", if *full { "full" } else { "quick" })).collect(),
    }
}

fn ring_rows(table: &mut Table, grid: &ChartGrid, times: impl Fn(usize) -> f64, a: &[Vec<C64>], b: Option<&[Vec<C64>]>) {
    for j in 0..grid.na {
        for (k, row) in a.iter().enumerate() {
            let mut r = vec![fmt_f64(times(k)), j.to_string(), fmt_f64(row[j].re), fmt_f64(row[j].im)];
            if let Some(b) = b {
                r.push(fmt_f64(b[k][j].re));
                r.push(fmt_f64(b[k][j].im));
            }
            table.push(r);
        }
    }
}

fn cauchy_table(grid: &ChartGrid, data: &CauchyData) -> Table {
    let mut t = Table::new("cauchy_data", &["t", "theta_index", "re_u", "im_u", "re_dnu", "im_dnu"]);
    ring_rows(&mut t, grid, |k| grid.t_mid(k), &data.trace, Some(&data.normal));
    t
}

fn source_table(schema: &str, grid: &ChartGrid, f: &[Vec<C64>]) -> Table {
    let mut t = Table::new(schema, &["t", "theta_index", "re_f", "im_f"]);
    ring_rows(&mut t, grid, |n| grid.t_step(n), f, None);
    t
}

fn forward(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<bool, LabError> {
    let geo = build_geometry(cfg)?;
    let grid = geo.grid;
    let (src, mut sol) = w.stage("solve", || {
        let src = make_admissible_f(&source_preset(cfg), cfg.physics.alpha, cfg.physics.beta, &geo, RadialCutoff::default())
            .ctx("forward_solver", "admissible source")?;
        let sol = ForwardSolver::new(geo.clone()).ctx("forward_solver", "assemble")?.solve(&src.lift).ctx("forward_solver", "solve")?;
        Ok((src, sol))
    })?;
    if cfg.run.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
        sol.cauchy = perturb_cauchy(&sol.cauchy, cfg.run.noise, &mut rng).ctx("forward_solver", "noise")?;
    }
    w.write_table("cauchy_data.csv", &cauchy_table(&grid, &sol.cauchy))?;
    w.write_table("source.csv", &source_table("source", &grid, &src.lift.f))?;
    Ok(true)
}

/// Reads `cauchy_data.csv` back into `[k][j]` rings on `grid`.
pub fn read_cauchy(path: &Path, grid: &ChartGrid) -> Result<CauchyData, LabError> {
    let (schema, header, rows) = read_table(path)?;
    let bad = |m: String| LabError::Csv { path: path.into(), message: m };
    if !schema.starts_with("cauchy_data ") || header != ["t", "theta_index", "re_u", "im_u", "re_dnu", "im_dnu"] {
        return Err(bad(format!("unexpected schema {schema}")));
    }
    if rows.len() != grid.na * grid.nt {
        return Err(bad(format!("expected {} rows, found {}", grid.na * grid.nt, rows.len())));
    }
    let mut data = CauchyData::zeros(grid);
    for (n, row) in rows.iter().enumerate() {
        let num = |i: usize| row[i].parse::<f64>().map_err(|e| bad(format!("row {n}: {e}")));
        let j: usize = row[1].parse().map_err(|e| bad(format!("row {n}: {e}")))?;
        let k = n % grid.nt;
        if j >= grid.na || (num(0)? - grid.t_mid(k)).abs() > 1e-9 * grid.horizon {
            return Err(bad(format!("row {n} does not match the grid")));
        }
        data.trace[k][j] = C64::new(num(2)?, num(3)?);
        data.normal[k][j] = C64::new(num(4)?, num(5)?);
    }
    Ok(data)
}

fn carleman(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<bool, LabError> {
    let geo = build_geometry(cfg)?;
    let samples = checks::carleman_samples(&geo.grid, cfg.run.samples, cfg.run.seed);
    let (rows, est) = w.stage("sweep", || {
        checks::carleman_sweep(&samples, &cfg.weights.s_grid, &cfg.weights.gamma_grid, &geo, CarlemanOperator::Magnetic)
    })?;
    let mut cols = vec!["sample_id", "s", "gamma", "lhs", "rhs", "log_lhs", "log_rhs", "ratio", "anomalous"];
    cols.extend(TERM_LABELS.iter().map(|l| *l));
    let mut t = Table::new("carleman_report", &cols);
    for r in &rows {
        let mut row = vec![
            r.sample_id.clone(),
            fmt_f64(r.s),
            fmt_f64(r.gamma),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            fmt_f64(r.log_lhs),
            fmt_f64(r.log_rhs),
            fmt_f64(r.ratio),
            r.anomalous.to_string(),
        ];
        row.extend(r.log_terms.iter().map(|v| fmt_f64(*v)));
        t.push(row);
    }
    w.write_table("carleman_report.csv", &t)?;
    let mut c = Table::new("carleman_constants", &["gamma", "s", "sup_ratio", "s_plateau", "constant"]);
    for e in &est {
        for (s, r) in e.s_grid.iter().zip(&e.sup_ratio) {
            c.push(vec![fmt_f64(e.gamma), fmt_f64(*s), fmt_f64(*r), e.s_plateau.map_or("none".into(), fmt_f64), fmt_f64(e.constant)]);
        }
    }
    w.write_table("carleman_constants.csv", &c)?;
    Ok(rows.iter().all(|r| !r.anomalous))
}

/// Finest level from the config and two coarsenings by halves.
fn identity_levels(cfg: &ExperimentConfig) -> Result<[(usize, usize, usize); 3], LabError> {
    let g = &cfg.geometry;
    if (g.nr - 1) % 4 != 0 || g.na % 4 != 0 || g.nt % 4 != 0 {
        return Err(LabError::Usage("identities need nr - 1, na and nt divisible by 4".into()));
    }
    let lv = |d: usize| ((g.nr - 1) / d + 1, g.na / d, g.nt / d);
    Ok([lv(4), lv(2), lv(1)])
}

fn identities(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<bool, LabError> {
    let levels = identity_levels(cfg)?;
    let metric = cfg.metric().ok_or_else(|| LabError::Usage("unknown metric".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let samples: Vec<SmoothSample> = (0..cfg.run.samples).map(|_| SmoothSample::random(&mut rng, cfg.geometry.horizon, 2, true)).collect();
    let (s, gamma) = (cfg.weights.s_grid[0], cfg.weights.gamma_grid[0]);
    let errs = w.stage("identities", || checks::identity_errors(&samples, &levels, metric, s, gamma))?;
    let mut t = Table::new("identities_report", &["sample", "group", "level", "nr", "na", "nt", "rel_error"]);
    let mut o = Table::new("identities_orders", &["sample", "group", "order"]);
    let mut ok = true;
    for (i, e) in errs.iter().enumerate() {
        for g in IdentityGroup::ALL {
            let col = &e[g as usize];
            for (l, v) in col.iter().enumerate() {
                let (nr, na, nt) = levels[l];
                t.push(vec![i.to_string(), g.label().into(), l.to_string(), nr.to_string(), na.to_string(), nt.to_string(), fmt_f64(*v)]);
            }
            let order = fitted_order(col);
            if g == IdentityGroup::I9 {
                ok &= col.iter().all(|v| *v <= 1e-12);
            } else if g != IdentityGroup::Total {
                ok &= order >= 1.8;
            }
            o.push(vec![i.to_string(), g.label().into(), fmt_f64(order)]);
        }
    }
    w.write_table("identities_report.csv", &t)?;
    w.write_table("identities_orders.csv", &o)?;
    Ok(ok)
}

fn stability(cfg: &ExperimentConfig, w: &mut RunWriter) -> Result<bool, LabError> {
    let geo = build_geometry(cfg)?;
    let solver = ForwardSolver::new(geo).ctx("forward_solver", "assemble")?;
    let family = checks::stability_family(cfg.run.seed, cfg.physics.alpha, cfg.physics.beta);
    let rep = w.stage("sweep", || checks::stability_run(&family, &cfg.run.eps_grid, &solver, cfg.run.noise, cfg.run.seed))?;
    let mut t = Table::new("stability_report", &["f_id", "status", "eps", "lhs_h1", "data_norm", "ratio", "c_mult", "c_exp"]);
    for r in &rep.records {
        t.push(vec![
            r.f_id.clone(),
            "ok".into(),
            fmt_f64(r.eps),
            fmt_f64(r.lhs_h1),
            fmt_f64(r.data_norm),
            fmt_f64(r.ratio()),
            fmt_f64(r.fitted_c_mult),
            fmt_f64(r.fitted_c_exp),
        ]);
    }
    for s in &rep.skipped {
        let nan = fmt_f64(f64::NAN);
        t.push(vec![s.f_id.clone(), format!("skipped: {}", s.error), nan.clone(), nan.clone(), nan.clone(), nan.clone(), nan.clone(), nan]);
    }
    w.write_table("stability_report.csv", &t)?;
    if let (Some(fit), Some(first)) = (rep.fit, family.iter().find(|m| !rep.skipped.iter().any(|s| s.f_id == m.f_id))) {
        let src = carlab_core::stability::admit(first, &solver.geo, RadialCutoff::default()).ctx("stability_harness", first.f_id.clone())?;
        let sol = solver.solve(&src.lift).ctx("forward_solver", first.f_id.clone())?;
        let ir = interpolation_bound(&src.lift, &sol, &cfg.run.eps_grid, cfg.run.interpolation_r, fit, &solver.geo)
            .ctx("stability_harness", "interpolation")?;
        let mut it = Table::new("stability_interpolation", &["f_id", "eps", "truncation", "hardy_ratio", "rhs", "l2_full"]);
        for r in &ir.records {
            it.push(vec![first.f_id.clone(), fmt_f64(r.eps), fmt_f64(r.truncation), fmt_f64(r.hardy_ratio), fmt_f64(r.rhs), fmt_f64(ir.l2_full)]);
        }
        w.write_table("stability_interpolation.csv", &it)?;
    }
    Ok(rep.fit.is_some())
}

fn invert(cfg: &ExperimentConfig, data: Option<&Path>, sweep: bool, w: &mut RunWriter) -> Result<bool, LabError> {
    let geo = build_geometry(cfg)?;
    let grid = geo.grid;
    let basis = SourceBasis::harmonic_spline(&geo, cfg.run.harmonics, cfg.run.splines).ctx("inverse_solver", "basis")?;
    let (target, truth) = match data {
        Some(p) => (read_cauchy(p, &grid)?, None),
        None => {
            let (_, f, clean) = checks::synthetic_problem(&geo, &basis, cfg.run.seed)?;
            (clean, Some(f))
        }
    };
    let target = if cfg.run.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed.wrapping_add(1));
        perturb_cauchy(&target, cfg.run.noise, &mut rng).ctx("inverse_solver", "noise")?
    } else {
        target
    };
    let problem = InverseProblem::new(geo, basis, target, cfg.run.lambda, RadialCutoff::default()).ctx("inverse_solver", "problem")?;
    let opts = LbfgsOptions { max_iter: cfg.run.max_iter, ..Default::default() };
    let lambdas = if sweep { cfg.run.lambda_grid.clone() } else { vec![cfg.run.lambda] };
    let recs: Vec<Reconstruction> = w.stage("reconstruct", || {
        lambdas
            .par_iter()
            .map(|&l| {
                problem
                    .with_lambda(l)
                    .and_then(|p| p.reconstruct(&opts, truth.as_deref()))
                    .ctx("inverse_solver", format!("lambda {l:e}"))
            })
            .collect()
    })?;
    let mut tr = Table::new("trace", &["lambda", "iter", "objective", "grad_norm", "step", "rel_error"]);
    let mut sw = Table::new("lambda_sweep", &["lambda", "status", "objective", "rel_error", "alpha", "beta"]);
    for r in &recs {
        for it in &r.trace {
            tr.push(vec![
                fmt_f64(r.lambda),
                it.iter.to_string(),
                fmt_f64(it.objective),
                fmt_f64(it.grad_norm),
                fmt_f64(it.step),
                it.rel_error.map_or("nan".into(), fmt_f64),
            ]);
        }
        sw.push(vec![
            fmt_f64(r.lambda),
            r.status.label().into(),
            fmt_f64(r.objective.total()),
            r.rel_error.map_or("nan".into(), fmt_f64),
            fmt_f64(r.admissibility.0),
            fmt_f64(r.admissibility.1),
        ]);
    }
    // Smallest error when the truth is known, otherwise the first λ.
    let best = recs
        .iter()
        .min_by(|a, b| a.rel_error.unwrap_or(0.0).total_cmp(&b.rel_error.unwrap_or(0.0)))
        .expect("at least one lambda");
    w.write_table("reconstruction.csv", &source_table("reconstruction", &grid, &best.f))?;
    w.write_table("trace.csv", &tr)?;
    w.write_table("lambda_sweep.csv", &sw)?;
    Ok(recs.iter().all(|r| r.status != carlab_core::inverse::SolveStatus::LineSearchFailed))
}

fn check(cfg: &ExperimentConfig, full: bool, w: &mut RunWriter) -> Result<bool, LabError> {
    let scale = if full { Scale::Full } else { Scale::Quick };
    let outcomes = w.stage("checks", || checks::run_all(scale, cfg.run.seed))?;
    let mut t = Table::new("check_report", &["id", "name", "pass", "metric", "value", "note"]);
    for o in &outcomes {
        for (m, v) in &o.metrics {
            t.push(vec![o.id.to_string(), o.name.into(), o.pass.to_string(), m.clone(), fmt_f64(*v), o.note.clone()]);
        }
    }
    w.write_table("check_report.csv", &t)?;
    Ok(outcomes.iter().all(|o| o.pass))
}
