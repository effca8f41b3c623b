use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use exterior_ma::asymptotics::{
    expected_sigma, fit_far_field, radial_samples, sharpness_growth, verify_rate, FitOptions, RateSource,
};
use exterior_ma::fa::{default_ladder, validate_fa, GROWTH_RATIO, GROWTH_WINDOW};
use exterior_ma::radial::{exact_radial_solution, global_log_coefficient, BarrierEnvelope, BarrierPair, BarrierSetup, RadialProfile};
use exterior_ma::solver::{solve_big_ball, solve_dirichlet, BoundaryKind, DiscreteSolution, Grid, Init};
use exterior_ma::{Error, ProblemSpec, RightHandSide};
use serde::Serialize;

use crate::error::{error_chain, LabError, Result};
use crate::report::{Criterion, RunReport};
use crate::spec::{ExperimentId, ExperimentSpec};

/// Runs one experiment. Errors never escape: they end up in a failed report.
pub fn run_experiment(spec: &ExperimentSpec, artifacts: Option<&Path>) -> RunReport {
    let mut report = RunReport::new(spec);
    let start = Instant::now();
    let outcome = spec.validate().and_then(|problem| {
        if let Some(dir) = artifacts {
            std::fs::create_dir_all(dir)?;
        }
        let ctx = Context {
            spec,
            problem,
            artifacts,
        };
        match spec.id {
            ExperimentId::Existence => existence(&ctx, &mut report),
            ExperimentId::Uniqueness => uniqueness(&ctx, &mut report),
            ExperimentId::BigBall => big_ball(&ctx, &mut report),
            ExperimentId::PlanarLog => planar_log(&ctx, &mut report),
            ExperimentId::Sharpness => sharpness(&ctx, &mut report),
            ExperimentId::DecayCondition => decay_condition(&ctx, &mut report),
            ExperimentId::Barrier => barrier(&ctx, &mut report),
        }
    });
    if let Err(e) = outcome {
        report.error = error_chain(&e);
    }
    report.timings.insert("total".into(), start.elapsed().as_secs_f64());
    report.finish();
    report
}

struct Context<'a> {
    spec: &'a ExperimentSpec,
    problem: ProblemSpec,
    artifacts: Option<&'a Path>,
}

impl Context<'_> {
    fn finest_h(&self) -> f64 {
        self.spec.solver.h.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    fn global_profile(&self, rhs: &RightHandSide) -> Result<RadialProfile> {
        Ok(exact_radial_solution(Arc::new(rhs.to_radial()?), rhs.dim(), 0.0, 0.0, 0.0)?)
    }

    fn artifact(&self, name: &str) -> Option<std::path::PathBuf> {
        self.artifacts.map(|d| d.join(name))
    }
}

fn timed<T>(report: &mut RunReport, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f();
    report.timings.insert(stage.to_string(), t.elapsed().as_secs_f64());
    out
}

#[derive(Serialize)]
struct SolveSummary {
    h: f64,
    unknowns: usize,
    residual: f64,
    tol: f64,
    sweeps: usize,
    newton_steps: usize,
    start_verified: bool,
    min_second_difference: f64,
    history: Vec<f64>,
}

impl SolveSummary {
    fn of(sol: &DiscreteSolution) -> Self {
        Self {
            h: sol.h(),
            unknowns: sol.values.len(),
            residual: sol.residual_norm(),
            tol: sol.tol,
            sweeps: sol.sweeps,
            newton_steps: sol.newton_steps,
            start_verified: sol.start_verified,
            min_second_difference: sol.min_second_difference,
            history: sol.history.clone(),
        }
    }
}

fn barrier_pair(ctx: &Context<'_>, report: &mut RunReport) -> Result<BarrierPair> {
    let spec = ctx.spec;
    let setup = timed(report, "barrier_setup", || Ok(BarrierSetup::new(&ctx.problem, spec.seed)?))?;
    let c = setup.c_star + spec.c_offset;
    let pair = timed(report, "barrier_pair", || Ok(setup.pair(c, spec.seed)?))?;
    report.record("c_star", setup.c_star);
    report.record("c", c);
    report.record("rbar", setup.rbar);
    report.record("beta1", setup.beta1);
    report.record("beta2", setup.beta2);
    report.record("d", pair.d);
    report.record("d2", pair.d2);
    if let Some(cert) = &pair.certificate {
        report.record("pair_certificate", cert);
        report.push(Criterion::at_least("pair_min_margin", cert.min_margin, 0.0));
        report.push(Criterion::at_most("pair_touching_error", cert.touching_error, spec.thresholds.touching));
    }
    Ok(pair)
}

fn solve_with_barrier(ctx: &Context<'_>, pair: &BarrierPair, h: f64, init_sub: bool) -> Result<DiscreteSolution> {
    let p = &ctx.problem;
    let problem = ProblemSpec {
        far_field: p.far_field.with_c(pair.c),
        ..p.clone()
    };
    let grid = Arc::new(Grid::new(p.n, p.domain.as_ref(), p.r_out, h, ctx.spec.solver.width)?);
    let sub = |x: &[f64]| pair.sub(x);
    let sup = |x: &[f64]| pair.sup(x);
    let init = if init_sub {
        Init::Subsolution(&sub)
    } else {
        Init::Supersolution(&sup)
    };
    Ok(solve_dirichlet(&problem, grid, init, &ctx.spec.solver.options())?)
}

/// Barrier pair, radial decay rate, and grid solves checked against the pair.
fn existence(ctx: &Context<'_>, report: &mut RunReport) -> Result<()> {
    let spec = ctx.spec;
    let th = &spec.thresholds;
    let n = ctx.problem.n;
    let pair = barrier_pair(ctx, report)?;

    let expected = expected_sigma(n, ctx.problem.rhs.beta());
    let [lo, hi] = spec.fit.oracle_window;
    let rate = timed(report, "radial_rate", || {
        Ok(verify_rate(RateSource::Profile(pair.super_profile()), expected, lo, hi, Some(th.radial_band))?)
    })?;
    if let (Some(fit), Some(path)) = (&rate.fit, ctx.artifact("radial_decay.csv")) {
        fit.write_plot_csv(&path)?;
    }
    report.push(Criterion::within("radial_sigma", rate.sigma_hat.unwrap_or(f64::NAN), expected, th.radial_band));
    if let Some(g) = rate.gradient_sigma {
        report.push(Criterion::within("radial_gradient_sigma", g, expected + 1.0, th.radial_band));
    }
    report.record("radial_rate", &rate);

    let mut solves = Vec::new();
    for &h in &spec.solver.h {
        let sol = timed(report, &format!("solve_h{h}"), || solve_with_barrier(ctx, &pair, h, true))?;
        let slack = th.sandwich_factor * h * h;
        let (lower, upper, outer_gap) = barrier_excess(&sol, &pair);
        report.push(Criterion::at_most(format!("residual_h{h}"), sol.residual_norm(), sol.tol));
        report.push(Criterion::at_most(format!("below_sub_h{h}"), lower, slack));
        report.push(Criterion::at_most(format!("above_super_h{h}"), upper - outer_gap.max(0.0), slack));
        report.record(&format!("outer_gap_h{h}"), outer_gap);
        solves.push(SolveSummary::of(&sol));
        if h == ctx.finest_h() {
            if let (Some(c), Some(j)) = (ctx.artifact("solution.csv"), ctx.artifact("solution.json")) {
                sol.export(&c, &j)?;
            }
        }
    }
    report.record("solves", &solves);
    Ok(())
}

/// `max(sub - u)`, `max(u - sup)` over nodes, and `max(g - sup)` over the outer boundary.
///
/// By discrete comparison with the problem whose outer data is `sup`, the
/// grid solution may exceed `sup` by the outer gap plus consistency error.
fn barrier_excess(sol: &DiscreteSolution, pair: &BarrierPair) -> (f64, f64, f64) {
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for (i, &u) in sol.values.iter().enumerate() {
        let x = sol.point(i);
        lower = lower.max(pair.sub(&x) - u);
        upper = upper.max(u - pair.sup(&x));
    }
    let n = sol.grid.n;
    let outer_gap = sol
        .grid
        .boundary_points()
        .iter()
        .zip(&sol.boundary)
        .filter(|((_, kind), _)| *kind == BoundaryKind::Outer)
        .map(|((p, _), g)| g - pair.sup(&p[..n]))
        .fold(f64::NEG_INFINITY, f64::max);
    (lower, upper, outer_gap)
}

/// Sub- and super-initialized solves on the finest grid.
fn uniqueness(ctx: &Context<'_>, report: &mut RunReport) -> Result<()> {
    let pair = barrier_pair(ctx, report)?;
    let h = ctx.finest_h();
    let a = timed(report, "solve_from_sub", || solve_with_barrier(ctx, &pair, h, true))?;
    let b = timed(report, "solve_from_super", || solve_with_barrier(ctx, &pair, h, false))?;
    let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let tol = a.tol.max(b.tol);
    report.push(Criterion::at_most("residual_from_sub", a.residual_norm(), a.tol));
    report.push(Criterion::at_most("residual_from_super", b.residual_norm(), b.tol));
    report.push(Criterion::at_most("sub_super_gap", gap, ctx.spec.thresholds.uniqueness_factor * tol));
    report.record("from_sub", SolveSummary::of(&a));
    report.record("from_super", SolveSummary::of(&b));
    Ok(())
}

#[derive(Serialize)]
struct BigBallRow {
    radius: f64,
    centre_value: Option<f64>,
    sandwich: Option<exterior_ma::solver::SandwichCertificate>,
    solve: Option<SolveSummary>,
    error: Option<String>,
}

/// Big-ball solves squeezed between the radial envelope solutions.
fn big_ball(ctx: &Context<'_>, report: &mut RunReport) -> Result<()> {
    let spec = ctx.spec;
    let n = ctx.problem.n;
    let h = ctx.finest_h();
    let mut rows = Vec::new();
    for &radius in &spec.radii {
        let grid = Arc::new(Grid::new(n, None, radius, h, spec.solver.width)?);
        let out = timed(report, &format!("solve_R{radius}"), || {
            match solve_big_ball(&ctx.problem.rhs, n, radius, grid, &spec.solver.options()) {
                Ok(bb) => Ok(Ok(bb)),
                Err(e @ Error::Certificate(_)) => Ok(Err(e)),
                Err(e) => Err(LabError::Core(e)),
            }
        })?;
        match out {
            Ok(bb) => {
                let s = &bb.sandwich;
                report.push(Criterion::at_least(format!("lower_margin_R{radius}"), s.lower_margin, -s.slack));
                report.push(Criterion::at_least(format!("upper_margin_R{radius}"), s.upper_margin, -s.slack));
                report.push(Criterion::at_most(format!("residual_R{radius}"), bb.solution.residual_norm(), bb.solution.tol));
                let centre = (0..bb.solution.values.len())
                    .min_by(|&i, &j| norm(&bb.solution.point(i)).total_cmp(&norm(&bb.solution.point(j))))
                    .map(|i| bb.solution.values[i]);
                if let (Some(c), Some(j)) = (ctx.artifact(&format!("big_ball_R{radius}.csv")), ctx.artifact(&format!("big_ball_R{radius}.json"))) {
                    bb.solution.export(&c, &j)?;
                }
                rows.push(BigBallRow {
                    radius,
                    centre_value: centre,
                    sandwich: Some(bb.sandwich.clone()),
                    solve: Some(SolveSummary::of(&bb.solution)),
                    error: None,
                });
            }
            Err(e) => {
                report.push(Criterion::holds(format!("sandwich_R{radius}"), false));
                rows.push(BigBallRow {
                    radius,
                    centre_value: None,
                    sandwich: None,
                    solve: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    // in the plane the centre values drift like -m log R; logged, not asserted
    let drift: Vec<(f64, f64)> = rows
        .windows(2)
        .filter_map(|w| Some((w[1].radius, w[1].centre_value? - w[0].centre_value?)))
        .collect();
    report.record("centre_drift", drift);
    report.record("big_balls", rows);
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Log coefficient from radial samples and from a big-ball grid solve.
fn planar_log(ctx: &Context<'_>, report: &mut RunReport) -> Result<()> {
    let spec = ctx.spec;
    let th = &spec.thresholds;
    let rhs = &ctx.problem.rhs;
    let m = global_log_coefficient(&rhs.to_radial()?)?;
    report.record("m", m);

    let profile = ctx.global_profile(rhs)?;
    let [lo, hi] = spec.fit.oracle_window;
    let fit = timed(report, "oracle_fit", || {
        Ok(fit_far_field(&radial_samples(&profile, lo, hi, 8, 16), 2, true, &FitOptions::default())?)
    })?;
    report.push(Criterion::within_relative("d_oracle", fit.d.unwrap_or(f64::NAN), m, th.log_coefficient_radial));
    report.record("oracle_fit", &fit);
    if let Some(path) = ctx.artifact("oracle_decay.csv") {
        fit.write_plot_csv(&path)?;
    }

    let radius = ctx.problem.r_out;
    let grid = Arc::new(Grid::new(2, None, radius, ctx.finest_h(), spec.solver.width)?);
    let bb = timed(report, "grid_solve", || Ok(solve_big_ball(rhs, 2, radius, grid, &spec.solver.options())?))?;
    let [lo, hi] = spec.fit.grid_window;
    let grid_fit = fit_far_field(&bb.solution.samples_in(lo, hi), 2, true, &FitOptions::default())?;
    report.push(Criterion::at_most("grid_residual", bb.solution.residual_norm(), bb.solution.tol));
    report.push(Criterion::within_relative("d_grid", grid_fit.d.unwrap_or(f64::NAN), m, th.log_coefficient_grid));
    if let Some(path) = ctx.artifact("grid_decay.csv") {
        grid_fit.write_plot_csv(&path)?;
    }
    // the endpoint exponent is measured, never asserted
    report.record("grid_sigma_hat", grid_fit.sigma_hat);
    report.record("grid_fit", &grid_fit);
    report.record("grid_solve", SolveSummary::of(&bb.solution));
    report.record("sandwich", &bb.sandwich);
    Ok(())
}

/// Growth coefficient of `u - r²/2` for the sharpness source, with the `f ≡ 1` control.
fn sharpness(ctx: &Context<'_>, report: &mut RunReport) -> Result<()> {
    let th = &ctx.spec.thresholds;
    let rhs = &ctx.problem.rhs;
    let n = rhs.dim();
    let growth = sharpness_growth(&ctx.global_profile(rhs)?)?;
    let control = sharpness_growth(&ctx.global_profile(&RightHandSide::one(n))?)?;
    let expected = if n == 2 { 0.5 } else { 1.0 };
    report.push(Criterion::within_relative("leading_coefficient", growth.leading, expected, th.growth_band));
    report.push(Criterion::holds("unbounded", growth.unbounded));
    let control_max = std::iter::once(control.leading)
        .chain(control.lower.iter().cloned())
        .map(f64::abs)
        .fold(0.0, f64::max);
    report.push(Criterion::at_most("control_coefficients", control_max, th.growth_control));
    report.record("growth", &growth);
    report.record("control", &control);
    Ok(())
}

/// Decay ladder for `k = 0..=3`; a rung sequence growing by more than
/// `GROWTH_RATIO` at every step of the top window fails.
fn decay_condition(ctx: &Context<'_>, report: &mut RunReport) -> Result<()> {
    let rhs = &ctx.problem.rhs;
    let beta = ctx.spec.claimed_beta.unwrap_or(rhs.beta());
    let radii = default_ladder();
    let fa = validate_fa(rhs, beta, &radii, 3)?;
    for (k, s) in fa.suprema.iter().enumerate() {
        let top = &s[s.len().saturating_sub(GROWTH_WINDOW)..];
        let smallest_ratio = top
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { f64::INFINITY })
            .fold(f64::INFINITY, f64::min);
        let measured = if smallest_ratio.is_finite() { smallest_ratio } else { 0.0 };
        report.push(Criterion::at_most(format!("no_growth_k{k}"), measured, GROWTH_RATIO));
    }
    report.record("beta", beta);
    report.record("fa", &fa);
    Ok(())
}

/// Touching barriers on the hole boundary; in 3-D also the matched pair.
fn barrier(ctx: &Context<'_>, report: &mut RunReport) -> Result<()> {
    let spec = ctx.spec;
    let p = &ctx.problem;
    let domain = p.domain.as_ref().expect("validated");
    let envelope = if p.n == 3 {
        let setup = timed(report, "barrier_setup", || Ok(BarrierSetup::new(p, spec.seed)?))?;
        let c = setup.c_star + spec.c_offset;
        let pair = timed(report, "barrier_pair", || Ok(setup.pair(c, spec.seed)?))?;
        report.record("c_star", setup.c_star);
        report.record("c", c);
        report.record("d", pair.d);
        report.record("d2", pair.d2);
        if let Some(cert) = &pair.certificate {
            report.push(Criterion::at_least("pair_min_margin", cert.min_margin, 0.0));
            report.push(Criterion::at_most("pair_touching_error", cert.touching_error, spec.thresholds.touching));
            report.record("pair_certificate", cert);
        }
        setup.envelope
    } else {
        timed(report, "envelope", || Ok(BarrierEnvelope::build(domain, &p.rhs, &p.phi, None, spec.seed)?))?
    };
    let max_gap = envelope.certificates.iter().map(|c| c.max_gap).fold(f64::NEG_INFINITY, f64::max);
    let touching = envelope.certificates.iter().map(|c| c.touching_error).fold(0.0, f64::max);
    let max_tilt = envelope.certificates.iter().map(|c| c.tilt).fold(0.0, f64::max);
    report.push(Criterion::at_most("barrier_max_gap", max_gap, 0.0));
    report.push(Criterion::at_most("barrier_touching_error", touching, spec.thresholds.touching));
    report.record("barriers", envelope.barriers.len());
    report.record("majorant", envelope.majorant);
    report.record("c1", envelope.c1);
    report.record("max_tilt", max_tilt);
    Ok(())
}
