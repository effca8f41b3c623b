//! Monotone wide-stencil solver for `det D²u = f` on truncated exterior domains and balls.

mod grid;
mod linear;
mod operator;

pub use grid::{Arm, BoundaryKind, Grid, Stencil};
pub use linear::{bicgstab, CsrMatrix, LinearReport};
pub use operator::{ma_operator, min_second_difference};

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::ProblemSpec;
use crate::radial::exact_radial_solution;
use crate::rhs::{EnvelopeSide, RadialEnvelope, RightHandSide};
use operator::{active_frame, operator_with_slope};

/// Allowed negative second difference in a converged solution.
pub const CONVEXITY_TOL: f64 = 1e-8;

/// Newton diagonal floor.
const DIAGONAL_FLOOR: f64 = 1e-12;

const MAX_HALVINGS: usize = 30;

/// Sweeps over which the residual must drop by a relative `1e-3`.
const STAGNATION_WINDOW: usize = 500;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target residual `max |MA_h[u] - f|`.
    pub tol: f64,
    /// Monotone sweeps before Newton starts.
    pub monotone_sweeps: usize,
    /// Sweeps taken whenever a Newton line search fails.
    pub fallback_sweeps: usize,
    /// Total sweep budget.
    pub max_sweeps: usize,
    pub max_newton: usize,
    /// Fraction of the stable step `1 / L_i` used by the sweeps.
    pub safety: f64,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            monotone_sweeps: 50,
            fallback_sweeps: 200,
            max_sweeps: 20_000,
            max_newton: 100,
            safety: 0.9,
            linear_tol: 1e-10,
            linear_max_iter: 20_000,
        }
    }
}

/// Starting iterate of the solver.
pub enum Init<'a> {
    /// A function expected to be a discrete subsolution; verified on the grid.
    Subsolution(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
    /// A function expected to be a discrete supersolution; verified on the grid.
    Supersolution(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
    /// Nodal values used as given.
    Custom(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Subsolution,
    Supersolution,
    Custom,
}

/// Source values at the unknowns and Dirichlet values at the boundary points of a grid.
#[derive(Clone, Debug)]
pub struct DirichletData {
    pub source: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl DirichletData {
    /// Samples `f` at the nodes, `φ` on the hole and the far field on the truncation sphere.
    pub fn from_problem(problem: &ProblemSpec, grid: &Grid) -> Result<Self> {
        if grid.n != problem.n || grid.r_out != problem.r_out || grid.domain != problem.domain {
            return invalid("grid was not built for this problem");
        }
        let source = sample_source(&problem.rhs, grid);
        let boundary = grid.boundary_values(|p, kind| match kind {
            BoundaryKind::Inner => problem.phi.eval(p),
            BoundaryKind::Outer => problem.far_field.evaluate(p),
        });
        Ok(Self { source, boundary })
    }
}

/// `λ|x|²/2 + shift` with `λ^n ≥ max f` (`kind = Subsolution`) or `λ^n ≤ min f`
/// (`Supersolution`), shifted to sit below or above the boundary data. Such
/// paraboloids are exact discrete sub/supersolutions since the scheme is exact
/// on quadratics.
pub fn paraboloid_start(grid: &Grid, data: &DirichletData, kind: InitKind) -> Result<(f64, f64)> {
    let n = grid.n as f64;
    let half_sq = |p: &[f64]| 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let points = grid.boundary_points();
    if points.is_empty() {
        return invalid("grid has no boundary points");
    }
    let (lam, shift) = match kind {
        InitKind::Subsolution => {
            let fmax = data.source.iter().fold(0.0f64, |a, &b| a.max(b));
            let lam = fmax.powf(1.0 / n);
            let shift = points
                .iter()
                .zip(&data.boundary)
                .map(|((p, _), g)| g - lam * half_sq(&p[..grid.n]))
                .fold(f64::INFINITY, f64::min);
            (lam, shift)
        }
        InitKind::Supersolution => {
            let fmin = data.source.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            let lam = fmin.powf(1.0 / n);
            let shift = points
                .iter()
                .zip(&data.boundary)
                .map(|((p, _), g)| g - lam * half_sq(&p[..grid.n]))
                .fold(f64::NEG_INFINITY, f64::max);
            (lam, shift)
        }
        InitKind::Custom => return invalid("a paraboloid start is either a sub- or a supersolution"),
    };
    Ok((lam, shift))
}

fn sample_source(rhs: &RightHandSide, grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| rhs.eval(&grid.point(i)[..grid.n]))
        .collect()
}

/// A converged grid solution with its convergence record.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub boundary: Vec<f64>,
    pub source: Vec<f64>,
    /// `MA_h[u] - f` per node.
    pub residual: Vec<f64>,
    /// Residual ∞-norm after every sweep and Newton step, starting with the initial iterate.
    pub history: Vec<f64>,
    pub sweeps: usize,
    pub newton_steps: usize,
    pub wall_time: f64,
    pub tol: f64,
    pub init: InitKind,
    /// Whether the initial iterate passed the sub/supersolution check.
    pub start_verified: bool,
    pub min_second_difference: f64,
}

#[derive(Serialize)]
struct SolutionMeta<'a> {
    n: usize,
    h: f64,
    stencil_width: usize,
    r_out: f64,
    unknowns: usize,
    tol: f64,
    residual: f64,
    sweeps: usize,
    newton_steps: usize,
    wall_time: f64,
    init: InitKind,
    start_verified: bool,
    min_second_difference: f64,
    history: &'a [f64],
}

impl DiscreteSolution {
    pub fn residual_norm(&self) -> f64 {
        inf_norm(&self.residual)
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    pub fn width(&self) -> usize {
        self.grid.stencil.width
    }

    pub fn is_convex(&self) -> bool {
        self.min_second_difference >= -CONVEXITY_TOL
    }

    pub fn point(&self, id: usize) -> Vec<f64> {
        self.grid.point(id)[..self.grid.n].to_vec()
    }

    /// Largest `|u - exact|` over the nodes.
    pub fn max_error<F: Fn(&[f64]) -> f64 + Sync>(&self, exact: F) -> f64 {
        (0..self.values.len())
            .into_par_iter()
            .map(|i| (self.values[i] - exact(&self.grid.point(i)[..self.grid.n])).abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Node samples `(x, u)` with `r_min ≤ |x| ≤ r_max`.
    pub fn samples_in(&self, r_min: f64, r_max: f64) -> Vec<(Vec<f64>, f64)> {
        (0..self.values.len())
            .filter_map(|i| {
                let x = self.point(i);
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                (r >= r_min && r <= r_max).then(|| (x, self.values[i]))
            })
            .collect()
    }

    /// Writes `(x.., value, residual)` rows and a JSON metadata file.
    pub fn export(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let n = self.grid.n;
        let mut w = csv::Writer::from_path(csv_path)?;
        let mut header: Vec<&str> = ["x", "y", "z"][..n].to_vec();
        header.extend(["value", "residual"]);
        w.write_record(&header)?;
        for i in 0..self.values.len() {
            let p = self.grid.point(i);
            let mut row: Vec<String> = p[..n].iter().map(|v| v.to_string()).collect();
            row.push(self.values[i].to_string());
            row.push(self.residual[i].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        let meta = SolutionMeta {
            n,
            h: self.grid.h,
            stencil_width: self.grid.stencil.width,
            r_out: self.grid.r_out,
            unknowns: self.values.len(),
            tol: self.tol,
            residual: self.residual_norm(),
            sweeps: self.sweeps,
            newton_steps: self.newton_steps,
            wall_time: self.wall_time,
            init: self.init,
            start_verified: self.start_verified,
            min_second_difference: self.min_second_difference,
            history: &self.history,
        };
        std::fs::write(json_path, serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.par_iter().map(|x| x.abs()).reduce(|| 0.0, f64::max)
}

fn residuals(grid: &Grid, values: &[f64], data: &DirichletData) -> Vec<f64> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| ma_operator(values, grid, &data.boundary, i) - data.source[i])
        .collect()
}

/// Solves the problem's Dirichlet problem on `grid`.
pub fn solve_dirichlet(problem: &ProblemSpec, grid: Arc<Grid>, init: Init<'_>, opts: &SolverOptions) -> Result<DiscreteSolution> {
    let data = DirichletData::from_problem(problem, &grid)?;
    solve_with_data(grid, data, init, opts)
}

/// Solves `MA_h[u] = source` with the given boundary values.
///
/// Monotone sweeps `u ← u + τ_i (MA_h[u] - f)` come first; from a verified
/// subsolution every sweep must keep the residual nonnegative, so the iterates
/// increase. Damped Newton on the active-frame linearization then finishes,
/// with a block of sweeps whenever its line search fails.
pub fn solve_with_data(grid: Arc<Grid>, data: DirichletData, init: Init<'_>, opts: &SolverOptions) -> Result<DiscreteSolution> {
    let start = Instant::now();
    let m = grid.len();
    if data.source.len() != m || data.boundary.len() != grid.boundary_points().len() {
        return invalid("data does not match the grid");
    }
    if let Some(i) = (0..m).find(|&i| !(data.source[i] > 0.0)) {
        return Err(Error::NonPositiveSource {
            point: grid.point(i)[..grid.n].to_vec(),
            value: data.source[i],
        });
    }
    if let Some(v) = data.boundary.iter().find(|v| !v.is_finite()) {
        return invalid(format!("boundary value {v} is not finite"));
    }
    let eval_init = |f: &(dyn Fn(&[f64]) -> f64 + Sync)| -> Vec<f64> {
        (0..m).into_par_iter().map(|i| f(&grid.point(i)[..grid.n])).collect()
    };
    let (mut values, kind) = match init {
        Init::Subsolution(f) => (eval_init(f), InitKind::Subsolution),
        Init::Supersolution(f) => (eval_init(f), InitKind::Supersolution),
        Init::Custom(v) => {
            if v.len() != m {
                return invalid("custom initial values do not match the grid");
            }
            (v, InitKind::Custom)
        }
    };
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return invalid(format!("initial value at {:?} is not finite", &grid.point(i)[..grid.n]));
    }
    let scale = 1.0 + data.source.iter().fold(0.0f64, |a, &b| a.max(b));
    let verify_tol = 1e-9 * scale;
    let res = residuals(&grid, &values, &data);
    let start_verified = match kind {
        InitKind::Subsolution => res.iter().all(|&r| r >= -verify_tol),
        InitKind::Supersolution => res.iter().all(|&r| r <= verify_tol),
        InitKind::Custom => false,
    };
    let check_monotone = start_verified && kind == InitKind::Subsolution;

    let mut state = IterState {
        grid: &grid,
        data: &data,
        opts,
        history: vec![inf_norm(&res)],
        sweep_history: Vec::new(),
        sweeps: 0,
        check_monotone,
        verify_tol,
    };
    state.sweep_block(&mut values, opts.monotone_sweeps)?;
    let mut newton_steps = 0;
    let mut res = residuals(&grid, &values, &data);
    let mut norm = inf_norm(&res);
    while norm > opts.tol {
        if newton_steps >= opts.max_newton {
            return Err(Error::NonConvergence {
                iterations: newton_steps + state.sweeps,
                residual: norm,
                history: state.history,
            });
        }
        newton_steps += 1;
        match newton_step(&grid, &data, &values, &res, norm, opts) {
            Some((next, next_res, next_norm)) => {
                values = next;
                res = next_res;
                norm = next_norm;
                state.history.push(norm);
            }
            None => {
                // the monotone phase never increases the distance to the solution
                state.check_monotone = false;
                state.sweep_block(&mut values, opts.fallback_sweeps)?;
                res = residuals(&grid, &values, &data);
                norm = inf_norm(&res);
            }
        }
    }
    let (history, sweeps) = (state.history, state.sweeps);
    let min_sd = (0..m)
        .into_par_iter()
        .map(|i| min_second_difference(&values, &grid, &data.boundary, i))
        .reduce(|| f64::INFINITY, f64::min);
    Ok(DiscreteSolution {
        grid,
        values,
        boundary: data.boundary,
        source: data.source,
        residual: res,
        history,
        sweeps,
        newton_steps,
        wall_time: start.elapsed().as_secs_f64(),
        tol: opts.tol,
        init: kind,
        start_verified,
        min_second_difference: min_sd,
    })
}

struct IterState<'a> {
    grid: &'a Grid,
    data: &'a DirichletData,
    opts: &'a SolverOptions,
    history: Vec<f64>,
    sweep_history: Vec<f64>,
    sweeps: usize,
    check_monotone: bool,
    verify_tol: f64,
}

impl IterState<'_> {
    /// Jacobi sweeps: every node reads the previous iterate.
    fn sweep_block(&mut self, values: &mut Vec<f64>, count: usize) -> Result<()> {
        let (grid, data) = (self.grid, self.data);
        for _ in 0..count {
            if self.sweeps >= self.opts.max_sweeps {
                return Err(Error::NonConvergence {
                    iterations: self.sweeps,
                    residual: *self.history.last().unwrap_or(&f64::NAN),
                    history: std::mem::take(&mut self.history),
                });
            }
            let updates: Vec<(f64, f64)> = (0..grid.len())
                .into_par_iter()
                .map(|i| {
                    let (ma, slope) = operator_with_slope(grid, values, &data.boundary, i);
                    let r = ma - data.source[i];
                    (r, self.opts.safety / slope.max(DIAGONAL_FLOOR))
                })
                .collect();
            if self.check_monotone {
                if let Some((node, &(r, tau))) = updates
                    .iter()
                    .enumerate()
                    .find(|(_, (r, _))| *r < -self.verify_tol)
                {
                    return Err(Error::MonotonicityViolation {
                        node,
                        amount: -r * tau,
                    });
                }
            }
            let norm = updates.iter().fold(0.0f64, |a, (r, _)| a.max(r.abs()));
            values
                .par_iter_mut()
                .zip(&updates)
                .for_each(|(v, (r, tau))| *v += tau * r);
            self.sweeps += 1;
            self.history.push(norm);
            self.sweep_history.push(norm);
            let k = self.sweep_history.len();
            if k > STAGNATION_WINDOW {
                let old = self.sweep_history[k - 1 - STAGNATION_WINDOW];
                if norm > (1.0 - 1e-3) * old && norm > self.opts.tol {
                    return Err(Error::NonConvergence {
                        iterations: self.sweeps,
                        residual: norm,
                        history: std::mem::take(&mut self.history),
                    });
                }
            }
            if norm <= self.opts.tol {
                break;
            }
        }
        Ok(())
    }
}

/// `-∂(MA_h - f)/∂u` from the active frame at every node.
fn jacobian(grid: &Grid, data: &DirichletData, values: &[f64]) -> CsrMatrix {
    let n = grid.n;
    let rows: Vec<Vec<(u32, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (_, _, diffs) = active_frame(grid, values, &data.boundary, i);
            let mut row = Vec::with_capacity(1 + 2 * n);
            let mut diag = 0.0;
            for k in 0..n {
                let sd = &diffs[k];
                let weight = if sd.delta > 0.0 {
                    (0..n).filter(|&j| j != k).map(|j| diffs[j].delta.max(0.0)).product()
                } else {
                    1.0
                };
                diag += weight * 2.0 / (sd.a * sd.b);
                if let Arm::Node(j) = sd.plus {
                    row.push((j, -weight * 2.0 / ((sd.a + sd.b) * sd.a)));
                }
                if let Arm::Node(j) = sd.minus {
                    row.push((j, -weight * 2.0 / ((sd.a + sd.b) * sd.b)));
                }
            }
            row.push((i as u32, diag.max(DIAGONAL_FLOOR)));
            row
        })
        .collect();
    CsrMatrix::from_rows(rows)
}

/// One damped Newton step; `None` when no halving decreases the residual.
fn newton_step(
    grid: &Grid,
    data: &DirichletData,
    values: &[f64],
    res: &[f64],
    norm: f64,
    opts: &SolverOptions,
) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let jac = jacobian(grid, data, values);
    let mut step = vec![0.0; values.len()];
    bicgstab(&jac, res, &mut step, opts.linear_tol, opts.linear_max_iter);
    if step.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..=MAX_HALVINGS {
        let trial: Vec<f64> = values.par_iter().zip(&step).map(|(v, s)| v + t * s).collect();
        let trial_res = residuals(grid, &trial, data);
        let trial_norm = inf_norm(&trial_res);
        if trial_norm < norm {
            return Some((trial, trial_res, trial_norm));
        }
        t *= 0.5;
    }
    None
}

/// Two-sided radial bound for a big-ball solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichCertificate {
    pub radius: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    /// `min (u - h₋ - β₋)` over nodes.
    pub lower_margin: f64,
    /// `min (h₊ + β₊ - u)` over nodes.
    pub upper_margin: f64,
    pub slack: f64,
    pub passed: bool,
}

/// A big-ball solve and its sandwich certificate.
#[derive(Clone, Debug)]
pub struct BigBallSolution {
    pub solution: DiscreteSolution,
    pub sandwich: SandwichCertificate,
}

/// Solves `det D²u = f` in `B_R` with `u = R²/2` on the sphere, starting from
/// the radial subsolution built on the radial majorant of `f`.
pub fn solve_big_ball(rhs: &RightHandSide, n: usize, radius: f64, grid: Arc<Grid>, opts: &SolverOptions) -> Result<BigBallSolution> {
    if rhs.dim() != n || grid.n != n {
        return invalid("dimension mismatch between source, grid and n");
    }
    if grid.domain.is_some() || (grid.r_out - radius).abs() > 1e-12 * radius {
        return invalid(format!("the big-ball grid must be a plain ball of radius {radius}"));
    }
    let upper = RadialEnvelope::build(rhs, EnvelopeSide::Upper, 4.0 * radius)?;
    let lower = RadialEnvelope::build(rhs, EnvelopeSide::Lower, 4.0 * radius)?;
    // the larger source gives the lower barrier
    let h_minus = exact_radial_solution(Arc::new(upper), n, 0.0, 0.0, 0.0)?;
    let h_plus = exact_radial_solution(Arc::new(lower), n, 0.0, 0.0, 0.0)?;
    let edge = 0.5 * radius * radius;
    let beta_minus = edge - h_minus.u(radius);
    let beta_plus = edge - h_plus.u(radius);
    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sub = |x: &[f64]| h_minus.u(norm(x)) + beta_minus;
    let data = DirichletData {
        source: sample_source(rhs, &grid),
        boundary: vec![edge; grid.boundary_points().len()],
    };
    let solution = solve_with_data(grid, data, Init::Subsolution(&sub), opts)?;
    let g = &solution.grid;
    let (lower_margin, upper_margin) = (0..solution.values.len())
        .into_par_iter()
        .map(|i| {
            let r = norm(&g.point(i)[..n]);
            let u = solution.values[i];
            (u - h_minus.u(r) - beta_minus, h_plus.u(r) + beta_plus - u)
        })
        .reduce(|| (f64::INFINITY, f64::INFINITY), |a, b| (a.0.min(b.0), a.1.min(b.1)));
    let w = g.stencil.width as f64;
    let slack = 10.0 * (g.h * g.h + 1.0 / (w * w)) * radius * radius;
    let passed = lower_margin >= -slack && upper_margin >= -slack;
    let sandwich = SandwichCertificate {
        radius,
        beta_minus,
        beta_plus,
        lower_margin,
        upper_margin,
        slack,
        passed,
    };
    if !passed {
        return Err(Error::Certificate(format!(
            "sandwich at R = {radius}: margins {lower_margin:e} / {upper_margin:e} below -{slack:e}"
        )));
    }
    Ok(BigBallSolution { solution, sandwich })
}

/// Outcome of a nodewise ordering check `sol1 ≤ sol2`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Largest `sol1 - sol2` over nodes.
    pub worst_violation: f64,
    pub worst_node: usize,
    pub worst_point: Vec<f64>,
    pub allowance: f64,
    pub ordered: bool,
}

/// Checks `sol1 ≤ sol2 + 10 max(tol₁, tol₂)` for solutions with `f1 ≥ f2` and
/// boundary data of `sol1` below that of `sol2`.
pub fn comparison_check(sol1: &DiscreteSolution, sol2: &DiscreteSolution, f1: &RightHandSide, f2: &RightHandSide) -> Result<ComparisonReport> {
    if !sol1.grid.same_layout(&sol2.grid) {
        return invalid("solutions live on different grids");
    }
    let g = &sol1.grid;
    if let Some(i) = (0..g.len()).find(|&i| {
        let x = &g.point(i)[..g.n];
        f1.eval(x) < f2.eval(x)
    }) {
        return invalid(format!("f1 < f2 at {:?}", &g.point(i)[..g.n]));
    }
    if sol1.boundary.iter().zip(&sol2.boundary).any(|(a, b)| a > b) {
        return invalid("boundary data of the first solution exceed those of the second");
    }
    let allowance = 10.0 * sol1.tol.max(sol2.tol);
    let (worst_node, worst_violation) = sol1
        .values
        .iter()
        .zip(&sol2.values)
        .map(|(a, b)| a - b)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(ComparisonReport {
        worst_violation,
        worst_node,
        worst_point: g.point(worst_node)[..g.n].to_vec(),
        allowance,
        ordered: worst_violation <= allowance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::InnerDomain;
    use crate::far_field::QuadraticFarField;
    use crate::problem::BoundaryData;

    fn annulus(h: f64, width: usize) -> (ProblemSpec, Arc<Grid>) {
        let d = InnerDomain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = ProblemSpec::new(
            RightHandSide::one(2),
            Some(d.clone()),
            BoundaryData::constant(0.5),
            QuadraticFarField::identity(2, 0.0).unwrap(),
            4.0,
        )
        .unwrap();
        let g = Arc::new(Grid::new(2, Some(&d), 4.0, h, width).unwrap());
        (p, g)
    }

    fn paraboloid(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn annulus_recovers_paraboloid_from_subsolution() {
        let (p, g) = annulus(0.25, 2);
        // λ|x|²/2 + 8(1 - λ) sits below the data on both circles
        let lam = 1.2;
        let sub = move |x: &[f64]| lam * paraboloid(x) + 8.0 * (1.0 - lam);
        let sol = solve_dirichlet(&p, g, Init::Subsolution(&sub), &SolverOptions::default()).unwrap();
        assert!(sol.start_verified);
        assert!(sol.residual_norm() <= 1e-9);
        assert!(sol.max_error(paraboloid) < 1e-8, "{}", sol.max_error(paraboloid));
        assert!(sol.is_convex());
    }

    #[test]
    fn sub_and_super_starts_agree() {
        let (p, g) = annulus(0.25, 3);
        let sub = |x: &[f64]| 1.2 * paraboloid(x) - 1.6;
        let sup = |x: &[f64]| 0.8 * paraboloid(x) + 1.6;
        let opts = SolverOptions::default();
        let a = solve_dirichlet(&p, g.clone(), Init::Subsolution(&sub), &opts).unwrap();
        let b = solve_dirichlet(&p, g, Init::Supersolution(&sup), &opts).unwrap();
        assert!(b.start_verified);
        let gap = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap <= 10.0 * opts.tol, "{gap}");
    }

    #[test]
    fn larger_source_gives_smaller_solution() {
        let (p, g) = annulus(0.25, 2);
        let opts = SolverOptions::default();
        let f1 = RightHandSide::constant(2, 1.2).unwrap();
        let p1 = ProblemSpec { rhs: f1.clone(), ..p.clone() };
        let sub = |x: &[f64]| 1.5 * paraboloid(x) - 4.0;
        let s1 = solve_dirichlet(&p1, g.clone(), Init::Subsolution(&sub), &opts).unwrap();
        let s2 = solve_dirichlet(&p, g, Init::Subsolution(&sub), &opts).unwrap();
        let rep = comparison_check(&s1, &s2, &f1, &p.rhs).unwrap();
        assert!(rep.ordered);
        assert!(rep.worst_violation < 0.0);
        assert!(comparison_check(&s2, &s1, &p.rhs, &f1).is_err());
    }

    #[test]
    fn rejects_nonpositive_source_and_foreign_grid() {
        let (p, g) = annulus(0.5, 1);
        let mut data = DirichletData::from_problem(&p, &g).unwrap();
        data.source[0] = 0.0;
        let r = solve_with_data(g.clone(), data, Init::Custom(vec![0.0; g.len()]), &SolverOptions::default());
        assert!(matches!(r, Err(Error::NonPositiveSource { .. })));
        let other = Grid::new(2, None, 4.0, 0.5, 1).unwrap();
        assert!(DirichletData::from_problem(&p, &other).is_err());
    }

    #[test]
    fn big_ball_with_unit_source_is_the_paraboloid() {
        let g = Arc::new(Grid::new(2, None, 4.0, 0.25, 2).unwrap());
        let bb = solve_big_ball(&RightHandSide::one(2), 2, 4.0, g, &SolverOptions::default()).unwrap();
        assert!(bb.sandwich.passed);
        assert!(bb.sandwich.beta_minus.abs() < 1e-9);
        assert!(bb.solution.max_error(paraboloid) < 1e-8);
    }

    #[test]
    fn exhausted_budget_is_non_convergence() {
        let (p, g) = annulus(0.25, 1);
        let opts = SolverOptions {
            monotone_sweeps: 0,
            max_newton: 0,
            ..SolverOptions::default()
        };
        let start: Vec<f64> = (0..g.len()).map(|i| 0.9 * paraboloid(&g.point(i)[..2])).collect();
        let r = solve_dirichlet(&p, g, Init::Custom(start), &opts);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
