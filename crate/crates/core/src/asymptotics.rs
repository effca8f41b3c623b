//! Far-field expansion fitting and decay-rate checks.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::domain::sphere_directions;
use crate::error::{invalid, Error, Result};
use crate::radial::RadialProfile;
use crate::solver::DiscreteSolution;

/// Ratio between consecutive annulus radii (half-octave bins).
pub const ANNULUS_RATIO: f64 = std::f64::consts::SQRT_2;

/// Minimum samples per annulus.
pub const MIN_PER_ANNULUS: usize = 30;

/// `|det A - 1|` above which a fit is flagged.
pub const DET_FLAG: f64 = 1e-3;

/// Residual maxima below `ZERO_RESIDUAL · scale` count as an exact fit.
const ZERO_RESIDUAL: f64 = 1e-11;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fit `|x|^-σ` alongside the polynomial basis, scanning `σ` in this range.
    pub decay_search: Option<(f64, f64)>,
    pub annulus_ratio: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            decay_search: Some((0.2, 4.0)),
            annulus_ratio: ANNULUS_RATIO,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct AnnulusResidual {
    pub r_inner: f64,
    pub r_outer: f64,
    /// Radius of the sample attaining the maximum.
    pub r: f64,
    /// `max |u - (½x'Ax + b·x + c + d log|x|)|` over the annulus.
    pub rho: f64,
    pub count: usize,
}

/// Recovered far-field data and residual decay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub n: usize,
    /// Row-major symmetric matrix.
    pub a: Vec<f64>,
    pub det_a: f64,
    pub det_flagged: bool,
    pub positive_definite: bool,
    pub b: Vec<f64>,
    pub c: f64,
    pub d: Option<f64>,
    /// Exponent and coefficient of the fitted `κ|x|^-σ` term.
    pub decay_exponent: Option<f64>,
    pub decay_coefficient: f64,
    pub annuli: Vec<AnnulusResidual>,
    /// `-slope` of `log ρ_j` against `log r_j`; `None` when the residuals vanish.
    pub sigma_hat: Option<f64>,
    /// Twice the standard error of the slope.
    pub sigma_halfwidth: f64,
    pub window: (f64, f64),
}

impl ExpansionFit {
    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.a)
    }

    /// `(log r, log ρ)` rows for plotting.
    pub fn write_plot_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["log_r", "log_rho"])?;
        for a in &self.annuli {
            w.write_record(&[a.r.ln().to_string(), a.rho.ln().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Polynomial (and optional log) basis row at `x`.
fn basis_row(x: &[f64], include_log: bool) -> Vec<f64> {
    let n = x.len();
    let mut row = Vec::with_capacity(n * (n + 1) / 2 + n + 2);
    for i in 0..n {
        for j in i..n {
            row.push(if i == j { 0.5 * x[i] * x[i] } else { x[i] * x[j] });
        }
    }
    row.extend_from_slice(x);
    row.push(1.0);
    if include_log {
        row.push(norm(x).ln());
    }
    row
}

struct LinearFit {
    coef: DVector<f64>,
    rss: f64,
}

/// Column-scaled least squares via SVD; errors on numerical rank deficiency.
fn least_squares(m: &DMatrix<f64>, y: &DVector<f64>) -> Result<LinearFit> {
    let mut scaled = m.clone();
    let scales: Vec<f64> = (0..m.ncols())
        .map(|j| {
            let s = m.column(j).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).unscale_mut(*s);
    }
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Fit(format!(
            "rank-deficient design (singular values {smin:e} / {smax:e})"
        )));
    }
    let mut coef = svd
        .solve(y, 0.0)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let rss = (&scaled * &coef - y).norm_squared();
    for (j, s) in scales.iter().enumerate() {
        coef[j] /= s;
    }
    Ok(LinearFit { coef, rss })
}

/// Geometric bins covering `[r_min, r_max]`.
fn annulus_edges(r_min: f64, r_max: f64, ratio: f64) -> Vec<f64> {
    let count = ((r_max / r_min).ln() / ratio.ln() - 1e-9).ceil().max(1.0) as usize;
    let step = (r_max / r_min).powf(1.0 / count as f64);
    (0..=count).map(|k| r_min * step.powi(k as i32)).collect()
}

/// Least-squares fit of `½x'Ax + b·x + c (+ d log|x|)` to samples.
///
/// The polynomial part is fitted on the outer half of the annuli, optionally
/// together with a term `κ|x|^-σ` whose exponent is chosen by minimizing the
/// residual (variable projection), which keeps slowly decaying corrections out
/// of `c`. Annulus residuals exclude that term, so `σ̂` measures the decay of
/// `u` minus the expansion.
pub fn fit_far_field(samples: &[(Vec<f64>, f64)], n: usize, include_log: bool, opts: &FitOptions) -> Result<ExpansionFit> {
    if include_log && n != 2 {
        return invalid("the log term belongs to n = 2 only");
    }
    if samples.iter().any(|(x, u)| x.len() != n || !u.is_finite()) {
        return invalid("samples must be finite points of the stated dimension");
    }
    let radii: Vec<f64> = samples.iter().map(|(x, _)| norm(x)).collect();
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    if !(r_min > 0.0) {
        return invalid("samples must avoid the origin");
    }
    let edges = annulus_edges(r_min, r_max * (1.0 + 1e-12), opts.annulus_ratio);
    let bins = edges.len() - 1;
    let bin_of = |r: f64| edges.partition_point(|&e| e <= r).clamp(1, bins) - 1;
    let mut counts = vec![0usize; bins];
    for &r in &radii {
        counts[bin_of(r)] += 1;
    }
    if bins < 3 || counts.iter().any(|&c| c < MIN_PER_ANNULUS) {
        return Err(Error::Fit(format!(
            "need at least 3 annuli with {MIN_PER_ANNULUS} samples each, got counts {counts:?}"
        )));
    }
    let outer_start = edges[bins / 2];
    let fit_idx: Vec<usize> = (0..samples.len()).filter(|&i| radii[i] >= outer_start).collect();
    let p = basis_row(&samples[0].0, include_log).len();
    let base = DMatrix::from_fn(fit_idx.len(), p, |i, j| basis_row(&samples[fit_idx[i]].0, include_log)[j]);
    let y = DVector::from_iterator(fit_idx.len(), fit_idx.iter().map(|&i| samples[i].1));
    let with_decay = |sigma: f64| -> Result<LinearFit> {
        let mut m = base.clone().insert_column(p, 0.0);
        for (row, &i) in fit_idx.iter().enumerate() {
            m[(row, p)] = radii[i].powf(-sigma);
        }
        least_squares(&m, &y)
    };
    let (coef, decay) = match opts.decay_search {
        None => (least_squares(&base, &y)?.coef, None),
        Some((lo, hi)) => {
            let rss = |s: f64| with_decay(s).map(|f| f.rss).unwrap_or(f64::INFINITY);
            let grid: Vec<f64> = (0..=48).map(|k| lo + (hi - lo) * k as f64 / 48.0).collect();
            let values: Vec<f64> = grid.iter().map(|&s| rss(s)).collect();
            let k = (0..grid.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
            let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
            let (mut fc, mut fd) = (rss(c), rss(d));
            for _ in 0..80 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = rss(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = rss(d);
                }
            }
            let sigma = 0.5 * (a + b);
            let fit = with_decay(sigma)?;
            let kappa = fit.coef[p];
            (fit.coef.rows(0, p).into_owned(), Some((sigma, kappa)))
        }
    };

    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            a[(i, j)] = coef[k];
            a[(j, i)] = coef[k];
            k += 1;
        }
    }
    let b: Vec<f64> = (0..n).map(|i| coef[k + i]).collect();
    let c = coef[k + n];
    let d = include_log.then(|| coef[k + n + 1]);
    let det_a = a.determinant();
    let positive_definite = SymmetricEigen::new(a.clone()).eigenvalues.iter().all(|&l| l > 0.0);

    let scale = samples.iter().fold(0.0f64, |m, (_, u)| m.max(u.abs())).max(1.0);
    let mut annuli: Vec<AnnulusResidual> = (0..bins)
        .map(|j| AnnulusResidual {
            r_inner: edges[j],
            r_outer: edges[j + 1],
            r: edges[j],
            rho: 0.0,
            count: counts[j],
        })
        .collect();
    for (i, (x, u)) in samples.iter().enumerate() {
        let row = basis_row(x, include_log);
        let model: f64 = row.iter().zip(coef.iter()).map(|(r, c)| r * c).sum();
        let res = (u - model).abs();
        let ann = &mut annuli[bin_of(radii[i])];
        if res > ann.rho {
            ann.rho = res;
            ann.r = radii[i];
        }
    }
    let exact = annuli.iter().all(|a| a.rho <= ZERO_RESIDUAL * scale);
    let (sigma_hat, sigma_halfwidth) = if exact {
        (None, f64::NAN)
    } else {
        let pts: Vec<(f64, f64)> = annuli
            .iter()
            .filter(|a| a.rho > 0.0)
            .map(|a| (a.r.ln(), a.rho.ln()))
            .collect();
        let (slope, se) = regression_slope(&pts);
        (Some(-slope), 2.0 * se)
    };
    let (decay_exponent, decay_coefficient) = match decay {
        Some((s, k)) => (Some(s), k),
        None => (None, 0.0),
    };
    Ok(ExpansionFit {
        n,
        a: a.transpose().as_slice().to_vec(),
        det_a,
        det_flagged: (det_a - 1.0).abs() > DET_FLAG,
        positive_definite,
        b,
        c,
        d,
        decay_exponent,
        decay_coefficient,
        annuli,
        sigma_hat,
        sigma_halfwidth,
        window: (r_min, r_max),
    })
}

/// Least-squares slope and its standard error.
fn regression_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    if pts.len() < 3 {
        return (slope, f64::INFINITY);
    }
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    (slope, (rss / (k - 2.0) / sxx).sqrt())
}

/// Samples of a radial profile on spheres: `per_octave` radii per doubling,
/// each with `directions` points.
pub fn radial_samples(profile: &RadialProfile, r_min: f64, r_max: f64, per_octave: usize, directions: usize) -> Vec<(Vec<f64>, f64)> {
    let n = profile.n();
    let dirs = sphere_directions(n, directions);
    let count = ((r_max / r_min).log2() * per_octave as f64).ceil() as usize;
    let mut out = Vec::new();
    for k in 0..=count {
        let r = r_min * (r_max / r_min).powf(k as f64 / count as f64);
        let u = profile.u(r);
        for m in 0..dirs.len() {
            // stagger directions between radii so annuli see varied angles
            let x: Vec<f64> = dirs[(k * 7 + m) % dirs.len()].iter().map(|a| a * r).collect();
            out.push((x, u));
        }
    }
    out
}

/// Expected decay exponent of `u` minus its expansion: `min{β, n} - 2` for
/// `n = 3` and the endpoint `min{β - 2, 2}` for `n = 2`; `β = ∞` when `f ≡ 1`
/// near infinity.
pub fn expected_sigma(n: usize, beta: f64) -> f64 {
    if n == 2 {
        (beta - 2.0).min(2.0)
    } else {
        beta.min(n as f64) - 2.0
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// What a rate check was run on.
pub enum RateSource<'a> {
    Profile(&'a RadialProfile),
    Grid(&'a DiscreteSolution),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub sigma_expected: f64,
    pub sigma_hat: Option<f64>,
    pub tolerance: f64,
    pub fit: Option<ExpansionFit>,
    /// Measured exponent of the gradient residual (profiles only).
    pub gradient_sigma: Option<f64>,
    pub gradient_verdict: Option<Verdict>,
    pub verdict: Verdict,
    pub note: String,
}

/// Radial tolerance band on exponents.
pub const RADIAL_BAND: f64 = 0.05;
/// Grid tolerance band on exponents.
pub const GRID_BAND: f64 = 0.15;

/// Fits the expansion on `[r_min, r_max]` and compares `σ̂` with `expected`.
/// Windows narrower than two octaves are inconclusive; grid windows must stay
/// inside half the truncation radius.
pub fn verify_rate(source: RateSource<'_>, expected: f64, r_min: f64, r_max: f64, band: Option<f64>) -> Result<RateReport> {
    let inconclusive = |note: String, tol: f64| RateReport {
        sigma_expected: expected,
        sigma_hat: None,
        tolerance: tol,
        fit: None,
        gradient_sigma: None,
        gradient_verdict: None,
        verdict: Verdict::Inconclusive,
        note,
    };
    match source {
        RateSource::Profile(profile) => {
            let tol = band.unwrap_or(RADIAL_BAND);
            if r_max / r_min < 4.0 {
                return Ok(inconclusive(format!("window [{r_min}, {r_max}] spans under two octaves"), tol));
            }
            let n = profile.n();
            let samples = radial_samples(profile, r_min, r_max, 8, if n == 2 { 16 } else { 24 });
            let fit = fit_far_field(&samples, n, n == 2, &FitOptions::default())?;
            let d = fit.d.unwrap_or(0.0);
            let count = 48;
            let pts: Vec<(f64, f64)> = (0..=count)
                .map(|k| r_min * (r_max / r_min).powf(k as f64 / count as f64))
                .map(|r| (r, (profile.u_prime(r) - r - d / r).abs()))
                .filter(|p| p.1 > 0.0)
                .map(|(r, g)| (r.ln(), g.ln()))
                .collect();
            let gradient_sigma = (pts.len() >= 3).then(|| -regression_slope(&pts).0);
            let gradient_verdict = gradient_sigma.map(|g| verdict_for(g, expected + 1.0, tol));
            let verdict = match fit.sigma_hat {
                Some(s) => verdict_for(s, expected, tol),
                None => Verdict::Inconclusive,
            };
            Ok(RateReport {
                sigma_expected: expected,
                sigma_hat: fit.sigma_hat,
                tolerance: tol,
                fit: Some(fit),
                gradient_sigma,
                gradient_verdict,
                verdict,
                note: String::new(),
            })
        }
        RateSource::Grid(sol) => {
            let tol = band.unwrap_or(GRID_BAND);
            let r_out = sol.grid.r_out;
            if r_max > 0.5 * r_out + 1e-12 {
                return invalid(format!("grid windows must end by R_out/2 = {}", 0.5 * r_out));
            }
            if r_max / r_min < 4.0 {
                return Ok(inconclusive(format!("window [{r_min}, {r_max}] spans under two octaves"), tol));
            }
            let n = sol.grid.n;
            let samples = sol.samples_in(r_min, r_max);
            let fit = fit_far_field(&samples, n, n == 2, &FitOptions::default())?;
            let verdict = match fit.sigma_hat {
                Some(s) => verdict_for(s, expected, tol),
                None => Verdict::Inconclusive,
            };
            Ok(RateReport {
                sigma_expected: expected,
                sigma_hat: fit.sigma_hat,
                tolerance: tol,
                fit: Some(fit),
                gradient_sigma: None,
                gradient_verdict: None,
                verdict,
                note: String::new(),
            })
        }
    }
}

fn verdict_for(measured: f64, expected: f64, tol: f64) -> Verdict {
    if (measured - expected).abs() <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Fitted growth of `u - r²/2` for a source without a constant-c expansion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub n: usize,
    /// Coefficient of `log r` (n = 3) or `(log r)²` (n = 2).
    pub leading: f64,
    /// Remaining coefficients: `[constant]` (n = 3) or `[log r, constant]` (n = 2).
    pub lower: Vec<f64>,
    pub window: (f64, f64),
    pub unbounded: bool,
    pub verdict: String,
}

/// Leading coefficients below this count as a bounded correction.
pub const GROWTH_THRESHOLD: f64 = 1e-6;

/// Fits `w = u - r²/2` on `[10², 10⁴]` against `{log r, 1}` (n = 3) or
/// `{(log r)², log r, 1}` (n = 2).
pub fn sharpness_growth(profile: &RadialProfile) -> Result<GrowthReport> {
    let n = profile.n();
    let (lo, hi) = (1e2, 1e4);
    if profile.start() > lo {
        return invalid("profile must cover [1e2, 1e4]");
    }
    let count = 200;
    let rows: Vec<(f64, f64)> = (0..=count)
        .map(|k| lo * (hi / lo).powf(k as f64 / count as f64))
        .map(|r| (r.ln(), profile.w(r)))
        .collect();
    let p = if n == 2 { 3 } else { 2 };
    let m = DMatrix::from_fn(rows.len(), p, |i, j| {
        let l = rows[i].0;
        match (p, j) {
            (3, 0) => l * l,
            (3, 1) | (2, 0) => l,
            _ => 1.0,
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    let coef = least_squares(&m, &y)?.coef;
    let leading = coef[0];
    let unbounded = leading.abs() > GROWTH_THRESHOLD;
    Ok(GrowthReport {
        n,
        leading,
        lower: coef.iter().skip(1).cloned().collect(),
        window: (lo, hi),
        unbounded,
        verdict: if unbounded {
            "unbounded correction ⇒ no constant-c expansion".into()
        } else {
            "bounded correction".into()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring_samples<F: Fn(&[f64]) -> f64>(n: usize, r_min: f64, r_max: f64, count: usize, u: F) -> Vec<(Vec<f64>, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        (0..count)
            .map(|_| {
                let r = r_min * (r_max / r_min).powf(rng.gen::<f64>());
                let mut d: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
                let l = norm(&d);
                d.iter_mut().for_each(|v| *v *= r / l);
                let val = u(&d);
                (d, val)
            })
            .collect()
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        let u = |x: &[f64]| 0.5 * (2.0 * x[0] * x[0] + 0.5 * x[1] * x[1]) + x[0] - x[1] + 3.0;
        let s = ring_samples(2, 2.0, 32.0, 2000, u);
        let fit = fit_far_field(&s, 2, false, &FitOptions::default()).unwrap();
        let a = fit.a_matrix();
        assert!((a[(0, 0)] - 2.0).abs() < 1e-10 && (a[(1, 1)] - 0.5).abs() < 1e-10 && a[(0, 1)].abs() < 1e-10);
        assert!((fit.b[0] - 1.0).abs() < 1e-10 && (fit.b[1] + 1.0).abs() < 1e-10);
        assert!((fit.c - 3.0).abs() < 1e-9);
        assert!(fit.sigma_hat.is_none());
        assert!(!fit.det_flagged && fit.positive_definite);
    }

    #[test]
    fn planted_exponent() {
        let u = |x: &[f64]| 0.5 * norm(x).powi(2) + 1.0 / norm(x);
        let s = ring_samples(2, 16.0, 64.0, 3000, u);
        let fit = fit_far_field(&s, 2, false, &FitOptions::default()).unwrap();
        assert!(fit.c.abs() < 1e-6, "{}", fit.c);
        let sig = fit.sigma_hat.unwrap();
        assert!((sig - 1.0).abs() < 0.05, "{sig}");
    }

    #[test]
    fn log_term_in_the_plane() {
        let u = |x: &[f64]| 0.5 * norm(x).powi(2) + 0.4 * norm(x).ln() - 2.0 + 0.3 / norm(x).powi(2);
        let s = ring_samples(2, 4.0, 64.0, 3000, u);
        let fit = fit_far_field(&s, 2, true, &FitOptions::default()).unwrap();
        assert!((fit.d.unwrap() - 0.4).abs() < 1e-6);
        assert!((fit.sigma_hat.unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn too_few_annuli_is_a_fit_error() {
        let s = ring_samples(2, 10.0, 12.0, 200, |x| norm(x));
        assert!(matches!(fit_far_field(&s, 2, false, &FitOptions::default()), Err(Error::Fit(_))));
        assert!(fit_far_field(&s, 3, true, &FitOptions::default()).is_err());
    }

    #[test]
    fn adding_basis_functions_leaves_sigma_unchanged() {
        let base = |x: &[f64]| 0.5 * norm(x).powi(2) + 2.0 / norm(x);
        let s1 = ring_samples(3, 8.0, 64.0, 4000, base);
        let s2: Vec<_> = s1.iter().map(|(x, u)| (x.clone(), u + 3.0 * x[0] * x[2] - x[1] + 7.0)).collect();
        let a = fit_far_field(&s1, 3, false, &FitOptions::default()).unwrap();
        let b = fit_far_field(&s2, 3, false, &FitOptions::default()).unwrap();
        assert!((a.sigma_hat.unwrap() - b.sigma_hat.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn expected_sigma_values() {
        assert_eq!(expected_sigma(3, 4.0), 1.0);
        assert_eq!(expected_sigma(3, 2.5), 0.5);
        assert_eq!(expected_sigma(3, f64::INFINITY), 1.0);
        assert_eq!(expected_sigma(2, 3.0), 1.0);
    }
}
