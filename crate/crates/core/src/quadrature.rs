//! Gauss-Legendre rules and an adaptive composite integrator.

use std::sync::LazyLock;

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        // Tricomi initial guess, then Newton on P_m
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

pub(crate) static GL16: LazyLock<(Vec<f64>, Vec<f64>)> = LazyLock::new(|| gauss_legendre(16));

/// 16-point Gauss-Legendre approximation of `∫_a^b f`.
pub fn gl16<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = &*GL16;
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * x.iter().zip(w).map(|(xi, wi)| wi * f(m + h * xi)).sum::<f64>()
}

/// Adaptive bisection on the 16-point rule: a panel is accepted when the
/// whole-panel estimate and the sum over its halves agree to
/// `max(abs_tol, rel_tol * |estimate|)`, or the panel becomes negligibly thin.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = gl16(f, a, b);
    recurse(f, a, b, whole, abs_tol, rel_tol, 0)
}

fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: usize,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gl16(f, a, mid);
    let right = gl16(f, mid, b);
    let halves = left + right;
    let tol = abs_tol.max(rel_tol * halves.abs());
    if (halves - whole).abs() <= tol || depth >= 60 || (b - a).abs() <= 1e-13 * a.abs().max(1.0) {
        return halves;
    }
    recurse(f, a, mid, left, 0.5 * abs_tol, rel_tol, depth + 1)
        + recurse(f, mid, b, right, 0.5 * abs_tol, rel_tol, depth + 1)
}

/// Integrates over `[a, b]` with panels split at `breaks` and geometrically
/// graded so no panel spans more than a factor `1.1` in radius.
pub fn integrate_radial<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breaks: &[f64], abs_tol: f64) -> f64 {
    graded_panels(a, b, breaks, 1.1)
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], abs_tol, 1e-14))
        .sum()
}

/// Panel endpoints covering `[a, b]` (requires `0 <= a < b`): every breakpoint
/// inside is an endpoint, widths are at most `max(0.05, (ratio - 1) r)`.
pub fn graded_panels(a: f64, b: f64, breaks: &[f64], ratio: f64) -> Vec<f64> {
    let mut knots: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    knots.push(a);
    knots.push(b);
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();
    let mut out = vec![knots[0]];
    for w in knots.windows(2) {
        let (mut x, end) = (w[0], w[1]);
        loop {
            let step = (0.05f64).max((ratio - 1.0) * x);
            if x + step >= end * (1.0 - 1e-12) {
                break;
            }
            x += step;
            out.push(x);
        }
        out.push(end);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 31 is the exactness limit
        let p: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(30)).sum();
        assert!((p - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = integrate(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-14, 1e-14);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        let v = integrate(&|x: f64| (x * x * x - 1.0).max(0.0).cbrt(), 1.0, 2.0, 1e-14, 1e-14);
        // brute-force midpoint oracle with many points
        let m = 2_000_000;
        let h = 1.0 / m as f64;
        let brute: f64 = (0..m).map(|i| {
            let x = 1.0 + (i as f64 + 0.5) * h;
            (x * x * x - 1.0).cbrt() * h
        }).sum();
        assert!((v - brute).abs() < 1e-8, "{v} vs {brute}");
    }

    #[test]
    fn panels_respect_breakpoints() {
        let p = graded_panels(0.0, 100.0, &[1.0, 2.0, 150.0], 1.1);
        assert!(p.contains(&1.0) && p.contains(&2.0));
        assert_eq!(*p.last().unwrap(), 100.0);
        for w in p.windows(2) {
            assert!(w[1] > w[0]);
            assert!(w[1] - w[0] <= (0.05f64).max(0.1 * w[0]) + 1e-12);
        }
    }
}
