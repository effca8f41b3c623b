use rayon::prelude::*;

/// Compressed sparse rows.
#[derive(Clone, Debug, Default)]
pub struct CsrMatrix {
    pub rows: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let mut m = Self {
            rows: rows.len(),
            row_ptr: Vec::with_capacity(rows.len() + 1),
            ..Default::default()
        };
        m.row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *m.vals.last_mut().unwrap() += v;
                } else {
                    m.cols.push(c);
                    m.vals.push(v);
                    last = Some(c);
                }
            }
            m.row_ptr.push(m.cols.len());
        }
        m
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.cols[p] as usize];
            }
            *yi = s;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&p| self.cols[p] as usize == i)
                    .map_or(0.0, |p| self.vals[p])
            })
            .collect()
    }
}

/// Outcome of an iterative linear solve.
#[derive(Clone, Copy, Debug)]
pub struct LinearReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Fixed-size chunks keep the summation order, and so the result, independent of scheduling.
const DOT_CHUNK: usize = 4096;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(DOT_CHUNK)
        .zip(b.par_chunks(DOT_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB for `A x = b`, starting from `x`.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], rel_tol: f64, max_iter: usize) -> LinearReport {
    let n = a.rows;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let b_norm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul(x, &mut r);
    r.par_iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut res = norm(&r) / b_norm;
    if res <= rel_tol {
        return LinearReport {
            iterations: 0,
            relative_residual: res,
            converged: true,
        };
    }
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return LinearReport {
                iterations: it,
                relative_residual: res,
                converged: false,
            };
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut()
            .zip(&r)
            .zip(&v)
            .for_each(|((pi, ri), vi)| *pi = ri + beta * (*pi - omega * vi));
        y.par_iter_mut().zip(&p).zip(&inv_diag).for_each(|((yi, pi), d)| *yi = pi * d);
        a.mul(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        s.par_iter_mut()
            .zip(&r)
            .zip(&v)
            .for_each(|((si, ri), vi)| *si = ri - alpha * vi);
        if norm(&s) / b_norm <= rel_tol {
            x.par_iter_mut().zip(&y).for_each(|(xi, yi)| *xi += alpha * yi);
            return LinearReport {
                iterations: it,
                relative_residual: norm(&s) / b_norm,
                converged: true,
            };
        }
        z.par_iter_mut().zip(&s).zip(&inv_diag).for_each(|((zi, si), d)| *zi = si * d);
        a.mul(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.par_iter_mut()
            .zip(&y)
            .zip(&z)
            .for_each(|((xi, yi), zi)| *xi += alpha * yi + omega * zi);
        r.par_iter_mut()
            .zip(&s)
            .zip(&t)
            .for_each(|((ri, si), ti)| *ri = si - omega * ti);
        res = norm(&r) / b_norm;
        if res <= rel_tol {
            return LinearReport {
                iterations: it,
                relative_residual: res,
                converged: true,
            };
        }
    }
    LinearReport {
        iterations: max_iter,
        relative_residual: res,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_convection_diffusion() {
        // 1-D upwinded convection-diffusion, strictly diagonally dominant
        let n = 200;
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![(i as u32, 4.0)];
                if i > 0 {
                    r.push(((i - 1) as u32, -2.5));
                }
                if i + 1 < n {
                    r.push(((i + 1) as u32, -1.0));
                }
                r
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let rep = bicgstab(&a, &b, &mut x, 1e-12, 1000);
        assert!(rep.converged);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let a = CsrMatrix::from_rows(vec![vec![(0, 1.0), (0, 2.0)], vec![(1, 5.0)]]);
        assert_eq!(a.diagonal(), vec![3.0, 5.0]);
    }
}
