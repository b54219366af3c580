//! Krylov solvers on raw node vectors with a caller-supplied inner product.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Preconditioned conjugate gradients for an operator that is symmetric
/// positive definite in `dot`. Starts from zero.
pub fn pcg<A, M, D>(
    apply: A,
    precond: M,
    dot: D,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 0..max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Convergence {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it + 1,
                    relative_residual: rel,
                },
            ));
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: rel,
    })
}

/// Restarted flexible GMRES with right preconditioning. Handles symmetric
/// indefinite systems such as Jacobians at mountain-pass critical points.
pub fn fgmres<A, M, D>(
    apply: A,
    precond: M,
    dot: D,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64], &[f64]) -> f64,
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let m = restart.max(1);
    let mut total = 0usize;
    let mut rel;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = dot(&r, &r).sqrt();
        rel = beta / b_norm;
        if rel <= tol {
            break;
        }
        if total >= max_iter {
            return Err(Error::Convergence {
                iterations: total,
                residual: rel,
            });
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < max_iter {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            zs.push(z);
            for i in 0..=k {
                h[i][k] = dot(&w, &basis[i]);
                let hik = h[i][k];
                axpy(&mut w, -hik, &basis[i]);
            }
            let wn = dot(&w, &w).sqrt();
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if (g[k] / b_norm).abs() <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (yi, z) in y.iter().zip(&zs) {
            axpy(&mut x, *yi, z);
        }
    }
    Ok((
        x,
        SolveStats {
            iterations: total,
            relative_residual: rel,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(diag: f64, off: f64, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag * x[i];
                if i > 0 {
                    s += off * x[i - 1];
                }
                if i + 1 < n {
                    s += off * x[i + 1];
                }
                s
            })
            .collect()
    }

    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn cg_solves_spd_system() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let (x, stats) = pcg(|v| tridiag(4.0, -1.0, v), |v| v.to_vec(), euclid, &b, 1e-12, 200).unwrap();
        let ax = tridiag(4.0, -1.0, &x);
        let err: f64 = ax.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        assert!(stats.relative_residual <= 1e-12);
    }

    #[test]
    fn cg_reports_indefinite_operator() {
        let b = vec![1.0; 10];
        let out = pcg(
            |v| v.iter().map(|x| -x).collect(),
            |v| v.to_vec(),
            euclid,
            &b,
            1e-10,
            20,
        );
        assert!(matches!(out, Err(Error::Convergence { .. })));
    }

    #[test]
    fn gmres_solves_indefinite_system() {
        // diag(-1, 1, 2, ...) plus coupling: symmetric indefinite
        let n = 40;
        let apply = |v: &[f64]| {
            let mut out = tridiag(2.0, -0.5, v);
            out[0] -= 3.0 * v[0];
            out
        };
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.01).collect();
        let (x, _) = fgmres(apply, |v| v.to_vec(), euclid, &b, 1e-12, 15, 500).unwrap();
        let ax = apply(&x);
        let err: f64 = ax.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "err {err:e}");
    }
}
