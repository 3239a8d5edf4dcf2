//! Restarted GMRES with right Jacobi preconditioning.
//!
//! Right preconditioning keeps the Arnoldi residual equal to the true
//! residual, so the stopping test is on `‖b - Ax‖ / ‖b‖` directly.

use crate::error::{Error, Result};
use crate::sparse::{dot, norm2, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Relative residual target.
    pub tol: f64,
    /// Total inner iterations allowed across restarts.
    pub max_iter: usize,
    /// Krylov dimension between restarts.
    pub restart: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig {
            tol: 1e-10,
            max_iter: 1000,
            restart: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub iterations: usize,
    /// Relative residual after each inner iteration.
    pub history: Vec<f64>,
}

/// Solves `A x = b` in place, starting from the incoming `x`.
pub fn solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], cfg: &GmresConfig) -> Result<GmresOutcome> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let b_norm = norm2(b);
    let mut history = Vec::new();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(GmresOutcome {
            iterations: 0,
            history,
        });
    }

    let m = cfg.restart.max(1);
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    loop {
        a.matvec(x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let beta = norm2(&r);
        let rel = beta / b_norm;
        if history.is_empty() {
            history.push(rel);
        }
        if rel <= cfg.tol {
            return Ok(GmresOutcome {
                iterations,
                history,
            });
        }
        if iterations >= cfg.max_iter {
            return Err(Error::Convergence {
                what: "GMRES",
                iterations,
                last: rel,
                history,
            });
        }

        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            for (zi, (vi, di)) in z.iter_mut().zip(basis[k].iter().zip(&inv_diag)) {
                *zi = vi * di;
            }
            a.matvec(&z, &mut w);
            // modified Gram-Schmidt
            for (j, v) in basis.iter().enumerate() {
                let hj = dot(&w, v);
                h[j][k] = hj;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hj * vi);
            }
            let h_next = norm2(&w);
            h[k + 1][k] = h_next;

            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];

            iterations += 1;
            k_used = k + 1;
            let rel = g[k + 1].abs() / b_norm;
            history.push(rel);
            if rel <= cfg.tol || iterations >= cfg.max_iter || h_next == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back substitution, then x += M⁻¹ V y
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for ((xi, vi), di) in x.iter_mut().zip(&basis[j]).zip(&inv_diag) {
                *xi += yj * vi * di;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::TripletBuilder;

    fn convection_diffusion(n: usize) -> CsrMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 4.0);
            if i > 0 {
                b.push(i, i - 1, -1.7);
            }
            if i + 1 < n {
                b.push(i, i + 1, -0.3);
            }
            if i + 7 < n {
                b.push(i, i + 7, 0.2);
            }
        }
        b.build()
    }

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 300;
        let a = convection_diffusion(n);
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let rhs = a.mul_vec(&exact);
        let mut x = vec![0.0; n];
        let cfg = GmresConfig {
            restart: 10,
            ..Default::default()
        };
        let out = solve(&a, &rhs, &mut x, &cfg).unwrap();
        assert!(out.iterations > 0);
        let err = x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(*out.history.last().unwrap() <= 1e-10);
    }

    #[test]
    fn reports_non_convergence_with_history() {
        let a = convection_diffusion(200);
        let rhs = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        let cfg = GmresConfig {
            tol: 1e-14,
            max_iter: 3,
            restart: 2,
        };
        match solve(&a, &rhs, &mut x, &cfg) {
            Err(Error::Convergence { history, .. }) => assert!(!history.is_empty()),
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = convection_diffusion(10);
        let mut x = vec![3.0; 10];
        solve(&a, &[0.0; 10], &mut x, &GmresConfig::default()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
