use crate::error::{Error, Result};
use crate::field::C64;

use super::{axpy, dot, dotc, norm, norm_c};

#[derive(Clone, Copy, Debug)]
pub struct GmresConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self { tol: 1e-8, restart: 150, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Restarted GMRES for `A x = b` with right preconditioning by `x = D y`,
/// `D` diagonal (`precond` holds the diagonal of `D`).
///
/// The stopping test uses the true relative residual `‖b − Ax‖/‖b‖`.
pub fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    precond: &[C64],
    b: &[C64],
    x0: Option<&[C64]>,
    cfg: &GmresConfig,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm_c(b);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![C64::default(); n]);
    if bnorm == 0.0 {
        return Ok(GmresOutcome { x: vec![C64::default(); n], iterations: 0, rel_residual: 0.0 });
    }
    let m = cfg.restart.max(1);
    let mut iterations = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm_c(&r);
        let rel = beta / bnorm;
        if rel <= cfg.tol {
            return Ok(GmresOutcome { x, iterations, rel_residual: rel });
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NoConvergence { iterations, residual: rel });
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut hcol: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut cs: Vec<C64> = Vec::with_capacity(m);
        let mut sn: Vec<C64> = Vec::with_capacity(m);
        let mut g = vec![C64::new(beta, 0.0)];
        let mut k = 0;
        while k < m && iterations < cfg.max_iter {
            let z: Vec<C64> = v[k].iter().zip(precond).map(|(a, d)| a * d).collect();
            let mut w = apply(&z);
            let mut hk = Vec::with_capacity(k + 2);
            for vi in v.iter() {
                let hij = dotc(vi, &w);
                w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= hij * vj);
                hk.push(hij);
            }
            let hnext = norm_c(&w);
            hk.push(C64::new(hnext, 0.0));
            for i in 0..k {
                let t = cs[i].conj() * hk[i] + sn[i].conj() * hk[i + 1];
                hk[i + 1] = -sn[i] * hk[i] + cs[i] * hk[i + 1];
                hk[i] = t;
            }
            let (a, bb) = (hk[k], hk[k + 1]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if den == 0.0 { (C64::new(1.0, 0.0), C64::default()) } else { (a / den, bb / den) };
            hk[k] = c.conj() * a + s.conj() * bb;
            hk[k + 1] = C64::default();
            g.push(-s * g[k]);
            g[k] = c.conj() * g[k];
            cs.push(c);
            sn.push(s);
            hcol.push(hk);
            iterations += 1;
            k += 1;
            let est = g[k].norm() / bnorm;
            if hnext == 0.0 || est <= 0.5 * cfg.tol {
                break;
            }
            v.push(w.iter().map(|z| z / hnext).collect());
        }
        let mut y = vec![C64::default(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hcol[j][i] * y[j];
            }
            y[i] = s / hcol[i][i];
        }
        let mut dz = vec![C64::default(); n];
        for (j, yj) in y.iter().enumerate() {
            dz.iter_mut().zip(&v[j]).for_each(|(d, vj)| *d += yj * vj);
        }
        x.iter_mut().zip(dz.iter().zip(precond)).for_each(|(xi, (d, p))| *xi += d * p);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CglsConfig {
    /// Stop when the monitored gradient norm drops below `tol` times its initial value.
    pub tol: f64,
    pub max_iter: usize,
    /// Tikhonov weight `ε` in `‖By − c‖² + ε‖y‖²`.
    pub reg: f64,
}

#[derive(Clone, Debug)]
pub struct CglsOutcome {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub grad_ratio: f64,
    pub converged: bool,
    /// True when the residual stopped decreasing before convergence.
    pub stagnated: bool,
}

/// CGLS for `min ‖B y − c‖² + reg·‖y‖²`.
///
/// `monitor` maps the normal-equation gradient `Bᵀ(c − By) − reg·y` to the
/// norm used for the stopping test (identity norm if the caller has no
/// better one); this lets a preconditioned caller stop on the gradient of its
/// original variables.
pub fn cgls(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_t: impl Fn(&[f64]) -> Vec<f64>,
    c: &[f64],
    ncols: usize,
    monitor: impl Fn(&[f64]) -> f64,
    cfg: &CglsConfig,
) -> CglsOutcome {
    let mut y = vec![0.0; ncols];
    let mut r = c.to_vec();
    let mut s = apply_t(&r);
    let g0 = monitor(&s);
    if g0 == 0.0 {
        return CglsOutcome { y, iterations: 0, grad_ratio: 0.0, converged: true, stagnated: false };
    }
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    let mut best_r = f64::INFINITY;
    let mut stall = 0;
    for it in 1..=cfg.max_iter {
        let q = apply(&p);
        let denom = dot(&q, &q) + cfg.reg * dot(&p, &p);
        if denom <= 0.0 {
            return CglsOutcome { y, iterations: it, grad_ratio: 0.0, converged: true, stagnated: false };
        }
        let alpha = gamma / denom;
        axpy(alpha, &p, &mut y);
        axpy(-alpha, &q, &mut r);
        s = apply_t(&r);
        axpy(-cfg.reg, &y, &mut s);
        let ratio = monitor(&s) / g0;
        if ratio <= cfg.tol {
            return CglsOutcome { y, iterations: it, grad_ratio: ratio, converged: true, stagnated: false };
        }
        let rn = norm(&r);
        if rn < best_r * (1.0 - 1e-13) {
            best_r = rn;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 50 {
                return CglsOutcome { y, iterations: it, grad_ratio: ratio, converged: false, stagnated: true };
            }
        }
        let gnew = dot(&s, &s);
        let beta = gnew / gamma;
        gamma = gnew;
        p.iter_mut().zip(&s).for_each(|(pi, si)| *pi = si + beta * *pi);
    }
    let ratio = monitor(&s) / g0;
    CglsOutcome { y, iterations: cfg.max_iter, grad_ratio: ratio, converged: false, stagnated: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Csr;

    fn tridiag(n: usize, shift: C64) -> Csr<C64> {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, C64::new(2.0, 0.0) + shift)];
                if i > 0 {
                    r.push((i - 1, C64::new(-1.0, 0.0)));
                }
                if i + 1 < n {
                    r.push((i + 1, C64::new(-1.2, 0.1)));
                }
                r
            })
            .collect();
        Csr::from_rows(n, rows)
    }

    #[test]
    fn gmres_solves_nonsymmetric_complex_system() {
        let a = tridiag(200, C64::new(0.3, 0.5));
        let xs: Vec<C64> = (0..200).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let b = a.matvec(&xs);
        let d: Vec<C64> = a.diagonal().iter().map(|z| 1.0 / z).collect();
        let cfg = GmresConfig { tol: 1e-12, restart: 30, max_iter: 5000 };
        let out = gmres(|v| a.matvec(v), &d, &b, None, &cfg).unwrap();
        let err: f64 = out.x.iter().zip(&xs).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn gmres_zero_rhs_and_cap() {
        let a = tridiag(50, C64::new(0.0, 0.0));
        let d = vec![C64::new(1.0, 0.0); 50];
        let out = gmres(|v| a.matvec(v), &d, &vec![C64::default(); 50], None, &GmresConfig::default()).unwrap();
        assert!(out.x.iter().all(|z| z.norm() == 0.0));
        let b = vec![C64::new(1.0, 0.0); 50];
        let cfg = GmresConfig { tol: 1e-14, restart: 2, max_iter: 3 };
        assert!(matches!(gmres(|v| a.matvec(v), &d, &b, None, &cfg), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn cgls_least_squares() {
        // overdetermined: rows [1 0], [0 1], [1 1] → normal solution
        let a = Csr::from_rows(2, vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, 1.0), (1, 1.0)]]);
        let c = [1.0, 2.0, 4.0];
        let cfg = CglsConfig { tol: 1e-12, max_iter: 100, reg: 0.0 };
        let out = cgls(|v| a.matvec(v), |v| a.matvec_t(v), &c, 2, |g| norm(g), &cfg);
        // AᵀA = [[2,1],[1,2]], Aᵀc = [5,6] → y = [4/3, 7/3]
        assert!((out.y[0] - 4.0 / 3.0).abs() < 1e-10 && (out.y[1] - 7.0 / 3.0).abs() < 1e-10);
        assert!(out.converged);
    }
}
