use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layout::{BoundaryTraces, Layout};
use super::system::LinearizedSystem;
use crate::error::{Error, Result};
use crate::linalg::{cgls, norm, CglsConfig, DirichletPoisson};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalConfig {
    /// Tikhonov weight `ε`; `None` selects `10⁻⁸·‖AᵗS‖/‖S‖`.
    pub reg: Option<f64>,
    /// Gradient reduction target of the regularized objective.
    pub tol: f64,
    pub max_iter: usize,
    /// Return the current iterate instead of failing when `max_iter` is hit.
    pub allow_inexact: bool,
}

impl Default for NormalConfig {
    fn default() -> Self {
        Self { reg: None, tol: 1e-10, max_iter: 5000, allow_inexact: false }
    }
}

#[derive(Clone, Debug)]
pub struct NormalSolution {
    pub w: Vec<f64>,
    pub iterations: usize,
    pub grad_ratio: f64,
    pub reg: f64,
    pub warnings: Vec<String>,
}

/// `(−Δ_h)⁻¹` applied slot by slot on the free box, with a per-slot scale.
struct Preconditioner {
    layout: Layout,
    poisson: DirichletPoisson,
    sub_dims: [usize; 3],
    scale: Vec<f64>,
    /// Free-vector position of `(slot, sub-box node)`, or `usize::MAX` when frozen.
    map: Vec<Vec<usize>>,
}

impl Preconditioner {
    fn new(layout: Layout, free: &[usize], col_norms: &[f64]) -> Self {
        let g = layout.grid;
        let sub_dims = g.dims.map(|d| d - 4);
        let poisson = DirichletPoisson::new(sub_dims, g.spacing);
        let mut pos = vec![usize::MAX; layout.len()];
        for (i, &k) in free.iter().enumerate() {
            pos[k] = i;
        }
        let sub_nodes: Vec<usize> = (0..sub_dims.iter().product::<usize>())
            .map(|s| {
                let k = s % sub_dims[2];
                let r = s / sub_dims[2];
                g.index(r / sub_dims[1] + 2, r % sub_dims[1] + 2, k + 2)
            })
            .collect();
        let map: Vec<Vec<usize>> = (0..layout.n_slots())
            .map(|b| sub_nodes.iter().map(|&p| pos[layout.slot_index(b, p)]).collect())
            .collect();
        // scale each slot by the inverse RMS column norm of A∘(−Δ_h)⁻¹ ≈ of A·h²
        let scale = map
            .iter()
            .map(|m| {
                let (s, n) = m.iter().filter(|&&i| i != usize::MAX).fold((0.0, 0usize), |(s, n), &i| (s + col_norms[i], n + 1));
                if n == 0 || s == 0.0 {
                    1.0
                } else {
                    1.0 / (s / n as f64).sqrt()
                }
            })
            .collect();
        Self { layout, poisson, sub_dims, scale, map }
    }

    fn slot_op(&self, y: &[f64], f: impl Fn(&[f64]) -> Vec<f64> + Sync, power: f64) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        let parts: Vec<(usize, Vec<f64>)> = (0..self.map.len())
            .into_par_iter()
            .filter(|&b| self.map[b][0] != usize::MAX)
            .map(|b| {
                let v: Vec<f64> = self.map[b].iter().map(|&i| y[i]).collect();
                let s = self.scale[b].powf(power);
                (b, f(&v).into_iter().map(|x| x * s).collect())
            })
            .collect();
        for (b, v) in parts {
            for (&i, x) in self.map[b].iter().zip(v) {
                out[i] = x;
            }
        }
        out
    }

    /// `M y = D (−Δ_h)⁻¹ y`.
    fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.slot_op(y, |v| self.poisson.solve(v), 1.0)
    }

    /// `M⁻ᵗ g = D⁻¹ (−Δ_h) g`.
    fn apply_inv(&self, g: &[f64]) -> Vec<f64> {
        let h = self.layout.grid.spacing;
        self.slot_op(g, |v| self.poisson.apply(v, h), -1.0)
    }

    #[allow(dead_code)]
    fn sub_len(&self) -> usize {
        self.sub_dims.iter().product()
    }
}

/// Minimizes `‖Aw − S‖² + ε‖w‖²` over the free unknowns with the two outer
/// layers of `w` fixed by the boundary traces.
///
/// Solved by CGLS on `A M`, `M = D(−Δ_h)⁻¹` (block-scaled inverse Dirichlet
/// Laplacian on the free box), which makes the iteration operator of order
/// zero; the Tikhonov term enters as extra rows `√ε I`. Convergence is
/// tested on the gradient of the original objective.
pub fn normal_solve(
    sys: &LinearizedSystem,
    s: &[f64],
    traces: &BoundaryTraces,
    cfg: &NormalConfig,
) -> Result<NormalSolution> {
    let layout = sys.layout;
    if s.len() != layout.n_rows() {
        return Err(Error::GridMismatch(format!("S has {} rows, system {}", s.len(), layout.n_rows())));
    }
    let w_fixed = traces.fill(&layout)?;
    let a_fixed = sys.apply(&w_fixed);
    let c: Vec<f64> = s.iter().zip(&a_fixed).map(|(a, b)| a - b).collect();
    let free = layout.free_indices();
    let nfree = free.len();
    let scatter = |y: &[f64]| {
        let mut w = vec![0.0; layout.len()];
        for (i, &k) in free.iter().enumerate() {
            w[k] = y[i];
        }
        w
    };
    let gather = |w: &[f64]| free.iter().map(|&k| w[k]).collect::<Vec<f64>>();
    let atc = gather(&sys.apply_t(&c));
    let reg = match cfg.reg {
        Some(e) if e >= 0.0 => e,
        Some(e) => return Err(Error::Param(format!("negative regularization {e}"))),
        None => {
            let cn = norm(&c);
            if cn > 0.0 {
                1e-8 * norm(&atc) / cn
            } else {
                0.0
            }
        }
    };
    let col_norms = gather(&sys.matrix.column_norms_sqr(|v| v * v));
    let pre = Preconditioner::new(layout, &free, &col_norms);
    let sq = reg.sqrt();
    let nrows = c.len();
    let apply = |y: &[f64]| {
        let wf = pre.apply(y);
        let mut out = sys.apply(&scatter(&wf));
        if reg > 0.0 {
            out.extend(wf.iter().map(|v| sq * v));
        }
        out
    };
    let apply_t = |r: &[f64]| {
        let mut g = gather(&sys.apply_t(&r[..nrows]));
        if reg > 0.0 {
            g.iter_mut().zip(&r[nrows..]).for_each(|(a, b)| *a += sq * b);
        }
        pre.apply(&g)
    };
    let monitor = |sgrad: &[f64]| norm(&pre.apply_inv(sgrad));
    let mut rhs = c.clone();
    if reg > 0.0 {
        rhs.extend(std::iter::repeat_n(0.0, nfree));
    }
    let out = cgls(apply, apply_t, &rhs, nfree, monitor, &CglsConfig { tol: cfg.tol, max_iter: cfg.max_iter, reg: 0.0 });
    let mut warnings = Vec::new();
    if !out.converged {
        if out.stagnated {
            let msg = if reg == 0.0 {
                format!("ill-posed: normal iteration stagnated at gradient ratio {:.3e} without regularization", out.grad_ratio)
            } else {
                format!("normal iteration stagnated at gradient ratio {:.3e}", out.grad_ratio)
            };
            warnings.push(msg);
        } else if cfg.allow_inexact {
            warnings.push(format!("normal iteration stopped at gradient ratio {:.3e}", out.grad_ratio));
        } else {
            return Err(Error::NoConvergence { iterations: out.iterations, residual: out.grad_ratio });
        }
    }
    let wf = pre.apply(&out.y);
    let mut w = w_fixed;
    for (i, &k) in free.iter().enumerate() {
        w[k] = wf[i];
    }
    Ok(NormalSolution { w, iterations: out.iterations, grad_ratio: out.grad_ratio, reg, warnings })
}
