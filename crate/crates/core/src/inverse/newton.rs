use serde::{Deserialize, Serialize};

use super::layout::{BoundaryTraces, Layout};
use super::normal::{normal_solve, NormalConfig};
use super::system::{default_data_weight, LinearizedSystem};
use crate::error::{Error, Result};
use crate::field::{norm_sqr, CVec3, VectorField, C64};
use crate::forward::{solve_forward_many, BoundaryIllumination, InternalData, SolverConfig};
use crate::linalg::dot;
use crate::medium::Medium;
use crate::stencil;

/// Iterate of the all-at-once unknown `v = (E_1, …, E_J, σ, n)`.
#[derive(Clone, Debug)]
pub struct State {
    pub fields: Vec<VectorField>,
    pub sigma: Vec<f64>,
    pub n: Vec<f64>,
}

/// Values of `(E_j, σ, n)` on the two outer node layers, treated as measured.
#[derive(Clone, Debug)]
pub struct MeasuredBoundary {
    pub fields: Vec<VectorField>,
    pub sigma: Vec<f64>,
    pub n: Vec<f64>,
}

impl MeasuredBoundary {
    fn imprint(&self, state: &mut State) -> Result<()> {
        if self.fields.len() != state.fields.len() {
            return Err(Error::Param("measured boundary has the wrong number of fields".into()));
        }
        let g = state.fields[0].grid;
        for p in (0..g.len()).filter(|&p| g.boundary_distance(p) < 2) {
            for (s, m) in state.fields.iter_mut().zip(&self.fields) {
                s.values[p] = m.values[p];
            }
            state.sigma[p] = self.sigma[p];
            state.n[p] = self.n[p];
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussNewtonConfig {
    pub max_iter: usize,
    /// Stop when `‖r‖` falls below `tol` times the data-row scale `‖w_d Δ_h H‖`.
    pub tol: f64,
    pub reg: Option<f64>,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub freeze_n: bool,
    pub armijo: f64,
    pub max_halvings: usize,
    /// Stop when an accepted step reduces `‖r‖²` by less than this fraction.
    pub stagnation: f64,
    pub forward: SolverConfig,
}

impl Default for GaussNewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 10,
            tol: 1e-6,
            reg: None,
            inner_tol: 1e-6,
            inner_max_iter: 3000,
            freeze_n: false,
            armijo: 1e-4,
            max_halvings: 8,
            stagnation: 1e-6,
            forward: SolverConfig { tol: 1e-10, ..SolverConfig::default() },
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub sigma: Vec<f64>,
    pub n: Vec<f64>,
    pub fields: Vec<VectorField>,
    /// `‖r‖` relative to the data-row scale, one entry per accepted iterate.
    pub residual_history: Vec<f64>,
    /// Relative mismatch between `ν×E_j` of the reconstruction and the illuminations.
    pub boundary_mismatch: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Residual of `(elliptic form of E_j = 0, w_d Δ_h(σ|E_j|²) = w_d Δ_h H_j)`
/// in the row order of [`LinearizedSystem`].
pub fn nonlinear_residual(
    state: &State,
    omega: f64,
    data: &InternalData,
    data_weight: f64,
) -> Result<Vec<f64>> {
    let grid = data.grid;
    if state.fields.len() != data.h.len() {
        return Err(Error::Param(format!("{} fields but {} data sets", state.fields.len(), data.h.len())));
    }
    let q: Vec<C64> = state.n.iter().zip(&state.sigma).map(|(&n, &s)| C64::new(omega * omega * n, omega * s)).collect();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&p| !grid.is_boundary(p)).collect();
    let mut r = Vec::with_capacity(7 * nodes.len() * data.h.len());
    for (e, h) in state.fields.iter().zip(&data.h) {
        grid.check_same(&e.grid)?;
        let ell = stencil::elliptic_form(&grid, &q, &e.values)?;
        let diff: Vec<f64> = (0..grid.len()).map(|p| state.sigma[p] * norm_sqr(&e.values[p]) - h[p]).collect();
        let lap = stencil::laplacian(&grid, &diff);
        for &p in &nodes {
            for c in 0..3 {
                r.push(ell[p][c].re);
                r.push(ell[p][c].im);
            }
        }
        r.extend(nodes.iter().map(|&p| data_weight * lap[p]));
    }
    Ok(r)
}

fn data_scale(data: &InternalData, data_weight: f64) -> f64 {
    let grid = data.grid;
    let s: f64 = data
        .h
        .iter()
        .map(|h| {
            let lap = stencil::laplacian(&grid, h);
            lap.iter().map(|v| v * v).sum::<f64>()
        })
        .sum();
    data_weight * s.sqrt()
}

fn step(state: &State, layout: &Layout, w: &[f64], lambda: f64, n_floor: f64) -> State {
    let g = layout.grid;
    let mut next = state.clone();
    for (j, f) in next.fields.iter_mut().enumerate() {
        for (p, v) in f.values.iter_mut().enumerate() {
            *v += CVec3::from_fn(|c, _| {
                C64::new(w[layout.e_index(j, p, c, 0)], w[layout.e_index(j, p, c, 1)]) * lambda
            });
        }
    }
    for p in 0..g.len() {
        next.sigma[p] = (next.sigma[p] + lambda * w[layout.sigma_index(p)]).max(0.0);
        next.n[p] = (next.n[p] + lambda * w[layout.n_index(p)]).max(n_floor);
    }
    next
}

fn boundary_mismatch(fields: &[VectorField], illums: &[BoundaryIllumination]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (e, f) in fields.iter().zip(illums) {
        let t = BoundaryIllumination::from_field(e);
        for (a, b) in t.faces.iter().zip(&f.faces) {
            for (u, v) in a.iter().zip(b) {
                num += norm_sqr(&(u - v));
                den += norm_sqr(v);
            }
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Gauss–Newton on the all-at-once formulation.
///
/// The background fields start from forward solutions in `init`. Values on
/// the two outer layers come from `boundary` when given (they are the
/// Dirichlet and normal traces the linearized problem needs) and stay fixed;
/// each step solves the regularized normal problem for the free unknowns,
/// backtracks with an Armijo test and projects onto `σ ≥ 0`, `n ≥ n_floor`.
pub fn gauss_newton(
    data: &InternalData,
    init: &Medium,
    illums: &[BoundaryIllumination],
    boundary: Option<&MeasuredBoundary>,
    cfg: &GaussNewtonConfig,
) -> Result<ReconstructionResult> {
    init.grid.check_same(&data.grid)?;
    if illums.len() != data.h.len() {
        return Err(Error::Param(format!("{} illuminations but {} data sets", illums.len(), data.h.len())));
    }
    let fields = solve_forward_many(init, illums, &cfg.forward)?;
    let mut state = State { fields, sigma: init.sigma.clone(), n: init.n.clone() };
    if let Some(b) = boundary {
        b.imprint(&mut state)?;
    }
    let omega = init.omega;
    let floor = init.n_floor;
    let wd = default_data_weight(init, &state.fields);
    let scale = data_scale(data, wd).max(f64::MIN_POSITIVE);
    let layout = Layout::new(init.grid, illums.len(), cfg.freeze_n)?;
    let zero_traces = BoundaryTraces::zeros(&layout);
    let mut r = nonlinear_residual(&state, omega, data, wd)?;
    let mut phi = dot(&r, &r);
    let mut history = vec![phi.sqrt() / scale];
    let mut warnings = Vec::new();
    let mut failures = 0;
    let mut accepted = 0;
    let mut converged = history[0] <= cfg.tol;
    let mut it = 0;
    while !converged && it < cfg.max_iter {
        it += 1;
        let medium = Medium::with_floor(init.grid, state.n.clone(), state.sigma.clone(), omega, floor)?;
        let sys = LinearizedSystem::assemble(&medium, &state.fields, cfg.freeze_n, wd)?;
        let minus_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let ncfg = NormalConfig { reg: cfg.reg, tol: cfg.inner_tol, max_iter: cfg.inner_max_iter, allow_inexact: true };
        let sol = normal_solve(&sys, &minus_r, &zero_traces, &ncfg)?;
        warnings.extend(sol.warnings.iter().map(|w| format!("iteration {it}: {w}")));
        let slope = 2.0 * dot(&r, &sys.apply(&sol.w));
        let mut lambda = 1.0;
        let mut accepted_step = None;
        for _ in 0..=cfg.max_halvings {
            let trial = step(&state, &layout, &sol.w, lambda, floor);
            let rt = nonlinear_residual(&trial, omega, data, wd)?;
            let pt = dot(&rt, &rt);
            if pt <= phi + cfg.armijo * lambda * slope.min(0.0) {
                accepted_step = Some((trial, rt, pt));
                break;
            }
            lambda *= 0.5;
        }
        match accepted_step {
            Some((trial, rt, pt)) => {
                failures = 0;
                accepted += 1;
                let decrease = (phi - pt) / phi;
                state = trial;
                r = rt;
                phi = pt;
                history.push(phi.sqrt() / scale);
                converged = phi.sqrt() / scale <= cfg.tol;
                if !converged && decrease < cfg.stagnation {
                    warnings.push(format!("iteration {it}: residual stagnated"));
                    break;
                }
            }
            None => {
                failures += 1;
                warnings.push(format!("iteration {it}: line search failed"));
                if failures >= 3 {
                    return Err(Error::Divergence(it));
                }
            }
        }
    }
    Ok(ReconstructionResult {
        boundary_mismatch: boundary_mismatch(&state.fields, illums),
        sigma: state.sigma,
        n: state.n,
        fields: state.fields,
        residual_history: history,
        iterations: accepted,
        converged,
        warnings,
    })
}

/// One linearized solve about `init`: the full step `v₀ + w` where `w`
/// solves the regularized normal problem for the data misfit at `init`.
pub fn linear_reconstruction(
    data: &InternalData,
    init: &Medium,
    illums: &[BoundaryIllumination],
    boundary: Option<&MeasuredBoundary>,
    cfg: &GaussNewtonConfig,
) -> Result<ReconstructionResult> {
    init.grid.check_same(&data.grid)?;
    if illums.len() != data.h.len() {
        return Err(Error::Param(format!("{} illuminations but {} data sets", illums.len(), data.h.len())));
    }
    let fields = solve_forward_many(init, illums, &cfg.forward)?;
    let mut state = State { fields, sigma: init.sigma.clone(), n: init.n.clone() };
    if let Some(b) = boundary {
        b.imprint(&mut state)?;
    }
    let wd = default_data_weight(init, &state.fields);
    let scale = data_scale(data, wd).max(f64::MIN_POSITIVE);
    let layout = Layout::new(init.grid, illums.len(), cfg.freeze_n)?;
    let r = nonlinear_residual(&state, init.omega, data, wd)?;
    let medium = Medium::with_floor(init.grid, state.n.clone(), state.sigma.clone(), init.omega, init.n_floor)?;
    let sys = LinearizedSystem::assemble(&medium, &state.fields, cfg.freeze_n, wd)?;
    let minus_r: Vec<f64> = r.iter().map(|v| -v).collect();
    let ncfg = NormalConfig { reg: cfg.reg, tol: cfg.inner_tol, max_iter: cfg.inner_max_iter, allow_inexact: true };
    let sol = normal_solve(&sys, &minus_r, &BoundaryTraces::zeros(&layout), &ncfg)?;
    let next = step(&state, &layout, &sol.w, 1.0, init.n_floor);
    let r1 = nonlinear_residual(&next, init.omega, data, wd)?;
    let history = vec![dot(&r, &r).sqrt() / scale, dot(&r1, &r1).sqrt() / scale];
    let converged = history[1] <= cfg.tol;
    Ok(ReconstructionResult {
        boundary_mismatch: boundary_mismatch(&next.fields, illums),
        sigma: next.sigma,
        n: next.n,
        fields: next.fields,
        residual_history: history,
        iterations: 1,
        converged,
        warnings: sol.warnings,
    })
}
