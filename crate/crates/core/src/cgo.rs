//! Faddeev kernel on a periodic box and the Neumann-series construction of
//! CGO remainders.
//!
//! The medium grid of `n` nodes per axis is embedded in the middle of a
//! periodic box of `2n` nodes (side `L = 2n·h`). `γ₀ − 1` must vanish on the
//! two-node collar of the medium grid, so every source in the series is
//! compactly supported inside the box.
//!
//! The symbol `|ξ|² + 2ζ·ξ` vanishes at `ξ = 0` for every `ζ` with
//! `ζ·ζ = k² > 0`... only if `ξ = 0` is a lattice frequency, so the lattice is
//! shifted by half a period along the axis most aligned with `ρ`:
//! `ξ_a = 2π(m_a + ½)/L`. Functions on that lattice are *twisted*:
//! `u(x + L ê_a) = −u(x)`. Compactly supported functions are both periodic
//! and twisted, so they can be fed to either transform.

use std::sync::Arc;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{signed_index, Fft3};
use crate::field::{bdot, complexify, norm_sqr, CVec3, ComplexField, RVec3, VectorField, C64, I};
use crate::grid::Grid;
use crate::illum::CgoParams;
use crate::medium::Medium;

/// Periodic box of twice the medium size with the medium grid in its middle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicBox {
    pub medium_grid: Grid,
    pub dims: [usize; 3],
    pub h: f64,
    pub offset: [usize; 3],
    /// Physical position of periodic node `(0, 0, 0)`.
    pub start: [f64; 3],
}

impl PeriodicBox {
    pub fn around(grid: &Grid) -> Self {
        let dims = grid.dims.map(|n| 2 * n);
        let offset = grid.dims.map(|n| n / 2);
        let start = [0, 1, 2].map(|a| grid.origin[a] - offset[a] as f64 * grid.spacing);
        Self { medium_grid: *grid, dims, h: grid.spacing, offset, start }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.dims.map(|n| n as f64 * self.h)
    }

    #[inline]
    pub fn coords(&self, p: usize) -> [usize; 3] {
        let k = p % self.dims[2];
        let r = p / self.dims[2];
        [r / self.dims[1], r % self.dims[1], k]
    }

    pub fn position(&self, p: usize) -> RVec3 {
        let c = self.coords(p);
        RVec3::from_fn(|a, _| self.start[a] + c[a] as f64 * self.h)
    }

    /// Periodic index of medium node `m`.
    #[inline]
    pub fn periodic_index(&self, m: usize) -> usize {
        let c = self.medium_grid.coords(m);
        ((c[0] + self.offset[0]) * self.dims[1] + c[1] + self.offset[1]) * self.dims[2] + c[2] + self.offset[2]
    }

    pub fn embed<T: Copy + Send + Sync>(&self, f: &[T], fill: T) -> Vec<T> {
        let mut out = vec![fill; self.len()];
        for (m, v) in f.iter().enumerate() {
            out[self.periodic_index(m)] = *v;
        }
        out
    }

    pub fn restrict<T: Copy>(&self, f: &[T]) -> Vec<T> {
        (0..self.medium_grid.len()).map(|m| f[self.periodic_index(m)]).collect()
    }

    /// Discrete L² norm over the whole box.
    pub fn l2(&self, f: &[CVec3]) -> f64 {
        (self.h.powi(3) * f.iter().map(norm_sqr).sum::<f64>()).sqrt()
    }

    /// Discrete L² norm over the medium nodes.
    pub fn l2_medium(&self, f: &[CVec3]) -> f64 {
        let s: f64 = (0..self.medium_grid.len()).map(|m| norm_sqr(&f[self.periodic_index(m)])).sum();
        (self.h.powi(3) * s).sqrt()
    }

    /// Weighted norm `‖⟨x − c⟩^θ f‖` over the whole box, centered at the box center.
    pub fn weighted_l2(&self, f: &[CVec3], theta: f64) -> f64 {
        let c = self.medium_grid.center();
        let s: f64 = f
            .iter()
            .enumerate()
            .map(|(p, v)| (1.0 + (self.position(p) - c).norm_squared()).powf(theta) * norm_sqr(v))
            .sum();
        (self.h.powi(3) * s).sqrt()
    }
}

/// Default weight exponent for weighted remainder norms.
pub const WEIGHT_THETA: f64 = -0.55;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyShift {
    /// Plain periodic lattice `ξ = 2πm/L`; `ξ = 0` is always resonant.
    None,
    /// Half-period shift along the axis with the largest `|Im ζ_a|`.
    #[default]
    Auto,
    Axis(usize),
}

/// FFT machinery on a periodic box, for periodic and twisted functions.
pub struct Spectral {
    pub pbox: PeriodicBox,
    pub shift_axis: Option<usize>,
    fft: Fft3,
    twist: Vec<C64>,
}

impl Spectral {
    pub fn new(pbox: PeriodicBox, shift_axis: Option<usize>) -> Self {
        let fft = Fft3::new(pbox.dims);
        let twist = match shift_axis {
            Some(a) => (0..pbox.len())
                .map(|p| C64::from_polar(1.0, std::f64::consts::PI * pbox.coords(p)[a] as f64 / pbox.dims[a] as f64))
                .collect(),
            None => vec![],
        };
        Self { pbox, shift_axis, fft, twist }
    }

    /// Lattice frequency of FFT bin `p`.
    #[inline]
    pub fn xi(&self, p: usize, twisted: bool) -> RVec3 {
        let c = self.pbox.coords(p);
        let l = self.pbox.lengths();
        RVec3::from_fn(|a, _| {
            let mut m = signed_index(c[a], self.pbox.dims[a]) as f64;
            if twisted && self.shift_axis == Some(a) {
                m += 0.5;
            }
            2.0 * std::f64::consts::PI * m / l[a]
        })
    }

    pub fn forward(&self, u: &[C64], twisted: bool) -> Vec<C64> {
        let mut v: Vec<C64> = if twisted && self.shift_axis.is_some() {
            u.par_iter().zip(&self.twist).map(|(a, t)| a * t.conj()).collect()
        } else {
            u.to_vec()
        };
        self.fft.forward(&mut v);
        v
    }

    pub fn inverse(&self, mut v: Vec<C64>, twisted: bool) -> Vec<C64> {
        self.fft.inverse(&mut v);
        if twisted && self.shift_axis.is_some() {
            v.par_iter_mut().zip(&self.twist).for_each(|(a, t)| *a *= t);
        }
        v
    }

    /// Applies the Fourier multiplier `m(ξ)` to a scalar function.
    pub fn multiply(&self, u: &[C64], twisted: bool, m: impl Fn(&RVec3) -> C64 + Sync) -> Vec<C64> {
        let mut v = self.forward(u, twisted);
        v.par_iter_mut().enumerate().for_each(|(p, z)| *z *= m(&self.xi(p, twisted)));
        self.inverse(v, twisted)
    }

    /// Applies a 3×3 matrix multiplier to a vector function.
    pub fn multiply_vec(
        &self,
        u: &[CVec3],
        twisted: bool,
        m: impl Fn(&RVec3) -> Matrix3<C64> + Sync,
    ) -> Vec<CVec3> {
        let comps: Vec<Vec<C64>> = (0..3)
            .map(|c| self.forward(&u.iter().map(|v| v[c]).collect::<Vec<_>>(), twisted))
            .collect();
        let mut out: Vec<Vec<C64>> = vec![vec![C64::default(); u.len()]; 3];
        {
            let (o0, rest) = out.split_at_mut(1);
            let (o1, o2) = rest.split_at_mut(1);
            o0[0]
                .par_iter_mut()
                .zip(o1[0].par_iter_mut())
                .zip(o2[0].par_iter_mut())
                .enumerate()
                .for_each(|(p, ((a, b), c))| {
                    let v = m(&self.xi(p, twisted)) * CVec3::new(comps[0][p], comps[1][p], comps[2][p]);
                    *a = v[0];
                    *b = v[1];
                    *c = v[2];
                });
        }
        let back: Vec<Vec<C64>> = out.into_iter().map(|c| self.inverse(c, twisted)).collect();
        (0..u.len()).map(|p| CVec3::new(back[0][p], back[1][p], back[2][p])).collect()
    }

    pub fn gradient(&self, u: &[C64], twisted: bool) -> Vec<CVec3> {
        let spec = self.forward(u, twisted);
        let comps: Vec<Vec<C64>> = (0..3)
            .map(|a| {
                let v: Vec<C64> = spec.par_iter().enumerate().map(|(p, z)| z * I * self.xi(p, twisted)[a]).collect();
                self.inverse(v, twisted)
            })
            .collect();
        (0..u.len()).map(|p| CVec3::new(comps[0][p], comps[1][p], comps[2][p])).collect()
    }
}

/// `G_ζ`, the inverse of `−(Δ + 2iζ·∇)`, as a Fourier multiplier on the box.
pub struct FaddeevKernel {
    pub zeta: CVec3,
    pub box_length: [f64; 3],
    pub dims: [usize; 3],
    pub denom: Vec<C64>,
    pub min_denom: f64,
    pub floor: f64,
    pub spectral: Arc<Spectral>,
}

/// Default resonance floor relative to `|ζ|²`.
pub const DENOM_FLOOR_REL: f64 = 1e-6;

fn choose_shift(zeta: &CVec3, shift: FrequencyShift) -> Result<Option<usize>> {
    Ok(match shift {
        FrequencyShift::None => None,
        FrequencyShift::Axis(a) if a < 3 => Some(a),
        FrequencyShift::Axis(a) => return Err(Error::Param(format!("shift axis {a} out of range"))),
        FrequencyShift::Auto => Some(
            (0..3)
                .max_by(|&a, &b| zeta[a].im.abs().partial_cmp(&zeta[b].im.abs()).unwrap())
                .unwrap(),
        ),
    })
}

impl FaddeevKernel {
    pub fn new(pbox: PeriodicBox, zeta: CVec3, shift: FrequencyShift, floor_rel: f64) -> Result<Self> {
        let spectral = Arc::new(Spectral::new(pbox, choose_shift(&zeta, shift)?));
        Self::with_spectral(spectral, zeta, floor_rel)
    }

    pub fn with_spectral(spectral: Arc<Spectral>, zeta: CVec3, floor_rel: f64) -> Result<Self> {
        let pbox = spectral.pbox;
        let denom: Vec<C64> = (0..pbox.len())
            .into_par_iter()
            .map(|p| {
                let xi = spectral.xi(p, true);
                C64::from(xi.norm_squared()) + 2.0 * crate::field::rdot(&zeta, &xi)
            })
            .collect();
        let min_denom = denom.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let floor = floor_rel * norm_sqr(&zeta);
        if !(min_denom > floor) {
            return Err(Error::Resonance { min_denom, floor });
        }
        Ok(Self { zeta, box_length: pbox.lengths(), dims: pbox.dims, denom, min_denom, floor, spectral })
    }

    /// `G_ζ f` for a compactly supported scalar `f`; the result is twisted.
    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let mut v = self.spectral.forward(f, true);
        v.par_iter_mut().zip(&self.denom).for_each(|(z, d)| *z /= d);
        self.spectral.inverse(v, true)
    }

    pub fn apply_vec(&self, f: &[CVec3]) -> Vec<CVec3> {
        let comps: Vec<Vec<C64>> = (0..3).map(|c| self.apply(&f.iter().map(|v| v[c]).collect::<Vec<_>>())).collect();
        (0..f.len()).map(|p| CVec3::new(comps[0][p], comps[1][p], comps[2][p])).collect()
    }

    /// `−(Δ + 2iζ·∇)u` for a twisted `u`.
    pub fn apply_operator(&self, u: &[C64]) -> Vec<C64> {
        let mut v = self.spectral.forward(u, true);
        v.par_iter_mut().zip(&self.denom).for_each(|(z, d)| *z *= d);
        self.spectral.inverse(v, true)
    }
}

pub fn faddeev_apply(kernel: &FaddeevKernel, f: &[C64]) -> Vec<C64> {
    kernel.apply(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeScheme {
    /// Second-order centered differences on the medium grid.
    #[default]
    Centered,
    /// Spectral derivatives on the periodic extension.
    Spectral,
}

/// Background wavenumber `k = ω√n_c` read from the boundary value of `n`.
pub fn background_wavenumber(medium: &Medium) -> f64 {
    medium.omega * medium.n[0].sqrt()
}

/// `γ₀ = q/k²` on the medium grid, checking that `γ₀ − 1` vanishes on the collar.
pub fn gamma_field(medium: &Medium) -> Result<(Vec<C64>, f64)> {
    let k = background_wavenumber(medium);
    let k2 = k * k;
    let gamma: Vec<C64> = medium.q().iter().map(|q| q / k2).collect();
    let peak = gamma.iter().map(|g| (g - 1.0).norm()).fold(0.0, f64::max);
    let tol = 1e-10 * peak.max(1.0);
    for (p, g) in gamma.iter().enumerate() {
        if medium.grid.boundary_distance(p) < 2 && (g - 1.0).norm() > tol {
            return Err(Error::Support(format!(
                "|γ₀ − 1| = {:.3e} at collar node {p}; the medium must equal its background (σ = 0, n = n_c) on a two-node collar",
                (g - 1.0).norm()
            )));
        }
    }
    Ok((gamma, k))
}

/// `α = ∇γ₀/γ₀` and `𝔮 = ¼α·α + ½∇·α` on the medium grid.
pub fn build_alpha_q(medium: &Medium, scheme: DerivativeScheme) -> Result<(VectorField, ComplexField)> {
    let (gamma, _) = gamma_field(medium)?;
    let grid = medium.grid;
    match scheme {
        DerivativeScheme::Centered => {
            let s = [grid.stride(0), grid.stride(1), 1];
            let h2 = 2.0 * grid.spacing;
            let alpha: Vec<CVec3> = (0..grid.len())
                .map(|p| {
                    if grid.is_boundary(p) {
                        return CVec3::zeros();
                    }
                    CVec3::from_fn(|a, _| (gamma[p + s[a]] - gamma[p - s[a]]) / h2 / gamma[p])
                })
                .collect();
            let q: Vec<C64> = (0..grid.len())
                .map(|p| {
                    if grid.boundary_distance(p) < 2 {
                        return C64::default();
                    }
                    let div: C64 = (0..3).map(|a| (alpha[p + s[a]][a] - alpha[p - s[a]][a]) / h2).sum();
                    0.25 * bdot(&alpha[p], &alpha[p]) + 0.5 * div
                })
                .collect();
            Ok((VectorField { grid, values: alpha }, ComplexField { grid, values: q }))
        }
        DerivativeScheme::Spectral => {
            let cm = CgoMedium::from_gamma(medium.grid, gamma, background_wavenumber(medium));
            Ok((
                VectorField { grid, values: cm.pbox.restrict(&cm.alpha) },
                ComplexField { grid, values: cm.pbox.restrict(&cm.frak_q) },
            ))
        }
    }
}

/// Medium-dependent coefficients of the remainder system on the periodic box.
pub struct CgoMedium {
    pub pbox: PeriodicBox,
    pub k: f64,
    pub gamma: Vec<C64>,
    pub sqrt_gamma: Vec<C64>,
    pub alpha: Vec<CVec3>,
    /// `grad_alpha[p][(i, j)] = ∂_j α_i`.
    pub grad_alpha: Vec<Matrix3<C64>>,
    pub frak_q: Vec<C64>,
}

impl CgoMedium {
    pub fn new(medium: &Medium) -> Result<Self> {
        let (gamma, k) = gamma_field(medium)?;
        Ok(Self::from_gamma(medium.grid, gamma, k))
    }

    fn from_gamma(grid: Grid, gamma_m: Vec<C64>, k: f64) -> Self {
        let pbox = PeriodicBox::around(&grid);
        let spec = Spectral::new(pbox, None);
        let gamma = pbox.embed(&gamma_m, C64::from(1.0));
        let gm1: Vec<C64> = gamma.iter().map(|g| g - 1.0).collect();
        let dg = spec.gradient(&gm1, false);
        let alpha: Vec<CVec3> = dg.iter().zip(&gamma).map(|(d, g)| d / *g).collect();
        let da: Vec<Vec<CVec3>> =
            (0..3).map(|i| spec.gradient(&alpha.iter().map(|v| v[i]).collect::<Vec<_>>(), false)).collect();
        let grad_alpha: Vec<Matrix3<C64>> =
            (0..pbox.len()).map(|p| Matrix3::from_fn(|i, j| da[i][p][j])).collect();
        let frak_q: Vec<C64> = (0..pbox.len())
            .map(|p| 0.25 * bdot(&alpha[p], &alpha[p]) + 0.5 * grad_alpha[p].trace())
            .collect();
        let sqrt_gamma = gamma.iter().map(|g| g.sqrt()).collect();
        Self { pbox, k, gamma, sqrt_gamma, alpha, grad_alpha, frak_q }
    }
}

/// How the far-field value of `Q` is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QClosure {
    /// `Q = iζ×η + Q'` with decaying `Q'`; consistent with `Q = D×V`.
    #[default]
    FarField,
    /// `Q` itself decaying, sources exactly as in the original system.
    Decaying,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CgoConfig {
    pub tol: f64,
    pub m_cap: usize,
    pub closure: QClosure,
    pub shift: FrequencyShift,
    pub denom_floor_rel: f64,
}

impl Default for CgoConfig {
    fn default() -> Self {
        Self { tol: 1e-8, m_cap: 60, closure: QClosure::FarField, shift: FrequencyShift::Auto, denom_floor_rel: DENOM_FLOOR_REL }
    }
}

/// Converged remainder pair.
///
/// `r` and `q` are restricted to the medium grid; `q` holds the full 2-form
/// (Hodge-identified) including its far-field part. The periodic-box values
/// are kept for diagnostics.
pub struct RemainderPair {
    pub r: VectorField,
    pub q: VectorField,
    pub series_terms: usize,
    pub tail_norm: f64,
    pub ratios: Vec<f64>,
    pub r_box: Vec<CVec3>,
    pub q_decaying_box: Vec<CVec3>,
    pub q_far: CVec3,
}

fn check_k(params: &CgoParams, k: f64) -> Result<()> {
    if (params.k - k).abs() > 1e-10 * k {
        return Err(Error::Param(format!("CGO parameters use k = {}, medium background has k = {k}", params.k)));
    }
    Ok(())
}

/// Sums the Neumann series for `(R, Q)` with an existing kernel.
pub fn neumann_series_with(
    cm: &CgoMedium,
    kernel: &FaddeevKernel,
    params: &CgoParams,
    cfg: &CgoConfig,
) -> Result<RemainderPair> {
    check_k(params, cm.k)?;
    let pbox = cm.pbox;
    let k2 = cm.k * cm.k;
    let eta = params.eta_zeta;
    let zn = params.zeta_norm();
    let far = match cfg.closure {
        QClosure::FarField => params.zeta.cross(&eta) * I,
        QClosure::Decaying => CVec3::zeros(),
    };
    let n = pbox.len();
    let mut s_r: Vec<CVec3> = (0..n)
        .into_par_iter()
        .map(|p| {
            let g1 = cm.gamma[p] - 1.0;
            cm.grad_alpha[p] * eta + eta * (g1 * k2 - cm.frak_q[p]) + cm.alpha[p].cross(&far) * cm.sqrt_gamma[p]
        })
        .collect();
    let mut s_q: Vec<CVec3> = (0..n)
        .into_par_iter()
        .map(|p| cm.alpha[p].cross(&eta) * (cm.sqrt_gamma[p] * k2) + far * ((cm.gamma[p] - 1.0) * k2))
        .collect();
    let mut r_sum = vec![CVec3::zeros(); n];
    let mut q_sum = vec![CVec3::zeros(); n];
    let mut ratios = Vec::new();
    let mut first = None;
    let mut prev = 0.0;
    let mut tail = 0.0;
    let mut terms = 0;
    for m in 0..cfg.m_cap.max(1) {
        let r_m = kernel.apply_vec(&s_r);
        let q_m = kernel.apply_vec(&s_q);
        let size = pbox.l2(&r_m) + pbox.l2(&q_m) / zn;
        r_sum.par_iter_mut().zip(&r_m).for_each(|(a, b)| *a += b);
        q_sum.par_iter_mut().zip(&q_m).for_each(|(a, b)| *a += b);
        terms = m + 1;
        let base = *first.get_or_insert(size);
        if m > 0 {
            let ratio = size / prev;
            ratios.push(ratio);
            if ratio >= 1.0 {
                return Err(Error::NoContraction { ratio, term: m });
            }
        }
        tail = if base > 0.0 { size / base } else { 0.0 };
        if base == 0.0 || tail <= cfg.tol {
            break;
        }
        prev = size;
        s_r = (0..n)
            .into_par_iter()
            .map(|p| {
                let g1 = cm.gamma[p] - 1.0;
                cm.alpha[p].cross(&q_m[p]) * cm.sqrt_gamma[p]
                    + cm.grad_alpha[p] * r_m[p]
                    + r_m[p] * (g1 * k2 - cm.frak_q[p])
            })
            .collect();
        s_q = (0..n)
            .into_par_iter()
            .map(|p| cm.alpha[p].cross(&r_m[p]) * (cm.sqrt_gamma[p] * k2) + q_m[p] * ((cm.gamma[p] - 1.0) * k2))
            .collect();
    }
    if tail > cfg.tol {
        return Err(Error::NoConvergence { iterations: terms, residual: tail });
    }
    let grid = pbox.medium_grid;
    let q_total: Vec<CVec3> = q_sum.iter().map(|v| v + far).collect();
    Ok(RemainderPair {
        r: VectorField { grid, values: pbox.restrict(&r_sum) },
        q: VectorField { grid, values: pbox.restrict(&q_total) },
        series_terms: terms,
        tail_norm: tail,
        ratios,
        r_box: r_sum,
        q_decaying_box: q_sum,
        q_far: far,
    })
}

pub fn neumann_series_rq(medium: &Medium, params: &CgoParams, cfg: &CgoConfig) -> Result<RemainderPair> {
    let cm = CgoMedium::new(medium)?;
    check_k(params, cm.k)?;
    let kernel = FaddeevKernel::new(cm.pbox, params.zeta, cfg.shift, cfg.denom_floor_rel)?;
    neumann_series_with(&cm, &kernel, params, cfg)
}

/// Relative residuals of an assembled CGO solution, measured on the medium
/// nodes in the conjugated frame `E = e^{ix·ζ}V`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CgoResidual {
    /// `‖−D×D×V + k²γV‖ / (‖D×D×V‖ + ‖k²γV‖)` with `D = ∇ + iζ`.
    pub maxwell: f64,
    /// `‖D·(γV)‖ / (|ζ|·‖γV‖)`.
    pub divergence: f64,
    /// `‖Q − D×V‖ / ‖Q‖`.
    pub q_consistency: f64,
}

pub fn cgo_residual(cm: &CgoMedium, kernel: &FaddeevKernel, params: &CgoParams, pair: &RemainderPair) -> CgoResidual {
    let pbox = cm.pbox;
    let spec = &kernel.spectral;
    let zeta = params.zeta;
    let eta = params.eta_zeta;
    let k2 = cm.k * cm.k;
    let n = pbox.len();
    // V = η + U, U compact-plus-twisted
    let u: Vec<CVec3> = (0..n)
        .map(|p| {
            let isg = 1.0 / cm.sqrt_gamma[p];
            eta * (isg - 1.0) + pair.r_box[p] * isg
        })
        .collect();
    let cross = |w: CVec3| Matrix3::new(C64::default(), -w[2], w[1], w[2], C64::default(), -w[0], -w[1], w[0], C64::default());
    let curl_u = spec.multiply_vec(&u, true, |xi| cross(complexify(xi) + zeta) * I);
    let ccu = spec.multiply_vec(&u, true, |xi| {
        let m = cross(complexify(xi) + zeta);
        -(m * m)
    });
    let mut res = vec![CVec3::zeros(); n];
    let mut ddv = vec![CVec3::zeros(); n];
    let mut kgv = vec![CVec3::zeros(); n];
    for p in 0..n {
        let v = eta + u[p];
        ddv[p] = eta * C64::from(k2) + ccu[p];
        kgv[p] = v * (cm.gamma[p] * k2);
        res[p] = kgv[p] - ddv[p];
    }
    let maxwell = pbox.l2_medium(&res) / (pbox.l2_medium(&ddv) + pbox.l2_medium(&kgv));

    let y: Vec<CVec3> = (0..n).map(|p| eta * (cm.gamma[p] - 1.0) + u[p] * cm.gamma[p]).collect();
    let gv: Vec<CVec3> = (0..n).map(|p| (eta + u[p]) * cm.gamma[p]).collect();
    let div_parts: Vec<Vec<C64>> = (0..3)
        .map(|a| spec.multiply(&y.iter().map(|v| v[a]).collect::<Vec<_>>(), true, |xi| I * (xi[a] + zeta[a])))
        .collect();
    let div: Vec<CVec3> = (0..n)
        .map(|p| CVec3::new(div_parts[0][p] + div_parts[1][p] + div_parts[2][p], C64::default(), C64::default()))
        .collect();
    let divergence = pbox.l2_medium(&div) / (params.zeta_norm() * pbox.l2_medium(&gv));

    let far = zeta.cross(&eta) * I;
    let dv: Vec<CVec3> = curl_u.iter().map(|c| c + far).collect();
    let qt: Vec<CVec3> = pair.q_decaying_box.iter().map(|q| q + pair.q_far).collect();
    let diff: Vec<CVec3> = dv.iter().zip(&qt).map(|(a, b)| a - b).collect();
    let q_consistency = pbox.l2_medium(&diff) / pbox.l2_medium(&qt).max(f64::MIN_POSITIVE);
    CgoResidual { maxwell, divergence, q_consistency }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CgoFieldReport {
    pub min_abs_e: f64,
    pub series_terms: usize,
    pub tail_norm: f64,
    pub residual: CgoResidual,
}

/// `E_ζ = γ₀^{−1/2} e^{ix·ζ}(η_ζ + R_ζ)` on the medium grid, with diagnostics.
pub fn cgo_field_with_report(
    medium: &Medium,
    params: &CgoParams,
    cfg: &CgoConfig,
) -> Result<(VectorField, RemainderPair, CgoFieldReport)> {
    let cm = CgoMedium::new(medium)?;
    check_k(params, cm.k)?;
    let kernel = FaddeevKernel::new(cm.pbox, params.zeta, cfg.shift, cfg.denom_floor_rel)?;
    let pair = neumann_series_with(&cm, &kernel, params, cfg)?;
    let residual = cgo_residual(&cm, &kernel, params, &pair);
    let grid = medium.grid;
    let values: Vec<CVec3> = (0..grid.len())
        .map(|m| {
            let p = cm.pbox.periodic_index(m);
            let x = grid.position(m);
            let phase = (I * crate::field::rdot(&params.zeta, &x)).exp();
            (params.eta_zeta + pair.r.values[m]) * (phase / cm.sqrt_gamma[p])
        })
        .collect();
    let min_abs_e = values.iter().map(|v| norm_sqr(v).sqrt()).fold(f64::INFINITY, f64::min);
    let report = CgoFieldReport { min_abs_e, series_terms: pair.series_terms, tail_norm: pair.tail_norm, residual };
    Ok((VectorField { grid, values }, pair, report))
}

pub fn cgo_field(medium: &Medium, params: &CgoParams, cfg: &CgoConfig) -> Result<VectorField> {
    cgo_field_with_report(medium, params, cfg).map(|r| r.0)
}

/// One row of an `s`-sweep.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayRow {
    pub s: f64,
    pub zeta_norm: f64,
    pub r_norm: f64,
    pub eta_norm: f64,
    /// Slope of `log(‖R‖/|η|)` against `log|ζ|` from the previous row (NaN for the first).
    pub slope: f64,
    pub maxwell_residual: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Remainder norms over the medium box across several `s`.
pub fn decay_study(medium: &Medium, base: &CgoParams, s_values: &[f64], cfg: &CgoConfig) -> Result<Vec<DecayRow>> {
    let cm = CgoMedium::new(medium)?;
    let mut rows: Vec<DecayRow> = Vec::new();
    for &s in s_values {
        let params = base.with_s(s)?;
        check_k(&params, cm.k)?;
        let kernel = FaddeevKernel::new(cm.pbox, params.zeta, cfg.shift, cfg.denom_floor_rel)?;
        let pair = neumann_series_with(&cm, &kernel, &params, cfg)?;
        let res = cgo_residual(&cm, &kernel, &params, &pair);
        let r_norm = cm.pbox.l2_medium(&pair.r_box);
        let eta_norm = norm_sqr(&params.eta_zeta).sqrt();
        let slope = match rows.last() {
            Some(prev) => loglog_slope(&[prev.zeta_norm, params.zeta_norm()], &[prev.r_norm / prev.eta_norm, r_norm / eta_norm]),
            None => f64::NAN,
        };
        rows.push(DecayRow { s, zeta_norm: params.zeta_norm(), r_norm, eta_norm, slope, maxwell_residual: res.maxwell });
    }
    Ok(rows)
}

/// Range of `|E(x)| / (|γ₀|^{−1/2} e^{s x·ρ} √2 s)` over the medium nodes.
pub fn asymptote_ratio_range(medium: &Medium, params: &CgoParams, e: &VectorField) -> Result<(f64, f64)> {
    let (gamma, _) = gamma_field(medium)?;
    let grid = medium.grid;
    let scale = std::f64::consts::SQRT_2 * params.s;
    Ok((0..grid.len()).fold((f64::INFINITY, 0.0f64), |(lo, hi), m| {
        let model = gamma[m].norm().powf(-0.5) * (params.s * params.rho.dot(&grid.position(m))).exp() * scale;
        let r = norm_sqr(&e.values[m]).sqrt() / model;
        (lo.min(r), hi.max(r))
    }))
}

/// Largest `| |Ê(x)·ξ| − |ẑ∞·ξ| |` over nodes and unit directions `ξ`.
pub fn direction_deviation(e: &VectorField, z_inf: &CVec3, directions: &[RVec3]) -> f64 {
    let zn = norm_sqr(z_inf).sqrt();
    e.values
        .par_iter()
        .map(|v| {
            let u = v / C64::from(norm_sqr(v).sqrt());
            directions
                .iter()
                .map(|xi| (crate::field::rdot(&u, xi).norm() - crate::field::rdot(z_inf, xi).norm() / zn).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::c;
    use crate::illum::cgo_params;
    use crate::medium::{make_phantom, BumpProfile, PhantomKind, PhantomParams};

    fn e(i: usize) -> RVec3 {
        let mut v = RVec3::zeros();
        v[i] = 1.0;
        v
    }

    fn small_box() -> PeriodicBox {
        PeriodicBox::around(&Grid::centered_cube(8, 1.0).unwrap())
    }

    #[test]
    fn embed_restrict_roundtrip() {
        let b = small_box();
        assert_eq!(b.dims, [16; 3]);
        let f: Vec<C64> = (0..b.medium_grid.len()).map(|i| C64::from(i as f64)).collect();
        let emb = b.embed(&f, C64::from(-1.0));
        assert_eq!(b.restrict(&emb), f);
        for m in [0, 77, b.medium_grid.len() - 1] {
            assert!((b.position(b.periodic_index(m)) - b.medium_grid.position(m)).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_is_divided_by_its_symbol() {
        let b = small_box();
        let p = cgo_params(3.0, e(2), e(0), 1.0, None, None).unwrap();
        let kern = FaddeevKernel::new(b, p.zeta, FrequencyShift::Auto, DENOM_FLOOR_REL).unwrap();
        let spec = &kern.spectral;
        // twisted mode with lattice frequency of bin `bin`
        let bin = spec.pbox.len() / 3 + 5;
        let xi = spec.xi(bin, true);
        let f: Vec<C64> = (0..b.len()).map(|q| (I * xi.dot(&(b.position(q) - RVec3::from(b.start)))).exp()).collect();
        let d = C64::from(xi.norm_squared()) + 2.0 * crate::field::rdot(&p.zeta, &xi);
        let g = kern.apply(&f);
        for (gi, fi) in g.iter().zip(&f) {
            assert!((gi - fi / d).norm() < 1e-12);
        }
        assert!(kern.apply(&vec![C64::default(); b.len()]).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn unshifted_lattice_is_always_resonant() {
        let p = cgo_params(3.0, e(2), e(0), 1.0, None, None).unwrap();
        assert!(matches!(
            FaddeevKernel::new(small_box(), p.zeta, FrequencyShift::None, DENOM_FLOOR_REL),
            Err(Error::Resonance { .. })
        ));
    }

    #[test]
    fn forced_resonance_on_shifted_lattice() {
        // ρ = (1, 2, 0)/√5, ρ⊥ = ê₃, L = 2: ξ = (−π, π/2, −π) solves ρ·ξ = 0 and
        // |ξ|² + 2√(s² + k²)ξ₃ = 0 for √(s² + 1) = 1.125π.
        let grid = Grid::new([8; 3], 2.0 / 16.0, [-0.5; 3]).unwrap();
        let b = PeriodicBox::around(&grid);
        assert!((b.lengths()[0] - 2.0).abs() < 1e-15);
        let rho = RVec3::new(1.0, 2.0, 0.0) / 5f64.sqrt();
        let s = ((1.125 * std::f64::consts::PI).powi(2) - 1.0).sqrt();
        let p = cgo_params(s, rho, e(2), 1.0, None, None).unwrap();
        assert!(matches!(
            FaddeevKernel::new(b, p.zeta, FrequencyShift::Auto, DENOM_FLOOR_REL),
            Err(Error::Resonance { .. })
        ));
        let p = cgo_params(s * 1.1, rho, e(2), 1.0, None, None).unwrap();
        assert!(FaddeevKernel::new(b, p.zeta, FrequencyShift::Auto, DENOM_FLOOR_REL).is_ok());
    }

    fn bump(x: &RVec3, w: f64) -> f64 {
        (-(x.norm_squared()) / (w * w)).exp()
    }

    #[test]
    fn kernel_inverts_conjugated_operator() {
        let b = PeriodicBox::around(&Grid::centered_cube(16, 1.0).unwrap());
        let p = cgo_params(5.0, e(2), e(1), 2.0, None, None).unwrap();
        let kern = FaddeevKernel::new(b, p.zeta, FrequencyShift::Auto, DENOM_FLOOR_REL).unwrap();
        let f: Vec<C64> = (0..b.len()).map(|q| C64::from(bump(&b.position(q), 0.15))).collect();
        let u = kern.apply(&f);
        // independent application of −(Δ + 2iζ·∇) through spectral derivatives
        let spec = &kern.spectral;
        let grad = spec.gradient(&u, true);
        let lap: Vec<C64> = {
            let parts: Vec<Vec<CVec3>> =
                (0..3).map(|a| spec.gradient(&grad.iter().map(|v| v[a]).collect::<Vec<_>>(), true)).collect();
            (0..b.len()).map(|q| parts[0][q][0] + parts[1][q][1] + parts[2][q][2]).collect()
        };
        let back: Vec<C64> = (0..b.len()).map(|q| -(lap[q] + 2.0 * I * bdot(&p.zeta, &grad[q]))).collect();
        let err: f64 = back.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    fn gaussian_medium(n: usize, amp_n: f64, amp_s: f64) -> Medium {
        let g = Grid::centered_cube(n, 1.0).unwrap();
        let p = PhantomParams {
            n_c: 1.0,
            sigma_c: 0.0,
            omega: 1.0,
            amp_n,
            amp_sigma: amp_s,
            radius: 0.8,
            profile: BumpProfile::Gaussian,
            ..Default::default()
        };
        make_phantom(PhantomKind::SmoothBump, g, &p).unwrap()
    }

    #[test]
    fn alpha_q_of_constant_medium_vanish() {
        let g = Grid::centered_cube(10, 1.0).unwrap();
        let m = Medium::constant(g, 2.0, 0.0, 1.5).unwrap();
        for scheme in [DerivativeScheme::Centered, DerivativeScheme::Spectral] {
            let (a, q) = build_alpha_q(&m, scheme).unwrap();
            assert!(a.values.iter().all(|v| v.norm() < 1e-12));
            assert!(q.values.iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn alpha_q_match_log_gradient_oracle() {
        // γ₀ = e^g with g = a(1 − r²/ρ²)⁴: α = ∇g, 𝔮 = ¼|∇g|² + ½Δg.
        let (amp, rad) = (0.3, 0.35);
        let u = |x: &RVec3| (1.0 - x.norm_squared() / (rad * rad)).max(0.0);
        let gfun = |x: &RVec3| amp * u(x).powi(4);
        let grad = |x: &RVec3| x * (-8.0 * amp * u(x).powi(3) / (rad * rad));
        let lap = |x: &RVec3| {
            amp * (48.0 * u(x).powi(2) * x.norm_squared() / rad.powi(4) - 24.0 * u(x).powi(3) / (rad * rad))
        };
        let errors = |n: usize, scheme| {
            let g = Grid::centered_cube(n, 1.0).unwrap();
            let nvals: Vec<f64> = (0..g.len()).map(|p| gfun(&g.position(p)).exp()).collect();
            let m = Medium::new(g, nvals, vec![0.0; g.len()], 1.0).unwrap();
            let (a, q) = build_alpha_q(&m, scheme).unwrap();
            let (mut ea, mut eq) = (0.0f64, 0.0f64);
            for p in g.nodes_with_distance(2) {
                let x = g.position(p);
                let gr = grad(&x);
                ea = ea.max((a.values[p] - complexify(&gr)).norm());
                eq = eq.max((q.values[p] - C64::from(0.25 * gr.norm_squared() + 0.5 * lap(&x))).norm());
            }
            (ea, eq)
        };
        let coarse = errors(24, DerivativeScheme::Centered);
        let fine = errors(48, DerivativeScheme::Centered);
        assert!(coarse.0 / fine.0 > 3.3 && coarse.1 / fine.1 > 3.3, "{coarse:?} {fine:?}");
        let spectral = errors(24, DerivativeScheme::Spectral);
        assert!(spectral.0 < coarse.0 && spectral.1 < coarse.1, "{spectral:?} {coarse:?}");
    }

    #[test]
    fn support_error_on_collar() {
        let g = Grid::centered_cube(10, 1.0).unwrap();
        let mut n = vec![1.0; g.len()];
        n[g.index(1, 5, 5)] = 1.2;
        let m = Medium::new(g, n, vec![0.0; g.len()], 1.0).unwrap();
        assert!(matches!(build_alpha_q(&m, DerivativeScheme::Centered), Err(Error::Support(_))));
        let m = Medium::constant(g, 1.0, 0.1, 1.0).unwrap();
        assert!(matches!(CgoMedium::new(&m), Err(Error::Support(_))));
    }

    #[test]
    fn constant_medium_gives_plane_wave() {
        let g = Grid::centered_cube(8, 1.0).unwrap();
        let m = Medium::constant(g, 1.0, 0.0, 2.0).unwrap();
        let p = cgo_params(8.0, e(2), e(0), 2.0, None, None).unwrap();
        let (ef, pair, rep) = cgo_field_with_report(&m, &p, &CgoConfig::default()).unwrap();
        assert!(pair.r.values.iter().all(|v| v.norm() == 0.0));
        for (mi, v) in ef.values.iter().enumerate() {
            let x = g.position(mi);
            let pw = p.eta_zeta * (I * crate::field::rdot(&p.zeta, &x)).exp();
            assert!((v - pw).norm() <= 1e-12 * pw.norm());
        }
        assert!(rep.min_abs_e > 0.0);
        assert!(matches!(
            cgo_field(&m, &cgo_params(8.0, e(2), e(0), 1.0, None, None).unwrap(), &CgoConfig::default()),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn series_solution_satisfies_maxwell() {
        // the discrete products alias until the bump is resolved, so the
        // residual decays spectrally with the grid size
        let mut res = vec![];
        for n in [16, 32] {
            let m = gaussian_medium(n, 0.3, 0.2);
            let k = background_wavenumber(&m);
            let p = cgo_params(20.0, e(2), e(0), k, None, None).unwrap();
            let cfg = CgoConfig { tol: 1e-10, ..Default::default() };
            let (_, pair, rep) = cgo_field_with_report(&m, &p, &cfg).unwrap();
            assert!(pair.ratios.iter().all(|&r| r < 1.0));
            assert!(pair.tail_norm <= 1e-10);
            res.push(rep.residual);
        }
        assert!(res[1].maxwell < 1e-3 && res[1].maxwell < res[0].maxwell / 100.0, "{res:?}");
        assert!(res[1].q_consistency < 1e-3, "{res:?}");
        assert!(res[1].divergence < 1e-6, "{res:?}");
    }

    #[test]
    fn small_s_fails_to_contract() {
        let g = Grid::centered_cube(16, 1.0).unwrap();
        let pp = PhantomParams { n_c: 1.0, sigma_c: 0.0, omega: 1.0, amp_n: 40.0, amp_sigma: 0.0, radius: 0.8, ..Default::default() };
        let m = make_phantom(PhantomKind::SmoothBump, g, &pp).unwrap();
        let p = cgo_params(0.5, e(2), e(0), 1.0, None, None).unwrap();
        let r = neumann_series_rq(&m, &p, &CgoConfig::default());
        assert!(matches!(r, Err(Error::NoContraction { .. })), "{:?}", r.err());
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y) + 1.5).abs() < 1e-12);
        let _ = c(0.0, 0.0);
    }
}
