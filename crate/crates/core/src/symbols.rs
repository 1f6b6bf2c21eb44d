//! Principal symbols of the linearized QTAT system: ellipticity rank checks,
//! the single-illumination hyperbolicity test and the Lopatinskii covering
//! condition.

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{complexify, norm_sqr, rdot, CVec3, RVec3, VectorField, C64, I};
use crate::medium::DerivedFields;

/// Rows `(a_j, b_j)` of the data block:
/// `a_j = −|E|²|ξ|² + 2κ|E·ξ|²`, `b_j = 2τ_n|E·ξ|²` (bilinear `E·ξ`).
pub fn ab_symbols(e: &CVec3, kappa: f64, tau_n: f64, xi: &RVec3) -> (f64, f64) {
    let ex2 = rdot(e, xi).norm_sqr();
    (-norm_sqr(e) * xi.norm_squared() + 2.0 * kappa * ex2, 2.0 * tau_n * ex2)
}

/// Smallest singular value of a `J×2` real matrix and its largest row norm.
///
/// Uses `σ_min² = det(G)/λ_max(G)` with `det(G)` summed from 2×2 minors, which
/// keeps full relative accuracy for nearly rank-one matrices.
pub fn sigma_min_rows(rows: &[[f64; 2]]) -> (f64, f64) {
    let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
    let mut det = 0.0;
    let mut max_row = 0.0f64;
    for (i, r) in rows.iter().enumerate() {
        g11 += r[0] * r[0];
        g12 += r[0] * r[1];
        g22 += r[1] * r[1];
        max_row = max_row.max((r[0] * r[0] + r[1] * r[1]).sqrt());
        for s in &rows[..i] {
            let m = s[0] * r[1] - s[1] * r[0];
            det += m * m;
        }
    }
    let tr = g11 + g22;
    let lmax = 0.5 * (tr + ((g11 - g22).powi(2) + 4.0 * g12 * g12).sqrt());
    let smin = if lmax > 0.0 { (det / lmax).sqrt() } else { 0.0 };
    (smin, max_row)
}

/// The `J×2` block `A₂₂` at one point.
pub fn a22_block(fields: &[CVec3], kappa: f64, tau_n: f64, xi: &RVec3) -> Vec<[f64; 2]> {
    fields
        .iter()
        .map(|e| {
            let (a, b) = ab_symbols(e, kappa, tau_n, xi);
            [a, b]
        })
        .collect()
}

/// Normalized rank margin `σ_min(A₂₂(Ê, ξ̂)) / max row norm` (0 if degenerate).
pub fn rank_margin(unit_fields: &[CVec3], kappa: f64, tau_n: f64, xi: &RVec3) -> f64 {
    let xi = xi / xi.norm();
    let (smin, rmax) = sigma_min_rows(&a22_block(unit_fields, kappa, tau_n, &xi));
    if rmax > 0.0 { smin / rmax } else { 0.0 }
}

/// Columns `(δσ, δn)` of `A₁₂` for one illumination: the rows for `δE_j`
/// followed by the rows for `δE_j*`.
pub fn a12_symbol(e: &CVec3, q0: C64, omega: f64, xi: &RVec3) -> DMatrix<C64> {
    let x = complexify(xi);
    let ex = rdot(e, xi);
    let ecx = rdot(&e.map(|z| z.conj()), xi);
    let qc = q0.conj();
    let mut m = DMatrix::zeros(6, 2);
    for c in 0..3 {
        m[(c, 0)] = -(I * omega / q0) * ex * x[c];
        m[(c, 1)] = -(omega * omega / q0) * ex * x[c];
        m[(3 + c, 0)] = (I * omega / qc) * ecx * x[c];
        m[(3 + c, 1)] = -(omega * omega / qc) * ecx * x[c];
    }
    m
}

/// Full principal symbol at one point.
#[derive(Clone, Debug)]
pub struct SymbolSample {
    pub node: usize,
    pub xi: RVec3,
    pub a0: DMatrix<C64>,
    pub a22: Vec<[f64; 2]>,
    pub sigma_min: f64,
    pub rank_ok: bool,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Assembles `A0 = [[−|ξ|² I, A₁₂], [0, A₂₂]]` of size `(2J𝔫+J) × (2J𝔫+2)`.
pub fn symbol_sample(
    node: usize,
    fields: &[CVec3],
    q0: C64,
    omega: f64,
    kappa: f64,
    tau_n: f64,
    xi: RVec3,
    rank_tol: f64,
) -> SymbolSample {
    let j = fields.len();
    let ne = 6 * j;
    let mut a0 = DMatrix::zeros(ne + j, ne + 2);
    let x2 = xi.norm_squared();
    for r in 0..ne {
        a0[(r, r)] = C64::from(-x2);
    }
    for (jj, e) in fields.iter().enumerate() {
        let blk = a12_symbol(e, q0, omega, &xi);
        for r in 0..6 {
            for cidx in 0..2 {
                a0[(6 * jj + r, ne + cidx)] = blk[(r, cidx)];
            }
        }
    }
    let a22 = a22_block(fields, kappa, tau_n, &xi);
    for (jj, r) in a22.iter().enumerate() {
        a0[(ne + jj, ne)] = C64::from(r[0]);
        a0[(ne + jj, ne + 1)] = C64::from(r[1]);
    }
    let (sigma_min, rmax) = sigma_min_rows(&a22);
    SymbolSample { node, xi, a0, a22, sigma_min, rank_ok: sigma_min > rank_tol * rmax }
}

/// Fibonacci-sphere directions.
pub fn fibonacci_sphere(n: usize) -> Vec<RVec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let th = golden * i as f64;
            RVec3::new(r * th.cos(), y, r * th.sin())
        })
        .collect()
}

/// Minimizes `f` on the unit sphere near `start` by Nelder–Mead in tangent-plane
/// coordinates, restarting from the best point until no progress is made.
pub fn refine_on_sphere(f: impl Fn(&RVec3) -> f64, start: RVec3, step: f64) -> (RVec3, f64) {
    let mut center = start.normalize();
    let mut best = f(&center);
    let mut step = step;
    for _ in 0..20 {
        let (t1, t2) = crate::illum::orthonormal_complement(&center);
        let map = |u: [f64; 2]| (center + t1 * u[0] + t2 * u[1]).normalize();
        let g = |u: [f64; 2]| f(&map(u));
        let (u, val) = nelder_mead_2d(&g, [0.0, 0.0], step, 400);
        if val < best {
            center = map(u);
            best = val;
            step = (u[0].hypot(u[1])).max(1e-9);
        } else {
            step *= 0.25;
            if step < 1e-12 {
                break;
            }
        }
    }
    (center, best)
}

fn nelder_mead_2d(f: &impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: f64, iters: usize) -> ([f64; 2], f64) {
    let mut s = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut v = s.map(f);
    for _ in 0..iters {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
        let (b, m, w) = (idx[0], idx[1], idx[2]);
        if (v[w] - v[b]).abs() <= 1e-16 * (1.0 + v[b].abs()) {
            break;
        }
        let c = [(s[b][0] + s[m][0]) / 2.0, (s[b][1] + s[m][1]) / 2.0];
        let pt = |t: f64| [c[0] + t * (s[w][0] - c[0]), c[1] + t * (s[w][1] - c[1])];
        let xr = pt(-1.0);
        let fr = f(xr);
        if fr < v[b] {
            let xe = pt(-2.0);
            let fe = f(xe);
            if fe < fr {
                s[w] = xe;
                v[w] = fe;
            } else {
                s[w] = xr;
                v[w] = fr;
            }
        } else if fr < v[m] {
            s[w] = xr;
            v[w] = fr;
        } else {
            let xc = if fr < v[w] { pt(-0.5) } else { pt(0.5) };
            let fc = f(xc);
            if fc < v[w].min(fr) {
                s[w] = xc;
                v[w] = fc;
            } else {
                for i in [m, w] {
                    s[i] = [(s[i][0] + s[b][0]) / 2.0, (s[i][1] + s[b][1]) / 2.0];
                    v[i] = f(s[i]);
                }
            }
        }
    }
    let b = (0..3).min_by(|&a, &c| v[a].partial_cmp(&v[c]).unwrap_or(std::cmp::Ordering::Equal)).unwrap();
    (s[b], v[b])
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EllipticityReport {
    /// Global minimum of the normalized rank margin.
    pub margin: f64,
    pub argmin_node: usize,
    pub argmin_xi: RVec3,
    /// Minimum margin per node over the sampled directions.
    pub node_margins: Vec<f64>,
    /// Sampled direction attaining each node's minimum.
    pub node_worst_xi: Vec<RVec3>,
    pub rank_tol: f64,
    pub pass: bool,
}

/// Scans the rank condition over every grid node and `xi_samples` directions.
///
/// Fields are normalized pointwise (`Ê_j = E_j/|E_j|`); the reported margin is
/// `σ_min(A₂₂)/max row norm`. The global argmin is refined by Nelder–Mead.
pub fn ellipticity_scan(
    fields: &[VectorField],
    derived: &DerivedFields,
    xi_samples: usize,
    rank_tol: f64,
) -> Result<EllipticityReport> {
    if fields.len() < 2 {
        return Err(Error::Param("the rank condition needs at least two illuminations".into()));
    }
    let grid = fields[0].grid;
    for f in fields {
        grid.check_same(&f.grid)?;
    }
    if derived.kappa.len() != grid.len() {
        return Err(Error::GridMismatch("derived fields do not match the illumination grid".into()));
    }
    let xis = fibonacci_sphere(xi_samples.max(1));
    let unit = |p: usize| -> Result<Vec<CVec3>> {
        fields
            .iter()
            .map(|f| {
                let n = norm_sqr(&f.values[p]).sqrt();
                if n == 0.0 || !n.is_finite() {
                    Err(Error::ZeroField { node: p })
                } else {
                    Ok(f.values[p] / C64::from(n))
                }
            })
            .collect()
    };
    let per_node: Vec<(f64, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let e = unit(p)?;
            let (k, t) = (derived.kappa[p], derived.tau_n[p]);
            let mut best = (f64::INFINITY, 0);
            for (i, xi) in xis.iter().enumerate() {
                let m = rank_margin(&e, k, t, xi);
                if m < best.0 {
                    best = (m, i);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let (argmin_node, &(coarse, xi_idx)) = per_node
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap();
    let e = unit(argmin_node)?;
    let (k, t) = (derived.kappa[argmin_node], derived.tau_n[argmin_node]);
    let step = (4.0 * std::f64::consts::PI / xis.len() as f64).sqrt();
    let (xi_ref, refined) = refine_on_sphere(|x| rank_margin(&e, k, t, x), xis[xi_idx], step);
    let (margin, argmin_xi) = if refined < coarse { (refined, xi_ref) } else { (coarse, xis[xi_idx]) };
    let mut node_margins: Vec<f64> = per_node.iter().map(|m| m.0).collect();
    node_margins[argmin_node] = margin;
    let mut node_worst_xi: Vec<RVec3> = per_node.iter().map(|m| xis[m.1]).collect();
    node_worst_xi[argmin_node] = argmin_xi;
    Ok(EllipticityReport { margin, argmin_node, argmin_xi, node_margins, node_worst_xi, rank_tol, pass: margin > rank_tol })
}

/// `|ξ|² − τ_h|Ê·ξ|²`.
pub fn single_illum_symbol(e_hat: &CVec3, tau_h: f64, xi: &RVec3) -> f64 {
    xi.norm_squared() - tau_h * rdot(e_hat, xi).norm_sqr()
}

/// Exact minimum of the single-illumination symbol over the unit sphere:
/// `1 − τ_h λ_max(Re(ÊÊᴴ))`.
pub fn single_illum_sphere_min(e_hat: &CVec3, tau_h: f64) -> f64 {
    let m = Matrix3::from_fn(|i, j| (e_hat[i] * e_hat[j].conj()).re);
    let lmax = m.symmetric_eigenvalues().max();
    1.0 - tau_h * lmax
}

/// True iff the single-illumination symbol changes sign on the sphere.
pub fn hyperbolicity_test(e_hat: &CVec3, tau_h: f64) -> bool {
    single_illum_sphere_min(e_hat, tau_h) < 0.0
}

/// Smallest `τ_h ∈ [0, hi]` at which [`hyperbolicity_test`] turns true, by bisection.
pub fn hyperbolicity_threshold(e_hat: &CVec3, hi: f64, tol: f64) -> Option<f64> {
    if !hyperbolicity_test(e_hat, hi) {
        return None;
    }
    let (mut lo, mut up) = (0.0, hi);
    while up - lo > tol {
        let mid = 0.5 * (lo + up);
        if hyperbolicity_test(e_hat, mid) {
            up = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + up))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Covering,
    NotCovering,
    Degenerate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LopatinskiiReport {
    pub nu: RVec3,
    pub zeta_tan: RVec3,
    pub pair: (usize, usize),
    pub frak_a: f64,
    pub frak_b: f64,
    pub frak_c: f64,
    /// `−𝔟² + 4𝔞𝔠`
    pub discriminant: f64,
    pub lambdas: [C64; 4],
    pub verdict: Verdict,
}

/// Closed-form roots `±|ζ|` and `(i𝔟 ± √(−𝔟² + 4𝔞𝔠))/(2𝔞)`.
pub fn lopatinskii_roots(a: f64, b: f64, c: f64, zeta_norm: f64) -> [C64; 4] {
    let sq = C64::from(-b * b + 4.0 * a * c).sqrt();
    [
        C64::from(zeta_norm),
        C64::from(-zeta_norm),
        (I * b + sq) / (2.0 * a),
        (I * b - sq) / (2.0 * a),
    ]
}

const DEGENERATE_TOL: f64 = 1e-12;

fn hat(e: &CVec3) -> CVec3 {
    e / C64::from(norm_sqr(e).sqrt())
}

/// `(𝔞, 𝔟, 𝔠)` for the pair `(E₁, E₂)`.
pub fn lopatinskii_coefficients(e1: &CVec3, e2: &CVec3, nu: &RVec3, zeta: &RVec3) -> (f64, f64, f64) {
    let (h1, h2) = (hat(e1), hat(e2));
    let conj = |v: &CVec3| v.map(|z| z.conj());
    let a = rdot(&h1, nu).norm_sqr() - rdot(&h2, nu).norm_sqr();
    let b = 2.0 * (rdot(&h1, zeta) * rdot(&conj(&h1), nu) - rdot(&h2, zeta) * rdot(&conj(&h2), nu)).re;
    let c = rdot(&h1, zeta).norm_sqr() - rdot(&h2, zeta).norm_sqr();
    (a, b, c)
}

/// Frozen-coefficient covering test for the data block of two illuminations.
///
/// `kappa` and `tau_n` enter only through the eigenvectors used in the
/// non-oscillatory branch.
pub fn lopatinskii_check(
    e1: &CVec3,
    e2: &CVec3,
    nu: &RVec3,
    zeta_tan: &RVec3,
    kappa: f64,
    tau_n: f64,
) -> Result<LopatinskiiReport> {
    if norm_sqr(e1) == 0.0 || norm_sqr(e2) == 0.0 {
        return Err(Error::ZeroField { node: 0 });
    }
    if (nu.norm() - 1.0).abs() > 1e-10 || (zeta_tan.norm() - 1.0).abs() > 1e-10 || nu.dot(zeta_tan).abs() > 1e-10 {
        return Err(Error::Param("nu and zeta_tan must be orthonormal".into()));
    }
    let (a, b, c) = lopatinskii_coefficients(e1, e2, nu, zeta_tan);
    let disc = -b * b + 4.0 * a * c;
    if a.abs() < DEGENERATE_TOL {
        let nan = C64::new(f64::NAN, f64::NAN);
        return Ok(LopatinskiiReport {
            nu: *nu,
            zeta_tan: *zeta_tan,
            pair: (0, 1),
            frak_a: a,
            frak_b: b,
            frak_c: c,
            discriminant: disc,
            lambdas: [C64::from(1.0), C64::from(-1.0), nan, nan],
            verdict: Verdict::Degenerate,
        });
    }
    let lambdas = lopatinskii_roots(a, b, c, 1.0);
    let verdict = if disc <= 0.0 {
        // λ₃,₄ purely imaginary: the only decaying mode is the scalar
        // exponential, which the Dirichlet condition removes.
        Verdict::Covering
    } else {
        // One decaying root in each family; the Dirichlet data must separate
        // their eigenvectors.
        let l4 = if lambdas[2].re < 0.0 { lambdas[2] } else { lambdas[3] };
        let v_exp = [C64::from(tau_n), C64::from(-kappa)];
        let (h1, _) = (hat(e1), ());
        let p = {
            // common value of the quadratic form at the root of P₁ = P₂
            let xi_n = |v: &CVec3| rdot(v, nu);
            let xi_z = |v: &CVec3| rdot(v, zeta_tan);
            let conj = |v: &CVec3| v.map(|z| z.conj());
            xi_z(&h1) * xi_z(&conj(&h1))
                + I * l4 * (xi_z(&h1) * xi_n(&conj(&h1)) + xi_n(&h1) * xi_z(&conj(&h1)))
                - l4 * l4 * xi_n(&h1) * xi_n(&conj(&h1))
        };
        let v_osc = [2.0 * tau_n * p, (1.0 - l4 * l4) - 2.0 * kappa * p];
        let det = v_exp[0] * v_osc[1] - v_exp[1] * v_osc[0];
        let scale = (v_exp[0].norm_sqr() + v_exp[1].norm_sqr()).sqrt()
            * (v_osc[0].norm_sqr() + v_osc[1].norm_sqr()).sqrt();
        if det.norm() > 1e-10 * scale {
            Verdict::Covering
        } else {
            Verdict::NotCovering
        }
    };
    Ok(LopatinskiiReport {
        nu: *nu,
        zeta_tan: *zeta_tan,
        pair: (0, 1),
        frak_a: a,
        frak_b: b,
        frak_c: c,
        discriminant: disc,
        lambdas,
        verdict,
    })
}

/// Runs [`lopatinskii_check`] on the illumination pair maximizing `|𝔞|`.
pub fn lopatinskii_scan(
    fields: &[CVec3],
    nu: &RVec3,
    zeta_tan: &RVec3,
    kappa: f64,
    tau_n: f64,
) -> Result<LopatinskiiReport> {
    let mut best: Option<((usize, usize), f64)> = None;
    for j in 0..fields.len() {
        for l in j + 1..fields.len() {
            let (a, _, _) = lopatinskii_coefficients(&fields[j], &fields[l], nu, zeta_tan);
            if best.map_or(true, |b| a.abs() > b.1) {
                best = Some(((j, l), a.abs()));
            }
        }
    }
    match best {
        Some(((j, l), a)) if a >= DEGENERATE_TOL => {
            let mut r = lopatinskii_check(&fields[j], &fields[l], nu, zeta_tan, kappa, tau_n)?;
            r.pair = (j, l);
            Ok(r)
        }
        _ => Err(Error::DegenerateCase("every illumination pair has 𝔞 = 0".into())),
    }
}
