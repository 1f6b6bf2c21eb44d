//! Time-harmonic Maxwell forward model in divergence-augmented elliptic form.
//!
//! The discrete system is square with three rows per node:
//!
//! * interior nodes: the three components of
//!   `ΔE − ∇∇·E + qE + (1/q)∇∇·(qE) = 0`;
//! * boundary nodes: tangential Dirichlet rows from `ν×E = f`; on face
//!   interiors the normal component is closed by `∇·(qE) = 0` with a
//!   one-sided second-order normal derivative, while edge and corner nodes
//!   have every component fixed by the adjacent faces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{norm_sqr, CVec3, VectorField, C64};
use crate::grid::Grid;
use crate::linalg::{gmres, Csr, GmresConfig};
use crate::medium::Medium;
use crate::stencil::{self, grad_div_taps, laplacian_taps, offset_index, Tap};

/// Tangential boundary data `f = ν×E`, one array per face.
///
/// Faces are ordered `(axis 0, −), (axis 0, +), (axis 1, −), …`; each face
/// array is indexed in C order by the two remaining node coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryIllumination {
    pub grid: Grid,
    pub faces: [Vec<CVec3>; 6],
}

/// Face number for `(axis, outward sign)`.
#[inline]
pub fn face_id(axis: usize, sign: f64) -> usize {
    2 * axis + usize::from(sign > 0.0)
}

/// Index of node `p` within the array of the face normal to `axis`.
#[inline]
pub fn face_slot(grid: &Grid, axis: usize, p: usize) -> usize {
    let c = grid.coords(p);
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    c[u] * grid.dims[v] + c[v]
}

pub fn face_len(grid: &Grid, axis: usize) -> usize {
    grid.len() / grid.dims[axis]
}

#[inline]
pub fn unit(axis: usize, sign: f64) -> CVec3 {
    let mut v = CVec3::zeros();
    v[axis] = C64::new(sign, 0.0);
    v
}

impl BoundaryIllumination {
    pub fn zeros(grid: Grid) -> Self {
        let faces = std::array::from_fn(|f| vec![CVec3::zeros(); face_len(&grid, f / 2)]);
        Self { grid, faces }
    }

    /// Tangential trace `ν×E` of a field.
    pub fn from_field(e: &VectorField) -> Self {
        let grid = e.grid;
        let mut out = Self::zeros(grid);
        for p in 0..grid.len() {
            for (axis, sign) in grid.boundary_faces(p) {
                let nu = unit(axis, sign);
                out.faces[face_id(axis, sign)][face_slot(&grid, axis, p)] = nu.cross(&e.values[p]);
            }
        }
        out
    }

    pub fn value(&self, axis: usize, sign: f64, p: usize) -> CVec3 {
        self.faces[face_id(axis, sign)][face_slot(&self.grid, axis, p)]
    }

    /// Largest `|ν·f|` over all faces (zero for a valid trace).
    pub fn max_normal_component(&self) -> f64 {
        (0..6)
            .flat_map(|f| self.faces[f].iter().map(move |v| v[f / 2].norm()))
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        let faces = std::array::from_fn(|f| {
            self.faces[f].iter().zip(&other.faces[f]).map(|(a, b)| a + b).collect()
        });
        Self { grid: self.grid, faces }
    }

    pub fn scale(&self, a: C64) -> Self {
        let faces = std::array::from_fn(|f| self.faces[f].iter().map(|v| v * a).collect());
        Self { grid: self.grid, faces }
    }

    /// Dirichlet value implied for component `c` at boundary node `p`, averaged
    /// over the faces on which `c` is tangential. `None` for the normal
    /// component of a face-interior node.
    pub fn tangential_value(&self, p: usize, c: usize) -> Option<C64> {
        let mut acc = C64::default();
        let mut count = 0;
        for (axis, sign) in self.grid.boundary_faces(p) {
            if axis == c {
                continue;
            }
            // E_tan = −ν×f
            let e_tan = -unit(axis, sign).cross(&self.value(axis, sign, p));
            acc += e_tan[c];
            count += 1;
        }
        (count > 0).then(|| acc / count as f64)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Minimum number of grid points per real wavelength `2π/√(ω² max n)`.
    pub min_points_per_wavelength: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-8, restart: 150, max_iter: 20_000, min_points_per_wavelength: 8.0 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// `−∇×∇×E + qE` from composed centered curls, valid at boundary distance ≥ 2
/// (the two outer layers are returned as zero).
pub fn apply_curl_curl(medium: &Medium, e: &VectorField) -> Result<VectorField> {
    medium.grid.check_same(&e.grid)?;
    let q = medium.q();
    Ok(VectorField { grid: e.grid, values: stencil::curl_curl_form(&e.grid, &q, &e.values) })
}

/// `(Δ + (1/q)[∇∇·, q] + q)E` at interior nodes.
pub fn apply_elliptic_form(medium: &Medium, e: &VectorField) -> Result<VectorField> {
    medium.grid.check_same(&e.grid)?;
    let q = medium.q();
    let floor = medium.omega * medium.omega * medium.n_floor;
    stencil::check_q_floor(&q, floor)?;
    Ok(VectorField { grid: e.grid, values: stencil::elliptic_form(&e.grid, &q, &e.values)? })
}

/// Taps of `∇·F` at a face-interior boundary node, with the 1/h factor
/// included: one-sided second-order along the normal, centered along the face.
pub fn face_div_taps(grid: &Grid, p: usize) -> Vec<Tap> {
    let faces = grid.boundary_faces(p);
    debug_assert_eq!(faces.len(), 1);
    let (a, sign) = faces[0];
    let h = grid.spacing;
    let inward = -(sign as i32);
    let mut o1 = [0; 3];
    o1[a] = inward;
    let mut o2 = [0; 3];
    o2[a] = 2 * inward;
    let d = inward as f64 / (2.0 * h);
    let mut taps = vec![([0; 3], a, -3.0 * d), (o1, a, 4.0 * d), (o2, a, -d)];
    for b in (0..3).filter(|&b| b != a) {
        let mut op = [0; 3];
        op[b] = 1;
        let mut om = [0; 3];
        om[b] = -1;
        taps.push((op, b, 0.5 / h));
        taps.push((om, b, -0.5 / h));
    }
    taps
}

fn apply_taps(grid: &Grid, f: &[CVec3], p: usize, taps: &[Tap]) -> C64 {
    taps.iter().map(|&(o, c, w)| f[offset_index(grid, p, o)][c] * w).sum()
}

/// Discrete `∇·(qE)`: centered at interior nodes, the boundary stencil on
/// face interiors, zero on edges and corners.
pub fn divergence_qe(medium: &Medium, e: &VectorField) -> Vec<C64> {
    let grid = e.grid;
    let qe: Vec<CVec3> = e.values.iter().enumerate().map(|(p, v)| v * medium.q_at(p)).collect();
    (0..grid.len())
        .map(|p| {
            if grid.is_boundary(p) {
                if grid.boundary_faces(p).len() == 1 {
                    apply_taps(&grid, &qe, p, &face_div_taps(&grid, p))
                } else {
                    C64::default()
                }
            } else {
                let s = [grid.stride(0), grid.stride(1), 1];
                (0..3).map(|a| (qe[p + s[a]][a] - qe[p - s[a]][a]) / (2.0 * grid.spacing)).sum()
            }
        })
        .collect()
}

/// Row entries of the forward operator for node `p`, component `c`.
pub(crate) fn operator_row(grid: &Grid, q: &[C64], p: usize, c: usize) -> Vec<(usize, C64)> {
    let ih2 = 1.0 / (grid.spacing * grid.spacing);
    if !grid.is_boundary(p) {
        let mut row = Vec::with_capacity(24);
        for (o, _, w) in laplacian_taps() {
            row.push((3 * offset_index(grid, p, o) + c, C64::new(w * ih2, 0.0)));
        }
        for (o, cp, w) in grad_div_taps(c) {
            let pp = offset_index(grid, p, o);
            let coef = (q[pp] / q[p] - 1.0) * (w * ih2);
            if coef != C64::default() {
                row.push((3 * pp + cp, coef));
            }
        }
        row.push((3 * p + c, q[p]));
        return row;
    }
    let faces = grid.boundary_faces(p);
    if faces.len() == 1 && faces[0].0 == c {
        face_div_taps(grid, p)
            .into_iter()
            .map(|(o, cp, w)| {
                let pp = offset_index(grid, p, o);
                (3 * pp + cp, q[pp] * w)
            })
            .collect()
    } else {
        vec![(3 * p + c, C64::new(1.0, 0.0))]
    }
}

/// Assembles the square forward operator (unknown `3p + c` ↔ `E_c` at node `p`).
pub fn assemble_operator(medium: &Medium) -> Csr<C64> {
    let grid = medium.grid;
    let q = medium.q();
    let rows: Vec<Vec<(usize, C64)>> = (0..3 * grid.len())
        .into_par_iter()
        .map(|r| operator_row(&grid, &q, r / 3, r % 3))
        .collect();
    Csr::from_rows(3 * grid.len(), rows)
}

/// Right-hand side carrying the illumination.
pub fn assemble_rhs(illum: &BoundaryIllumination) -> Vec<C64> {
    let grid = illum.grid;
    let mut b = vec![C64::default(); 3 * grid.len()];
    for p in (0..grid.len()).filter(|&p| grid.is_boundary(p)) {
        for c in 0..3 {
            if let Some(v) = illum.tangential_value(p, c) {
                b[3 * p + c] = v;
            }
        }
    }
    b
}

pub fn check_resolution(medium: &Medium, cfg: &SolverConfig) -> Result<()> {
    let k = medium.max_wavenumber();
    let ppw = 2.0 * std::f64::consts::PI / (k * medium.grid.spacing);
    if ppw < cfg.min_points_per_wavelength {
        return Err(Error::Resolution(format!(
            "{ppw:.2} points per wavelength, need {}",
            cfg.min_points_per_wavelength
        )));
    }
    Ok(())
}

fn pack(values: &[CVec3]) -> Vec<C64> {
    values.iter().flat_map(|v| [v[0], v[1], v[2]]).collect()
}

fn unpack(grid: Grid, x: &[C64]) -> VectorField {
    let values = x.chunks_exact(3).map(|c| CVec3::new(c[0], c[1], c[2])).collect();
    VectorField { grid, values }
}

/// Solves the assembled system for a given right-hand side.
pub fn solve_system(
    op: &Csr<C64>,
    grid: Grid,
    rhs: &[C64],
    guess: Option<&VectorField>,
    cfg: &SolverConfig,
) -> Result<(VectorField, SolveStats)> {
    let precond: Vec<C64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let x0 = guess.map(|g| pack(&g.values));
    let gcfg = GmresConfig { tol: cfg.tol, restart: cfg.restart, max_iter: cfg.max_iter };
    let out = gmres(|v| op.matvec(v), &precond, rhs, x0.as_deref(), &gcfg)?;
    Ok((unpack(grid, &out.x), SolveStats { iterations: out.iterations, rel_residual: out.rel_residual }))
}

pub fn solve_forward_with_stats(
    medium: &Medium,
    illum: &BoundaryIllumination,
    cfg: &SolverConfig,
) -> Result<(VectorField, SolveStats)> {
    medium.grid.check_same(&illum.grid)?;
    medium.check_admissible()?;
    check_resolution(medium, cfg)?;
    let op = assemble_operator(medium);
    solve_system(&op, medium.grid, &assemble_rhs(illum), None, cfg)
}

pub fn solve_forward(medium: &Medium, illum: &BoundaryIllumination, cfg: &SolverConfig) -> Result<VectorField> {
    solve_forward_with_stats(medium, illum, cfg).map(|r| r.0)
}

/// Solves every illumination against one assembled operator, in parallel.
pub fn solve_forward_many(
    medium: &Medium,
    illums: &[BoundaryIllumination],
    cfg: &SolverConfig,
) -> Result<Vec<VectorField>> {
    medium.check_admissible()?;
    check_resolution(medium, cfg)?;
    let op = assemble_operator(medium);
    illums
        .par_iter()
        .map(|f| {
            medium.grid.check_same(&f.grid)?;
            solve_system(&op, medium.grid, &assemble_rhs(f), None, cfg).map(|r| r.0)
        })
        .collect()
}

/// `∂_q` of the row equations applied to `δq`, evaluated at the field `E`.
///
/// Interior rows: `δqE + (1/q)∇∇·(δqE) − (δq/q²)∇∇·(qE)`; face rows:
/// `∇·(δqE)`; Dirichlet rows: zero.
pub fn q_derivative_rows(grid: &Grid, q: &[C64], e: &[CVec3], dq: &[C64]) -> Vec<C64> {
    let qe: Vec<CVec3> = e.iter().zip(q).map(|(v, &z)| v * z).collect();
    let dqe: Vec<CVec3> = e.iter().zip(dq).map(|(v, &z)| v * z).collect();
    let g_qe = stencil::grad_div(grid, &qe);
    let g_dqe = stencil::grad_div(grid, &dqe);
    let mut out = vec![C64::default(); 3 * grid.len()];
    for p in 0..grid.len() {
        if !grid.is_boundary(p) {
            for c in 0..3 {
                out[3 * p + c] = dqe[p][c] + g_dqe[p][c] / q[p] - dq[p] * g_qe[p][c] / (q[p] * q[p]);
            }
        } else {
            let faces = grid.boundary_faces(p);
            if faces.len() == 1 {
                out[3 * p + faces[0].0] = apply_taps(grid, &dqe, p, &face_div_taps(grid, p));
            }
        }
    }
    out
}

/// First-order field response `δE` to `(δσ, δn)` with the boundary trace held fixed.
pub fn linearized_field(
    medium: &Medium,
    e: &VectorField,
    dsigma: &[f64],
    dn: &[f64],
    cfg: &SolverConfig,
) -> Result<VectorField> {
    medium.grid.check_same(&e.grid)?;
    let w = medium.omega;
    let dq: Vec<C64> = dsigma.iter().zip(dn).map(|(&s, &n)| C64::new(w * w * n, w * s)).collect();
    let rhs: Vec<C64> = q_derivative_rows(&medium.grid, &medium.q(), &e.values, &dq).iter().map(|z| -z).collect();
    let op = assemble_operator(medium);
    solve_system(&op, medium.grid, &rhs, None, cfg).map(|r| r.0)
}

/// Internal data `H = σ|E|²`.
pub fn internal_data(sigma: &[f64], e: &VectorField) -> Result<Vec<f64>> {
    if sigma.len() != e.values.len() {
        return Err(Error::GridMismatch(format!("sigma has {} nodes, E has {}", sigma.len(), e.values.len())));
    }
    Ok(sigma.iter().zip(&e.values).map(|(s, v)| s * norm_sqr(v)).collect())
}

/// Internal data for several illuminations.
#[derive(Clone, Debug, PartialEq)]
pub struct InternalData {
    pub grid: Grid,
    pub h: Vec<Vec<f64>>,
}

impl InternalData {
    pub fn from_fields(sigma: &[f64], fields: &[VectorField]) -> Result<Self> {
        let grid = fields.first().ok_or_else(|| Error::Param("no fields".into()))?.grid;
        let h = fields.iter().map(|e| internal_data(sigma, e)).collect::<Result<_>>()?;
        Ok(Self { grid, h })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{c, I};
    use proptest::prelude::*;

    fn plane_wave(grid: Grid, zeta: CVec3, eta: CVec3) -> VectorField {
        VectorField::from_position(grid, move |x| {
            let ph = zeta[0] * x[0] + zeta[1] * x[1] + zeta[2] * x[2];
            eta * (I * ph).exp()
        })
    }

    #[test]
    fn curl_curl_plane_wave_second_order() {
        let zeta = CVec3::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let eta = CVec3::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let mut errs = vec![];
        for n in [9, 17, 33] {
            let g = Grid::centered_cube(n, 4.0).unwrap();
            let m = Medium::constant(g, 1.0, 0.0, 1.0).unwrap();
            let r = apply_curl_curl(&m, &plane_wave(g, zeta, eta)).unwrap();
            errs.push(r.max_norm_interior(2));
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
        }
    }

    /// Wide-stencil `Δ − ∇∇·` built from the same centered first differences.
    fn wide_identity(grid: &Grid, e: &[CVec3]) -> Vec<CVec3> {
        let s = [grid.stride(0), grid.stride(1), 1];
        let d = |f: &dyn Fn(usize) -> C64, p: usize, a: usize| (f(p + s[a]) - f(p - s[a])) / (2.0 * grid.spacing);
        let mut out = vec![CVec3::zeros(); grid.len()];
        for p in grid.nodes_with_distance(2) {
            for cc in 0..3 {
                let lap: C64 = (0..3)
                    .map(|a| d(&|pp| d(&|r| e[r][cc], pp, a), p, a))
                    .sum();
                let gd: C64 = (0..3).map(|b| d(&|pp| d(&|r| e[r][b], pp, b), p, cc)).sum();
                out[p][cc] = lap - gd;
            }
        }
        out
    }

    #[test]
    fn curl_curl_matches_wide_identity() {
        let g = Grid::new([8, 7, 9], 0.21, [0.0; 3]).unwrap();
        let e: Vec<CVec3> = (0..g.len())
            .map(|p| {
                let x = g.position(p);
                CVec3::new(c(x[1].sin(), x[0] * x[2]), c(x[2].exp(), 0.3), (I * x[0] * x[1]).exp())
            })
            .collect();
        let zero_q = vec![C64::default(); g.len()];
        let cc = stencil::curl_curl_form(&g, &zero_q, &e);
        let wide = wide_identity(&g, &e);
        for p in g.nodes_with_distance(2) {
            assert!((cc[p] - wide[p]).norm() < 1e-11 * (1.0 + wide[p].norm()));
        }
    }

    #[test]
    fn elliptic_and_curl_curl_residuals_agree_on_divergence_free_waves() {
        // ζ·η = 0 and constant q make ∇·(qE) = 0; both residuals are O(h²) and close.
        let zeta = CVec3::new(c(0.6, 0.0), c(0.8, 0.0), c(0.0, 0.0));
        let eta = CVec3::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let mut diffs = vec![];
        for n in [9, 17] {
            let g = Grid::centered_cube(n, 4.0).unwrap();
            let m = Medium::constant(g, 1.0, 0.0, 1.0).unwrap();
            let e = plane_wave(g, zeta, eta);
            let a = apply_curl_curl(&m, &e).unwrap();
            let b = apply_elliptic_form(&m, &e).unwrap();
            diffs.push(a.sub(&b).max_norm_interior(2));
        }
        assert!(diffs[1] < diffs[0] / 3.0, "{diffs:?}");
    }

    #[test]
    fn trace_examples() {
        let g = Grid::centered_cube(5, 1.0).unwrap();
        let e3 = VectorField::constant(g, unit(2, 1.0));
        let t = BoundaryIllumination::from_field(&e3);
        assert!(t.faces[face_id(2, 1.0)].iter().all(|v| v.norm() == 0.0));
        let e1 = VectorField::constant(g, unit(0, 1.0));
        let t = BoundaryIllumination::from_field(&e1);
        assert!(t.faces[face_id(2, 1.0)].iter().all(|v| (v - unit(1, 1.0)).norm() == 0.0));
        assert_eq!(t.max_normal_component(), 0.0);
    }

    #[test]
    fn plane_wave_solve_second_order() {
        let zeta = CVec3::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let eta = CVec3::new(c(0.0, 0.0), c(0.6, 0.0), c(0.8, 0.0));
        let cfg = SolverConfig { tol: 1e-11, ..Default::default() };
        let mut errs = vec![];
        for n in [9, 17] {
            let g = Grid::centered_cube(n, 1.5).unwrap();
            let m = Medium::constant(g, 1.0, 0.0, 1.0).unwrap();
            let exact = plane_wave(g, zeta, eta);
            let sol = solve_forward(&m, &BoundaryIllumination::from_field(&exact), &cfg).unwrap();
            errs.push(sol.sub(&exact).l2_norm() / exact.l2_norm());
        }
        let ratio = errs[0] / errs[1];
        assert!(errs[1] < 1e-3 && (3.0..5.0).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn zero_illumination_and_linearity() {
        let g = Grid::centered_cube(8, 1.0).unwrap();
        let m = Medium::constant(g, 1.0, 0.5, 2.0).unwrap();
        let cfg = SolverConfig { tol: 1e-12, ..Default::default() };
        let z = solve_forward(&m, &BoundaryIllumination::zeros(g), &cfg).unwrap();
        assert!(z.values.iter().all(|v| v.norm() == 0.0));

        let f1 = BoundaryIllumination::from_field(&VectorField::from_position(g, |x| {
            CVec3::new(c(x[1], 0.0), c(0.0, x[2]), c(1.0, x[0]))
        }));
        let f2 = BoundaryIllumination::from_field(&VectorField::from_position(g, |x| {
            CVec3::new((I * x[2]).exp(), c(x[0] * x[1], 0.0), c(0.0, 0.0))
        }));
        let e1 = solve_forward(&m, &f1, &cfg).unwrap();
        let e2 = solve_forward(&m, &f2, &cfg).unwrap();
        let e12 = solve_forward(&m, &f1.add(&f2), &cfg).unwrap();
        let err = e12.sub(&e1.add(&e2)).l2_norm() / e12.l2_norm();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn resolution_check() {
        let g = Grid::centered_cube(6, 1.0).unwrap();
        let m = Medium::constant(g, 1.0, 0.0, 20.0).unwrap();
        let f = BoundaryIllumination::zeros(g);
        assert!(matches!(solve_forward(&m, &f, &SolverConfig::default()), Err(Error::Resolution(_))));
    }

    #[test]
    fn solve_satisfies_boundary_divergence_rows() {
        let g = Grid::centered_cube(8, 1.0).unwrap();
        let m = Medium::constant(g, 1.0, 0.3, 2.0).unwrap();
        let f = BoundaryIllumination::from_field(&VectorField::constant(g, CVec3::new(c(1.0, 0.0), I, c(0.0, 0.0))));
        let cfg = SolverConfig { tol: 1e-12, ..Default::default() };
        let e = solve_forward(&m, &f, &cfg).unwrap();
        let div = divergence_qe(&m, &e);
        let scale = e.values.iter().map(|v| v.norm()).fold(0.0, f64::max) / g.spacing;
        for p in (0..g.len()).filter(|&p| g.boundary_faces(p).len() == 1) {
            assert!(div[p].norm() < 1e-8 * scale);
        }
        let back = BoundaryIllumination::from_field(&e);
        for face in 0..6 {
            for (a, b) in back.faces[face].iter().zip(&f.faces[face]) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn internal_data_examples() {
        let g = Grid::centered_cube(4, 1.0).unwrap();
        let e = VectorField::constant(g, CVec3::new(c(1.0, 0.0), I, c(0.0, 0.0)));
        assert!(internal_data(&vec![0.0; g.len()], &e).unwrap().iter().all(|&h| h == 0.0));
        assert!(internal_data(&vec![1.0; g.len()], &e).unwrap().iter().all(|&h| (h - 2.0).abs() < 1e-15));
        let zeta = CVec3::new(c(0.0, 0.0), c(0.0, 0.0), c(1.3, 0.0));
        let pw = plane_wave(g, zeta, unit(0, 1.0));
        let h = internal_data(&vec![0.7; g.len()], &pw).unwrap();
        assert!(h.iter().all(|&v| (v - 0.7).abs() < 1e-14));
        assert!(internal_data(&[1.0; 3], &e).is_err());
    }

    proptest! {
        #[test]
        fn internal_data_phase_invariant(theta in 0.0f64..6.3, s in 0.0f64..3.0) {
            let g = Grid::centered_cube(4, 1.0).unwrap();
            let e = VectorField::from_position(g, |x| CVec3::new(c(x[0], 1.0), c(x[1] * x[2], -x[0]), c(0.5, x[2])));
            let rot = e.scale((I * theta).exp());
            let sig = vec![s; g.len()];
            let a = internal_data(&sig, &e).unwrap();
            let b = internal_data(&sig, &rot).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-13 * (1.0 + x.abs()));
            }
        }
    }
}
