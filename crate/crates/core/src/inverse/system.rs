use rayon::prelude::*;

use super::layout::Layout;
use crate::error::{Error, Result};
use crate::field::{norm_sqr, CVec3, VectorField, C64};
use crate::forward::{operator_row, q_derivative_rows};
use crate::linalg::Csr;
use crate::medium::Medium;
use crate::stencil::{self, grad_div_taps, laplacian_taps, offset_index};

/// `δH = σ(δE·E* + E·δE*) + δσ|E|²`, real by construction.
pub fn frechet_dh(sigma: &[f64], e: &VectorField, de: &VectorField, dsigma: &[f64]) -> Result<Vec<f64>> {
    e.grid.check_same(&de.grid)?;
    if sigma.len() != e.values.len() || dsigma.len() != e.values.len() {
        return Err(Error::GridMismatch("sigma/dsigma length differs from the field".into()));
    }
    Ok((0..sigma.len())
        .map(|p| {
            let (v, dv) = (&e.values[p], &de.values[p]);
            let cross: f64 = (0..3).map(|c| (v[c].conj() * dv[c]).re).sum();
            2.0 * sigma[p] * cross + dsigma[p] * norm_sqr(v)
        })
        .collect())
}

/// Weight putting the data rows on the scale of the elliptic rows:
/// `1 / (2 σ_rms E_rms)`.
pub fn default_data_weight(medium: &Medium, fields: &[VectorField]) -> f64 {
    let n = medium.sigma.len() as f64;
    let s_rms = (medium.sigma.iter().map(|s| s * s).sum::<f64>() / n).sqrt();
    let e_rms = (fields.iter().flat_map(|f| f.values.iter().map(norm_sqr)).sum::<f64>()
        / (n * fields.len().max(1) as f64))
        .sqrt();
    let d = 2.0 * s_rms * e_rms;
    if d > 0.0 {
        1.0 / d
    } else {
        1.0
    }
}

/// The linearized system `A w` about a background `(σ, n, E_j)`, assembled
/// as a real sparse matrix over the full unknown vector.
pub struct LinearizedSystem {
    pub layout: Layout,
    pub medium: Medium,
    pub fields: Vec<VectorField>,
    pub data_weight: f64,
    pub matrix: Csr<f64>,
}

fn push_complex(row_re: &mut Vec<(usize, f64)>, row_im: &mut Vec<(usize, f64)>, kx: usize, a: C64) {
    // a·(x + iy): Re = a.re x − a.im y, Im = a.im x + a.re y
    row_re.push((kx, a.re));
    row_re.push((kx + 1, -a.im));
    row_im.push((kx, a.im));
    row_im.push((kx + 1, a.re));
}

fn push_real(row_re: &mut Vec<(usize, f64)>, row_im: &mut Vec<(usize, f64)>, k: usize, b: C64) {
    row_re.push((k, b.re));
    row_im.push((k, b.im));
}

impl LinearizedSystem {
    pub fn assemble(medium: &Medium, fields: &[VectorField], freeze_n: bool, data_weight: f64) -> Result<Self> {
        medium.check_admissible()?;
        let layout = Layout::new(medium.grid, fields.len(), freeze_n)?;
        for f in fields {
            medium.grid.check_same(&f.grid)?;
        }
        let grid = medium.grid;
        let q = medium.q();
        stencil::check_q_floor(&q, medium.omega * medium.omega * medium.n_floor)?;
        let w = medium.omega;
        let ih2 = 1.0 / (grid.spacing * grid.spacing);
        let nodes = layout.row_nodes();
        let m = nodes.len();
        let gd_taps: Vec<_> = (0..3).map(grad_div_taps).collect();
        let lap_taps = laplacian_taps();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(layout.n_rows());
        for (j, field) in fields.iter().enumerate() {
            let e = &field.values;
            let qe: Vec<CVec3> = e.iter().zip(&q).map(|(v, &z)| v * z).collect();
            let g_qe = stencil::grad_div(&grid, &qe);
            let elliptic: Vec<Vec<(usize, f64)>> = nodes
                .par_iter()
                .flat_map_iter(|&p| {
                    let mut out = Vec::with_capacity(6);
                    for c in 0..3 {
                        let mut re = Vec::with_capacity(64);
                        let mut im = Vec::with_capacity(64);
                        for (col, a) in operator_row(&grid, &q, p, c) {
                            push_complex(&mut re, &mut im, layout.e_index(j, col / 3, col % 3, 0), a);
                        }
                        // ∂_q of the row, as coefficients of δq at each tap node
                        let mut dq: Vec<(usize, C64)> = vec![(p, e[p][c] - g_qe[p][c] / (q[p] * q[p]))];
                        for &(o, cp, wt) in &gd_taps[c] {
                            let pp = offset_index(&grid, p, o);
                            dq.push((pp, e[pp][cp] * (wt * ih2) / q[p]));
                        }
                        for (pp, coef) in dq {
                            push_real(&mut re, &mut im, layout.sigma_index(pp), coef * C64::new(0.0, w));
                            push_real(&mut re, &mut im, layout.n_index(pp), coef * (w * w));
                        }
                        out.push(re);
                        out.push(im);
                    }
                    out
                })
                .collect();
            let data: Vec<Vec<(usize, f64)>> = nodes
                .par_iter()
                .map(|&p| {
                    let mut row = Vec::with_capacity(49);
                    for &(o, _, wt) in &lap_taps {
                        let pp = offset_index(&grid, p, o);
                        let s = data_weight * wt * ih2;
                        for c in 0..3 {
                            let v = e[pp][c];
                            row.push((layout.e_index(j, pp, c, 0), 2.0 * medium.sigma[pp] * v.re * s));
                            row.push((layout.e_index(j, pp, c, 1), 2.0 * medium.sigma[pp] * v.im * s));
                        }
                        row.push((layout.sigma_index(pp), norm_sqr(&e[pp]) * s));
                    }
                    row
                })
                .collect();
            debug_assert_eq!(elliptic.len(), 6 * m);
            rows.extend(elliptic);
            rows.extend(data);
        }
        let matrix = Csr::from_rows(layout.len(), rows);
        Ok(Self { layout, medium: medium.clone(), fields: fields.to_vec(), data_weight, matrix })
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.matrix.matvec(w)
    }

    pub fn apply_t(&self, r: &[f64]) -> Vec<f64> {
        self.matrix.matvec_t(r)
    }
}

/// Matrix-free `A w`, built from the forward-module operators rather than
/// the assembled rows.
pub fn apply_linearized(sys: &LinearizedSystem, w: &[f64]) -> Result<Vec<f64>> {
    let layout = &sys.layout;
    if w.len() != layout.len() {
        return Err(Error::GridMismatch(format!("w has {} entries, layout {}", w.len(), layout.len())));
    }
    let grid = layout.grid;
    let q = sys.medium.q();
    let om = sys.medium.omega;
    let dsigma = layout.sigma(w);
    let dn = layout.n(w);
    let dq: Vec<C64> = dsigma.iter().zip(dn).map(|(&s, &n)| C64::new(om * om * n, om * s)).collect();
    let nodes = layout.row_nodes();
    let blocks: Vec<Vec<f64>> = sys
        .fields
        .par_iter()
        .enumerate()
        .map(|(j, e)| -> Result<Vec<f64>> {
            let de = layout.field(w, j);
            let ell = stencil::elliptic_form(&grid, &q, &de.values)?;
            let dqr = q_derivative_rows(&grid, &q, &e.values, &dq);
            let dh = frechet_dh(&sys.medium.sigma, e, &de, dsigma)?;
            let lap = stencil::laplacian(&grid, &dh);
            let mut out = Vec::with_capacity(7 * nodes.len());
            for &p in &nodes {
                for c in 0..3 {
                    let z = ell[p][c] + dqr[3 * p + c];
                    out.push(z.re);
                    out.push(z.im);
                }
            }
            out.extend(nodes.iter().map(|&p| sys.data_weight * lap[p]));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(blocks.concat())
}
