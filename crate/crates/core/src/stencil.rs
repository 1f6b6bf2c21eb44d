//! Node-collocated second-order finite-difference operators.
//!
//! Interior operators (`laplacian`, `grad_div`, `elliptic_form`) are valid at
//! nodes with boundary distance ≥ 1 and return zero on the boundary layer.
//! The wide curl-curl form needs two layers of support.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{CVec3, C64};
use crate::grid::Grid;

pub trait Scalar: Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl Scalar for f64 {}
impl Scalar for C64 {}

/// One stencil tap: node offset, input component, weight (before the 1/h² factor).
pub type Tap = ([i32; 3], usize, f64);

const E: [[i32; 3]; 3] = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

#[inline]
fn add(a: [i32; 3], b: [i32; 3], sb: i32) -> [i32; 3] {
    [a[0] + sb * b[0], a[1] + sb * b[1], a[2] + sb * b[2]]
}

/// 7-point Laplacian taps (component-agnostic; the component slot is 0).
pub fn laplacian_taps() -> Vec<Tap> {
    let mut t = vec![([0, 0, 0], 0, -6.0)];
    for e in E {
        t.push((e, 0, 1.0));
        t.push((add([0; 3], e, -1), 0, 1.0));
    }
    t
}

/// Taps of the compact `∇∇·` stencil producing output component `c`.
pub fn grad_div_taps(c: usize) -> Vec<Tap> {
    let mut t = Vec::with_capacity(11);
    t.push((E[c], c, 1.0));
    t.push(([0, 0, 0], c, -2.0));
    t.push((add([0; 3], E[c], -1), c, 1.0));
    for cp in (0..3).filter(|&cp| cp != c) {
        for (sc, scp, w) in [(1, 1, 0.25), (1, -1, -0.25), (-1, 1, -0.25), (-1, -1, 0.25)] {
            t.push((add(add([0; 3], E[c], sc), E[cp], scp), cp, w));
        }
    }
    t
}

#[inline]
pub fn offset_index(grid: &Grid, p: usize, o: [i32; 3]) -> usize {
    let s = [grid.stride(0) as isize, grid.stride(1) as isize, 1isize];
    (p as isize + o[0] as isize * s[0] + o[1] as isize * s[1] + o[2] as isize * s[2]) as usize
}

/// 7-point Laplacian at interior nodes; zero on the boundary.
pub fn laplacian<T: Scalar>(grid: &Grid, f: &[T]) -> Vec<T> {
    let ih2 = 1.0 / (grid.spacing * grid.spacing);
    let s = [grid.stride(0), grid.stride(1), 1];
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if grid.is_boundary(p) {
                return T::default();
            }
            let mut acc = f[p] * -6.0;
            for st in s {
                acc = acc + f[p + st] + f[p - st];
            }
            acc * ih2
        })
        .collect()
}

#[inline]
fn grad_div_at(f: &[CVec3], p: usize, s: [usize; 3], ih2: f64) -> CVec3 {
    let mut out = CVec3::zeros();
    for c in 0..3 {
        let sc = s[c];
        let mut acc = f[p + sc][c] - f[p][c] * 2.0 + f[p - sc][c];
        for cp in 0..3 {
            if cp == c {
                continue;
            }
            let sp = s[cp];
            acc += (f[p + sc + sp][cp] - f[p + sc - sp][cp] - f[p - sc + sp][cp] + f[p - sc - sp][cp]) * 0.25;
        }
        out[c] = acc * ih2;
    }
    out
}

/// Compact `∇(∇·F)` at interior nodes.
pub fn grad_div(grid: &Grid, f: &[CVec3]) -> Vec<CVec3> {
    let ih2 = 1.0 / (grid.spacing * grid.spacing);
    let s = [grid.stride(0), grid.stride(1), 1];
    (0..grid.len())
        .into_par_iter()
        .map(|p| if grid.is_boundary(p) { CVec3::zeros() } else { grad_div_at(f, p, s, ih2) })
        .collect()
}

/// Vector 7-point Laplacian at interior nodes.
pub fn vector_laplacian(grid: &Grid, f: &[CVec3]) -> Vec<CVec3> {
    let ih2 = 1.0 / (grid.spacing * grid.spacing);
    let s = [grid.stride(0), grid.stride(1), 1];
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if grid.is_boundary(p) {
                return CVec3::zeros();
            }
            let mut acc = f[p] * C64::new(-6.0, 0.0);
            for st in s {
                acc += f[p + st] + f[p - st];
            }
            acc * C64::new(ih2, 0.0)
        })
        .collect()
}

/// Checks `|q| ≥ floor` everywhere.
pub fn check_q_floor(q: &[C64], floor: f64) -> Result<()> {
    match q.iter().position(|z| z.norm() < floor) {
        Some(node) => Err(Error::DivisionByZero { node, floor }),
        None => Ok(()),
    }
}

/// Smallest admissible `|q|` used when no medium floor is at hand.
pub const Q_FLOOR: f64 = 1e-12;

/// `ΔE − ∇∇·E + qE + (1/q)∇∇·(qE)` at interior nodes.
///
/// The difference `(1/q)∇∇·(qE) − ∇∇·E = (1/q)[∇∇·, q]E` vanishes identically
/// for constant `q` because the same compact stencil is used on both sides.
pub fn elliptic_form(grid: &Grid, q: &[C64], e: &[CVec3]) -> Result<Vec<CVec3>> {
    check_q_floor(q, Q_FLOOR)?;
    let qe: Vec<CVec3> = e.iter().zip(q).map(|(v, &z)| v * z).collect();
    let ih2 = 1.0 / (grid.spacing * grid.spacing);
    let s = [grid.stride(0), grid.stride(1), 1];
    Ok((0..grid.len())
        .into_par_iter()
        .map(|p| {
            if grid.is_boundary(p) {
                return CVec3::zeros();
            }
            let mut lap = e[p] * C64::new(-6.0, 0.0);
            for st in s {
                lap += e[p + st] + e[p - st];
            }
            lap *= C64::new(ih2, 0.0);
            lap - grad_div_at(e, p, s, ih2) + e[p] * q[p] + grad_div_at(&qe, p, s, ih2) / q[p]
        })
        .collect())
}

/// Centered-difference curl, valid at nodes with boundary distance ≥ 1.
pub fn curl_centered(grid: &Grid, e: &[CVec3]) -> Vec<CVec3> {
    let i2h = C64::new(0.5 / grid.spacing, 0.0);
    let s = [grid.stride(0), grid.stride(1), 1];
    (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if grid.is_boundary(p) {
                return CVec3::zeros();
            }
            let d = |a: usize, c: usize| (e[p + s[a]][c] - e[p - s[a]][c]) * i2h;
            CVec3::new(d(1, 2) - d(2, 1), d(2, 0) - d(0, 2), d(0, 1) - d(1, 0))
        })
        .collect()
}

/// `−∇×∇×E + qE` from two composed centered curls; valid at boundary distance ≥ 2.
pub fn curl_curl_form(grid: &Grid, q: &[C64], e: &[CVec3]) -> Vec<CVec3> {
    let c1 = curl_centered(grid, e);
    let c2 = curl_centered(grid, &c1);
    (0..grid.len())
        .map(|p| if grid.boundary_distance(p) >= 2 { -c2[p] + e[p] * q[p] } else { CVec3::zeros() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{c, I};

    fn grid() -> Grid {
        Grid::new([7, 6, 8], 0.3, [0.1, -0.2, 0.05]).unwrap()
    }

    fn smooth(grid: &Grid) -> Vec<CVec3> {
        (0..grid.len())
            .map(|p| {
                let x = grid.position(p);
                CVec3::new(
                    c((x[0] * x[1]).sin(), x[2]),
                    c(x[0] * x[0], (x[1] + x[2]).cos()),
                    (I * x[0]).exp() * x[2],
                )
            })
            .collect()
    }

    fn apply_taps(grid: &Grid, f: &[CVec3], p: usize, taps: &[Tap]) -> C64 {
        taps.iter().map(|&(o, cp, w)| f[offset_index(grid, p, o)][cp] * w).sum::<C64>()
            / (grid.spacing * grid.spacing)
    }

    #[test]
    fn taps_match_direct_operators() {
        let g = grid();
        let f = smooth(&g);
        let gd = grad_div(&g, &f);
        let lap = vector_laplacian(&g, &f);
        for p in g.nodes_with_distance(1) {
            for cc in 0..3 {
                assert!((apply_taps(&g, &f, p, &grad_div_taps(cc)) - gd[p][cc]).norm() < 1e-12);
                let lt: Vec<Tap> = laplacian_taps().into_iter().map(|(o, _, w)| (o, cc, w)).collect();
                assert!((apply_taps(&g, &f, p, &lt) - lap[p][cc]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_exact_on_quadratics() {
        let g = grid();
        let f: Vec<f64> = (0..g.len())
            .map(|p| {
                let x = g.position(p);
                x[0] * x[0] - 2.0 * x[1] * x[2] + 3.0 * x[2] * x[2]
            })
            .collect();
        let l = laplacian(&g, &f);
        for p in g.nodes_with_distance(1) {
            assert!((l[p] - 8.0).abs() < 1e-10);
        }
    }

    #[test]
    fn elliptic_form_constant_q_is_helmholtz() {
        let g = grid();
        let f = smooth(&g);
        let q = vec![c(2.0, 0.7); g.len()];
        let out = elliptic_form(&g, &q, &f).unwrap();
        let lap = vector_laplacian(&g, &f);
        for p in g.nodes_with_distance(1) {
            let helm = lap[p] + f[p] * q[p];
            assert!((out[p] - helm).norm() <= 1e-12 * (1.0 + helm.norm()));
        }
    }

    #[test]
    fn elliptic_form_rejects_vanishing_q() {
        let g = grid();
        let mut q = vec![c(1.0, 0.0); g.len()];
        q[17] = c(0.0, 0.0);
        assert!(matches!(
            elliptic_form(&g, &q, &smooth(&g)),
            Err(Error::DivisionByZero { node: 17, .. })
        ));
    }

    #[test]
    fn zero_and_constant_fields() {
        let g = grid();
        let q = vec![c(1.5, 0.2); g.len()];
        let zero = vec![CVec3::zeros(); g.len()];
        assert!(curl_curl_form(&g, &q, &zero).iter().all(|v| v.norm() == 0.0));
        assert!(elliptic_form(&g, &q, &zero).unwrap().iter().all(|v| v.norm() == 0.0));
        let cv = CVec3::new(c(1.0, 2.0), c(-0.5, 0.0), I);
        let out = curl_curl_form(&g, &q, &vec![cv; g.len()]);
        for p in g.nodes_with_distance(2) {
            assert!((out[p] - cv * q[p]).norm() < 1e-14);
        }
    }
}
