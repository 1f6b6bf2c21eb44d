//! Plane-wave and CGO illumination parameters and the direction-pair family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{bdot, complexify, rdot, CVec3, RVec3, VectorField, C64, I};
use crate::forward::BoundaryIllumination;
use crate::grid::Grid;

/// Exact plane wave `η e^{iζ·x}` of `∇×∇×E = q₀E` with `ζ·ζ = q₀`, `ζ·η = 0`.
///
/// `ζ = (a + ib)u` with `u ⊥ η` a unit vector, `a² − b² = Re q₀`, `2ab = Im q₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveParams {
    pub zeta: CVec3,
    pub eta: CVec3,
    pub q0: C64,
}

/// Deterministic orthonormal pair `(u, v)` completing the unit vector `e`.
pub fn orthonormal_complement(e: &RVec3) -> (RVec3, RVec3) {
    let k = (0..3)
        .min_by(|&a, &b| e[a].abs().partial_cmp(&e[b].abs()).unwrap())
        .unwrap_or(0);
    let mut axis = RVec3::zeros();
    axis[k] = 1.0;
    let u = (axis - e * e.dot(&axis)).normalize();
    let v = e.cross(&u);
    (u, v)
}

/// Real `(a, b)` with `a² − b² = Re q`, `2ab = Im q`, `a ≥ 0`.
fn split_sqrt(q: C64) -> (f64, f64) {
    let (x, y) = (q.re, q.im);
    let r = q.norm();
    if x >= 0.0 {
        let a = ((x + r) / 2.0).sqrt();
        (a, y / (2.0 * a))
    } else {
        let b = ((r - x) / 2.0).sqrt().copysign(if y < 0.0 { -1.0 } else { 1.0 });
        (y / (2.0 * b), b)
    }
}

pub fn plane_wave_params(q0: C64, eta_dir: RVec3) -> Result<PlaneWaveParams> {
    let len = eta_dir.norm();
    if !(len > 1e-12) || !len.is_finite() {
        return Err(Error::DegenerateInput(format!("eta direction has norm {len:e}")));
    }
    if q0.norm() == 0.0 || !q0.re.is_finite() || !q0.im.is_finite() {
        return Err(Error::DegenerateInput("q0 must be nonzero and finite".into()));
    }
    let e = eta_dir / len;
    // ζ = (a + ib)u: a real and an imaginary part along orthogonal u, v would
    // give a real ζ·ζ, so both parts share the direction u ⊥ η.
    let (u, _) = orthonormal_complement(&e);
    let (a, b) = split_sqrt(q0);
    let zeta = complexify(&u) * C64::new(a, b);
    Ok(PlaneWaveParams { zeta, eta: complexify(&e), q0 })
}

impl PlaneWaveParams {
    pub fn value_at(&self, x: &RVec3) -> CVec3 {
        self.eta * (I * rdot(&self.zeta, x)).exp()
    }

    pub fn field(&self, grid: Grid) -> VectorField {
        let pw = *self;
        VectorField::from_position(grid, move |x| pw.value_at(&x))
    }
}

/// CGO parameters `ζ = −isρ + √(s²+k²)ρ⊥` and the matching polarization `η_ζ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgoParams {
    pub s: f64,
    pub rho: RVec3,
    pub rho_perp: RVec3,
    pub k: f64,
    pub a_vec: CVec3,
    pub b_vec: CVec3,
    pub zeta: CVec3,
    pub eta_zeta: CVec3,
    pub z_inf: CVec3,
}

/// `ẑ∞ = (−iρ + ρ⊥)/√2`, the normalized limit of `ζ/|ζ|` as `s → ∞`.
pub fn z_inf(rho: &RVec3, rho_perp: &RVec3) -> CVec3 {
    (complexify(rho) * (-I) + complexify(rho_perp)) * C64::from(std::f64::consts::FRAC_1_SQRT_2)
}

pub fn cgo_params(
    s: f64,
    rho: RVec3,
    rho_perp: RVec3,
    k: f64,
    a_vec: Option<CVec3>,
    b_vec: Option<CVec3>,
) -> Result<CgoParams> {
    if !(s > 0.0 && s.is_finite()) || !(k > 0.0 && k.is_finite()) {
        return Err(Error::Param(format!("need s > 0 and k > 0 (got s = {s}, k = {k})")));
    }
    for (name, v) in [("rho", &rho), ("rho_perp", &rho_perp)] {
        if (v.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Param(format!("{name} must be a unit vector (|{name}| = {})", v.norm())));
        }
    }
    let d = rho.dot(&rho_perp).abs();
    if d > 1e-12 {
        return Err(Error::Orthogonality(d));
    }
    let zeta = complexify(&rho) * C64::new(0.0, -s) + complexify(&rho_perp) * C64::from((s * s + k * k).sqrt());
    let zinf = z_inf(&rho, &rho_perp);
    let a = a_vec.unwrap_or_else(|| zinf.map(|z| z.conj()));
    let b = b_vec.unwrap_or_else(CVec3::zeros);
    let zn = (2.0 * s * s + k * k).sqrt();
    let eta = (-(zeta * bdot(&zeta, &a)) - zeta.cross(&b) * C64::from(k) + a * C64::from(k * k)) * C64::from(1.0 / zn);
    Ok(CgoParams { s, rho, rho_perp, k, a_vec: a, b_vec: b, zeta, eta_zeta: eta, z_inf: zinf })
}

impl CgoParams {
    /// Hermitian length `|ζ| = √(2s² + k²)`.
    pub fn zeta_norm(&self) -> f64 {
        (2.0 * self.s * self.s + self.k * self.k).sqrt()
    }

    /// Same directions and polarization vectors at a different `s`.
    pub fn with_s(&self, s: f64) -> Result<Self> {
        cgo_params(s, self.rho, self.rho_perp, self.k, Some(self.a_vec), Some(self.b_vec))
    }
}

/// The `𝔫 + 1` direction pairs `(ρ_j, ρ⊥_j)` in `ℝ^𝔫`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionFamily {
    pub dim: usize,
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

pub fn direction_family(n_dim: usize) -> Result<DirectionFamily> {
    if n_dim < 3 {
        return Err(Error::Dimension(n_dim));
    }
    let e = |i: usize| {
        let mut v = vec![0.0; n_dim];
        v[i] = 1.0;
        v
    };
    let mix = |i: usize, j: usize| {
        let mut v = vec![0.0; n_dim];
        v[i] = std::f64::consts::FRAC_1_SQRT_2;
        v[j] = std::f64::consts::FRAC_1_SQRT_2;
        v
    };
    let last = n_dim - 1;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..last).map(|i| (e(last), e(i))).collect();
    pairs.push((e(last), mix(0, 1)));
    pairs.push((e(0), mix(1, last)));
    Ok(DirectionFamily { dim: n_dim, pairs })
}

impl DirectionFamily {
    /// Pairs as 3-vectors (requires `dim == 3`).
    pub fn pairs3(&self) -> Result<Vec<(RVec3, RVec3)>> {
        if self.dim != 3 {
            return Err(Error::Dimension(self.dim));
        }
        Ok(self
            .pairs
            .iter()
            .map(|(a, b)| (RVec3::from_column_slice(a), RVec3::from_column_slice(b)))
            .collect())
    }
}

/// Plane waves for constant `q₀` with polarizations `η_j = ρ⊥_j` of the family.
pub fn plane_wave_family(q0: C64, family: &DirectionFamily) -> Result<Vec<PlaneWaveParams>> {
    family.pairs3()?.iter().map(|(_, rp)| plane_wave_params(q0, *rp)).collect()
}

/// Tangential boundary trace `ν×E`.
pub fn boundary_trace(e: &VectorField) -> BoundaryIllumination {
    BoundaryIllumination::from_field(e)
}

/// Smallest `s = 10(1+k)·2^m` accepted by `accept`, trying at most `max_doublings + 1` values.
pub fn select_s(k: f64, max_doublings: usize, mut accept: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let mut s = 10.0 * (1.0 + k);
    for _ in 0..=max_doublings {
        if accept(s)? {
            return Ok(s);
        }
        s *= 2.0;
    }
    Err(Error::Param(format!("no s up to {} passed the check", s / 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{c, norm_sqr};
    use proptest::prelude::*;

    fn e(i: usize) -> RVec3 {
        let mut v = RVec3::zeros();
        v[i] = 1.0;
        v
    }

    #[test]
    fn plane_wave_examples() {
        let pw = plane_wave_params(c(1.0, 0.0), e(2)).unwrap();
        assert!((pw.zeta - complexify(&e(0))).norm() < 1e-15);

        let pw = plane_wave_params(c(1.0, 1.0), e(2)).unwrap();
        // oracle: a⁴ − a² − 1/4 = 0 from a² − b² = 1, 2ab = 1
        let a2 = (1.0 + (1.0f64 + 1.0).sqrt()) / 2.0;
        let (a, b) = (a2.sqrt(), 0.5 / a2.sqrt());
        assert!((a - 1.09868).abs() < 1e-5 && (b - 0.45509).abs() < 1e-5);
        let expect = CVec3::new(c(a, b), c(0.0, 0.0), c(0.0, 0.0));
        assert!((pw.zeta - expect).norm() < 1e-14);
        assert!((bdot(&pw.zeta, &pw.zeta) - c(1.0, 1.0)).norm() < 1e-14);

        let pw = plane_wave_params(c(-4.0, 0.0), e(2)).unwrap();
        assert!((pw.zeta - CVec3::new(c(0.0, 2.0), c(0.0, 0.0), c(0.0, 0.0))).norm() < 1e-15);
        assert!((bdot(&pw.zeta, &pw.zeta) - c(-4.0, 0.0)).norm() < 1e-14);

        assert!(matches!(plane_wave_params(c(1.0, 0.0), RVec3::zeros()), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn cgo_examples() {
        let p = cgo_params(1.0, e(0), e(1), 1.0, Some(complexify(&e(2))), Some(CVec3::zeros())).unwrap();
        let expect = CVec3::new(c(0.0, -1.0), c(2f64.sqrt(), 0.0), c(0.0, 0.0));
        assert!((p.zeta - expect).norm() < 1e-15);
        assert!((bdot(&p.zeta, &p.zeta) - c(1.0, 0.0)).norm() < 1e-14);
        assert!((p.eta_zeta - complexify(&e(2)) * C64::from(1.0 / 3f64.sqrt())).norm() < 1e-15);
        assert!(bdot(&p.zeta, &p.eta_zeta).norm() < 1e-15);

        let r = |v: [f64; 3]| RVec3::new(v[0], v[1], v[2]);
        assert!(matches!(
            cgo_params(1.0, e(0), r([0.1, 0.99498743710662, 0.0]), 1.0, None, None),
            Err(Error::Orthogonality(_))
        ));
    }

    #[test]
    fn cgo_polarization_tracks_minus_zeta() {
        let mut ratios = vec![];
        for s in [10.0, 100.0, 1000.0] {
            let p = cgo_params(s, e(2), e(0), 1.3, None, None).unwrap();
            ratios.push(norm_sqr(&(p.eta_zeta + p.zeta)).sqrt() / s);
        }
        assert!(ratios[0] > ratios[1] && ratios[1] > ratios[2] && ratios[2] < 1e-2, "{ratios:?}");
    }

    #[test]
    fn family_three_dims() {
        let fam = direction_family(3).unwrap();
        let pairs = fam.pairs3().unwrap();
        assert_eq!(pairs.len(), 4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let want = [
            (e(2), e(0)),
            (e(2), e(1)),
            (e(2), RVec3::new(s, s, 0.0)),
            (e(0), RVec3::new(0.0, s, s)),
        ];
        for ((r, rp), (wr, wrp)) in pairs.iter().zip(want) {
            assert_eq!((*r, *rp), (wr, wrp));
            assert!(r.dot(rp).abs() < 1e-15 && (r.norm() - 1.0).abs() < 1e-15 && (rp.norm() - 1.0).abs() < 1e-15);
        }
        assert!(matches!(direction_family(2), Err(Error::Dimension(2))));
        let f5 = direction_family(5).unwrap();
        assert_eq!(f5.pairs.len(), 6);
        for (r, rp) in &f5.pairs {
            assert!(r.iter().zip(rp).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn limit_directions_separate_xi() {
        let zs: Vec<CVec3> = direction_family(3).unwrap().pairs3().unwrap().iter().map(|(r, rp)| z_inf(r, rp)).collect();
        let n = 10_000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut min_gap = f64::INFINITY;
        for i in 0..n {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let th = golden * i as f64;
            let xi = RVec3::new(r * th.cos(), y, r * th.sin());
            let m: Vec<f64> = zs.iter().map(|z| rdot(z, &xi).norm()).collect();
            let mut gap = 0.0f64;
            for a in 0..m.len() {
                for b in 0..a {
                    gap = gap.max((m[a] - m[b]).abs());
                }
            }
            min_gap = min_gap.min(gap);
        }
        assert!(min_gap > 1e-2, "{min_gap}");
    }

    #[test]
    fn plane_wave_field_solves_maxwell_exactly_in_continuum() {
        let pw = plane_wave_params(c(2.0, 0.5), RVec3::new(1.0, 2.0, -0.5)).unwrap();
        // −∇×∇×E + q₀E = ((ζ·ζ) − q₀)E − ζ(ζ·η)·… = 0
        let zz = bdot(&pw.zeta, &pw.zeta);
        assert!((zz - pw.q0).norm() < 1e-13 && bdot(&pw.zeta, &pw.eta).norm() < 1e-14);
    }

    #[test]
    fn select_s_doubles() {
        let s = select_s(1.0, 5, |s| Ok(s > 50.0)).unwrap();
        assert_eq!(s, 80.0);
        assert!(select_s(1.0, 1, |_| Ok(false)).is_err());
    }

    proptest! {
        #[test]
        fn plane_wave_constraints(mag in -2.0f64..2.0, arg in 0.0f64..std::f64::consts::FRAC_PI_2,
                                  dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in 0.1f64..1.0) {
            let q0 = C64::from_polar(10f64.powf(mag), arg);
            let pw = plane_wave_params(q0, RVec3::new(dx, dy, dz)).unwrap();
            prop_assert!((bdot(&pw.zeta, &pw.zeta) - q0).norm() <= 1e-12 * q0.norm());
            prop_assert!(bdot(&pw.zeta, &pw.eta).norm() <= 1e-12 * pw.zeta.norm());
        }

        #[test]
        fn cgo_identities(s in 0.1f64..500.0, k in 0.1f64..20.0, th in 0.0f64..6.3) {
            let rho = RVec3::new(th.cos(), th.sin(), 0.0);
            let rp = RVec3::new(0.0, 0.0, 1.0);
            let p = cgo_params(s, rho, rp, k, None, None).unwrap();
            let zn2 = norm_sqr(&p.zeta);
            prop_assert!((zn2 - (2.0 * s * s + k * k)).abs() <= 1e-12 * zn2);
            prop_assert!((bdot(&p.zeta, &p.zeta) - c(k * k, 0.0)).norm() <= 1e-12 * zn2);
            prop_assert!(bdot(&p.zeta, &p.eta_zeta).norm() <= 1e-12 * zn2);
        }
    }
}
