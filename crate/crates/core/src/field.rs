use nalgebra::Vector3;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;

pub type C64 = Complex64;
pub type CVec3 = Vector3<C64>;
pub type RVec3 = Vector3<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Complex vector from a real one.
#[inline]
pub fn complexify(v: &RVec3) -> CVec3 {
    v.map(|x| C64::new(x, 0.0))
}

/// Bilinear (non-Hermitian) product `Σ a_k b_k`.
#[inline]
pub fn bdot(a: &CVec3, b: &CVec3) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Bilinear product with a real vector.
#[inline]
pub fn rdot(a: &CVec3, b: &RVec3) -> C64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `Σ |a_k|²`.
#[inline]
pub fn norm_sqr(a: &CVec3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

/// Complex scalar field on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<C64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(usize) -> C64 + Sync + Send) -> Self {
        let values = (0..grid.len()).into_par_iter().map(f).collect();
        Self { grid, values }
    }
}

/// Complex 3-vector field on a grid (E, δE, R, Q, …).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub values: Vec<CVec3>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![CVec3::zeros(); grid.len()] }
    }

    pub fn new(grid: Grid, values: Vec<CVec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(Error::Param("vector field has non-finite entries".into()));
        }
        Ok(Self { grid, values })
    }

    /// Evaluates `f` at every node position.
    pub fn from_position(grid: Grid, f: impl Fn(RVec3) -> CVec3 + Sync + Send) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|p| f(grid.position(p))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, v: CVec3) -> Self {
        Self { grid, values: vec![v; grid.len()] }
    }

    pub fn scale(&self, a: C64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * a).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { grid: self.grid, values }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { grid: self.grid, values }
    }

    /// Discrete L² norm over all nodes, `(h³ Σ|v|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(norm_sqr).sum::<f64>()).sqrt()
    }

    /// Discrete L² norm restricted to nodes with boundary distance ≥ `d`.
    pub fn l2_norm_interior(&self, d: usize) -> f64 {
        let s: f64 = (0..self.grid.len())
            .filter(|&p| self.grid.boundary_distance(p) >= d)
            .map(|p| norm_sqr(&self.values[p]))
            .sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    pub fn max_norm_interior(&self, d: usize) -> f64 {
        (0..self.grid.len())
            .filter(|&p| self.grid.boundary_distance(p) >= d)
            .map(|p| norm_sqr(&self.values[p]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v.map(|z| z.conj())).collect() }
    }

    /// Component `c` as a flat complex array.
    pub fn component(&self, c: usize) -> Vec<C64> {
        self.values.iter().map(|v| v[c]).collect()
    }

    pub fn from_components(grid: Grid, comps: [&[C64]; 3]) -> Self {
        let values = (0..grid.len())
            .map(|p| CVec3::new(comps[0][p], comps[1][p], comps[2][p]))
            .collect();
        Self { grid, values }
    }
}

/// Discrete L² norm of a real scalar array on `grid`.
pub fn l2_real(grid: &Grid, f: &[f64]) -> f64 {
    (grid.cell_volume() * f.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_vs_hermitian() {
        let a = CVec3::new(c(1.0, 0.0), I, c(0.0, 0.0));
        assert_eq!(bdot(&a, &a), c(0.0, 0.0));
        assert!((norm_sqr(&a) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn new_checks_shape() {
        let g = Grid::new([4, 4, 4], 1.0, [0.0; 3]).unwrap();
        assert!(VectorField::new(g, vec![CVec3::zeros(); 63]).is_err());
        assert!(VectorField::new(g, vec![CVec3::zeros(); 64]).is_ok());
    }
}
