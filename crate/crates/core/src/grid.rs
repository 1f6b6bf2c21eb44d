use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RVec3;

/// Uniform Cartesian node grid.
///
/// `dims` counts nodes per axis; node `(i, j, k)` sits at
/// `origin + h·(i, j, k)`. Arrays are stored in C order (last axis fastest).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: f64, origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d < 4) {
            return Err(Error::Param(format!("grid dims {dims:?}: need >= 4 nodes per axis")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Param(format!("grid spacing {spacing} must be positive")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Param("grid origin must be finite".into()));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Cube of `n` nodes per axis covering `[-ℓ/2, ℓ/2]³`.
    pub fn centered_cube(n: usize, side: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Param("need at least 2 nodes".into()));
        }
        let h = side / (n - 1) as f64;
        Self::new([n; 3], h, [-0.5 * side; 3])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let r = idx / self.dims[2];
        [r / self.dims[1], r % self.dims[1], k]
    }

    /// Linear offset of one step along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.dims[1] * self.dims[2],
            1 => self.dims[2],
            _ => 1,
        }
    }

    pub fn position(&self, idx: usize) -> RVec3 {
        let c = self.coords(idx);
        RVec3::new(
            self.origin[0] + self.spacing * c[0] as f64,
            self.origin[1] + self.spacing * c[1] as f64,
            self.origin[2] + self.spacing * c[2] as f64,
        )
    }

    pub fn center(&self) -> RVec3 {
        RVec3::from_fn(|a, _| self.origin[a] + 0.5 * self.spacing * (self.dims[a] - 1) as f64)
    }

    /// Physical side lengths between the outermost nodes.
    pub fn extent(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.spacing * (self.dims[a] - 1) as f64)
    }

    /// Number of node layers separating `idx` from the boundary (0 on the boundary).
    #[inline]
    pub fn boundary_distance(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        (0..3)
            .map(|a| c[a].min(self.dims[a] - 1 - c[a]))
            .min()
            .unwrap_or(0)
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary_distance(idx) == 0
    }

    /// Nodes with boundary distance at least `d`, in index order.
    pub fn nodes_with_distance(&self, d: usize) -> Vec<usize> {
        (0..self.len()).filter(|&p| self.boundary_distance(p) >= d).collect()
    }

    /// Axes along which `idx` lies on the boundary, with the outward sign.
    pub fn boundary_faces(&self, idx: usize) -> Vec<(usize, f64)> {
        let c = self.coords(idx);
        let mut faces = Vec::new();
        for a in 0..3 {
            if c[a] == 0 {
                faces.push((a, -1.0));
            } else if c[a] == self.dims[a] - 1 {
                faces.push((a, 1.0));
            }
        }
        faces
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (0..3).all(|a| (self.origin[a] - other.origin[a]).abs() <= 1e-12 * (1.0 + self.origin[a].abs()))
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self, other)))
        }
    }

    /// Discrete L² norm `(h³ Σ|f|²)^{1/2}` helper scale.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }
}
