use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CVec3, VectorField, C64};
use crate::grid::Grid;

/// Index map of the real unknown vector
/// `w = (δE_1, …, δE_J, δσ, δn)`.
///
/// Block `j` holds `6N` reals with `δE_j` component `c` at node `p` at
/// `6N·j + 6p + 2c` (real part) and `+1` (imaginary part); `δσ` and `δn`
/// follow as `N`-blocks. Nodes at boundary distance ≥ 2 are free; the two
/// outer layers carry boundary data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub grid: Grid,
    pub n_illum: usize,
    pub freeze_n: bool,
}

impl Layout {
    pub fn new(grid: Grid, n_illum: usize, freeze_n: bool) -> Result<Self> {
        if n_illum == 0 {
            return Err(Error::Param("need at least one illumination".into()));
        }
        if grid.dims.iter().any(|&d| d < 5) {
            return Err(Error::Param("inverse problems need at least 5 nodes per axis".into()));
        }
        Ok(Self { grid, n_illum, freeze_n })
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn len(&self) -> usize {
        (6 * self.n_illum + 2) * self.nodes()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn e_index(&self, j: usize, p: usize, c: usize, part: usize) -> usize {
        6 * self.nodes() * j + 6 * p + 2 * c + part
    }

    #[inline]
    pub fn sigma_index(&self, p: usize) -> usize {
        6 * self.nodes() * self.n_illum + p
    }

    #[inline]
    pub fn n_index(&self, p: usize) -> usize {
        6 * self.nodes() * self.n_illum + self.nodes() + p
    }

    /// Node carrying unknown `k`.
    #[inline]
    pub fn node_of(&self, k: usize) -> usize {
        let e_len = 6 * self.nodes() * self.n_illum;
        if k < e_len {
            (k % (6 * self.nodes())) / 6
        } else {
            (k - e_len) % self.nodes()
        }
    }

    /// The same unknown slot moved to node `q`.
    #[inline]
    pub fn at_node(&self, k: usize, q: usize) -> usize {
        let step = if k < 6 * self.nodes() * self.n_illum { 6 } else { 1 };
        k - step * self.node_of(k) + step * q
    }

    #[inline]
    pub fn is_n(&self, k: usize) -> bool {
        k >= self.n_index(0)
    }

    /// Whether unknown `k` is solved for (not boundary data, not frozen).
    #[inline]
    pub fn is_free(&self, k: usize) -> bool {
        self.grid.boundary_distance(self.node_of(k)) >= 2 && !(self.freeze_n && self.is_n(k))
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_free(k)).collect()
    }

    /// Interior nodes (boundary distance ≥ 1) carrying equations, in index order.
    pub fn row_nodes(&self) -> Vec<usize> {
        (0..self.nodes()).filter(|&p| !self.grid.is_boundary(p)).collect()
    }

    /// Rows per illumination block: 6 elliptic and 1 data row per interior node.
    pub fn rows_per_block(&self) -> usize {
        7 * self.row_nodes().len()
    }

    pub fn n_rows(&self) -> usize {
        self.n_illum * self.rows_per_block()
    }

    /// Packs `(δE_j, δσ, δn)` into a real vector.
    pub fn pack(&self, de: &[VectorField], dsigma: &[f64], dn: &[f64]) -> Result<Vec<f64>> {
        if de.len() != self.n_illum || dsigma.len() != self.nodes() || dn.len() != self.nodes() {
            return Err(Error::GridMismatch("perturbation does not match the layout".into()));
        }
        let mut w = vec![0.0; self.len()];
        for (j, f) in de.iter().enumerate() {
            self.grid.check_same(&f.grid)?;
            for (p, v) in f.values.iter().enumerate() {
                for c in 0..3 {
                    w[self.e_index(j, p, c, 0)] = v[c].re;
                    w[self.e_index(j, p, c, 1)] = v[c].im;
                }
            }
        }
        for p in 0..self.nodes() {
            w[self.sigma_index(p)] = dsigma[p];
            w[self.n_index(p)] = dn[p];
        }
        Ok(w)
    }

    pub fn field(&self, w: &[f64], j: usize) -> VectorField {
        let values = (0..self.nodes())
            .map(|p| {
                CVec3::from_fn(|c, _| C64::new(w[self.e_index(j, p, c, 0)], w[self.e_index(j, p, c, 1)]))
            })
            .collect();
        VectorField { grid: self.grid, values }
    }

    pub fn sigma<'a>(&self, w: &'a [f64]) -> &'a [f64] {
        &w[self.sigma_index(0)..self.sigma_index(0) + self.nodes()]
    }

    pub fn n<'a>(&self, w: &'a [f64]) -> &'a [f64] {
        &w[self.n_index(0)..self.n_index(0) + self.nodes()]
    }

    /// Scalar field slots: `6J` real components of the fields, then `δσ`, `δn`.
    /// Slot `b` of node `p` lives at [`Layout::slot_index`].
    pub fn n_slots(&self) -> usize {
        6 * self.n_illum + 2
    }

    #[inline]
    pub fn slot_index(&self, b: usize, p: usize) -> usize {
        let e_slots = 6 * self.n_illum;
        if b < e_slots {
            6 * self.nodes() * (b / 6) + 6 * p + b % 6
        } else if b == e_slots {
            self.sigma_index(p)
        } else {
            self.n_index(p)
        }
    }

    /// Outward neighbour on the boundary layer of a node at distance 1,
    /// stepping along the first axis on which the node touches the layer.
    pub fn outward_neighbour(&self, p: usize) -> usize {
        let g = &self.grid;
        let c = g.coords(p);
        for a in 0..3 {
            if c[a] == 1 {
                return p - g.stride(a);
            }
            if c[a] == g.dims[a] - 2 {
                return p + g.stride(a);
            }
        }
        panic!("node {p} is not on the second layer");
    }
}

/// Boundary data of the linearized problem: Dirichlet values `w^δ` on the
/// boundary layer and the outward normal derivative `j^δ`, stored on the
/// second layer and discretized as `j^δ(p) = (w(p⁺) − w(p))/h` with `p⁺`
/// the outward neighbour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTraces {
    pub dirichlet: Vec<f64>,
    pub normal: Vec<f64>,
}

impl BoundaryTraces {
    pub fn zeros(layout: &Layout) -> Self {
        Self { dirichlet: vec![0.0; layout.len()], normal: vec![0.0; layout.len()] }
    }

    /// Traces of a full unknown vector.
    pub fn from_solution(layout: &Layout, w: &[f64]) -> Self {
        let g = &layout.grid;
        let h = g.spacing;
        let mut t = Self::zeros(layout);
        for k in 0..layout.len() {
            let p = layout.node_of(k);
            match g.boundary_distance(p) {
                0 => t.dirichlet[k] = w[k],
                1 => {
                    let kp = layout.at_node(k, layout.outward_neighbour(p));
                    t.normal[k] = (w[kp] - w[k]) / h;
                }
                _ => {}
            }
        }
        t
    }

    /// A vector holding the two prescribed layers and zeros elsewhere.
    pub fn fill(&self, layout: &Layout) -> Result<Vec<f64>> {
        if self.dirichlet.len() != layout.len() || self.normal.len() != layout.len() {
            return Err(Error::GridMismatch("boundary traces do not match the layout".into()));
        }
        let g = &layout.grid;
        let h = g.spacing;
        let mut w = vec![0.0; layout.len()];
        for k in 0..layout.len() {
            if g.boundary_distance(layout.node_of(k)) == 0 {
                w[k] = self.dirichlet[k];
            }
        }
        for k in 0..layout.len() {
            let p = layout.node_of(k);
            if g.boundary_distance(p) == 1 {
                let kp = layout.at_node(k, layout.outward_neighbour(p));
                w[k] = w[kp] - h * self.normal[k];
            }
        }
        Ok(w)
    }

    /// Boundary-layer L² norm (face weight `h²`) of the Dirichlet part plus
    /// that of the normal part.
    pub fn l2(&self, layout: &Layout) -> f64 {
        let g = &layout.grid;
        let (mut d, mut n) = (0.0, 0.0);
        for k in 0..layout.len() {
            match g.boundary_distance(layout.node_of(k)) {
                0 => d += self.dirichlet[k] * self.dirichlet[k],
                1 => n += self.normal[k] * self.normal[k],
                _ => {}
            }
        }
        g.spacing * (d.sqrt() + n.sqrt())
    }

    pub fn sub(&self, other: &Self) -> Self {
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self { dirichlet: diff(&self.dirichlet, &other.dirichlet), normal: diff(&self.normal, &other.normal) }
    }
}
