use serde::{Deserialize, Serialize};

use super::layout::{BoundaryTraces, Layout};
use crate::fft::{signed_index, Fft3};
use crate::field::C64;
use crate::grid::Grid;

/// Discrete `H^s` norm of a nodal field through its periodic extension:
/// `(h³/N Σ_ξ (1 + |ξ|²)^s |f̂(ξ)|²)^{1/2}`.
pub fn sobolev_norm(grid: &Grid, f: &[f64], s: f64) -> f64 {
    let fft = Fft3::new(grid.dims);
    let mut v: Vec<C64> = f.iter().map(|&x| C64::from(x)).collect();
    fft.forward(&mut v);
    let l = grid.extent().map(|e| e + grid.spacing);
    let [_, d1, d2] = grid.dims;
    let sum: f64 = v
        .iter()
        .enumerate()
        .map(|(p, z)| {
            let c = [p / (d1 * d2), (p / d2) % d1, p % d2];
            let xi2: f64 = (0..3)
                .map(|a| (2.0 * std::f64::consts::PI * signed_index(c[a], grid.dims[a]) as f64 / l[a]).powi(2))
                .sum();
            (1.0 + xi2).powf(s) * z.norm_sqr()
        })
        .sum();
    (grid.cell_volume() * sum / grid.len() as f64).sqrt()
}

/// One line of the stability table at Sobolev order `order`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilityRow {
    pub order: f64,
    /// `‖w₁ − w₂‖_{H^s}` over all scalar slots.
    pub lhs: f64,
    /// `‖δH₁ − δH₂‖_{H^s}` over all illuminations.
    pub rhs_data: f64,
    /// Boundary L² norm of the trace difference (a surrogate for `H^{s−½}(∂Ω)`).
    pub rhs_boundary: f64,
    /// `lhs / (rhs_data + rhs_boundary)`, the empirical stability constant.
    pub ratio: f64,
}

/// Left and right sides of the linear stability estimate for two
/// reconstructions with paired data and traces, at orders 0, 1, 2.
pub fn stability_report(
    layout: &Layout,
    w: (&[f64], &[f64]),
    data: (&[Vec<f64>], &[Vec<f64>]),
    traces: (&BoundaryTraces, &BoundaryTraces),
) -> Vec<StabilityRow> {
    let g = layout.grid;
    let dw: Vec<f64> = w.0.iter().zip(w.1).map(|(a, b)| a - b).collect();
    let dh: Vec<Vec<f64>> =
        data.0.iter().zip(data.1).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let rhs_boundary = traces.0.sub(traces.1).l2(layout);
    [0.0, 1.0, 2.0]
        .iter()
        .map(|&s| {
            let lhs = (0..layout.n_slots())
                .map(|b| {
                    let f: Vec<f64> = (0..g.len()).map(|p| dw[layout.slot_index(b, p)]).collect();
                    sobolev_norm(&g, &f, s).powi(2)
                })
                .sum::<f64>()
                .sqrt();
            let rhs_data = dh.iter().map(|f| sobolev_norm(&g, f, s).powi(2)).sum::<f64>().sqrt();
            let den = rhs_data + rhs_boundary;
            let ratio = if den > 0.0 { lhs / den } else if lhs == 0.0 { 0.0 } else { f64::INFINITY };
            StabilityRow { order: s, lhs, rhs_data, rhs_boundary, ratio }
        })
        .collect()
}
