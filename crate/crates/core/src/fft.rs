//! Axis-by-axis 3D FFT on C-ordered arrays.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::field::C64;

pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = dims.map(|n| planner.plan_fft_forward(n));
        let inv = dims.map(|n| planner.plan_fft_inverse(n));
        Self { dims, fwd, inv }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the `1/N` normalization, in place.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, &self.inv);
        let s = 1.0 / self.len() as f64;
        data.par_iter_mut().for_each(|z| *z *= s);
    }

    fn run(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        assert_eq!(data.len(), self.len());
        let [d0, d1, d2] = self.dims;
        // last axis: contiguous lines
        data.par_chunks_mut(d2 * d1.max(1)).for_each(|c| plans[2].process(c));
        // middle axis: transpose each slab
        data.par_chunks_mut(d1 * d2).for_each(|slab| {
            let mut t = vec![C64::default(); d1 * d2];
            for j in 0..d1 {
                for k in 0..d2 {
                    t[k * d1 + j] = slab[j * d2 + k];
                }
            }
            plans[1].process(&mut t);
            for j in 0..d1 {
                for k in 0..d2 {
                    slab[j * d2 + k] = t[k * d1 + j];
                }
            }
        });
        // first axis: global transpose
        let plane = d1 * d2;
        let mut t = vec![C64::default(); data.len()];
        t.par_chunks_mut(d0).enumerate().for_each(|(jk, line)| {
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[i * plane + jk];
            }
        });
        t.par_chunks_mut(d0 * 64.min(plane).max(1)).for_each(|c| plans[0].process(c));
        data.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
            for (jk, v) in slab.iter_mut().enumerate() {
                *v = t[jk * d0 + i];
            }
        });
    }
}

/// Integer frequency index of FFT bin `m` for a length-`n` transform.
#[inline]
pub fn signed_index(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[C64], dims: [usize; 3]) -> Vec<C64> {
        let mut out = vec![C64::default(); data.len()];
        let tau = -2.0 * std::f64::consts::PI;
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for cc in 0..dims[2] {
                    let mut acc = C64::default();
                    for i in 0..dims[0] {
                        for j in 0..dims[1] {
                            for k in 0..dims[2] {
                                let ph = tau
                                    * ((a * i) as f64 / dims[0] as f64
                                        + (b * j) as f64 / dims[1] as f64
                                        + (cc * k) as f64 / dims[2] as f64);
                                acc += data[(i * dims[1] + j) * dims[2] + k] * C64::from_polar(1.0, ph);
                            }
                        }
                    }
                    out[(a * dims[1] + b) * dims[2] + cc] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        let dims = [4, 6, 5];
        let f = Fft3::new(dims);
        let data: Vec<C64> = (0..f.len()).map(|i| C64::new((i as f64 * 0.37).sin(), (i % 7) as f64)).collect();
        let mut x = data.clone();
        f.forward(&mut x);
        let y = naive_dft(&data, dims);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-10);
        }
        f.inverse(&mut x);
        for (a, b) in x.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn signed_indices() {
        assert_eq!((0..6).map(|m| signed_index(m, 6)).collect::<Vec<_>>(), vec![0, 1, 2, 3, -2, -1]);
    }
}
