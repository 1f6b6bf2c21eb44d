//! Sparse matrices, Krylov solvers and a fast Dirichlet Poisson solver.

mod csr;
mod dst;
mod krylov;

pub use csr::Csr;
pub use dst::DirichletPoisson;
pub use krylov::{cgls, gmres, CglsConfig, CglsOutcome, GmresConfig, GmresOutcome};

use rayon::prelude::*;

use crate::field::C64;

const CHUNK: usize = 4096;

/// Hermitian inner product `Σ conj(a) b`, reduced in fixed-size chunks so the
/// result does not depend on the number of worker threads.
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    let parts: Vec<C64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u.conj() * v).sum::<C64>())
        .collect();
    parts.into_iter().sum()
}

pub fn norm_c(a: &[C64]) -> f64 {
    dotc(a, a).re.max(0.0).sqrt()
}

/// Real inner product with the same deterministic chunked reduction.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    parts.into_iter().sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}
