//! Quantitative thermo-acoustic tomography toolkit.
//!
//! The crate is organized around the steps of a QTAT experiment:
//!
//! - [`medium`]: structured grid, coefficient fields `(n, σ)`, derived
//!   fields `q`, `κ`, `τ` and synthetic phantoms.
//! - [`forward`]: the time-harmonic Maxwell boundary value problem in its
//!   divergence-augmented elliptic form and the internal data `H = σ|E|²`.
//! - [`illum`]: plane-wave and CGO illumination parameters, the direction
//!   family and boundary traces.
//! - [`cgo`]: Faddeev kernel on a periodic box and the Neumann-series
//!   construction of CGO remainders.
//! - [`symbols`]: principal symbols of the linearized system, ellipticity
//!   scans and the Lopatinskii covering test.
//! - [`inverse`]: linearized redundant system, normal-operator solve,
//!   Gauss–Newton and stability reports.
//!
//! Supporting modules hold the sparse/Krylov machinery ([`linalg`]), FFT
//! helpers ([`fft`]) and on-disk formats ([`io`]).

pub mod cgo;
pub mod error;
pub mod fft;
pub mod field;
pub mod forward;
pub mod grid;
pub mod illum;
pub mod inverse;
pub mod io;
pub mod linalg;
pub mod medium;
pub mod stencil;
pub mod symbols;

pub use error::{Error, Result};
pub use field::{CVec3, ComplexField, RVec3, VectorField, C64};
pub use grid::Grid;
pub use medium::{DerivedFields, Medium};

/// Version tag written into every serialized sidecar.
pub const SCHEMA_VERSION: &str = "qtat-io/1";
