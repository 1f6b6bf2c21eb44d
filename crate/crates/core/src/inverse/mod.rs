//! Linearized redundant system, normal-operator solve, Gauss–Newton and
//! stability reports.
//!
//! Unknowns are real: for illumination `j` the complex perturbation `δE_j` is
//! stored as interleaved real/imaginary parts, so the conjugate block
//! `δE_j*` is represented structurally rather than as separate unknowns. The
//! rows at every interior node are, per illumination, the six real parts of
//! the linearized elliptic Maxwell form followed by one data row
//! `Δ_h δH_j`.

mod layout;
mod newton;
mod normal;
mod stability;
mod system;

pub use layout::{BoundaryTraces, Layout};
pub use newton::{
    gauss_newton, linear_reconstruction, nonlinear_residual, GaussNewtonConfig, MeasuredBoundary, ReconstructionResult, State,
};
pub use normal::{normal_solve, NormalConfig, NormalSolution};
pub use stability::{sobolev_norm, stability_report, StabilityRow};
pub use system::{apply_linearized, default_data_weight, frechet_dh, LinearizedSystem};
