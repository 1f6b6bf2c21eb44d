use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("inadmissible medium: {0}")]
    Admissibility(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("|q| below floor {floor:e} at node {node}")]
    DivisionByZero { node: usize, floor: f64 },
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("grid under-resolves the wavelength: {0}")]
    Resolution(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("directions not orthogonal: |rho . rho_perp| = {0:e}")]
    Orthogonality(f64),
    #[error("unsupported dimension {0} (need >= 3)")]
    Dimension(usize),
    #[error("resonant Faddeev denominator: min |xi^2 + 2 zeta.xi| = {min_denom:e} below floor {floor:e}; choose a different s or box length")]
    Resonance { min_denom: f64, floor: f64 },
    #[error("gamma_0 - 1 is not supported away from the boundary collar: {0}")]
    Support(String),
    #[error("Neumann series does not contract (ratio {ratio:.3} at term {term}); increase s")]
    NoContraction { ratio: f64, term: usize },
    #[error("illumination field vanishes at node {node}")]
    ZeroField { node: usize },
    #[error("degenerate Lopatinskii configuration: {0}")]
    DegenerateCase(String),
    #[error("Gauss-Newton diverged: residual grew for {0} consecutive damped steps")]
    Divergence(usize),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
