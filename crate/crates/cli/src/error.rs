use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    ConfigSyntax { path: PathBuf, line: usize, column: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qtat_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Process exit status: 1 configuration, 2 solver, 3 resonance, 4 divergence.
    pub fn exit_code(&self) -> i32 {
        use qtat_core::Error as E;
        match self {
            CliError::ConfigSyntax { .. } | CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::Resonance { .. } => 3,
                E::Divergence(_) => 4,
                E::NoConvergence { .. }
                | E::Resolution(_)
                | E::DivisionByZero { .. }
                | E::NoContraction { .. }
                | E::ZeroField { .. }
                | E::DegenerateCase(_) => 2,
                E::Admissibility(_)
                | E::Param(_)
                | E::GridMismatch(_)
                | E::DegenerateInput(_)
                | E::Orthogonality(_)
                | E::Dimension(_)
                | E::Support(_)
                | E::Format(_)
                | E::Io(_)
                | E::Json(_) => 1,
            },
        }
    }

    /// Extra advice printed after the error message, if any.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Core(qtat_core::Error::Resonance { .. }) => Some(
                "hint: the Faddeev denominator vanishes on the frequency lattice; change s slightly, \
                 enlarge the box, or use the half-period frequency shift (shift = \"auto\")",
            ),
            CliError::Core(qtat_core::Error::NoContraction { .. }) => {
                Some("hint: the Neumann series needs a larger s for this medium contrast")
            }
            CliError::Core(qtat_core::Error::Resolution(_)) => {
                Some("hint: refine the grid or lower the frequency")
            }
            CliError::Core(qtat_core::Error::Divergence(_)) => {
                Some("hint: start closer to the truth, add regularization (reg) or reduce noise")
            }
            _ => None,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &std::path::Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|source| CliError::Io { path: path.to_path_buf(), source })
    }
}
