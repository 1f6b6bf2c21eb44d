use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qtat_core::cgo::{CgoConfig, QClosure, FrequencyShift};
use qtat_core::forward::SolverConfig;
use qtat_core::inverse::GaussNewtonConfig;
use qtat_core::medium::{PhantomKind, PhantomParams};

use crate::error::{CliError, IoContext, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Nodes per axis of the centered cube.
    pub n: usize,
    #[serde(default = "one")]
    pub side: f64,
}

fn one() -> f64 {
    1.0
}

/// Either a synthetic phantom or a medium directory on disk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MediumSpec {
    #[serde(default)]
    pub kind: Option<PhantomKind>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(flatten)]
    pub params: PhantomParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IllumKind {
    Plane,
    Family,
    Cgo,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IllumSpec {
    pub kind: IllumKind,
    /// Number of family members used (`family`), at most 4 in 3D.
    #[serde(default)]
    pub count: Option<usize>,
    /// Polarization direction of a single plane wave.
    #[serde(default)]
    pub direction: Option<[f64; 3]>,
    /// Background `q₀ = [re, im]`; defaults to the medium value at the first node.
    #[serde(default)]
    pub q0: Option<[f64; 2]>,
    #[serde(default)]
    pub s: Option<f64>,
    #[serde(default)]
    pub rho: Option<[f64; 3]>,
    #[serde(default)]
    pub rho_perp: Option<[f64; 3]>,
    #[serde(default)]
    pub cgo: CgoConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    #[serde(default = "default_xi_samples")]
    pub xi_samples: usize,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_xi_samples() -> usize {
    2048
}

fn default_rank_tol() -> f64 {
    1e-8
}

impl Default for SymbolSpec {
    fn default() -> Self {
        Self { xi_samples: default_xi_samples(), rank_tol: default_rank_tol() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionMode {
    Linear,
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySource {
    /// Two outer node layers of fields and coefficients copied from the truth.
    #[default]
    Truth,
    /// Outer layers kept at the initial guess.
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub n: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InversionSpec {
    pub mode: InversionMode,
    pub background: Background,
    #[serde(default)]
    pub boundary: BoundarySource,
    #[serde(flatten)]
    pub gn: GaussNewtonConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgoStudySpec {
    pub s_values: Vec<f64>,
    #[serde(default = "e3")]
    pub rho: [f64; 3],
    #[serde(default = "e1")]
    pub rho_perp: [f64; 3],
    #[serde(default)]
    pub shift: FrequencyShift,
    #[serde(default)]
    pub closure: QClosure,
    #[serde(default = "default_cgo_tol")]
    pub tol: f64,
}

fn e1() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn e3() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_cgo_tol() -> f64 {
    1e-8
}

/// Everything a pipeline run needs; together with `rng_seed` and the thread
/// count it determines every output bit.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub medium: MediumSpec,
    pub illumination: IllumSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Relative amplitude of uniform multiplicative noise on the data.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub symbols: Option<SymbolSpec>,
    #[serde(default)]
    pub inversion: Option<InversionSpec>,
    #[serde(default)]
    pub cgo_study: Option<CgoStudySpec>,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    /// Parses a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| CliError::ConfigSyntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: {
                let m = e.to_string();
                match m.rfind(" at line ") {
                    Some(i) => m[..i].to_string(),
                    None => m,
                }
            },
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = cfg.medium.path.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.grid.n < 5 {
            return bad(format!("grid.n = {} (need at least 5 nodes per axis)", self.grid.n));
        }
        if !(self.grid.side > 0.0) {
            return bad("grid.side must be positive".into());
        }
        match (&self.medium.kind, &self.medium.path) {
            (None, None) => return bad("medium needs either 'kind' or 'path'".into()),
            (Some(_), Some(_)) => return bad("medium takes 'kind' or 'path', not both".into()),
            (None, Some(p)) if !p.join(qtat_core::io::META_FILE).is_file() => {
                return bad(format!("medium directory {} does not exist", p.display()))
            }
            _ => {}
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return bad(format!("noise = {} must lie in [0, 1)", self.noise));
        }
        if self.illumination.kind == IllumKind::Cgo
            && (self.illumination.s.is_none() || self.illumination.rho.is_none() || self.illumination.rho_perp.is_none())
        {
            return bad("cgo illumination needs s, rho and rho_perp".into());
        }
        if let Some(c) = &self.cgo_study {
            if c.s_values.is_empty() || c.s_values.iter().any(|s| !(*s > 0.0)) {
                return bad("cgo_study.s_values must be a non-empty list of positive numbers".into());
            }
        }
        Ok(())
    }
}

pub(crate) fn cgo_config(study: &CgoStudySpec) -> CgoConfig {
    CgoConfig { tol: study.tol, closure: study.closure, shift: study.shift, ..CgoConfig::default() }
}
