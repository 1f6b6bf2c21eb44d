use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qtat_core::cgo::{background_wavenumber, CgoConfig, FrequencyShift, QClosure};
use qtat_core::forward::{solve_forward_many, InternalData, SolverConfig};
use qtat_core::illum::cgo_params;
use qtat_core::inverse::{GaussNewtonConfig, MeasuredBoundary};
use qtat_core::{io, SCHEMA_VERSION};

use crate::config::{ExperimentConfig, IllumKind, IllumSpec, InversionMode};
use crate::error::{CliError, Result};
use crate::pipeline::run_pipeline;
use crate::workflow::{self, vec3};

fn long_version() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), "\nformats: qtat-io/1 (medium, fields, internal_data, illuminations)")
}

#[derive(Debug, Parser)]
#[command(name = "qtat", version, long_version = long_version(), about = "Quantitative thermo-acoustic tomography toolkit")]
pub struct Cli {
    /// Worker threads (default: QTAT_THREADS, else hardware parallelism).
    #[arg(long, global = true, env = "QTAT_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Maxwell boundary value problem and synthesize internal data.
    Forward(ForwardArgs),
    /// Generate boundary illuminations.
    Illum(IllumArgs),
    /// Construct a CGO solution and optionally sweep s.
    Cgo(CgoArgs),
    /// Ellipticity, hyperbolicity and Lopatinskii checks.
    CheckSymbols(SymbolArgs),
    /// Reconstruct (σ, n) from internal data.
    Invert(InvertArgs),
    /// Run a configured experiment end to end.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long)]
    pub medium: PathBuf,
    #[arg(long)]
    pub illum: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IllumKindArg {
    Plane,
    Family,
    Cgo,
}

fn parse_vec3(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated numbers".to_string())
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<std::result::Result<_, _>>()?;
    <[f64; 2]>::try_from(parts).map_err(|_| "expected 're,im'".to_string())
}

#[derive(Debug, Args)]
pub struct IllumArgs {
    #[arg(long, value_enum)]
    pub kind: IllumKindArg,
    /// Medium supplying the grid, q₀ and (for CGO) the coefficients.
    #[arg(long)]
    pub medium: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_parser = parse_vec3)]
    pub direction: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_pair)]
    pub q0: Option<[f64; 2]>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, value_parser = parse_vec3)]
    pub rho: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_vec3)]
    pub rho_perp: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShiftArg {
    Auto,
    None,
    X,
    Y,
    Z,
}

impl From<ShiftArg> for FrequencyShift {
    fn from(s: ShiftArg) -> Self {
        match s {
            ShiftArg::Auto => FrequencyShift::Auto,
            ShiftArg::None => FrequencyShift::None,
            ShiftArg::X => FrequencyShift::Axis(0),
            ShiftArg::Y => FrequencyShift::Axis(1),
            ShiftArg::Z => FrequencyShift::Axis(2),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClosureArg {
    FarField,
    Decaying,
}

#[derive(Debug, Args)]
pub struct CgoArgs {
    #[arg(long)]
    pub medium: PathBuf,
    #[arg(long)]
    pub s: f64,
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1")]
    pub rho: [f64; 3],
    #[arg(long, value_parser = parse_vec3, default_value = "1,0,0")]
    pub rho_perp: [f64; 3],
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated s values; writes decay.csv.
    #[arg(long, value_delimiter = ',')]
    pub study_decay: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub shift: ShiftArg,
    #[arg(long, value_enum, default_value = "far-field")]
    pub closure: ClosureArg,
}

#[derive(Debug, Args)]
pub struct SymbolArgs {
    #[arg(long)]
    pub fields: PathBuf,
    #[arg(long)]
    pub medium: PathBuf,
    #[arg(long, default_value_t = 2048)]
    pub xi_samples: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub rank_tol: f64,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Linear,
    Newton,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub init: PathBuf,
    #[arg(long)]
    pub illum: PathBuf,
    #[arg(long, value_enum, default_value = "newton")]
    pub mode: ModeArg,
    /// Tikhonov weight ε (default: relative 1e-8 of the normal operator scale).
    #[arg(long)]
    pub reg: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long)]
    pub freeze_n: bool,
    /// Directory with `medium/` and `fields/` giving the two outer node layers.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ForwardStats {
    schema: &'static str,
    illuminations: usize,
    tol: f64,
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Forward(a) => forward(a),
        Command::Illum(a) => illum(a),
        Command::Cgo(a) => cgo(a),
        Command::CheckSymbols(a) => check_symbols(a),
        Command::Invert(a) => invert(a),
        Command::Pipeline(a) => {
            let cfg = ExperimentConfig::load(&a.config)?;
            let manifest = run_pipeline(&cfg, &a.out)?;
            println!("{}", serde_json::to_string_pretty(&manifest.metrics).map_err(qtat_core::Error::from)?);
            Ok(())
        }
    }
}

fn forward(a: ForwardArgs) -> Result<()> {
    let medium = io::read_medium(&a.medium)?;
    let illums = io::read_illuminations(&a.illum)?;
    let mut cfg = SolverConfig { tol: a.tol, ..SolverConfig::default() };
    if let Some(m) = a.max_iter {
        cfg.max_iter = m;
    }
    let fields = solve_forward_many(&medium, &illums, &cfg)?;
    io::write_fields(&a.out.join("fields"), &fields)?;
    io::write_internal_data(&a.out.join("data"), &InternalData::from_fields(&medium.sigma, &fields)?)?;
    io::write_json(&a.out.join("stats.json"), &ForwardStats { schema: SCHEMA_VERSION, illuminations: fields.len(), tol: a.tol })?;
    Ok(())
}

fn illum(a: IllumArgs) -> Result<()> {
    let medium = io::read_medium(&a.medium)?;
    let spec = IllumSpec {
        kind: match a.kind {
            IllumKindArg::Plane => IllumKind::Plane,
            IllumKindArg::Family => IllumKind::Family,
            IllumKindArg::Cgo => IllumKind::Cgo,
        },
        count: a.count,
        direction: a.direction,
        q0: a.q0,
        s: a.s,
        rho: a.rho,
        rho_perp: a.rho_perp,
        cgo: CgoConfig::default(),
    };
    let (illums, params) = workflow::build_illuminations(&medium, &spec)?;
    io::write_illuminations(&a.out, &illums)?;
    io::write_json(&a.out.join("params.json"), &params)?;
    Ok(())
}

fn cgo(a: CgoArgs) -> Result<()> {
    let medium = io::read_medium(&a.medium)?;
    let cfg = CgoConfig {
        tol: a.tol,
        shift: a.shift.into(),
        closure: match a.closure {
            ClosureArg::FarField => QClosure::FarField,
            ClosureArg::Decaying => QClosure::Decaying,
        },
        ..CgoConfig::default()
    };
    let params = cgo_params(a.s, vec3(a.rho), vec3(a.rho_perp), background_wavenumber(&medium), None, None)?;
    let (field, _, report) = qtat_core::cgo::cgo_field_with_report(&medium, &params, &cfg)?;
    io::write_fields(&a.out.join("field"), &[field])?;
    io::write_json(&a.out.join("report.json"), &workflow::IllumParams::Cgo { params, report })?;
    if let Some(s_values) = a.study_decay {
        if s_values.is_empty() {
            return Err(CliError::Config("--study-decay needs at least one s value".into()));
        }
        workflow::cgo_decay_csv(&medium, &params, &s_values, &cfg, &a.out.join("decay.csv"))?;
    }
    Ok(())
}

fn check_symbols(a: SymbolArgs) -> Result<()> {
    let medium = io::read_medium(&a.medium)?;
    let fields = io::read_fields(&a.fields)?;
    let report = workflow::check_symbols(&medium, &fields, a.xi_samples, a.rank_tol)?;
    io::write_json(&a.report, &report)?;
    Ok(())
}

fn invert(a: InvertArgs) -> Result<()> {
    let data = io::read_internal_data(&a.data)?;
    let init = io::read_medium(&a.init)?;
    let illums = io::read_illuminations(&a.illum)?;
    let boundary = match &a.boundary {
        Some(dir) => {
            let m = io::read_medium(&dir.join("medium"))?;
            let fields = io::read_fields(&dir.join("fields"))?;
            Some(MeasuredBoundary { fields, sigma: m.sigma, n: m.n })
        }
        None => None,
    };
    let cfg = GaussNewtonConfig { max_iter: a.max_iter, tol: a.tol, reg: a.reg, freeze_n: a.freeze_n, ..GaussNewtonConfig::default() };
    let mode = match a.mode {
        ModeArg::Linear => InversionMode::Linear,
        ModeArg::Newton => InversionMode::Newton,
    };
    let result = workflow::reconstruct(mode, &data, &init, &illums, boundary.as_ref(), &cfg)?;
    let report = workflow::write_reconstruction(&a.out, mode, &init, &illums, &data, &result, &cfg.forward, a.freeze_n)?;
    eprintln!(
        "{} iteration(s), converged: {}, final relative residual {:.3e}",
        report.iterations,
        report.converged,
        report.residual_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
