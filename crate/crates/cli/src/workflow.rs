//! Steps shared by the subcommands and the pipeline.

use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use qtat_core::cgo::{background_wavenumber, cgo_field_with_report, decay_study, CgoConfig, CgoFieldReport, DecayRow};
use qtat_core::forward::{solve_forward_many, BoundaryIllumination, InternalData, SolverConfig};
use qtat_core::illum::{
    boundary_trace, cgo_params, direction_family, plane_wave_family, plane_wave_params, CgoParams, PlaneWaveParams,
};
use qtat_core::inverse::{
    gauss_newton, linear_reconstruction, stability_report, BoundaryTraces, GaussNewtonConfig, Layout, MeasuredBoundary,
    ReconstructionResult, StabilityRow,
};
use qtat_core::medium::derived_fields;
use qtat_core::symbols::{ellipticity_scan, hyperbolicity_test, lopatinskii_scan, EllipticityReport, LopatinskiiReport};
use qtat_core::{io, Medium, RVec3, VectorField, C64};

use crate::config::{IllumKind, IllumSpec, InversionMode};
use crate::error::{CliError, IoContext, Result};

pub(crate) fn vec3(v: [f64; 3]) -> RVec3 {
    RVec3::new(v[0], v[1], v[2])
}

/// Description of generated illuminations, written next to their traces.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IllumParams {
    Plane { waves: Vec<PlaneWaveParams> },
    Cgo { params: CgoParams, report: CgoFieldReport },
}

/// Builds boundary illuminations for `medium` from `spec`.
pub fn build_illuminations(medium: &Medium, spec: &IllumSpec) -> Result<(Vec<BoundaryIllumination>, IllumParams)> {
    let grid = medium.grid;
    let q0 = match spec.q0 {
        Some([re, im]) => C64::new(re, im),
        None => medium.q_at(0),
    };
    match spec.kind {
        IllumKind::Plane => {
            let dir = spec.direction.map(vec3).unwrap_or_else(|| RVec3::new(0.0, 0.0, 1.0));
            let pw = plane_wave_params(q0, dir)?;
            Ok((vec![boundary_trace(&pw.field(grid))], IllumParams::Plane { waves: vec![pw] }))
        }
        IllumKind::Family => {
            let family = direction_family(3)?;
            let mut waves = plane_wave_family(q0, &family)?;
            let count = spec.count.unwrap_or(waves.len());
            if count == 0 || count > waves.len() {
                return Err(CliError::Config(format!("family count must be in 1..={}", waves.len())));
            }
            waves.truncate(count);
            let illums = waves.iter().map(|w| boundary_trace(&w.field(grid))).collect();
            Ok((illums, IllumParams::Plane { waves }))
        }
        IllumKind::Cgo => {
            let (s, rho, rho_perp) = match (spec.s, spec.rho, spec.rho_perp) {
                (Some(s), Some(r), Some(rp)) => (s, vec3(r), vec3(rp)),
                _ => return Err(CliError::Config("cgo illumination needs s, rho and rho_perp".into())),
            };
            let params = cgo_params(s, rho, rho_perp, background_wavenumber(medium), None, None)?;
            let (field, _, report) = cgo_field_with_report(medium, &params, &spec.cgo)?;
            Ok((vec![boundary_trace(&field)], IllumParams::Cgo { params, report }))
        }
    }
}

/// Multiplies every datum by `1 + noise·u`, `u` uniform in `[−1, 1)`, from a seeded stream.
pub fn add_noise(data: &mut InternalData, noise: f64, seed: u64) {
    if noise == 0.0 {
        return;
    }
    let mut rng = StdRng::seed_from_u64(seed);
    for h in &mut data.h {
        for v in h.iter_mut() {
            *v *= 1.0 + noise * rng.random_range(-1.0..1.0);
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HyperbolicityRow {
    pub illumination: usize,
    /// Nodes where the single-illumination symbol changes sign on the sphere.
    pub hyperbolic_nodes: usize,
    pub nodes: usize,
    pub max_tau_h: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LopatinskiiSample {
    pub node: usize,
    pub report: Option<LopatinskiiReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SymbolReport {
    pub ellipticity: Option<EllipticityReport>,
    pub ellipticity_error: Option<String>,
    pub hyperbolicity: Vec<HyperbolicityRow>,
    pub lopatinskii: Vec<LopatinskiiSample>,
}

/// Ellipticity scan, per-illumination hyperbolicity and Lopatinskii verdicts
/// at the six face centers for three tangential directions each.
pub fn check_symbols(medium: &Medium, fields: &[VectorField], xi_samples: usize, rank_tol: f64) -> Result<SymbolReport> {
    let derived = derived_fields(medium)?;
    let grid = medium.grid;
    let (ellipticity, ellipticity_error) = match ellipticity_scan(fields, &derived, xi_samples, rank_tol) {
        Ok(r) => (Some(r), None),
        Err(e @ (qtat_core::Error::Param(_) | qtat_core::Error::ZeroField { .. })) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let hyperbolicity = fields
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let hyperbolic_nodes = f
                .values
                .iter()
                .zip(&derived.tau_h)
                .filter(|(e, &t)| {
                    let n = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    n > 0.0 && hyperbolicity_test(&(*e / C64::from(n)), t)
                })
                .count();
            HyperbolicityRow {
                illumination: j,
                hyperbolic_nodes,
                nodes: grid.len(),
                max_tau_h: derived.tau_h.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let mut lopatinskii = Vec::new();
    let mid = grid.dims.map(|d| d / 2);
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut c = mid;
            c[axis] = if sign < 0.0 { 0 } else { grid.dims[axis] - 1 };
            let node = grid.index(c[0], c[1], c[2]);
            let mut nu = RVec3::zeros();
            nu[axis] = sign;
            let (t1, t2) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut u = RVec3::zeros();
            u[t1] = 1.0;
            let mut v = RVec3::zeros();
            v[t2] = 1.0;
            let e: Vec<_> = fields.iter().map(|f| f.values[node]).collect();
            for zt in [u, v, (u + v).normalize()] {
                let (report, error) =
                    match lopatinskii_scan(&e, &nu, &zt, derived.kappa[node], derived.tau_n[node]) {
                        Ok(r) => (Some(r), None),
                        Err(err) => (None, Some(err.to_string())),
                    };
                lopatinskii.push(LopatinskiiSample { node, report, error });
            }
        }
    }
    Ok(SymbolReport { ellipticity, ellipticity_error, hyperbolicity, lopatinskii })
}

/// Linearized solve or Gauss–Newton, as requested.
pub fn reconstruct(
    mode: InversionMode,
    data: &InternalData,
    init: &Medium,
    illums: &[BoundaryIllumination],
    boundary: Option<&MeasuredBoundary>,
    cfg: &GaussNewtonConfig,
) -> Result<ReconstructionResult> {
    Ok(match mode {
        InversionMode::Linear => linear_reconstruction(data, init, illums, boundary, cfg)?,
        InversionMode::Newton => gauss_newton(data, init, illums, boundary, cfg)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub mode: InversionMode,
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub boundary_mismatch: f64,
    pub warnings: Vec<String>,
    /// Linear stability estimate for the update relative to the initial guess.
    pub stability: Vec<StabilityRow>,
}

/// Writes `medium/`, `fields/`, `residual.csv`, `stability.json` and `report.json` under `out`.
pub fn write_reconstruction(
    out: &Path,
    mode: InversionMode,
    init: &Medium,
    illums: &[BoundaryIllumination],
    data: &InternalData,
    result: &ReconstructionResult,
    forward: &SolverConfig,
    freeze_n: bool,
) -> Result<ReconstructionReport> {
    let recon = Medium::with_floor(init.grid, result.n.clone(), result.sigma.clone(), init.omega, init.n_floor)?;
    io::write_medium(&out.join("medium"), &recon)?;
    io::write_fields(&out.join("fields"), &result.fields)?;

    let mut csv = String::from("iteration,relative_residual\n");
    for (i, r) in result.residual_history.iter().enumerate() {
        writeln!(csv, "{i},{r:e}").unwrap();
    }
    std::fs::write(out.join("residual.csv"), csv).at(&out.join("residual.csv"))?;

    let init_fields = solve_forward_many(init, illums, forward)?;
    let init_data = InternalData::from_fields(&init.sigma, &init_fields)?;
    let layout = Layout::new(init.grid, illums.len(), freeze_n)?;
    let de: Vec<VectorField> = result
        .fields
        .iter()
        .zip(&init_fields)
        .map(|(a, b)| VectorField { grid: a.grid, values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect() })
        .collect();
    let ds: Vec<f64> = result.sigma.iter().zip(&init.sigma).map(|(a, b)| a - b).collect();
    let dn: Vec<f64> = result.n.iter().zip(&init.n).map(|(a, b)| a - b).collect();
    let w = layout.pack(&de, &ds, &dn)?;
    let zero = vec![0.0; w.len()];
    let traces = BoundaryTraces::from_solution(&layout, &w);
    let stability = stability_report(
        &layout,
        (&w, &zero),
        (&data.h, &init_data.h),
        (&traces, &BoundaryTraces::zeros(&layout)),
    );
    io::write_json(&out.join("stability.json"), &stability)?;
    let report = ReconstructionReport {
        mode,
        iterations: result.iterations,
        converged: result.converged,
        residual_history: result.residual_history.clone(),
        boundary_mismatch: result.boundary_mismatch,
        warnings: result.warnings.clone(),
        stability,
    };
    io::write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

/// Runs an `s`-sweep and writes it as CSV.
pub fn cgo_decay_csv(medium: &Medium, base: &CgoParams, s_values: &[f64], cfg: &CgoConfig, path: &Path) -> Result<Vec<DecayRow>> {
    let rows = decay_study(medium, base, s_values, cfg)?;
    let mut csv = String::from("s,zeta_norm,r_norm,slope,eta_norm,maxwell_residual\n");
    for r in &rows {
        writeln!(csv, "{:e},{:e},{:e},{:e},{:e},{:e}", r.s, r.zeta_norm, r.r_norm, r.slope, r.eta_norm, r.maxwell_residual)
            .unwrap();
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).at(parent)?;
    }
    std::fs::write(path, csv).at(path)?;
    Ok(rows)
}

/// `‖a − b‖ / ‖b‖` and `‖a − b‖ / ‖b − reference‖` in the Euclidean norm.
pub fn relative_errors(a: &[f64], truth: &[f64], reference: f64) -> (f64, f64) {
    let num: f64 = a.iter().zip(truth).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = truth.iter().map(|y| y * y).sum::<f64>().sqrt();
    let pert: f64 = truth.iter().map(|y| (y - reference).powi(2)).sum::<f64>().sqrt();
    (num / den.max(f64::MIN_POSITIVE), if pert > 0.0 { num / pert } else { f64::NAN })
}
