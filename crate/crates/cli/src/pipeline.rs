use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use qtat_core::cgo::background_wavenumber;
use qtat_core::forward::{solve_forward_many, InternalData};
use qtat_core::illum::cgo_params;
use qtat_core::inverse::MeasuredBoundary;
use qtat_core::medium::make_phantom;
use qtat_core::{io, Grid, Medium, SCHEMA_VERSION};

use crate::config::{cgo_config, BoundarySource, ExperimentConfig};
use crate::error::{IoContext, Result};
use crate::workflow::{self, vec3};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Metrics {
    pub ellipticity_margin: Option<f64>,
    pub sigma_rel_error: Option<f64>,
    pub n_rel_error: Option<f64>,
    /// Error relative to the size of the perturbation from the background.
    pub sigma_perturbation_error: Option<f64>,
    pub n_perturbation_error: Option<f64>,
    pub gauss_newton_iterations: Option<usize>,
    pub converged: Option<bool>,
    pub cgo_decay_slopes: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema: String,
    pub version: String,
    pub threads: usize,
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    pub files: Vec<ManifestEntry>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.strip_prefix(root).map_or(true, |p| p != Path::new(MANIFEST)) {
            out.push(path);
        }
    }
    Ok(())
}

/// Every file under `root` except the manifest, sorted, with SHA-256 digests.
pub fn checksum_tree(root: &Path) -> Result<Vec<ManifestEntry>> {
    let mut files = Vec::new();
    collect_files(root, root, &mut files)?;
    files.sort();
    files
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p).at(p)?;
            let rel = p.strip_prefix(root).unwrap_or(p);
            Ok(ManifestEntry {
                path: rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"),
                bytes: bytes.len() as u64,
                sha256: hex(&Sha256::digest(&bytes)),
            })
        })
        .collect()
}

fn truth_medium(cfg: &ExperimentConfig) -> Result<Medium> {
    match (&cfg.medium.kind, &cfg.medium.path) {
        (_, Some(p)) => Ok(io::read_medium(p)?),
        (Some(kind), None) => {
            let grid = Grid::centered_cube(cfg.grid.n, cfg.grid.side)?;
            Ok(make_phantom(*kind, grid, &cfg.medium.params)?)
        }
        (None, None) => unreachable!("validated config has a medium"),
    }
}

/// Runs forward → data synthesis → symbol check → inversion (and an optional
/// CGO decay study), writing artifacts and `manifest.json` under `out`.
pub fn run_pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out).at(out)?;
    let mut metrics = Metrics::default();

    let truth = truth_medium(cfg)?;
    io::write_medium(&out.join("truth"), &truth)?;

    let (illums, params) = workflow::build_illuminations(&truth, &cfg.illumination)?;
    io::write_illuminations(&out.join("illum"), &illums)?;
    io::write_json(&out.join("illum").join("params.json"), &params)?;

    let fields = solve_forward_many(&truth, &illums, &cfg.solver)?;
    io::write_fields(&out.join("fields"), &fields)?;
    let mut data = InternalData::from_fields(&truth.sigma, &fields)?;
    workflow::add_noise(&mut data, cfg.noise, cfg.rng_seed);
    io::write_internal_data(&out.join("data"), &data)?;

    if let Some(sym) = &cfg.symbols {
        let report = workflow::check_symbols(&truth, &fields, sym.xi_samples, sym.rank_tol)?;
        metrics.ellipticity_margin = report.ellipticity.as_ref().map(|e| e.margin);
        io::write_json(&out.join("symbols.json"), &report)?;
    }

    if let Some(study) = &cfg.cgo_study {
        let base = cgo_params(study.s_values[0], vec3(study.rho), vec3(study.rho_perp), background_wavenumber(&truth), None, None)?;
        let rows = workflow::cgo_decay_csv(&truth, &base, &study.s_values, &cgo_config(study), &out.join("cgo_decay.csv"))?;
        metrics.cgo_decay_slopes = Some(rows.iter().skip(1).map(|r| r.slope).collect());
    }

    if let Some(inv) = &cfg.inversion {
        let init = Medium::with_floor(
            truth.grid,
            vec![inv.background.n; truth.grid.len()],
            vec![inv.background.sigma; truth.grid.len()],
            truth.omega,
            truth.n_floor,
        )?;
        let measured = MeasuredBoundary { fields: fields.clone(), sigma: truth.sigma.clone(), n: truth.n.clone() };
        let boundary = match inv.boundary {
            BoundarySource::Truth => Some(&measured),
            BoundarySource::None => None,
        };
        let result = workflow::reconstruct(inv.mode, &data, &init, &illums, boundary, &inv.gn)?;
        workflow::write_reconstruction(
            &out.join("recon"),
            inv.mode,
            &init,
            &illums,
            &data,
            &result,
            &inv.gn.forward,
            inv.gn.freeze_n,
        )?;
        let (se, sp) = workflow::relative_errors(&result.sigma, &truth.sigma, inv.background.sigma);
        let (ne, np) = workflow::relative_errors(&result.n, &truth.n, inv.background.n);
        metrics.sigma_rel_error = Some(se);
        metrics.n_rel_error = Some(ne);
        metrics.sigma_perturbation_error = Some(sp);
        metrics.n_perturbation_error = Some(np);
        metrics.gauss_newton_iterations = Some(result.iterations);
        metrics.converged = Some(result.converged);
    }

    let manifest = Manifest {
        schema: SCHEMA_VERSION.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        threads: rayon::current_num_threads(),
        config: cfg.clone(),
        metrics,
        files: checksum_tree(out)?,
    };
    io::write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}
