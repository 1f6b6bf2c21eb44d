//! On-disk formats.
//!
//! Every dataset is a directory holding a `meta.json` sidecar and raw
//! little-endian `f64` arrays in C order. Complex arrays interleave real and
//! imaginary parts; vector fields store the three components of a node
//! contiguously, so a complex vector field uses six `f64` per node.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CVec3, VectorField, C64};
use crate::forward::{face_len, BoundaryIllumination, InternalData};
use crate::grid::Grid;
use crate::medium::Medium;
use crate::SCHEMA_VERSION;

pub const META_FILE: &str = "meta.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub name: String,
    pub file: String,
    /// Scalars per node (1 for scalar fields, 3 for vector fields).
    pub components: usize,
    pub complex: bool,
    /// Number of entries of `components` scalars stored in the file.
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub schema: String,
    pub kind: String,
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_floor: Option<f64>,
    pub dtype: String,
    pub order: String,
    pub arrays: Vec<ArrayMeta>,
}

impl Meta {
    fn new(kind: &str, grid: &Grid) -> Self {
        Self {
            schema: SCHEMA_VERSION.into(),
            kind: kind.into(),
            dims: grid.dims,
            spacing: grid.spacing,
            origin: grid.origin,
            omega: None,
            n_floor: None,
            dtype: "f64".into(),
            order: "C".into(),
            arrays: vec![],
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.dims, self.spacing, self.origin)
    }

    fn array(&self, name: &str) -> Result<&ArrayMeta> {
        self.arrays.iter().find(|a| a.name == name).ok_or_else(|| Error::Format(format!("array '{name}' missing")))
    }
}

pub fn write_meta(dir: &Path, meta: &Meta) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_meta(dir: &Path, kind: &str) -> Result<Meta> {
    let text = fs::read_to_string(dir.join(META_FILE))?;
    let meta: Meta = serde_json::from_str(&text)?;
    if meta.schema != SCHEMA_VERSION {
        return Err(Error::Format(format!("schema '{}' (expected '{SCHEMA_VERSION}')", meta.schema)));
    }
    if meta.kind != kind {
        return Err(Error::Format(format!("directory holds '{}', expected '{kind}'", meta.kind)));
    }
    if meta.dtype != "f64" || meta.order != "C" {
        return Err(Error::Format(format!("unsupported dtype/order {}/{}", meta.dtype, meta.order)));
    }
    Ok(meta)
}

pub fn write_f64(path: &Path, data: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = data.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_f64(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != 8 * expected {
        return Err(Error::Format(format!(
            "{} has {} bytes, expected {}",
            path.display(),
            bytes.len(),
            8 * expected
        )));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn flatten_vectors(v: &[CVec3]) -> Vec<f64> {
    v.iter().flat_map(|x| x.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect()
}

fn unflatten_vectors(raw: &[f64]) -> Vec<CVec3> {
    raw.chunks_exact(6)
        .map(|c| CVec3::new(C64::new(c[0], c[1]), C64::new(c[2], c[3]), C64::new(c[4], c[5])))
        .collect()
}

fn put_real(dir: &Path, meta: &mut Meta, name: &str, data: &[f64]) -> Result<()> {
    let file = format!("{name}.bin");
    write_f64(&dir.join(&file), data)?;
    meta.arrays.push(ArrayMeta { name: name.into(), file, components: 1, complex: false, len: data.len() });
    Ok(())
}

fn put_vectors(dir: &Path, meta: &mut Meta, name: &str, data: &[CVec3]) -> Result<()> {
    let file = format!("{name}.bin");
    write_f64(&dir.join(&file), &flatten_vectors(data))?;
    meta.arrays.push(ArrayMeta { name: name.into(), file, components: 3, complex: true, len: data.len() });
    Ok(())
}

fn get_real(dir: &Path, meta: &Meta, name: &str, len: usize) -> Result<Vec<f64>> {
    let a = meta.array(name)?;
    if a.components != 1 || a.complex || a.len != len {
        return Err(Error::Format(format!("array '{name}' has the wrong shape")));
    }
    read_f64(&dir.join(&a.file), len)
}

fn get_vectors(dir: &Path, meta: &Meta, name: &str, len: usize) -> Result<Vec<CVec3>> {
    let a = meta.array(name)?;
    if a.components != 3 || !a.complex || a.len != len {
        return Err(Error::Format(format!("array '{name}' has the wrong shape")));
    }
    Ok(unflatten_vectors(&read_f64(&dir.join(&a.file), 6 * len)?))
}

pub fn write_medium(dir: &Path, m: &Medium) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut meta = Meta::new("medium", &m.grid);
    meta.omega = Some(m.omega);
    meta.n_floor = Some(m.n_floor);
    put_real(dir, &mut meta, "n", &m.n)?;
    put_real(dir, &mut meta, "sigma", &m.sigma)?;
    write_meta(dir, &meta)
}

pub fn read_medium(dir: &Path) -> Result<Medium> {
    let meta = read_meta(dir, "medium")?;
    let grid = meta.grid()?;
    let omega = meta.omega.ok_or_else(|| Error::Format("medium without omega".into()))?;
    let n = get_real(dir, &meta, "n", grid.len())?;
    let sigma = get_real(dir, &meta, "sigma", grid.len())?;
    Medium::with_floor(grid, n, sigma, omega, meta.n_floor.unwrap_or(crate::medium::DEFAULT_N_FLOOR))
}

/// Writes fields as arrays `E0`, `E1`, ….
pub fn write_fields(dir: &Path, fields: &[VectorField]) -> Result<()> {
    let first = fields.first().ok_or_else(|| Error::Param("no fields to write".into()))?;
    fs::create_dir_all(dir)?;
    let mut meta = Meta::new("fields", &first.grid);
    for (j, f) in fields.iter().enumerate() {
        first.grid.check_same(&f.grid)?;
        put_vectors(dir, &mut meta, &format!("E{j}"), &f.values)?;
    }
    write_meta(dir, &meta)
}

pub fn read_fields(dir: &Path) -> Result<Vec<VectorField>> {
    let meta = read_meta(dir, "fields")?;
    let grid = meta.grid()?;
    (0..meta.arrays.len())
        .map(|j| Ok(VectorField { grid, values: get_vectors(dir, &meta, &format!("E{j}"), grid.len())? }))
        .collect()
}

/// Writes internal data as arrays `H0`, `H1`, ….
pub fn write_internal_data(dir: &Path, data: &InternalData) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut meta = Meta::new("internal_data", &data.grid);
    for (j, h) in data.h.iter().enumerate() {
        put_real(dir, &mut meta, &format!("H{j}"), h)?;
    }
    write_meta(dir, &meta)
}

pub fn read_internal_data(dir: &Path) -> Result<InternalData> {
    let meta = read_meta(dir, "internal_data")?;
    let grid = meta.grid()?;
    let h = (0..meta.arrays.len()).map(|j| get_real(dir, &meta, &format!("H{j}"), grid.len())).collect::<Result<_>>()?;
    Ok(InternalData { grid, h })
}

/// Writes illuminations as per-face arrays `f{j}_face{k}`.
pub fn write_illuminations(dir: &Path, illums: &[BoundaryIllumination]) -> Result<()> {
    let first = illums.first().ok_or_else(|| Error::Param("no illuminations to write".into()))?;
    fs::create_dir_all(dir)?;
    let mut meta = Meta::new("illuminations", &first.grid);
    for (j, f) in illums.iter().enumerate() {
        first.grid.check_same(&f.grid)?;
        for (k, face) in f.faces.iter().enumerate() {
            put_vectors(dir, &mut meta, &format!("f{j}_face{k}"), face)?;
        }
    }
    write_meta(dir, &meta)
}

pub fn read_illuminations(dir: &Path) -> Result<Vec<BoundaryIllumination>> {
    let meta = read_meta(dir, "illuminations")?;
    let grid = meta.grid()?;
    if meta.arrays.len() % 6 != 0 {
        return Err(Error::Format("illumination arrays must come in groups of six faces".into()));
    }
    (0..meta.arrays.len() / 6)
        .map(|j| {
            let mut faces: [Vec<CVec3>; 6] = Default::default();
            for (k, face) in faces.iter_mut().enumerate() {
                *face = get_vectors(dir, &meta, &format!("f{j}_face{k}"), face_len(&grid, k / 2))?;
            }
            Ok(BoundaryIllumination { grid, faces })
        })
        .collect()
}

/// Writes any serializable value as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::I;
    use crate::medium::{make_phantom, PhantomKind, PhantomParams};

    fn grid() -> Grid {
        Grid::new([6, 5, 7], 0.2, [-0.5, 0.0, 0.25]).unwrap()
    }

    fn field(g: Grid, a: f64) -> VectorField {
        VectorField::from_position(g, move |x| {
            CVec3::new(C64::new(x[0] * a, x[1]), I * x[2], C64::new((a * x[1]).sin(), -a))
        })
    }

    #[test]
    fn medium_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::centered_cube(10, 1.0).unwrap();
        let p = PhantomParams { amp_n: 0.3, amp_sigma: 0.2, sigma_c: 0.1, ..Default::default() };
        let m = make_phantom(PhantomKind::TwoInclusions, g, &p).unwrap();
        write_medium(dir.path(), &m).unwrap();
        assert_eq!(read_medium(dir.path()).unwrap(), m);
    }

    #[test]
    fn fields_data_and_illuminations_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid();
        let fields = vec![field(g, 1.0), field(g, -2.5)];
        write_fields(&dir.path().join("e"), &fields).unwrap();
        assert_eq!(read_fields(&dir.path().join("e")).unwrap(), fields);

        let sigma: Vec<f64> = (0..g.len()).map(|p| 0.1 + p as f64 * 1e-3).collect();
        let data = InternalData::from_fields(&sigma, &fields).unwrap();
        write_internal_data(&dir.path().join("h"), &data).unwrap();
        assert_eq!(read_internal_data(&dir.path().join("h")).unwrap(), data);

        let illums: Vec<_> = fields.iter().map(BoundaryIllumination::from_field).collect();
        write_illuminations(&dir.path().join("f"), &illums).unwrap();
        assert_eq!(read_illuminations(&dir.path().join("f")).unwrap(), illums);
    }

    #[test]
    fn rejects_wrong_kind_and_truncated_arrays() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid();
        write_fields(dir.path(), &[field(g, 1.0)]).unwrap();
        assert!(matches!(read_medium(dir.path()), Err(Error::Format(_))));
        let bin = dir.path().join("E0.bin");
        let bytes = fs::read(&bin).unwrap();
        fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_fields(dir.path()), Err(Error::Format(_))));
    }
}
