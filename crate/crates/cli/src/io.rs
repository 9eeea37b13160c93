//! System files: a self-describing JSON format and a MatrixMarket manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::DMatrix;
use passive_ph::{LtiSystem, Mode, PhForm};
use serde::{Deserialize, Serialize};

type Rows = Vec<Vec<f64>>;

fn to_rows(x: &DMatrix<f64>) -> Rows {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

fn from_rows(name: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        bail!("matrix {name} must be {nrows}x{ncols}");
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct PhBlock {
    pub J: Rows,
    pub R: Rows,
    pub Q: Rows,
    pub F: Rows,
    pub P: Rows,
    pub S: Rows,
    pub N: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub Z: Option<Rows>,
}

/// On-disk system: matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub E: Rows,
    pub A: Rows,
    pub B: Rows,
    pub C: Rows,
    pub D: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ph: Option<PhBlock>,
}

impl SystemFile {
    pub fn from_system(sys: &LtiSystem, mode: Mode, ph: Option<&PhForm>) -> Self {
        Self {
            n: sys.n(),
            m: sys.m(),
            mode,
            E: to_rows(&sys.e),
            A: to_rows(&sys.a),
            B: to_rows(&sys.b),
            C: to_rows(&sys.c),
            D: to_rows(&sys.d),
            ph: ph.map(|p| PhBlock {
                J: to_rows(&p.j),
                R: to_rows(&p.r),
                Q: to_rows(&p.q),
                F: to_rows(&p.f),
                P: to_rows(&p.p),
                S: to_rows(&p.s),
                N: to_rows(&p.n),
                Z: p.z.as_ref().map(to_rows),
            }),
        }
    }

    pub fn system(&self) -> Result<LtiSystem> {
        let (n, m) = (self.n, self.m);
        Ok(LtiSystem::new(
            from_rows("E", &self.E, n, n)?,
            from_rows("A", &self.A, n, n)?,
            from_rows("B", &self.B, n, m)?,
            from_rows("C", &self.C, m, n)?,
            from_rows("D", &self.D, m, m)?,
        )?)
    }

    pub fn ph_form(&self) -> Result<Option<PhForm>> {
        let Some(ph) = &self.ph else { return Ok(None) };
        let (n, m) = (self.n, self.m);
        Ok(Some(PhForm {
            j: from_rows("J", &ph.J, n, n)?,
            r: from_rows("R", &ph.R, n, n)?,
            q: from_rows("Q", &ph.Q, n, n)?,
            f: from_rows("F", &ph.F, n, m)?,
            p: from_rows("P", &ph.P, n, m)?,
            s: from_rows("S", &ph.S, m, m)?,
            n: from_rows("N", &ph.N, m, m)?,
            z: ph.Z.as_ref().map(|z| from_rows("Z", z, n, n)).transpose()?,
        }))
    }
}

pub fn read_json(path: &Path) -> Result<SystemFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: SystemFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.system().with_context(|| format!("validating {}", path.display()))?;
    Ok(file)
}

pub fn write_json(path: &Path, file: &SystemFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Manifest for the MatrixMarket reader: one array file per matrix, paths
/// relative to the manifest.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct MmManifest {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub matrices: BTreeMap<String, PathBuf>,
}

fn default_mode() -> Mode {
    Mode::Descriptor
}

/// Parse a dense `%%MatrixMarket matrix array real general` file.
pub fn parse_matrix_market(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty MatrixMarket file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        bail!("not a MatrixMarket matrix header: {header}");
    }
    if fields[2] != "array" || fields[3] != "real" || fields[4] != "general" {
        bail!("only dense real general arrays are supported, got {header}");
    }
    let mut data = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size = data.next().ok_or_else(|| anyhow!("missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().with_context(|| format!("bad size line '{size}'")))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else { bail!("size line must have two entries: '{size}'") };
    let values: Vec<f64> = data
        .flat_map(str::split_whitespace)
        .map(|t| t.parse::<f64>().with_context(|| format!("bad value '{t}'")))
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        bail!("expected {} values, found {}", rows * cols, values.len());
    }
    Ok(DMatrix::from_column_slice(rows, cols, &values))
}

#[cfg(test)]
pub fn format_matrix_market(x: &DMatrix<f64>) -> String {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} {}\n", x.nrows(), x.ncols()));
    for v in x.iter() {
        out.push_str(&format!("{v:e}\n"));
    }
    out
}

/// Read a system from a MatrixMarket manifest. E defaults to the identity.
pub fn read_matrix_market(manifest_path: &Path) -> Result<SystemFile> {
    let text = fs::read_to_string(manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: MmManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let load = |key: &str| -> Result<Option<DMatrix<f64>>> {
        match manifest.matrices.get(key) {
            None => Ok(None),
            Some(rel) => {
                let path = base.join(rel);
                let body = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                parse_matrix_market(&body).with_context(|| format!("parsing {}", path.display())).map(Some)
            }
        }
    };
    let need = |key: &str| -> Result<DMatrix<f64>> { load(key)?.ok_or_else(|| anyhow!("manifest lacks matrix {key}")) };
    let a = need("A")?;
    let n = a.nrows();
    let e = load("E")?.unwrap_or_else(|| DMatrix::identity(n, n));
    let sys = LtiSystem::new(e, a, need("B")?, need("C")?, need("D")?)?;
    Ok(SystemFile::from_system(&sys, manifest.mode, None))
}

/// JSON unless the file is a `.mm.json` / `.manifest.json` MatrixMarket manifest.
pub fn read_system(path: &Path, format: Option<&str>) -> Result<SystemFile> {
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
    let mm = match format {
        Some("mm") => true,
        Some("json") => false,
        Some(other) => bail!("unknown input format '{other}'"),
        None => name.ends_with(".manifest.json") || name.ends_with(".mm.json"),
    };
    if mm {
        read_matrix_market(path)
    } else {
        read_json(path)
    }
}
