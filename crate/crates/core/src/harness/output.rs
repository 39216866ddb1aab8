//! Run artifacts: `diag.csv`, binary snapshots and the run manifest.
//!
//! A snapshot is one text header line
//! `GSAV1 nx ny x0 x1 y0 y1 t component\n` followed by `nx * ny`
//! little-endian `f64` values in row-major order (`x` fastest).

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagRecord;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

use super::config::RunConfig;

/// Environment variable naming the directory run outputs are written under.
pub const OUTPUT_ROOT_VAR: &str = "GSAV_OUT";
const MAGIC: &str = "GSAV1";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn csv_header(n_fields: usize, n_potentials: usize) -> String {
    let mut cols = vec!["step", "t", "dt", "E_original", "E_modified"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    cols.extend((0..n_fields).map(|i| format!("mass_{i}")));
    cols.extend((0..n_potentials).map(|p| format!("xi_{p}")));
    cols.extend((0..n_potentials).map(|p| format!("r_{p}")));
    cols.push("newton_iters".into());
    cols.join(",")
}

pub fn csv_row(r: &DiagRecord) -> String {
    let mut s = format!("{},{:e},{:e},{:e},{:e}", r.step, r.t, r.dt, r.e_original, r.e_modified);
    for v in r.mass.iter().chain(&r.xi).chain(&r.r) {
        s.push_str(&format!(",{v:e}"));
    }
    s.push_str(&format!(",{}", r.newton_iters));
    s
}

/// Writes the files of one run into its own directory.
pub struct RunWriter {
    dir: PathBuf,
    csv: BufWriter<File>,
}

impl RunWriter {
    pub fn create(dir: &Path, n_fields: usize, n_potentials: usize) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut csv = BufWriter::new(File::create(dir.join("diag.csv"))?);
        writeln!(csv, "{}", csv_header(n_fields, n_potentials))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn record(&mut self, r: &DiagRecord) -> Result<()> {
        writeln!(self.csv, "{}", csv_row(r))?;
        Ok(())
    }

    /// Writes `snap_{step}_{component}.bin` for every field.
    pub fn snapshot(&self, step: usize, t: f64, fields: &[Field]) -> Result<()> {
        for (c, f) in fields.iter().enumerate() {
            write_snapshot(&self.dir.join(format!("snap_{step:08}_{c}.bin")), f, t, c)?;
        }
        Ok(())
    }

    pub fn manifest(&self, config: &RunConfig) -> Result<()> {
        let text = format!(
            "# gsav {} run manifest\n# seed {}\n{}",
            env!("CARGO_PKG_VERSION"),
            config.seed,
            config.to_toml()
        );
        fs::write(self.dir.join("manifest.toml"), text)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.csv.flush()?;
        Ok(())
    }
}

pub fn write_snapshot(path: &Path, field: &Field, t: f64, component: usize) -> Result<()> {
    let g = field.grid();
    let (x0, x1) = g.x_range();
    let (y0, y1) = g.y_range();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "{MAGIC} {} {} {x0:e} {x1:e} {y0:e} {y1:e} {t:e} {component}",
        g.nx(),
        g.ny()
    )?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    pub t: f64,
    pub component: usize,
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let bad = || Error::Io(format!("{}: malformed snapshot header {header:?}", path.display()));
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 9 || parts[0] != MAGIC {
        return Err(bad());
    }
    let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let grid = Grid::new(
        int(parts[1])?,
        int(parts[2])?,
        (real(parts[3])?, real(parts[4])?),
        (real(parts[5])?, real(parts[6])?),
    )?;
    let t = real(parts[7])?;
    let component = int(parts[8])?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Io(format!(
            "{}: payload has {} bytes, expected {}",
            path.display(),
            bytes.len(),
            8 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Snapshot {
        field: Field::new(grid, values)?,
        t,
        component,
    })
}
