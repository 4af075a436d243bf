//! CSV time series and legacy VTK snapshots.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lscheme::StepReport;
use crate::mesh::Mesh;
use crate::subsolvers::FieldState;

pub const CSV_HEADER: &str = "t,u_top,Fx,Fy,outer_iters,converged,maxL,min_phi";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("no step reports to write")]
    Empty,
    #[error("field length {got} does not match {expected} for `{name}`")]
    FieldSize { name: &'static str, got: usize, expected: usize },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Writes the header and one row per report. Floats use Rust's shortest
/// round-trip representation, so parsing the file recovers every value.
pub fn write_series_csv_to(reports: &[StepReport], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", csv_row(r))?;
    }
    Ok(())
}

pub fn csv_row(r: &StepReport) -> String {
    format!(
        "{:?},{:?},{:?},{:?},{},{},{:?},{:?}",
        r.t, r.u_top, r.fx, r.fy, r.outer_iterations, r.converged as u8, r.max_l, r.min_phi
    )
}

pub fn write_series_csv(reports: &[StepReport], path: &Path) -> Result<(), OutputError> {
    if reports.is_empty() {
        return Err(OutputError::Empty);
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_series_csv_to(reports, &mut out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

/// Appends rows to a CSV file as steps finish. The header is written on
/// creation.
pub struct SeriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl SeriesWriter {
    pub fn create(path: &Path) -> Result<Self, OutputError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{CSV_HEADER}").map_err(io_err(path))?;
        Ok(SeriesWriter { path: path.to_path_buf(), out })
    }

    pub fn push(&mut self, r: &StepReport) -> Result<(), OutputError> {
        writeln!(self.out, "{}", csv_row(r)).map_err(io_err(&self.path))?;
        self.out.flush().map_err(io_err(&self.path))
    }
}

const VTK_QUAD: u32 = 9;

pub fn write_vtk_to(state: &FieldState, mesh: &Mesh, out: &mut impl Write) -> Result<(), OutputError> {
    let n = mesh.num_nodes();
    for (name, got, expected) in [
        ("u", state.u.len(), 2 * n),
        ("phi", state.phi.len(), n),
        ("Xi", state.xi.len(), n),
        ("L", state.l.len(), n),
    ] {
        if got != expected {
            return Err(OutputError::FieldSize { name, got, expected });
        }
    }
    let mut body = || -> io::Result<()> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "phase-field state")?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {n} double")?;
        for p in mesh.nodes() {
            writeln!(out, "{:?} {:?} 0", p[0], p[1])?;
        }
        let nc = mesh.num_cells();
        writeln!(out, "CELLS {nc} {}", 5 * nc)?;
        for c in mesh.cells() {
            writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        writeln!(out, "CELL_TYPES {nc}")?;
        for _ in 0..nc {
            writeln!(out, "{VTK_QUAD}")?;
        }
        writeln!(out, "POINT_DATA {n}")?;
        for (name, field) in [("phi", &state.phi), ("Xi", &state.xi), ("L", &state.l)] {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in field.iter() {
                writeln!(out, "{v:?}")?;
            }
        }
        writeln!(out, "VECTORS u double")?;
        for k in 0..n {
            writeln!(out, "{:?} {:?} 0", state.u[2 * k], state.u[2 * k + 1])?;
        }
        Ok(())
    };
    body().map_err(|source| OutputError::Io { path: PathBuf::from("<stream>"), source })
}

/// Legacy ASCII VTK unstructured grid with point data phi, u, Xi and L.
pub fn write_vtk(state: &FieldState, mesh: &Mesh, path: &Path) -> Result<(), OutputError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    write_vtk_to(state, mesh, &mut out).map_err(|e| match e {
        OutputError::Io { source, .. } => OutputError::Io { path: path.to_path_buf(), source },
        other => other,
    })?;
    out.flush().map_err(io_err(path))
}
