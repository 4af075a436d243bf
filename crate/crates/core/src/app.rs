//! Orchestration behind the command-line tool.

use std::path::{Path, PathBuf};

use log::info;
use thiserror::Error;

use crate::config::{MeshSource, RunConfig};
use crate::fem::FemError;
use crate::lscheme::{run_loading_loop, DriverError, LoadingSchedule, StepReport};
use crate::material::{MaterialError, MaterialParams};
use crate::mesh::{generate_unit_square_mesh, insert_slit, load_mesh, Mesh, MeshError, SlitSpec};
use crate::output::{write_vtk, OutputError, SeriesWriter};
use crate::subsolvers::FeSystem;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("cannot create output directory {path}: {source}")]
    OutputDir { path: PathBuf, source: std::io::Error },
}

pub fn build_mesh(source: &MeshSource) -> Result<Mesh, MeshError> {
    match source {
        MeshSource::Generated { refinements, slit } => {
            let mesh = generate_unit_square_mesh(*refinements);
            match slit {
                Some((a, b)) => insert_slit(&mesh, &SlitSpec::new(*a, *b)),
                None => Ok(mesh),
            }
        }
        MeshSource::File(path) => load_mesh(path),
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub params: MaterialParams,
    pub reports: Vec<StepReport>,
    pub csv: PathBuf,
    pub vtk: Vec<PathBuf>,
}

impl RunSummary {
    pub fn unconverged_steps(&self) -> usize {
        self.reports.iter().filter(|r| !r.converged).count()
    }
}

fn vtk_path(dir: &Path, prefix: &str, step: usize) -> PathBuf {
    dir.join(format!("{prefix}_{step:05}.vtk"))
}

/// Runs a full simulation and writes `<prefix>.csv` plus VTK snapshots to
/// the output directory. The CSV grows step by step, so a failed run keeps
/// the rows of every finished step.
pub fn run(config: &RunConfig) -> Result<RunSummary, AppError> {
    let mesh = build_mesh(&config.mesh)?;
    let params = config.material.resolve(mesh.h());
    params.validate()?;
    info!(
        "{} nodes, {} cells, h = {:.4e}, eps = {:.4e}, gamma = {:.4e}, strategy {}",
        mesh.num_nodes(),
        mesh.num_cells(),
        mesh.h(),
        params.eps,
        params.gamma,
        config.lscheme.strategy
    );
    let sys = FeSystem::new(mesh)?;
    let dir = &config.output.dir;
    std::fs::create_dir_all(dir).map_err(|source| AppError::OutputDir { path: dir.clone(), source })?;
    let csv = dir.join(format!("{}.csv", config.output.prefix));
    let mut series = SeriesWriter::create(&csv)?;
    let schedule = LoadingSchedule { dt: config.dt, steps: config.steps, bc: config.bc };
    let mut vtk = Vec::new();
    let mut write_err: Option<OutputError> = None;
    let every = config.output.vtk_every;
    let result = run_loading_loop(&sys, &params, &config.lscheme, &schedule, |report, state| {
        if write_err.is_some() {
            return;
        }
        let mut step_out = || -> Result<(), OutputError> {
            series.push(report)?;
            if (every > 0 && report.step % every == 0) || report.step == config.steps {
                let path = vtk_path(dir, &config.output.prefix, report.step);
                write_vtk(state, sys.mesh(), &path)?;
                vtk.push(path);
            }
            Ok(())
        };
        write_err = step_out().err();
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    if config.steps == 0 {
        let path = vtk_path(dir, &config.output.prefix, 0);
        write_vtk(&result.state, sys.mesh(), &path)?;
        vtk.push(path);
    }
    Ok(RunSummary { params, reports: result.reports, csv, vtk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    #[test]
    fn short_run_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "[mesh]\nrefinements = 1\nslit = 0 0.5 0.5 0.5\n[material]\nmu = 80.77\nlambda = 121.15\ngc_n_per_mm = 2.7\n\
             [loading]\ndt = 1e-4\nsteps = 2\n[output]\ndir = {}\nvtk_every = 1\n",
            dir.path().display()
        );
        let mut cfg = parse_config_str(&text, &[], Path::new(".")).unwrap();
        cfg.output.dir = dir.path().to_path_buf();
        let summary = run(&cfg).unwrap();
        assert_eq!(summary.reports.len(), 2);
        assert_eq!(summary.vtk.len(), 2);
        let csv = std::fs::read_to_string(&summary.csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(summary.reports[1].fx > summary.reports[0].fx);
    }
}
