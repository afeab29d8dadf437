//! Runs one configured experiment and writes its files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nematic_core::estimator::EstimatorResult;
use nematic_core::fem::State;
use nematic_core::metrics::RunReport;
use nematic_core::solver::{nested_iteration_observed, LevelStats};

use crate::config::{ConfigError, ExperimentConfig};
use crate::output;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver failed: {0}")]
    Solver(nematic_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// Process exit status: 2 for configuration errors, 3 for solver
    /// failures, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn write(path: PathBuf, contents: &str) -> Result<(), RunError> {
    output::write_atomic(&path, contents).map_err(io_at(&path))
}

pub fn level_dir(out: &Path, level: usize) -> PathBuf {
    out.join(format!("level_{level}"))
}

fn write_level(config: &ExperimentConfig, stats: &LevelStats, state: &State, est: &EstimatorResult) -> Result<(), RunError> {
    let dir = level_dir(&config.output_dir, stats.level);
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    write(dir.join("estimator.csv"), &output::estimator_csv(est))?;
    if config.emit_fields {
        let title = format!("{} {} level {}", config.problem, config.solver.mode.name(), stats.level);
        write(dir.join("fields.vtk"), &output::fields_vtk(state, est, &title))?;
        write(dir.join("cells.csv"), &output::cells_csv(state.mesh()))?;
        write(dir.join("state.txt"), &output::state_dump(state))?;
    }
    Ok(())
}

/// Solves, writes every file under the output directory and returns the report
/// together with the finest state.
///
/// Files: `report.csv` and `summary.csv` at the top, and per level
/// `level_<l>/estimator.csv`, plus `fields.vtk`, `cells.csv` and `state.txt`
/// when fields are enabled.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(State, RunReport), RunError> {
    config.validate()?;
    let out = &config.output_dir;
    fs::create_dir_all(out).map_err(io_at(out))?;

    let start = Instant::now();
    let clock = move || start.elapsed().as_secs_f64();
    let mut io_failure: Option<RunError> = None;
    let mut observer = |stats: &LevelStats, state: &State, est: &EstimatorResult| {
        write_level(config, stats, state, est).map_err(|e| {
            let message = e.to_string();
            io_failure = Some(e);
            nematic_core::Error::Aborted(message)
        })
    };
    let result = nested_iteration_observed(&config.solver, &config.params, &config.boundary(), &clock, &mut observer);
    let (state, report) = match result {
        Ok(r) => r,
        Err(e) => return Err(io_failure.unwrap_or(RunError::Solver(e))),
    };
    write(out.join("report.csv"), &output::report_csv(&report))?;
    write(out.join("summary.csv"), &output::summary_csv(&report))?;
    Ok((state, report))
}
