//! Time loop driven by a [`SimConfig`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::SimConfig;
use crate::error::{ConfigError, Error, IoError};
use crate::output::{diagnostics_row, write_vtk, DIAGNOSTICS_HEADER};
use crate::stepper::{initial_state, step, Diagnostics};

/// Outcome of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub last: Option<Diagnostics>,
    pub diagnostics_path: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError {
        path: path.to_path_buf(),
        source,
    }
}

/// Audits the model, runs `stepping.n_steps` steps and writes
/// `diagnostics.csv` plus optional `fields_<step>.vtk` snapshots into the
/// output directory. Rows already written are flushed before an error is
/// returned.
pub fn run_simulation(cfg: &SimConfig) -> Result<RunSummary, Error> {
    cfg.check()?;
    let report = cfg.audit()?;
    if !report.all_passed() {
        let names: Vec<String> = report.failed_assumptions().iter().map(|a| a.to_string()).collect();
        return Err(ConfigError::Semantic(format!(
            "model violates {}\n{report}",
            names.join(", ")
        ))
        .into());
    }
    let g = cfg.grid()?;
    let spec = cfg.model_spec();
    let step_cfg = cfg.step_config();
    let dir = PathBuf::from(&cfg.output.directory);
    std::fs::create_dir_all(&dir).map_err(io(&dir))?;

    let csv_path = dir.join(DIAGNOSTICS_FILE);
    let file = File::create(&csv_path).map_err(io(&csv_path))?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "{DIAGNOSTICS_HEADER}").map_err(io(&csv_path))?;

    let dump = cfg.output.dump_stride;
    let mut snapshots = Vec::new();
    let mut snapshot = |k: usize, state: &crate::stepper::State| -> Result<(), IoError> {
        if dump > 0 && k.is_multiple_of(dump) {
            let p = dir.join(format!("fields_{k:06}.vtk"));
            write_vtk(state, &g, &p)?;
            snapshots.push(p);
        }
        Ok(())
    };

    let mut state = initial_state(&g, spec.phi0.sample(&g), &spec, &step_cfg)
        .map_err(|source| Error::Step { step: 0, source })?;
    snapshot(0, &state)?;
    let mut last = None;
    for k in 1..=cfg.stepping.n_steps {
        let (next, diag) = match step(&g, &state, &spec, &step_cfg) {
            Ok(r) => r,
            Err(source) => {
                csv.flush().map_err(io(&csv_path))?;
                return Err(Error::Step { step: k, source });
            }
        };
        if k % cfg.output.diagnostics_stride == 0 {
            writeln!(csv, "{}", diagnostics_row(k, &diag)).map_err(io(&csv_path))?;
        }
        state = next;
        snapshot(k, &state)?;
        last = Some(diag);
    }
    csv.flush().map_err(io(&csv_path))?;
    Ok(RunSummary {
        steps: cfg.stepping.n_steps,
        final_time: state.t,
        last,
        diagnostics_path: csv_path,
        snapshots,
    })
}
