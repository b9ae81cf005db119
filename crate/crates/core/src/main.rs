//! `chb` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure or failed
//! experiment check, 4 I/O error.
//!
//! Sweep CSV files written by the harness subcommands have the columns
//! `<parameter>,error,<extra...>`:
//!
//! | file | columns |
//! |------|---------|
//! | `mms_nutrient.csv` | `h,error,n` |
//! | `mms_darcy.csv` | `h,error,n,div_residual,gamma_norm` |
//! | `mms_brinkman.csv` | `h,error,n,pressure_error,div_residual,gamma_norm` |
//! | `limit_k.csv` | `K,error,interior_distance,scaled_gap` |
//! | `limit_visc.csv` | `scale,error,pressure_gap,shear_energy,div_residual,gamma_norm` |
//! | `limit_visc_trajectory.csv` | `scale,error,phi_gap,shear_energy` |
//! | `contdep.csv` | `delta,error,sup_h1_gap` |
//! | `contdep_sigma_inf.csv` | `delta,error,sup_phi_h1_gap` |

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chb_core::config::{parse_config, SimConfig};
use chb_core::error::{ConfigError, Error, IoError};
use chb_core::grid::Grid2D;
use chb_core::harness::{self, MmsProblem, SweepResult};
use chb_core::model::{validate, ModelSpec, DEFAULT_SAMPLES, DEFAULT_SAMPLE_RANGE};
use chb_core::run::run_simulation;
use chb_core::stepper::{FlowMode, StepConfig};

#[derive(Parser)]
#[command(name = "chb", version, about = "Diffuse-interface tumour growth with Brinkman flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// JSON configuration file (required for `run`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flow model (overrides the config).
    #[arg(long, global = true)]
    flow_mode: Option<FlowMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the time loop described by the config.
    Run,
    /// Audit the model assumptions only.
    Validate,
    /// Manufactured-solution convergence sweep.
    Mms {
        /// nutrient, darcy, brinkman or all.
        #[arg(long, default_value = "all")]
        problem: String,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Robin-to-Dirichlet limit at frozen phase field.
    LimitK {
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        k: Vec<f64>,
        /// Grid size when no config is given.
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Brinkman-to-Darcy limit at frozen fields.
    LimitVisc {
        #[arg(long, value_delimiter = ',', default_value = "1,0.1,0.01,0.001")]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// Compare coupled trajectories instead of frozen-field solves.
        #[arg(long)]
        trajectory: bool,
        /// Steps of each trajectory run.
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Continuous dependence on the initial phase field and ambient nutrient.
    Contdep {
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.001,0.0001")]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        n: usize,
    },
}

fn load(path: &Path) -> Result<SimConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_config(&text)?)
}

impl Global {
    fn config(&self) -> Result<Option<SimConfig>, Error> {
        let Some(path) = &self.config else {
            return Ok(None);
        };
        let mut cfg = load(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.flow_mode {
            cfg.stepping.flow_mode = mode.into();
        }
        if let Some(out) = &self.out {
            cfg.output.directory = out.to_string_lossy().into_owned();
        }
        Ok(Some(cfg))
    }

    /// `--out`, or `out` in the working directory.
    fn out_dir(&self) -> Result<PathBuf, Error> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir).map_err(|source| IoError {
            path: dir.clone(),
            source,
        })?;
        Ok(dir)
    }

    /// Grid, model and step settings from the config, or the given defaults.
    fn setup(&self, n: usize, default_spec: ModelSpec, dt: f64) -> Result<(Grid2D, ModelSpec, StepConfig), Error> {
        match self.config()? {
            Some(c) => Ok((c.grid()?, c.model_spec(), c.step_config())),
            None => {
                let mut step = StepConfig::with_dt(dt);
                if let Some(m) = self.flow_mode {
                    step.flow_mode = m;
                }
                Ok((Grid2D::unit_square(n)?, default_spec, step))
            }
        }
    }
}

fn emit(r: &SweepResult, dir: &Path, file: &str) -> Result<(), Error> {
    print!("{r}");
    let path = dir.join(file);
    r.write_csv(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn check(ok: bool, what: &str) -> Result<(), Error> {
    if ok {
        Ok(())
    } else {
        Err(Error::Check(what.into()))
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let gl = &cli.global;
    match cli.command {
        Command::Run => {
            let cfg = gl
                .config()?
                .ok_or_else(|| ConfigError::Semantic("`run` requires --config PATH".into()))?;
            let summary = run_simulation(&cfg)?;
            println!(
                "completed {} steps to t={}; diagnostics in {}",
                summary.steps,
                summary.final_time,
                summary.diagnostics_path.display()
            );
            if let Some(d) = summary.last {
                println!("final energy {} mass {} suggested dt {}", d.energy, d.mass, d.suggested_dt);
            }
        }
        Command::Validate => {
            let spec = match gl.config()? {
                Some(c) => c.model_spec(),
                None => ModelSpec::default(),
            };
            let report = validate(&spec, DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES)?;
            print!("{report}");
            if !report.all_passed() {
                let names: Vec<String> = report.failed_assumptions().iter().map(|a| a.to_string()).collect();
                return Err(ConfigError::Semantic(format!("model violates {}", names.join(", "))).into());
            }
        }
        Command::Mms { problem, levels } => {
            let dir = gl.out_dir()?;
            let problems = if problem == "all" {
                vec![MmsProblem::Nutrient, MmsProblem::Darcy, MmsProblem::Brinkman]
            } else {
                vec![problem.parse::<MmsProblem>().map_err(ConfigError::Semantic)?]
            };
            let mut ok = true;
            for p in problems {
                let r = harness::mms_convergence(p, levels)?;
                emit(&r, &dir, &format!("mms_{p}.csv"))?;
                let need = if p == MmsProblem::Brinkman { 0.9 } else { 1.9 };
                ok &= r.order() >= need;
            }
            check(ok, "observed order below threshold")?;
        }
        Command::LimitK { k, n } => {
            let (g, spec, _) = gl.setup(n, harness::growth_spec(), 1e-4)?;
            let dir = gl.out_dir()?;
            let phi = harness::smooth_tumour(&g, &spec)?.phi;
            let r = harness::robin_limit_study(&g, &phi, &spec, &k)?;
            emit(&r, &dir, "limit_k.csv")?;
            check(r.monotonic && r.slope <= -0.45, "Robin gap not decreasing at rate K^-0.45")?;
        }
        Command::LimitVisc {
            scales,
            n,
            trajectory,
            steps,
        } => {
            let (g, spec, step) = gl.setup(n, harness::viscosity_limit_spec(), 2e-4)?;
            let dir = gl.out_dir()?;
            if trajectory {
                let phi0 = harness::smooth_tumour(&g, &spec)?.phi;
                let r = harness::viscosity_limit_trajectory_study(&g, &spec, &phi0, &scales, steps, &step)?;
                emit(&r, &dir, "limit_visc_trajectory.csv")?;
                return check(r.monotonic, "trajectory velocity gap not decreasing");
            }
            let fields = harness::smooth_frozen_fields(&g);
            let r = harness::viscosity_limit_study(&g, &fields, &spec, &scales)?;
            emit(&r, &dir, "limit_visc.csv")?;
            check(r.monotonic, "Brinkman solutions not approaching the Darcy limit")?;
        }
        Command::Contdep { deltas, steps, n } => {
            let (g, spec, step) = gl.setup(n, harness::growth_spec(), 1e-3)?;
            let dir = gl.out_dir()?;
            let phi0 = harness::smooth_tumour(&g, &spec)?.phi;
            let r = harness::continuous_dependence_study(&g, &spec, &phi0, &deltas, steps, &step)?;
            emit(&r, &dir, "contdep.csv")?;
            let s = harness::sigma_inf_dependence_study(&g, &spec, &phi0, &deltas, steps, &step)?;
            emit(&s, &dir, "contdep_sigma_inf.csv")?;
            check(r.monotonic && s.monotonic, "perturbation ratios spread by more than 10x")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
