//! Command-line front end: configuration, experiment dispatch and output files.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use nswz_core::dynamics::{lifespan, Driver, Mode, NoiseModel, Solver};
use nswz_core::experiments::{
    derive_seed, lifespan_measure, rough_diagnostics, scaling_limit, wong_zakai_convergence, ExperimentReport, Record,
    Statistic, Stream,
};
use nswz_core::noise::{BrownianEnsemble, PiecewiseLinearPaths};
use nswz_core::spectral::{write_state, StateTag};
use nswz_core::validation::run_suite;
use nswz_core::{Error, Result};
use serde::Serialize;

pub use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "nswz", version, about = "Stochastic 3D vorticity solver with transport noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Integrate one trajectory.
    Simulate,
    /// Distances of Wong-Zakai solutions to the finest-partition reference.
    WzConvergence,
    /// Cut-off stochastic runs against the enhanced-viscosity limit.
    ScalingLimit,
    /// Survival fractions of initial data under fixed transport fields.
    Lifespan,
    /// Driver seminorms, drift ratios and expansion remainders.
    RoughDiagnostics,
    /// Run the invariant suite.
    Validate,
}

/// Outcome of a successful command.
pub struct Outcome {
    pub passed: bool,
    pub out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_report(report: &ExperimentReport, out: &Path) -> Result<()> {
    let mut f = create(&out.join("report.json"))?;
    report.write_json(&mut f)?;
    writeln!(f)?;
    f.flush()?;
    let mut f = create(&out.join("samples").join("records.csv"))?;
    report.write_csv(&mut f)?;
    f.flush()?;
    Ok(())
}

fn simulate_command(cfg: &RunConfig) -> Result<ExperimentReport> {
    let setup = cfg.setup();
    let solver_cfg = &setup.solver;
    let mode = cfg.run.mode;
    let noise_seed = derive_seed(setup.seed, Stream::Noise, 0);
    let initial_seed = derive_seed(setup.seed, Stream::Initial, 0);
    let xi0 = setup.initial.draw(solver_cfg.m, solver_cfg.ball, initial_seed)?;
    let mut solver = Solver::new(solver_cfg)?;
    let traj = match mode {
        Mode::Deterministic => solver.simulate(mode, Driver::None, &xi0)?,
        _ => {
            let model = NoiseModel::from_config(solver_cfg)?;
            let steps = match mode {
                Mode::WongZakai => solver_cfg.n,
                _ => (solver_cfg.horizon / solver_cfg.dt).ceil() as usize,
            };
            let level = steps.next_power_of_two().trailing_zeros();
            let ensemble = BrownianEnsemble::sample(&model.support_vectors(), solver_cfg.horizon, level, noise_seed)?;
            if mode == Mode::WongZakai {
                let paths = PiecewiseLinearPaths::from_ensemble(&ensemble, solver_cfg.n)?;
                solver.simulate(mode, Driver::PiecewiseLinear(&paths), &xi0)?
            } else {
                solver.simulate(mode, Driver::Brownian(&ensemble), &xi0)?
            }
        }
    };
    let columns = [
        "energy_bound",
        "sup_enstrophy",
        "final_enstrophy",
        "lifespan",
        "max_relative_noise_budget",
        "blowup",
    ];
    let mut report = ExperimentReport::new(
        "simulate",
        &(&setup, mode),
        setup.seed,
        &["noise_seed", "initial_seed"],
        columns.iter().map(|s| s.to_string()).collect(),
    )?;
    let tau = lifespan(&traj, 10.0 * solver_cfg.ball).unwrap_or(solver_cfg.horizon);
    report.records.push(Record {
        sample: 0,
        seeds: vec![noise_seed, initial_seed],
        values: vec![
            traj.energy_bound(),
            traj.sup_enstrophy(),
            traj.final_state().norm_h().powi(2),
            tau,
            traj.max_relative_noise_budget(),
            f64::from(u8::from(traj.blowup.is_some())),
        ],
    });
    report.summary.push(Statistic::plain("steps", traj.steps.len() as f64));

    let out = &cfg.run.out;
    let mut f = create(&out.join("samples").join("trajectory.csv"))?;
    writeln!(
        f,
        "# format={} experiment=simulate config_hash={} seed={}",
        report.format, report.config_hash, report.seed
    )?;
    traj.write_csv(&mut f)?;
    f.flush()?;
    let states = out.join("states");
    fs::create_dir_all(&states)?;
    for (i, (t, s)) in traj.times.iter().zip(&traj.states).enumerate().step_by(cfg.run.state_stride) {
        let tag = StateTag {
            config_hash: report.config_hash.clone(),
            seed: report.seed,
            time: *t,
        };
        let mut f = create(&states.join(format!("state_{i:05}.bin")))?;
        write_state(s, &tag, &mut f)?;
        f.flush()?;
    }
    Ok(report)
}

#[derive(Serialize)]
struct ValidationReport<'a> {
    format: u32,
    experiment: &'static str,
    version: &'static str,
    passed: bool,
    checks: &'a [nswz_core::validation::Check],
}

fn validate_command(out: Option<&Path>) -> Result<bool> {
    let checks = run_suite();
    for c in &checks {
        println!(
            "{} {:<28} value={:.3e} tolerance={:.1e} ({:.2}s)",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance,
            c.seconds
        );
    }
    let passed = checks.iter().all(|c| c.passed);
    if let Some(out) = out {
        let report = ValidationReport {
            format: nswz_core::experiments::FORMAT_VERSION,
            experiment: "validate",
            version: nswz_core::experiments::VERSION,
            passed,
            checks: &checks,
        };
        let mut f = create(&out.join("report.json"))?;
        serde_json::to_writer_pretty(&mut f, &report).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(f)?;
        f.flush()?;
    }
    Ok(passed)
}

/// Resolves the configuration and runs one command.
pub fn run(command: Command, overrides: &Overrides) -> Result<Outcome> {
    if command == Command::Validate && overrides.config.is_none() {
        let passed = validate_command(overrides.out.as_deref())?;
        return Ok(Outcome {
            passed,
            out: overrides.out.clone(),
        });
    }
    let cfg = RunConfig::resolve(overrides)?;
    let out = cfg.run.out.clone();
    let report = match command {
        Command::Validate => {
            let passed = validate_command(Some(&out))?;
            return Ok(Outcome { passed, out: Some(out) });
        }
        Command::Simulate => simulate_command(&cfg)?,
        Command::WzConvergence => wong_zakai_convergence(&cfg.setup(), &cfg.wz)?,
        Command::ScalingLimit => scaling_limit(&cfg.setup(), &cfg.scaling)?,
        Command::Lifespan => lifespan_measure(&cfg.setup(), &cfg.lifespan)?,
        Command::RoughDiagnostics => rough_diagnostics(&cfg.setup(), &cfg.rough)?,
    };
    write_report(&report, &out)?;
    for s in &report.summary {
        match s.interval {
            Some([lo, hi]) => println!("{} = {} [{lo}, {hi}]", s.name, s.value),
            None => println!("{} = {}", s.name, s.value),
        }
    }
    Ok(Outcome { passed: true, out: Some(out) })
}

/// Machine-readable error record.
pub fn error_record(err: &Error) -> serde_json::Value {
    let kind = match err {
        Error::UnknownKey { .. } => "unknown_key",
        Error::Constraint(_) | Error::ShellTruncated { .. } | Error::InvalidTruncation(_) => "constraint",
        Error::Configuration(_) | Error::InvalidParameter(_) => "configuration",
        Error::Format(_) => "format",
        Error::Io(_) => "io",
        _ => "computation",
    };
    serde_json::json!({ "error": { "kind": kind, "message": err.to_string() } })
}
