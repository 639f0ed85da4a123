//! Run configuration: a TOML file of flat sections plus command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use nswz_core::dynamics::{Mode, SolverConfig};
use nswz_core::experiments::{InitialCondition, LifespanParams, RoughParams, ScalingParams, Setup, WongZakaiParams};
use nswz_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Number of noise samples.
    pub samples: usize,
    /// Output directory.
    pub out: PathBuf,
    /// Integrator used by `simulate`.
    pub mode: Mode,
    /// Every `state_stride`-th saved state is written by `simulate`.
    pub state_stride: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            samples: 32,
            out: PathBuf::from("run"),
            mode: Mode::WongZakai,
            state_stride: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub run: RunSection,
    pub initial: InitialCondition,
    pub wz: WongZakaiParams,
    pub scaling: ScalingParams,
    pub lifespan: LifespanParams,
    pub rough: RoughParams,
}

/// Overrides; every flag wins over the file.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Truncation radius.
    #[arg(long = "M", global = true)]
    pub m: Option<usize>,
    /// Noise shell.
    #[arg(long = "N", global = true)]
    pub shell: Option<usize>,
    /// Wong-Zakai partition size.
    #[arg(long = "n", global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub nu: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Horizon.
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Radius of the ball of initial conditions.
    #[arg(long = "K", global = true)]
    pub ball: Option<f64>,
    /// Cut-off level.
    #[arg(long = "R", global = true)]
    pub cutoff: Option<f64>,
}

const SECTIONS: [&str; 7] = ["solver", "run", "initial", "wz", "scaling", "lifespan", "rough"];
const INITIAL_KEYS: [&str; 3] = ["kind", "slope", "path"];

fn section_keys(section: &str) -> Vec<String> {
    if section == "initial" {
        return INITIAL_KEYS.iter().map(|s| s.to_string()).collect();
    }
    let defaults = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    defaults[section]
        .as_object()
        .map(|o| o.keys().cloned().collect())
        .unwrap_or_default()
}

fn check_keys(table: &toml::Table) -> Result<()> {
    for (name, value) in table {
        if !SECTIONS.contains(&name.as_str()) {
            return Err(Error::UnknownKey {
                key: name.clone(),
                valid: SECTIONS.join(", "),
            });
        }
        let Some(inner) = value.as_table() else {
            return Err(Error::Format(format!("`{name}` must be a section")));
        };
        let valid = section_keys(name);
        for key in inner.keys() {
            if !valid.contains(key) {
                return Err(Error::UnknownKey {
                    key: format!("{name}.{key}"),
                    valid: valid.iter().map(|k| format!("{name}.{k}")).collect::<Vec<_>>().join(", "),
                });
            }
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Format(e.to_string()))?;
        check_keys(&table)?;
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Format(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let s = &mut self.solver;
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag {
                    $field = v;
                }
            };
        }
        set!(o.seed, s.seed);
        set!(o.m, s.m);
        set!(o.shell, s.shell);
        set!(o.n, s.n);
        set!(o.nu, s.nu);
        set!(o.gamma, s.gamma);
        set!(o.delta, s.delta);
        set!(o.alpha, s.alpha);
        set!(o.horizon, s.horizon);
        set!(o.dt, s.dt);
        set!(o.ball, s.ball);
        if let Some(r) = o.cutoff {
            s.cutoff = Some(r);
            self.scaling.cutoff = Some(r);
        }
        if let Some(n) = o.samples {
            self.run.samples = n;
            self.lifespan.omega_samples = n;
        }
        set!(o.out.clone(), self.run.out);
    }

    /// Reads the file named by `--config` (defaults when absent), applies
    /// the flags and validates the result.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut cfg = match &o.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        cfg.apply(o);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.run.samples == 0 {
            return Err(Error::Constraint("samples must be at least 1".into()));
        }
        if self.run.state_stride == 0 {
            return Err(Error::Constraint("state_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn setup(&self) -> Setup {
        Setup {
            solver: self.solver.clone(),
            initial: self.initial.clone(),
            samples: self.run.samples,
            seed: self.solver.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_are_read() {
        let cfg = RunConfig::from_toml(
            "[solver]\nnu = 2.5\ncutoff = 3.0\n[initial]\nkind = \"taylor_green\"\n[wz]\nn_list = [8, 16]\n",
        )
        .unwrap();
        assert_eq!(cfg.solver.nu, 2.5);
        assert_eq!(cfg.solver.cutoff, Some(3.0));
        assert_eq!(cfg.initial, InitialCondition::TaylorGreen);
        assert_eq!(cfg.wz.n_list, vec![8, 16]);
        assert_eq!(cfg.wz.n_ref, WongZakaiParams::default().n_ref);
    }

    #[test]
    fn random_slope_defaults() {
        let cfg = RunConfig::from_toml("[initial]\nkind = \"random\"\n").unwrap();
        assert_eq!(cfg.initial, InitialCondition::default());
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = RunConfig::from_toml("[solver]\nviscosty = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("solver.viscosty"), "{err}");
        assert!(err.contains("solver.viscosity") && err.contains("solver.nu"), "{err}");
        let err = RunConfig::from_toml("[extra]\na = 1\n").unwrap_err().to_string();
        assert!(err.contains("solver, run, initial"), "{err}");
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[solver]\nnu = 2.0\nm = 6\n").unwrap();
        let o = Overrides {
            config: Some(path),
            nu: Some(7.0),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        assert_eq!(cfg.solver.nu, 7.0);
        assert_eq!(cfg.solver.m, 6);
    }

    #[test]
    fn shell_constraint() {
        let o = Overrides {
            m: Some(4),
            shell: Some(4),
            ..Default::default()
        };
        let err = RunConfig::resolve(&o).unwrap_err().to_string();
        assert!(err.contains("M must be >= 2N"), "{err}");
    }
}
