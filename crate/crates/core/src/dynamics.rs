//! Time integration of the vorticity equation
//!
//! `d xi + f_R(||xi||_{-delta}) L_u xi dt = c Delta xi dt + Pi(v . grad xi)`
//!
//! where `v` is the transport field built from the noise coefficients and a
//! driver. The Laplacian is integrated exactly through an integrating factor
//! and the remaining terms with Heun's method (Lawson RK2). With a
//! piecewise-linear driver the transport field is constant between partition
//! nodes and the problem is a classical PDE; the Stratonovich scheme is the
//! same step applied to Brownian increments on a fine dyadic grid.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{sign_class, Lattice, NoiseCoefficients, SignClass};
use crate::noise::{BrownianEnsemble, PiecewiseLinearPaths, RealIndex};
use crate::spectral::{biot_savart, project_in_place, write_field, SpectralCoeffs, SpectralField, SpectralOps};

/// `f_R`: one on `[0, R]`, zero on `[R + 1, inf)`, cosine ramp in between.
pub fn cutoff_factor(x: f64, r: f64) -> f64 {
    if x <= r {
        1.0
    } else if x >= r + 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * (x - r)).cos())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Deterministic,
    WongZakai,
    Stratonovich,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Truncation radius `M`.
    pub m: usize,
    /// Largest time step.
    pub dt: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Noise strength; `C_nu = sqrt(3 nu / 2)`.
    pub nu: f64,
    /// Shell index `N`.
    pub shell: usize,
    /// Wong-Zakai index: the driver partition has `n` intervals.
    pub n: usize,
    /// Cut-off level `R`; no cut-off when absent.
    pub cutoff: Option<f64>,
    /// Radius `K` of the ball of initial conditions.
    pub ball: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Coefficient of the Laplacian.
    pub viscosity: f64,
    /// Include the Lie derivative term.
    pub nonlinear: bool,
    /// Include the transport noise.
    pub noise: bool,
    /// Advective Courant number bounding substeps; none disables the bound.
    pub cfl: Option<f64>,
    /// Number of uniform intervals between saved states.
    pub saves: usize,
    /// Physical grid size; the default is the smallest power of two `>= 3M`.
    pub grid: Option<usize>,
    /// Accumulate the drift integral at saved times.
    pub record_drift: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            m: 8,
            dt: 0.25 / 128.0,
            horizon: 0.25,
            nu: 10.0,
            shell: 2,
            n: 32,
            cutoff: None,
            ball: 1.0,
            gamma: 1.0,
            delta: 0.5,
            alpha: 0.4,
            seed: 0,
            viscosity: 1.0,
            nonlinear: true,
            noise: true,
            cfl: Some(4.0),
            saves: 64,
            grid: None,
            record_drift: false,
        }
    }
}

impl SolverConfig {
    pub fn c_nu(&self) -> f64 {
        (1.5 * self.nu).sqrt()
    }

    /// Mesh of the driver partition, `h^n = T / n`.
    pub fn mesh(&self) -> f64 {
        self.horizon / self.n as f64
    }

    /// Viscosity `1 + 3 nu / 5` of the scaling-limit equation.
    pub fn enhanced_viscosity(&self) -> f64 {
        1.0 + 0.6 * self.nu
    }

    /// The deterministic limit problem: no noise, enhanced viscosity.
    pub fn limit_equation(&self) -> Self {
        Self {
            noise: false,
            viscosity: self.enhanced_viscosity(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Constraint(msg));
        if self.m == 0 {
            return Err(Error::InvalidTruncation(0));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.viscosity > 0.0) {
            return bad(format!("viscosity must be positive, got {}", self.viscosity));
        }
        if !(self.nu > 0.0) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.alpha > 1.0 / 3.0 && self.alpha <= 0.5) {
            return bad(format!("alpha must lie in (1/3, 1/2], got {}", self.alpha));
        }
        if !(self.ball > 0.0) {
            return bad(format!("K must be positive, got {}", self.ball));
        }
        if let Some(r) = self.cutoff {
            if !(r > 0.0) {
                return bad(format!("R must be positive, got {r}"));
            }
        }
        if let Some(c) = self.cfl {
            if !(c > 0.0) {
                return bad(format!("cfl must be positive, got {c}"));
            }
        }
        if self.saves == 0 {
            return bad("saves must be at least 1".into());
        }
        if self.noise {
            if self.shell == 0 {
                return bad("N must be at least 1".into());
            }
            if self.m < 2 * self.shell {
                return bad(format!("M must be >= 2N (M = {}, N = {})", self.m, self.shell));
            }
            if self.n == 0 {
                return bad("n must be at least 1".into());
            }
            if self.dt > self.mesh() / 4.0 * (1.0 + 1e-12) {
                return bad(format!(
                    "dt must be <= h^n/4 = {} (dt = {})",
                    self.mesh() / 4.0,
                    self.dt
                ));
            }
        }
        Ok(())
    }
}

/// Transport noise `v = (C_nu / ||theta||) sum theta_k sigma_{k,alpha} dW^{k,alpha}`
/// on one truncated lattice.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    lattice: Lattice,
    theta: NoiseCoefficients,
    c_nu: f64,
}

impl NoiseModel {
    pub fn new(m: usize, shell: usize, gamma: f64, nu: f64) -> Result<Self> {
        let lattice = Lattice::new(m)?;
        let theta = NoiseCoefficients::new(shell, gamma, &lattice)?;
        Ok(Self {
            lattice,
            theta,
            c_nu: (1.5 * nu).sqrt(),
        })
    }

    pub fn from_config(cfg: &SolverConfig) -> Result<Self> {
        if cfg.noise {
            Self::new(cfg.m, cfg.shell, cfg.gamma, cfg.nu)
        } else {
            let lattice = Lattice::new(cfg.m)?;
            Ok(Self {
                theta: NoiseCoefficients::zero(&lattice),
                lattice,
                c_nu: cfg.c_nu(),
            })
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn theta(&self) -> &NoiseCoefficients {
        &self.theta
    }

    pub fn c_nu(&self) -> f64 {
        self.c_nu
    }

    /// `C_nu / ||theta||`, zero for switched-off noise.
    pub fn amplitude(&self) -> f64 {
        if self.theta.is_zero() {
            0.0
        } else {
            self.c_nu / self.theta.l2_norm()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.theta.is_zero()
    }

    /// Wave vectors carrying noise, in enumeration order.
    pub fn support_vectors(&self) -> Vec<[i32; 3]> {
        self.theta
            .support()
            .iter()
            .map(|&i| self.lattice.modes()[i].k)
            .collect()
    }

    /// Real noise indices `(k, alpha)` in sorted order.
    pub fn real_indices(&self) -> Vec<RealIndex> {
        let mut v: Vec<RealIndex> = self
            .support_vectors()
            .into_iter()
            .flat_map(|k| [RealIndex::new(k, 1), RealIndex::new(k, 2)])
            .collect();
        v.sort();
        v
    }

    /// `v` for real driver values `b(k, alpha)` (increments or slopes); the
    /// complex value is `b(k) + i b(-k)` on plus modes and its conjugate pair
    /// on minus modes.
    pub fn velocity<F: Fn(RealIndex) -> Option<f64>>(&self, b: F) -> Result<SpectralField> {
        let mut c = SpectralCoeffs::zeros(self.lattice.truncation());
        let amp = self.amplitude();
        for &i in self.theta.support() {
            let mode = &self.lattice.modes()[i];
            let k = mode.k;
            let nk = [-k[0], -k[1], -k[2]];
            let mut v = [Complex64::new(0.0, 0.0); 3];
            for alpha in 1..=2u8 {
                let own = b(RealIndex::new(k, alpha)).ok_or(Error::IncompleteEnsemble(k))?;
                let other = b(RealIndex::new(nk, alpha)).ok_or(Error::IncompleteEnsemble(nk))?;
                let w = match sign_class(k) {
                    SignClass::Plus => Complex64::new(own, other),
                    SignClass::Minus => Complex64::new(other, -own),
                };
                let a = mode.frame[alpha as usize - 1];
                for d in 0..3 {
                    v[d] += w * (a[d] * amp * self.theta.value(i));
                }
            }
            c.set(k, v);
        }
        Ok(SpectralField::from_coeffs_unchecked(c))
    }

    /// `v` on partition interval `seg` of a piecewise-linear driver.
    pub fn velocity_on_segment(&self, paths: &PiecewiseLinearPaths, seg: usize) -> Result<SpectralField> {
        self.velocity(|ix| paths.position(ix).map(|r| paths.slope(r, seg)))
    }
}

/// Diagnostics at the start of one step (or at the final time, with `dt = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    /// `||xi||_H^2`.
    pub enstrophy: f64,
    /// `||grad xi||_H^2`.
    pub dissipation: f64,
    /// `||xi||_{H^{-delta}}`.
    pub neg_norm: f64,
    pub cutoff: f64,
    /// `<Pi(v . grad xi), xi>`, zero up to rounding.
    pub noise_budget: f64,
    /// `<-f_R L_u xi, xi>`.
    pub lie_budget: f64,
}

/// How the transport field is driven.
#[derive(Clone, Copy, Debug)]
pub enum Driver<'a> {
    None,
    PiecewiseLinear(&'a PiecewiseLinearPaths),
    Brownian(&'a BrownianEnsemble),
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub mode: Mode,
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    /// `mu_{0,t}` at saved times when drift recording is on.
    pub drift: Vec<SpectralCoeffs>,
    pub steps: Vec<StepRecord>,
    /// Time at which non-finite values appeared.
    pub blowup: Option<f64>,
}

impl Trajectory {
    /// `sup_t ||xi||_H^2 + int_0^T ||grad xi||_H^2 dt` (trapezoid rule on the step grid).
    pub fn energy_bound(&self) -> f64 {
        let sup = self.steps.iter().map(|s| s.enstrophy).fold(0.0, f64::max);
        let integral: f64 = self
            .steps
            .windows(2)
            .map(|w| 0.5 * w[0].dt * (w[0].dissipation + w[1].dissipation))
            .sum();
        if self.blowup.is_some() {
            f64::INFINITY
        } else {
            sup + integral
        }
    }

    pub fn sup_enstrophy(&self) -> f64 {
        self.steps.iter().map(|s| s.enstrophy).fold(0.0, f64::max)
    }

    /// Largest `|noise_budget| / ||xi||_H^2` over all steps.
    pub fn max_relative_noise_budget(&self) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.enstrophy > 0.0)
            .map(|s| s.noise_budget.abs() / s.enstrophy)
            .fold(0.0, f64::max)
    }

    /// `sup_t ||a(t) - b(t)||_{H^{-delta}}` over common saved times.
    pub fn sup_distance(&self, other: &Trajectory, delta: f64) -> Result<f64> {
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::GridIncompatible("trajectories have different save grids".into()));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.coeffs().sub(b.coeffs()).sobolev_norm(-delta))
            .fold(0.0, f64::max))
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("trajectory has at least one state")
    }

    pub const CSV_HEADER: &'static str = "time,dt,enstrophy,dissipation,neg_norm,cutoff,noise_budget,lie_budget";

    /// Per-step diagnostics as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for s in &self.steps {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.t, s.dt, s.enstrophy, s.dissipation, s.neg_norm, s.cutoff, s.noise_budget, s.lie_budget
            )?;
        }
        Ok(())
    }

    /// Writes every `stride`-th saved state to `dir/state_XXXXX.bin`.
    pub fn write_states(&self, dir: &Path, stride: usize) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (i, s) in self.states.iter().enumerate().step_by(stride.max(1)) {
            let p = dir.join(format!("state_{i:05}.bin"));
            let f = std::io::BufWriter::new(std::fs::File::create(&p)?);
            write_field(s, f)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// First recorded time with `||xi||_H > threshold`, or the blow-up time;
/// `None` stands for no exit before the horizon.
pub fn lifespan(traj: &Trajectory, threshold: f64) -> Option<f64> {
    let exit = traj
        .steps
        .iter()
        .find(|s| !(s.enstrophy.sqrt() <= threshold))
        .map(|s| s.t);
    match (exit, traj.blowup) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

struct Evaluation {
    /// `-f_R L_u xi + Pi(v . grad xi)`.
    explicit: SpectralCoeffs,
    record: StepRecord,
    /// `-f_R L_u xi`, kept for the drift integral.
    lie: Option<SpectralCoeffs>,
}

/// Reusable integrator state for one configuration.
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: SolverConfig,
    ops: SpectralOps,
    noise: NoiseModel,
    /// `4 pi^2 |k|^2` per storage slot.
    lambda: Vec<f64>,
    /// `(1 + 4 pi^2 |k|^2)^{-delta}` per storage slot.
    neg_weight: Vec<f64>,
    factor_dt: f64,
    factor: Vec<f64>,
    half_factor: Vec<f64>,
    transport_set: bool,
    transport_sup: f64,
}

impl Solver {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let ops = match cfg.grid {
            Some(n) => SpectralOps::with_grid(cfg.m, n)?,
            None => SpectralOps::new(cfg.m),
        };
        let probe = SpectralCoeffs::zeros(cfg.m);
        let lambda: Vec<f64> = (0..probe.as_slice().len())
            .map(|s| {
                let k = probe.wavevector(s);
                4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
            })
            .collect();
        let neg_weight = lambda.iter().map(|l| (1.0 + l).powf(-cfg.delta)).collect();
        Ok(Self {
            noise: NoiseModel::from_config(cfg)?,
            cfg: cfg.clone(),
            ops,
            lambda,
            neg_weight,
            factor_dt: f64::NAN,
            factor: Vec::new(),
            half_factor: Vec::new(),
            transport_set: false,
            transport_sup: 0.0,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn noise_model(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn ops(&mut self) -> &mut SpectralOps {
        &mut self.ops
    }

    /// `||xi||_{H^{-delta}}` with the configured `delta`.
    pub fn neg_norm(&self, xi: &SpectralCoeffs) -> f64 {
        xi.as_slice()
            .iter()
            .zip(&self.neg_weight)
            .map(|(v, w)| w * (v[0].norm_sqr() + v[1].norm_sqr() + v[2].norm_sqr()))
            .sum::<f64>()
            .sqrt()
    }

    /// Fixes the transport field until the next call; `None` switches it off.
    pub fn set_transport(&mut self, v: Option<&SpectralField>) -> Result<()> {
        match v {
            Some(v) if !self.noise.is_zero() => {
                self.ops.set_transport_field(v)?;
                self.transport_sup = self.ops.cached_transport_sup().unwrap_or(0.0);
                self.transport_set = true;
            }
            _ => {
                self.transport_set = false;
                self.transport_sup = 0.0;
            }
        }
        Ok(())
    }

    fn evaluate(&mut self, xi: &SpectralField, t: f64) -> Result<Evaluation> {
        let c = xi.coeffs();
        let neg_norm = self.neg_norm(c);
        let f = self.cfg.cutoff.map_or(1.0, |r| cutoff_factor(neg_norm, r));
        let nonlinear = self.cfg.nonlinear && f > 0.0;
        let (lie, noise) = match (nonlinear, self.transport_set) {
            (true, true) => {
                let u = biot_savart(xi);
                let (l, n) = self.ops.lie_and_cached_transport(&u, xi)?;
                (Some(l), Some(n))
            }
            (true, false) => {
                let u = biot_savart(xi);
                (Some(self.ops.lie_derivative(&u, xi)?), None)
            }
            (false, true) => (None, Some(self.ops.cached_transport(c)?)),
            (false, false) => (None, None),
        };
        let m = self.cfg.m;
        let lie = lie.map(|l| l.scaled(-f));
        let mut explicit = SpectralCoeffs::zeros(m);
        let mut record = StepRecord {
            t,
            dt: 0.0,
            enstrophy: c.sobolev_norm(0.0).powi(2),
            dissipation: xi.gradient_norm_sq(),
            neg_norm,
            cutoff: f,
            noise_budget: 0.0,
            lie_budget: 0.0,
        };
        if let Some(l) = &lie {
            explicit.axpy(1.0, l);
            record.lie_budget = l.inner(c).re;
        }
        if let Some(n) = &noise {
            explicit.axpy(1.0, n);
            record.noise_budget = n.inner(c).re;
        }
        Ok(Evaluation { explicit, record, lie })
    }

    fn set_factors(&mut self, dt: f64) {
        if dt == self.factor_dt {
            return;
        }
        let c = self.cfg.viscosity;
        self.factor = self.lambda.iter().map(|l| (-c * l * dt).exp()).collect();
        self.half_factor = self.lambda.iter().map(|l| (-c * l * dt * 0.5).exp()).collect();
        self.factor_dt = dt;
    }

    /// One integrating-factor Heun step with the current transport field.
    /// Returns the new state and the evaluation at the old one.
    fn heun(&mut self, xi: &SpectralField, t: f64, dt: f64) -> Result<(SpectralField, Evaluation)> {
        self.set_factors(dt);
        let e1 = self.evaluate(xi, t)?;
        let x = xi.coeffs();
        let mut pred = SpectralCoeffs::zeros(self.cfg.m);
        let mut base = SpectralCoeffs::zeros(self.cfg.m);
        for s in 0..x.as_slice().len() {
            let (xv, k1) = (x.as_slice()[s], e1.explicit.as_slice()[s]);
            let e = self.factor[s];
            for d in 0..3 {
                pred.as_mut_slice()[s][d] = (xv[d] + k1[d] * dt) * e;
                base.as_mut_slice()[s][d] = (xv[d] + k1[d] * (0.5 * dt)) * e;
            }
        }
        let pred = SpectralField::from_coeffs_unchecked(pred);
        let e2 = self.evaluate(&pred, t + dt)?;
        base.axpy(0.5 * dt, &e2.explicit);
        project_in_place(&mut base);
        base.symmetrize();
        Ok((SpectralField::from_coeffs_unchecked(base), e1))
    }

    /// Advances `xi` by `dt` with the transport field currently set.
    pub fn step(&mut self, xi: &SpectralField, t: f64, dt: f64) -> Result<SpectralField> {
        Ok(self.heun(xi, t, dt)?.0)
    }

    /// Full right-hand side `c Delta xi - f_R L_u xi + Pi(v . grad xi)` with
    /// the transport field currently set.
    pub fn rhs(&mut self, xi: &SpectralField) -> Result<SpectralCoeffs> {
        let mut out = self.evaluate(xi, 0.0)?.explicit;
        self.add_laplacian(xi.coeffs(), &mut out);
        Ok(out)
    }

    /// Right-hand side at time `t` of the Wong-Zakai equation driven by `paths`.
    pub fn rhs_wong_zakai(&mut self, xi: &SpectralField, t: f64, paths: &PiecewiseLinearPaths) -> Result<SpectralCoeffs> {
        let seg = paths.segment_of(t)?;
        let v = self.noise.velocity_on_segment(paths, seg)?;
        self.set_transport(Some(&v))?;
        self.rhs(xi)
    }

    fn add_laplacian(&self, x: &SpectralCoeffs, out: &mut SpectralCoeffs) {
        let c = self.cfg.viscosity;
        for (s, v) in x.as_slice().iter().enumerate() {
            let l = -c * self.lambda[s];
            for d in 0..3 {
                out.as_mut_slice()[s][d] += v[d] * l;
            }
        }
    }

    /// Number of equal substeps for an interval of length `len`.
    fn substeps(&mut self, xi: &SpectralField, len: f64) -> usize {
        let mut dt = self.cfg.dt;
        if let Some(cfl) = self.cfg.cfl {
            let u_sup = if self.cfg.nonlinear {
                self.ops.sup_norm(biot_savart(xi).coeffs())
            } else {
                0.0
            };
            let speed = u_sup + self.transport_sup;
            let kmax = 2.0 * PI * (3.0f64).sqrt() * self.cfg.m as f64;
            if speed > 0.0 {
                dt = dt.min(cfl / (kmax * speed));
            }
        }
        ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    /// Integrates from `xi0` over `[0, T]`.
    pub fn simulate(&mut self, mode: Mode, driver: Driver<'_>, xi0: &SpectralField) -> Result<Trajectory> {
        if xi0.truncation() != self.cfg.m {
            return Err(Error::Configuration(format!(
                "initial field has truncation {}, solver uses {}",
                xi0.truncation(),
                self.cfg.m
            )));
        }
        let horizon = self.cfg.horizon;
        let refined;
        let paths: Option<&PiecewiseLinearPaths> = match (mode, driver) {
            (Mode::Deterministic, _) => None,
            (_, _) if self.noise.is_zero() => None,
            (Mode::WongZakai, Driver::PiecewiseLinear(p)) => Some(p),
            (Mode::Stratonovich, Driver::Brownian(e)) => {
                let want = (horizon / self.cfg.dt).log2().ceil().max(0.0) as u32;
                let e = if e.level() < want { e.refine(want)? } else { e.clone() };
                refined = PiecewiseLinearPaths::from_ensemble(&e, e.resolution())?;
                Some(&refined)
            }
            (Mode::WongZakai, _) => {
                return Err(Error::Configuration("Wong-Zakai mode needs a piecewise-linear driver".into()))
            }
            (Mode::Stratonovich, _) => {
                return Err(Error::Configuration("Stratonovich mode needs a Brownian ensemble".into()))
            }
        };
        if let Some(p) = paths {
            if (p.times()[0]).abs() > 1e-12 || (p.times().last().unwrap() - horizon).abs() > 1e-9 * horizon {
                return Err(Error::GridIncompatible(format!(
                    "driver covers [{}, {}], horizon is {horizon}",
                    p.times()[0],
                    p.times().last().unwrap()
                )));
            }
        }

        // Breakpoints: partition nodes and save times.
        let saves = self.cfg.saves;
        let save_times: Vec<f64> = (0..=saves).map(|i| horizon * i as f64 / saves as f64).collect();
        let mut nodes: Vec<(f64, bool)> = save_times.iter().map(|&t| (t, true)).collect();
        if let Some(p) = paths {
            nodes.extend(p.times().iter().map(|&t| (t, false)));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let tol = 1e-12 * horizon;
        let mut merged: Vec<(f64, bool)> = Vec::with_capacity(nodes.len());
        for (t, save) in nodes {
            match merged.last_mut() {
                Some(last) if (t - last.0).abs() <= tol => last.1 |= save,
                _ => merged.push((t, save)),
            }
        }

        let mut traj = Trajectory {
            mode,
            times: vec![0.0],
            states: vec![xi0.clone()],
            drift: Vec::new(),
            steps: Vec::new(),
            blowup: None,
        };
        let record_drift = self.cfg.record_drift;
        let mut mu = SpectralCoeffs::zeros(self.cfg.m);
        if record_drift {
            traj.drift.push(mu.clone());
        }
        let mut xi = xi0.clone();
        let mut prev_drift: Option<SpectralCoeffs> = None;
        let mut seg = usize::MAX;
        if paths.is_none() {
            self.set_transport(None)?;
        }

        'outer: for w in merged.windows(2) {
            let (a, b) = (w[0].0, w[1].0);
            if let Some(p) = paths {
                let s = p.segment_of(0.5 * (a + b))?;
                if s != seg {
                    seg = s;
                    let v = self.noise.velocity_on_segment(p, s)?;
                    self.set_transport(Some(&v))?;
                }
            }
            let count = self.substeps(&xi, b - a);
            let h = (b - a) / count as f64;
            for j in 0..count {
                let t = a + h * j as f64;
                let (next, eval) = self.heun(&xi, t, h)?;
                let mut rec = eval.record;
                rec.dt = h;
                traj.steps.push(rec);
                if record_drift {
                    let d0 = match prev_drift.take() {
                        Some(d) => d,
                        None => self.drift_term(&xi, eval.lie.as_ref()),
                    };
                    // The next step's evaluation supplies the right end.
                    let e_next = self.drift_only(&next)?;
                    let d1 = e_next;
                    mu.axpy(0.5 * h, &d0);
                    mu.axpy(0.5 * h, &d1);
                    prev_drift = Some(d1);
                }
                xi = next;
                if !xi.coeffs().sobolev_norm(0.0).is_finite() {
                    traj.blowup = Some(t + h);
                    break 'outer;
                }
            }
            if w[1].1 {
                traj.times.push(b);
                traj.states.push(xi.clone());
                if record_drift {
                    traj.drift.push(mu.clone());
                }
            }
        }
        if traj.blowup.is_none() {
            let mut last = self.evaluate(&xi, horizon)?.record;
            last.dt = 0.0;
            traj.steps.push(last);
        }
        Ok(traj)
    }

    /// `c Delta xi + lie` where `lie = -f_R L_u xi` is supplied or recomputed.
    fn drift_term(&mut self, xi: &SpectralField, lie: Option<&SpectralCoeffs>) -> SpectralCoeffs {
        let mut out = match lie {
            Some(l) => l.clone(),
            None => SpectralCoeffs::zeros(self.cfg.m),
        };
        self.add_laplacian(xi.coeffs(), &mut out);
        out
    }

    /// The drift `c Delta xi - f_R L_u xi`, without the transport term.
    pub fn drift_only(&mut self, xi: &SpectralField) -> Result<SpectralCoeffs> {
        let c = xi.coeffs();
        let f = self.cfg.cutoff.map_or(1.0, |r| cutoff_factor(self.neg_norm(c), r));
        let mut out = if self.cfg.nonlinear && f > 0.0 {
            let u = biot_savart(xi);
            self.ops.lie_derivative(&u, xi)?.scaled(-f)
        } else {
            SpectralCoeffs::zeros(self.cfg.m)
        };
        self.add_laplacian(c, &mut out);
        Ok(out)
    }
}

/// One-shot convenience wrapper around [`Solver::simulate`].
pub fn simulate(cfg: &SolverConfig, mode: Mode, driver: Driver<'_>, xi0: &SpectralField) -> Result<Trajectory> {
    Solver::new(cfg)?.simulate(mode, driver, xi0)
}

/// `C(K)`: the largest H-norm along the enhanced-viscosity deterministic run.
pub fn limit_norm_bound(cfg: &SolverConfig, xi0: &SpectralField) -> Result<f64> {
    let traj = simulate(&cfg.limit_equation(), Mode::Deterministic, Driver::None, xi0)?;
    Ok(traj.sup_enstrophy().sqrt())
}
