//! Monte Carlo experiments over coupled noise samples.
//!
//! Every experiment draws, for sample `i`, a noise seed and an initial-condition
//! seed from the base seed, runs independent jobs on a rayon pool and returns
//! an [`ExperimentReport`] holding one record per job plus summaries computed
//! from those records. Brownian paths depend only on the noise seed and the
//! mode, so all `n` and all `N` of one sample see the same `W`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{lifespan, simulate, Driver, Mode, NoiseModel, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::init::{random_field, taylor_green, two_mode, DEFAULT_SLOPE};
use crate::noise::{BrownianEnsemble, PiecewiseLinearPaths};
use crate::rough::{
    driver_norm_proxy, dyadic_pairs, holder_seminorm, remainder_map, scale_profile, RoughPathLift, ScaleRatio,
    TargetSpace, TwoIndexMap,
};
use crate::spectral::{read_field, SpectralCoeffs, SpectralField};

/// Code version embedded in every report.
pub const VERSION: &str = concat!("nswz ", env!("CARGO_PKG_VERSION"));

/// Version of the report layout; readers reject other values.
pub const FORMAT_VERSION: u32 = 1;

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "NSWZ_WORKERS";

/// Multipliers of the initial `H^{-delta}` norm used as exceedance levels.
pub const EPSILON_GRID: [f64; 4] = [0.5, 0.2, 0.1, 0.05];

/// Independent seed streams derived from one base seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Noise = 1,
    Initial = 2,
    Data = 3,
}

/// Seed of job `index` in `stream`.
pub fn derive_seed(base: u64, stream: Stream, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream as u64);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

/// Source of initial vorticity fields in the ball of radius `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// Random divergence-free field with the given spectral slope, rescaled to norm `K`.
    Random {
        #[serde(default = "default_slope")]
        slope: f64,
    },
    TaylorGreen,
    TwoMode,
    /// Field stored with [`crate::spectral::write_field`]; used as is.
    File { path: PathBuf },
}

fn default_slope() -> f64 {
    DEFAULT_SLOPE
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self::Random { slope: DEFAULT_SLOPE }
    }
}

impl InitialCondition {
    pub fn draw(&self, m: usize, norm: f64, seed: u64) -> Result<SpectralField> {
        match self {
            Self::Zero => Ok(SpectralField::zeros(m)),
            Self::Random { slope } => random_field(m, *slope, norm, seed),
            Self::TaylorGreen => taylor_green(m, norm),
            Self::TwoMode => two_mode(m, norm),
            Self::File { path } => {
                let f = std::fs::File::open(path)?;
                let xi = read_field(std::io::BufReader::new(f))?;
                if xi.truncation() != m {
                    return Err(Error::Configuration(format!(
                        "{} has truncation {}, expected {m}",
                        path.display(),
                        xi.truncation()
                    )));
                }
                if xi.norm_h() > norm * (1.0 + 1e-12) {
                    return Err(Error::Constraint(format!(
                        "initial field norm {} exceeds K = {norm}",
                        xi.norm_h()
                    )));
                }
                Ok(xi)
            }
        }
    }
}

/// Parameters shared by all experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub solver: SolverConfig,
    pub initial: InitialCondition,
    pub samples: usize,
    pub seed: u64,
}

impl Setup {
    fn check(&self) -> Result<()> {
        self.solver.validate()?;
        if self.samples == 0 {
            return Err(Error::Constraint("samples must be at least 1".into()));
        }
        Ok(())
    }

    fn initial_field(&self, sample: usize) -> Result<(u64, SpectralField)> {
        let seed = derive_seed(self.seed, Stream::Initial, sample);
        Ok((seed, self.initial.draw(self.solver.m, self.solver.ball, seed)?))
    }
}

/// One job: its sample index, the seeds it used and its measured values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sample: usize,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    /// 95% confidence interval, for probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

impl Statistic {
    pub fn plain(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            interval: None,
        }
    }

    pub fn probability(name: impl Into<String>, hits: usize, total: usize) -> Self {
        let (lo, hi) = wilson_interval(hits, total);
        Self {
            name: name.into(),
            value: if total == 0 { f64::NAN } else { hits as f64 / total as f64 },
            interval: Some([lo, hi]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: u32,
    pub experiment: String,
    pub version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub seed_columns: Vec<String>,
    pub columns: Vec<String>,
    pub records: Vec<Record>,
    pub summary: Vec<Statistic>,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(experiment: &str, config: &C, seed: u64, seed_columns: &[&str], columns: Vec<String>) -> Result<Self> {
        let config = serde_json::to_value(config).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self {
            format: FORMAT_VERSION,
            experiment: experiment.into(),
            version: VERSION.into(),
            config_hash: config_hash(&config),
            config,
            seed,
            seed_columns: seed_columns.iter().map(|s| s.to_string()).collect(),
            columns,
            records: Vec::new(),
            summary: Vec::new(),
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of one column over all records.
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column(name)?;
        Some(self.records.iter().map(|r| r.values[c]).collect())
    }

    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.summary.iter().find(|s| s.name == name)
    }

    /// Per-record table. The first line is a comment carrying the format
    /// version, config hash and seed.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# format={} experiment={} config_hash={} seed={}",
            self.format, self.experiment, self.config_hash, self.seed
        )?;
        let mut out = csv::Writer::from_writer(w);
        let header = std::iter::once("sample")
            .chain(self.seed_columns.iter().map(String::as_str))
            .chain(self.columns.iter().map(String::as_str));
        out.write_record(header).map_err(csv_error)?;
        for r in &self.records {
            let row = std::iter::once(r.sample.to_string())
                .chain(r.seeds.iter().map(u64::to_string))
                .chain(r.values.iter().map(f64::to_string));
            out.write_record(row).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let report: Self = serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))?;
        if report.format != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "report format {} is not supported (expected {FORMAT_VERSION})",
                report.format
            )));
        }
        Ok(report)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Hex SHA-256 of the compact JSON encoding.
pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).expect("JSON values always serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(hits: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = total as f64;
    let p = hits as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Linearly interpolated quantile, `q` in `[0, 1]`; NaN for no data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs `count` jobs on a pool sized by [`WORKERS_ENV`] (all cores when unset);
/// results come back in job order.
pub fn run_jobs<T, F>(count: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Configuration(format!("{WORKERS_ENV} must be a positive integer, got {s:?}")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    pool.install(|| (0..count).into_par_iter().map(&job).collect())
}

fn is_power_of_two(n: usize) -> bool {
    n > 0 && n & (n - 1) == 0
}

fn log2(n: usize) -> u32 {
    n.trailing_zeros()
}

/// The configuration for driver partition `n`, with the step capped at `h^n / 4`.
fn at_partition(base: &SolverConfig, n: usize) -> SolverConfig {
    SolverConfig {
        n,
        dt: base.dt.min(base.horizon / (4.0 * n as f64)),
        ..base.clone()
    }
}

fn wong_zakai_run(cfg: &SolverConfig, ensemble: &BrownianEnsemble, xi0: &SpectralField) -> Result<Trajectory> {
    let paths = PiecewiseLinearPaths::from_ensemble(ensemble, cfg.n)?;
    simulate(cfg, Mode::WongZakai, Driver::PiecewiseLinear(&paths), xi0)
}

fn noise_ensemble(cfg: &SolverConfig, level: u32, seed: u64) -> Result<BrownianEnsemble> {
    let model = NoiseModel::from_config(cfg)?;
    BrownianEnsemble::sample(&model.support_vectors(), cfg.horizon, level, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WongZakaiParams {
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    /// Also run the Stratonovich scheme at the reference step.
    pub stratonovich_check: bool,
}

impl Default for WongZakaiParams {
    fn default() -> Self {
        Self {
            n_list: vec![8, 16, 32, 64],
            n_ref: 256,
            stratonovich_check: true,
        }
    }
}

/// Sup-in-time `H^{-delta}` distance between `xi^{N,n}` and the finest-`n`
/// reference for every sample and every `n`.
///
/// Columns: `init_neg_norm`, one `d_n{n}` per partition, `blowup`, and
/// `d_stratonovich` (the reference against the Stratonovich scheme) when
/// requested. Summaries: median, mean and 90% quantile of each distance, an
/// empirical log-log rate of the medians, and `P(d_n > eps * ||xi_0||_{-delta})`
/// for every level of [`EPSILON_GRID`].
pub fn wong_zakai_convergence(setup: &Setup, params: &WongZakaiParams) -> Result<ExperimentReport> {
    setup.check()?;
    if params.n_list.is_empty() {
        return Err(Error::Constraint("n_list must not be empty".into()));
    }
    if !is_power_of_two(params.n_ref) {
        return Err(Error::Constraint(format!("n_ref must be a power of two, got {}", params.n_ref)));
    }
    for &n in &params.n_list {
        if n == 0 || !params.n_ref.is_multiple_of(n) || !is_power_of_two(params.n_ref / n) {
            return Err(Error::Constraint(format!(
                "n = {n} is not dyadically compatible with n_ref = {}",
                params.n_ref
            )));
        }
    }
    let base = &setup.solver;
    let delta = base.delta;
    let mut columns = vec!["init_neg_norm".to_string()];
    columns.extend(params.n_list.iter().map(|n| format!("d_n{n}")));
    columns.push("blowup".into());
    if params.stratonovich_check {
        columns.push("d_stratonovich".into());
    }
    let mut report = ExperimentReport::new(
        "wz-convergence",
        &(setup, params),
        setup.seed,
        &["noise_seed", "initial_seed"],
        columns,
    )?;

    let ref_cfg = at_partition(base, params.n_ref);
    report.records = run_jobs(setup.samples, |i| {
        let noise_seed = derive_seed(setup.seed, Stream::Noise, i);
        let (initial_seed, xi0) = setup.initial_field(i)?;
        let ensemble = noise_ensemble(base, log2(params.n_ref), noise_seed)?;
        let reference = wong_zakai_run(&ref_cfg, &ensemble, &xi0)?;
        let mut values = vec![xi0.sobolev_norm(-delta)];
        let mut blowup = reference.blowup.is_some();
        for &n in &params.n_list {
            let traj = wong_zakai_run(&at_partition(base, n), &ensemble, &xi0)?;
            blowup |= traj.blowup.is_some();
            values.push(traj.sup_distance(&reference, delta)?);
        }
        values.push(f64::from(u8::from(blowup)));
        if params.stratonovich_check {
            let strat = simulate(&ref_cfg, Mode::Stratonovich, Driver::Brownian(&ensemble), &xi0)?;
            values.push(strat.sup_distance(&reference, delta)?);
        }
        Ok(Record {
            sample: i,
            seeds: vec![noise_seed, initial_seed],
            values,
        })
    })?;

    let scale = report.values("init_neg_norm").unwrap();
    let mut medians = Vec::new();
    for &n in &params.n_list {
        let name = format!("d_n{n}");
        let d = report.values(&name).unwrap();
        medians.push(median(&d));
        report.summary.push(Statistic::plain(format!("median_{name}"), median(&d)));
        report.summary.push(Statistic::plain(format!("mean_{name}"), mean(&d)));
        report.summary.push(Statistic::plain(format!("q90_{name}"), quantile(&d, 0.9)));
        for eps in EPSILON_GRID {
            let hits = d.iter().zip(&scale).filter(|(d, s)| !(**d <= eps * **s)).count();
            report
                .summary
                .push(Statistic::probability(format!("p_exceed_{name}_eps{eps}"), hits, d.len()));
        }
    }
    if params.n_list.len() >= 2 {
        let x: Vec<f64> = params.n_list.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
        report.summary.push(Statistic::plain("empirical_rate", -regression_slope(&x, &y)));
    }
    if params.stratonovich_check {
        let d = report.values("d_stratonovich").unwrap();
        report.summary.push(Statistic::plain("median_d_stratonovich", median(&d)));
    }
    Ok(report)
}

fn regression_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingParams {
    pub shells: Vec<usize>,
    /// Cut-off level; `R_K = C(K) + 2` when absent.
    pub cutoff: Option<f64>,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            shells: vec![2, 3, 4],
            cutoff: None,
        }
    }
}

/// Cut-off stochastic runs for every shell `N` against the deterministic
/// enhanced-viscosity solution from the same initial field.
///
/// `C(K)` is the largest `H` norm reached by the limit solutions over all
/// samples. Columns per (sample, N): `shell`, `distance`, `sup_neg_norm`,
/// `bounded` (`sup_t ||xi||_{-delta} <= R_K - 1`) and `limit_bound`.
pub fn scaling_limit(setup: &Setup, params: &ScalingParams) -> Result<ExperimentReport> {
    setup.check()?;
    if params.shells.is_empty() {
        return Err(Error::Constraint("the list of shells must not be empty".into()));
    }
    let base = &setup.solver;
    for &shell in &params.shells {
        if shell == 0 || base.m < 2 * shell {
            return Err(Error::ShellTruncated { n: shell, m: base.m });
        }
    }
    if !is_power_of_two(base.n) {
        return Err(Error::Constraint(format!("n must be a power of two, got {}", base.n)));
    }
    let columns = ["shell", "distance", "sup_neg_norm", "bounded", "limit_bound"];
    let mut report = ExperimentReport::new(
        "scaling-limit",
        &(setup, params),
        setup.seed,
        &["noise_seed", "initial_seed"],
        columns.iter().map(|s| s.to_string()).collect(),
    )?;

    let limit_cfg = SolverConfig {
        cutoff: None,
        ..base.limit_equation()
    };
    let limits = run_jobs(setup.samples, |i| {
        let (seed, xi0) = setup.initial_field(i)?;
        let traj = simulate(&limit_cfg, Mode::Deterministic, Driver::None, &xi0)?;
        Ok((seed, xi0, traj))
    })?;
    let c_k = limits.iter().map(|l| l.2.sup_enstrophy().sqrt()).fold(0.0, f64::max);
    let r_k = params.cutoff.unwrap_or(c_k + 2.0);

    let shells = params.shells.len();
    let delta = base.delta;
    report.records = run_jobs(setup.samples * shells, |job| {
        let (i, s) = (job / shells, job % shells);
        let shell = params.shells[s];
        let (initial_seed, xi0, limit) = &limits[i];
        let noise_seed = derive_seed(setup.seed, Stream::Noise, i);
        let cfg = SolverConfig {
            shell,
            cutoff: Some(r_k),
            ..base.clone()
        };
        let ensemble = noise_ensemble(&cfg, log2(cfg.n), noise_seed)?;
        let traj = wong_zakai_run(&cfg, &ensemble, xi0)?;
        let sup_neg = if traj.blowup.is_some() {
            f64::INFINITY
        } else {
            traj.states.iter().map(|x| x.sobolev_norm(-delta)).fold(0.0, f64::max)
        };
        Ok(Record {
            sample: i,
            seeds: vec![noise_seed, *initial_seed],
            values: vec![
                shell as f64,
                traj.sup_distance(limit, delta)?,
                sup_neg,
                f64::from(u8::from(sup_neg <= r_k - 1.0)),
                limit.sup_enstrophy().sqrt(),
            ],
        })
    })?;

    report.summary.push(Statistic::plain("C_K", c_k));
    report.summary.push(Statistic::plain("R_K", r_k));
    for &shell in &params.shells {
        let rows: Vec<&Record> = report.records.iter().filter(|r| r.values[0] == shell as f64).collect();
        let d: Vec<f64> = rows.iter().map(|r| r.values[1]).collect();
        let hits = rows.iter().filter(|r| r.values[3] == 1.0).count();
        report.summary.push(Statistic::plain(format!("median_distance_N{shell}"), median(&d)));
        report
            .summary
            .push(Statistic::probability(format!("p_bounded_N{shell}"), hits, rows.len()));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LifespanParams {
    pub omega_samples: usize,
    pub data_samples: usize,
    /// Exit level for `||xi||_H`; `10 K` when absent.
    pub threshold: Option<f64>,
}

impl Default for LifespanParams {
    fn default() -> Self {
        Self {
            omega_samples: 8,
            data_samples: 16,
            threshold: None,
        }
    }
}

/// `mu^(omega)`: fraction of initial fields drawn from the configured source
/// whose lifespan under the fixed transport field `v(omega)` reaches `T`.
///
/// The same initial fields are used for every `omega`. Records are one per
/// (omega, field) pair with columns `omega`, `data`, `lifespan` (`T` when no
/// exit) and `survived`. The best `omega` and its noise seed certify a
/// deterministic transport field.
pub fn lifespan_measure(setup: &Setup, params: &LifespanParams) -> Result<ExperimentReport> {
    setup.check()?;
    if params.omega_samples == 0 || params.data_samples == 0 {
        return Err(Error::Constraint("omega_samples and data_samples must be at least 1".into()));
    }
    let base = &setup.solver;
    if !is_power_of_two(base.n) {
        return Err(Error::Constraint(format!("n must be a power of two, got {}", base.n)));
    }
    let threshold = params.threshold.unwrap_or(10.0 * base.ball);
    let columns = ["omega", "data", "lifespan", "survived"];
    let mut report = ExperimentReport::new(
        "lifespan",
        &(setup, params),
        setup.seed,
        &["noise_seed", "data_seed"],
        columns.iter().map(|s| s.to_string()).collect(),
    )?;
    let (no, nd) = (params.omega_samples, params.data_samples);
    let data: Vec<(u64, SpectralField)> = (0..nd)
        .map(|j| {
            let seed = derive_seed(setup.seed, Stream::Data, j);
            Ok((seed, setup.initial.draw(base.m, base.ball, seed)?))
        })
        .collect::<Result<_>>()?;
    report.records = run_jobs(no * nd, |job| {
        let (w, j) = (job / nd, job % nd);
        let noise_seed = derive_seed(setup.seed, Stream::Noise, w);
        let ensemble = noise_ensemble(base, log2(base.n), noise_seed)?;
        let traj = wong_zakai_run(base, &ensemble, &data[j].1)?;
        let tau = lifespan(&traj, threshold);
        Ok(Record {
            sample: w,
            seeds: vec![noise_seed, data[j].0],
            values: vec![
                w as f64,
                j as f64,
                tau.unwrap_or(base.horizon),
                f64::from(u8::from(tau.is_none())),
            ],
        })
    })?;

    let survived = |w: usize, j: usize| report.records[w * nd + j].values[3];
    let mu: Vec<f64> = (0..no).map(|w| (0..nd).map(|j| survived(w, j)).sum::<f64>() / nd as f64).collect();
    let per_field: Vec<f64> = (0..nd).map(|j| (0..no).map(|w| survived(w, j)).sum::<f64>() / no as f64).collect();
    let best = (0..no).fold(0, |b, w| if mu[w] > mu[b] { w } else { b });
    let mut summary = vec![
        Statistic::plain("threshold", threshold),
        Statistic::plain("mean_mu_hat", mean(&mu)),
        Statistic::plain("max_mu_hat", mu[best]),
        Statistic::plain("best_omega", best as f64),
        Statistic::plain("mean_field_survival", mean(&per_field)),
        Statistic::plain("min_mu_hat", mu.iter().copied().fold(f64::INFINITY, f64::min)),
    ];
    for (w, m) in mu.iter().enumerate() {
        summary.push(Statistic::plain(format!("mu_hat_omega{w}"), *m));
    }
    let total = no * nd;
    let hits = report.records.iter().filter(|r| r.values[3] == 1.0).count();
    summary.push(Statistic::probability("p_survival", hits, total));
    report.summary = summary;
    Ok(report)
}

/// Seed of the transport field with the largest `mu^`.
pub fn best_omega_seed(report: &ExperimentReport) -> Option<u64> {
    let best = report.statistic("best_omega")?.value as usize;
    report.records.iter().find(|r| r.sample == best).map(|r| r.seeds[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoughParams {
    pub n_list: Vec<usize>,
    /// Intervals of the dyadic grid carrying the diagnostics.
    pub intervals: usize,
}

impl Default for RoughParams {
    fn default() -> Self {
        Self {
            n_list: vec![8, 16, 32],
            intervals: 64,
        }
    }
}

/// Largest over smallest per-scale ratio of a profile.
pub fn profile_spread(profile: &[ScaleRatio]) -> f64 {
    let max = profile.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let min = profile.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    max / min
}

/// Driver seminorms, drift increment ratios and the remainder `3 alpha`
/// ratio in `H^{-3}` for every sample and partition, over dyadic pairs of a
/// uniform grid.
///
/// Columns: `n`, `driver_z_alpha`, `driver_w_2alpha` (scaled by
/// `C_nu / ||theta||`), `drift_h2` (`||mu_st||_{-2} / (t-s)`), `drift_h1`
/// (`||mu_st||_{-1} / (t-s)^{1/2}`), `remainder_3alpha`, `remainder_spread`
/// (largest over smallest per-scale ratio), `remainder_coarse` and
/// `remainder_fine`.
pub fn rough_diagnostics(setup: &Setup, params: &RoughParams) -> Result<ExperimentReport> {
    setup.check()?;
    if !is_power_of_two(params.intervals) || params.intervals < 2 {
        return Err(Error::Constraint(format!(
            "intervals must be a power of two >= 2, got {}",
            params.intervals
        )));
    }
    for &n in &params.n_list {
        if n == 0 || !is_power_of_two(n) || !params.intervals.is_multiple_of(n) {
            return Err(Error::Constraint(format!(
                "n = {n} must be a power of two dividing intervals = {}",
                params.intervals
            )));
        }
    }
    let columns = [
        "n",
        "driver_z_alpha",
        "driver_w_2alpha",
        "drift_h2",
        "drift_h1",
        "remainder_3alpha",
        "remainder_spread",
        "remainder_coarse",
        "remainder_fine",
    ];
    let mut report = ExperimentReport::new(
        "rough-diagnostics",
        &(setup, params),
        setup.seed,
        &["noise_seed", "initial_seed"],
        columns.iter().map(|s| s.to_string()).collect(),
    )?;
    let base = SolverConfig {
        saves: params.intervals,
        record_drift: true,
        ..setup.solver.clone()
    };
    let alpha = base.alpha;
    let pairs = dyadic_pairs(params.intervals)?;
    let level = log2(params.intervals);
    let count = params.n_list.len();
    report.records = run_jobs(setup.samples * count, |job| {
        let (i, k) = (job / count, job % count);
        let n = params.n_list[k];
        let noise_seed = derive_seed(setup.seed, Stream::Noise, i);
        let (initial_seed, xi0) = setup.initial_field(i)?;
        let cfg = at_partition(&base, n);
        let model = NoiseModel::from_config(&cfg)?;
        let ensemble = noise_ensemble(&cfg, level, noise_seed)?;
        let paths = PiecewiseLinearPaths::from_ensemble(&ensemble, n)?;
        let traj = simulate(&cfg, Mode::WongZakai, Driver::PiecewiseLinear(&paths), &xi0)?;
        if traj.blowup.is_some() {
            return Err(Error::Configuration(format!("sample {i} blew up at n = {n}")));
        }
        let lift = RoughPathLift::canonical(&paths, &traj.times, alpha)?;
        let (z, w) = driver_norm_proxy(&lift, model.theta(), model.c_nu(), &pairs)?;
        let drift = |space| {
            TwoIndexMap::from_fn(&traj.times, &pairs, space, |a, b| -> SpectralCoeffs {
                traj.drift[b].sub(&traj.drift[a])
            })
        };
        let h2 = holder_seminorm(&drift(TargetSpace::Sobolev(-2.0)), 1.0)?;
        let h1 = holder_seminorm(&drift(TargetSpace::Sobolev(-1.0)), 0.5)?;
        let rem = remainder_map(&traj, &lift, &model, &pairs)?;
        let r = holder_seminorm(&rem, 3.0 * alpha)?;
        let profile = scale_profile(&rem, 3.0 * alpha)?;
        Ok(Record {
            sample: i,
            seeds: vec![noise_seed, initial_seed],
            values: vec![
                n as f64,
                z,
                w,
                h2,
                h1,
                r,
                profile_spread(&profile),
                profile[0].ratio,
                profile.last().unwrap().ratio,
            ],
        })
    })?;

    let mut previous: Option<(f64, f64)> = None;
    for &n in &params.n_list {
        let rows: Vec<&Record> = report.records.iter().filter(|r| r.values[0] == n as f64).collect();
        let col = |c: usize| rows.iter().map(|r| r.values[c]).collect::<Vec<f64>>();
        let (z90, w90) = (quantile(&col(1), 0.9), quantile(&col(2), 0.9));
        report.summary.push(Statistic::plain(format!("q90_driver_z_alpha_n{n}"), z90));
        report.summary.push(Statistic::plain(format!("q90_driver_w_2alpha_n{n}"), w90));
        report
            .summary
            .push(Statistic::plain(format!("max_drift_h2_n{n}"), col(3).into_iter().fold(0.0, f64::max)));
        report
            .summary
            .push(Statistic::plain(format!("max_drift_h1_n{n}"), col(4).into_iter().fold(0.0, f64::max)));
        report
            .summary
            .push(Statistic::plain(format!("median_remainder_3alpha_n{n}"), median(&col(5))));
        report.summary.push(Statistic::plain(
            format!("max_remainder_spread_n{n}"),
            col(6).into_iter().fold(0.0, f64::max),
        ));
        if let Some((pz, pw)) = previous {
            report.summary.push(Statistic::plain(format!("z_alpha_q90_ratio_n{n}"), z90 / pz));
            report.summary.push(Statistic::plain(format!("w_2alpha_q90_ratio_n{n}"), w90 / pw));
        }
        previous = Some((z90, w90));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 10);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-4);
        let (lo, hi) = wilson_interval(5, 10);
        assert!((lo - 0.2366).abs() < 1e-4 && (hi - 0.7634).abs() < 1e-4);
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..64).map(|i| derive_seed(7, Stream::Noise, i)).collect();
        let b: Vec<u64> = (0..64).map(|i| derive_seed(7, Stream::Initial, i)).collect();
        let mut all = a.clone();
        all.extend(&b);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 128);
        assert_eq!(a[3], derive_seed(7, Stream::Noise, 3));
    }

    #[test]
    fn slope_of_a_power_law() {
        let x: Vec<f64> = [8.0f64, 16.0, 32.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        assert!((regression_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
