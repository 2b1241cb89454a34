//! Experiment harness: reactor stabilization, accuracy versus data length,
//! and a Monte Carlo comparison against identification plus model-based
//! placement.
//!
//! Every trial draws from its own RNG stream derived from the master seed and
//! the trial id, so results do not depend on scheduling. Output files are
//! ordered by trial id.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{identify_least_squares, model_based_place};
use crate::error::{Error, Result};
use crate::io::{rows_of, ComplexDto};
use crate::numerics::{eigenvalues_real, Tolerance};
use crate::plant::{
    chemical_reactor, closed_loop, gaussian_matrix, random_controllable, seeded_rng, simulate,
    InputKind, LtiSystem, SimulationConfig,
};
use crate::signals::extract_data_matrices;
use crate::synthesis::{place_poles_with, pole_error, PlaceOptions, PoleError, PoleSpec};

/// Poles assigned to the reactor: two unstable modes moved inside the unit
/// circle, the stable ones kept.
pub const REACTOR_POLES: [f64; 4] = [0.5, 0.3, 0.0002, 0.0065];
pub const REACTOR_HORIZON: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Reactor,
    VaryT,
    Montecarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Data lengths for the vary-T study.
    #[serde(rename = "T_values")]
    pub t_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub noise_variances: Vec<f64>,
    /// Trials per cell (per T for the vary-T study).
    pub trials: usize,
    pub master_seed: u64,
    /// Monte Carlo data length; `None` uses [`montecarlo_horizon`].
    #[serde(rename = "montecarlo_T")]
    pub montecarlo_t: Option<usize>,
    pub output_path: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Montecarlo,
            t_values: vec![10, 15, 20, 25, 30, 40, 50],
            n_values: vec![4, 6, 8, 10],
            noise_variances: vec![1.0, 10.0, 100.0],
            trials: 100,
            master_seed: 1,
            montecarlo_t: None,
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        match self.experiment {
            Experiment::Reactor => {}
            Experiment::VaryT => {
                let (n, m) = (4, 2);
                if self.t_values.is_empty() {
                    return Err(Error::InvalidArgument("T_values is empty".into()));
                }
                if let Some(t) = self.t_values.iter().find(|&&t| t < n + m + 1) {
                    return Err(Error::InvalidArgument(format!(
                        "T = {t} is below n + m + 1 = {} for the reactor",
                        n + m + 1
                    )));
                }
            }
            Experiment::Montecarlo => {
                if self.n_values.is_empty() || self.noise_variances.is_empty() {
                    return Err(Error::InvalidArgument(
                        "n_values and noise_variances must be nonempty".into(),
                    ));
                }
                for &n in &self.n_values {
                    if n < 2 {
                        return Err(Error::InvalidArgument(format!("n = {n} must be >= 2")));
                    }
                    let m = (n / 2).max(1);
                    let t = self.horizon_for(n);
                    if t < n + m + 1 {
                        return Err(Error::InvalidArgument(format!(
                            "T = {t} is below n + m + 1 = {} for n = {n}",
                            n + m + 1
                        )));
                    }
                }
                if let Some(v) = self.noise_variances.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::InvalidArgument(format!("noise variance {v} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    pub fn horizon_for(&self, n: usize) -> usize {
        self.montecarlo_t.unwrap_or_else(|| montecarlo_horizon(n))
    }
}

/// Default Monte Carlo data length for an `n`-state system, ten times the
/// minimal `n + m`.
pub fn montecarlo_horizon(n: usize) -> usize {
    let m = (n / 2).max(1);
    10 * (n + m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DataDriven,
    ModelBased,
    /// Data-driven placement on open-loop data of an unstable plant.
    DataDrivenUnstable,
    /// Data-driven placement on data from the pre-stabilized plant.
    DataDrivenStable,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::DataDriven => "data_driven",
            Method::ModelBased => "model_based",
            Method::DataDrivenUnstable => "data_driven_unstable",
            Method::DataDrivenStable => "data_driven_stable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::Failed(reason) => write!(f, "failed: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub n: usize,
    pub t: usize,
    pub sigma_e2: f64,
    pub method: Method,
    /// Optimal-assignment max deviation; `None` for failed trials.
    pub placement_error: Option<f64>,
    /// Seconds spent computing the gain.
    pub wall_time: f64,
    pub status: Status,
}

impl TrialRecord {
    fn from_outcome(
        trial_id: usize,
        n: usize,
        t: usize,
        sigma_e2: f64,
        method: Method,
        outcome: Result<f64>,
        wall_time: f64,
    ) -> Self {
        let (placement_error, status) = match outcome {
            Ok(e) => (Some(e), Status::Ok),
            Err(e) => (None, Status::Failed(e.to_string())),
        };
        TrialRecord {
            trial_id,
            n,
            t,
            sigma_e2,
            method,
            placement_error,
            wall_time,
            status,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

/// Independent seed for one trial (or one stage of it).
pub fn trial_seed(master_seed: u64, stream: u64) -> u64 {
    seeded_rng(master_seed, stream).random()
}

/// Max pole deviation of the true closed loop `A - B K`.
fn true_error(sys: &LtiSystem<f64>, gain: &DMatrix<f64>, spec: &PoleSpec<f64>) -> Result<f64> {
    let achieved = eigenvalues_real(closed_loop(sys, gain)?.a())?;
    Ok(pole_error(spec.poles(), &achieved)
        .expect("spectrum and pole list have equal length")
        .max)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[derive(Debug, Clone)]
pub struct ReactorReport {
    pub horizon: usize,
    pub seed: u64,
    pub desired: Vec<Complex64>,
    /// Spectrum of the true closed loop `A - B K`.
    pub achieved: Vec<Complex64>,
    pub placement_error: PoleError,
    /// `||x(T)||`, one step past the recorded trajectory.
    pub final_state_norm: f64,
    pub gain: DMatrix<f64>,
    pub wall_time: f64,
}

#[derive(Serialize)]
struct ReactorReportDto {
    #[serde(rename = "T")]
    horizon: usize,
    seed: u64,
    desired: Vec<ComplexDto>,
    achieved: Vec<ComplexDto>,
    placement_error_max: f64,
    placement_error_mean: f64,
    final_state_norm: f64,
    #[serde(rename = "K")]
    gain: Vec<Vec<f64>>,
}

impl ReactorReport {
    pub fn to_record(&self) -> TrialRecord {
        TrialRecord {
            trial_id: 0,
            n: 4,
            t: self.horizon,
            sigma_e2: 0.0,
            method: Method::DataDriven,
            placement_error: Some(self.placement_error.max),
            wall_time: self.wall_time,
            status: Status::Ok,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let dto = ReactorReportDto {
            horizon: self.horizon,
            seed: self.seed,
            desired: self.desired.iter().map(|&z| z.into()).collect(),
            achieved: self.achieved.iter().map(|&z| z.into()).collect(),
            placement_error_max: self.placement_error.max,
            placement_error_mean: self.placement_error.mean,
            final_state_norm: self.final_state_norm,
            gain: rows_of(&self.gain),
        };
        let mut s = serde_json::to_string_pretty(&dto)?;
        s.push('\n');
        Ok(s)
    }
}

fn reactor_spec() -> PoleSpec<f64> {
    PoleSpec::real(&REACTOR_POLES).expect("reactor poles are valid")
}

/// Places the reactor poles from open-loop data of length `horizon`.
fn reactor_gain(
    sys: &LtiSystem<f64>,
    horizon: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<(DMatrix<f64>, crate::signals::Trajectory<f64>)> {
    let traj = simulate(sys, &SimulationConfig::gaussian(4, horizon, seed))?;
    let dm = extract_data_matrices(&traj)?;
    let opts = PlaceOptions {
        seed,
        ..PlaceOptions::default()
    };
    let result = place_poles_with(&dm, &reactor_spec(), tol, &opts)?;
    Ok((result.gain, traj))
}

/// Reactor stabilization from `T = 10` open-loop samples with Gaussian input
/// and zero initial state.
pub fn run_reactor(cfg: &ExperimentConfig) -> Result<ReactorReport> {
    let tol = Tolerance::default();
    let sys = chemical_reactor::<f64>();
    let seed = trial_seed(cfg.master_seed, 0);
    let (outcome, wall_time) = timed(|| reactor_gain(&sys, REACTOR_HORIZON, seed, &tol));
    let (gain, traj) = outcome?;
    let last = traj.len() - 1;
    let x_t = sys.step(
        &traj.states().column(last).into_owned(),
        &traj.inputs().column(last).into_owned(),
    );
    let spec = reactor_spec();
    let mut achieved = eigenvalues_real(closed_loop(&sys, &gain)?.a())?;
    crate::numerics::sort_spectrum(&mut achieved);
    let placement_error =
        pole_error(spec.poles(), &achieved).expect("spectrum and pole list have equal length");
    Ok(ReactorReport {
        horizon: REACTOR_HORIZON,
        seed,
        desired: spec.poles().to_vec(),
        achieved,
        placement_error,
        final_state_norm: x_t.norm(),
        gain,
        wall_time,
    })
}

/// Accuracy versus data length on the reactor, for raw unstable data and for
/// data from the plant pre-stabilized by a gain computed from `T = 10` samples.
pub fn run_vary_t(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let tol = Tolerance::default();
    let sys = chemical_reactor::<f64>();
    let spec = reactor_spec();
    let trials = cfg.trials;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .t_values
        .iter()
        .enumerate()
        .flat_map(|(ti, &t)| (0..trials).map(move |k| (ti * trials + k, k, t)))
        .collect();
    let records: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(trial_id, k, t)| {
            let base = 1 + 3 * trial_id as u64;
            // The pre-stabilizer depends only on the repetition index k, so it
            // is shared across data lengths.
            let pre_seed = trial_seed(cfg.master_seed, u64::MAX - k as u64);
            let raw_seed = trial_seed(cfg.master_seed, base);
            let stable_seed = trial_seed(cfg.master_seed, base + 1);

            let (unstable, t_unstable) = timed(|| {
                reactor_gain(&sys, t, raw_seed, &tol).and_then(|(g, _)| true_error(&sys, &g, &spec))
            });
            let (stable, t_stable) = timed(|| -> Result<f64> {
                let (pre, _) = reactor_gain(&sys, REACTOR_HORIZON, pre_seed, &tol)?;
                let stabilized = closed_loop(&sys, &pre)?;
                let (k2, _) = reactor_gain(&stabilized, t, stable_seed, &tol)?;
                true_error(&sys, &(pre + k2), &spec)
            });
            vec![
                TrialRecord::from_outcome(trial_id, 4, t, 0.0, Method::DataDrivenUnstable, unstable, t_unstable),
                TrialRecord::from_outcome(trial_id, 4, t, 0.0, Method::DataDrivenStable, stable, t_stable),
            ]
        })
        .collect();
    Ok(records.into_iter().flatten().collect())
}

/// Data-driven placement on noisy data versus least-squares identification
/// followed by model-based placement, both evaluated on the true plant.
pub fn run_montecarlo(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let tol = Tolerance::default();
    let trials = cfg.trials;
    let mut jobs = Vec::new();
    for &n in &cfg.n_values {
        for &sigma in &cfg.noise_variances {
            let cell = jobs.len() / trials.max(1);
            for k in 0..trials {
                jobs.push((cell * trials + k, n, sigma));
            }
        }
    }
    let records: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(trial_id, n, sigma)| montecarlo_trial(cfg, trial_id, n, sigma, &tol))
        .collect();
    Ok(records.into_iter().flatten().collect())
}

fn montecarlo_trial(
    cfg: &ExperimentConfig,
    trial_id: usize,
    n: usize,
    sigma: f64,
    tol: &Tolerance,
) -> Vec<TrialRecord> {
    let t = cfg.horizon_for(n);
    let seed = trial_seed(cfg.master_seed, trial_id as u64);
    let fail_both = |e: Error| {
        let reason = e.to_string();
        [Method::DataDriven, Method::ModelBased]
            .into_iter()
            .map(|method| TrialRecord {
                trial_id,
                n,
                t,
                sigma_e2: sigma,
                method,
                placement_error: None,
                wall_time: 0.0,
                status: Status::Failed(reason.clone()),
            })
            .collect::<Vec<_>>()
    };
    let setup = || -> Result<(LtiSystem<f64>, PoleSpec<f64>, crate::signals::DataMatrices<f64>)> {
        let sys = random_controllable::<f64>(n, seed)?;
        let mut rng = seeded_rng(seed, 1);
        let bound = n as f64;
        let poles: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
        let spec = PoleSpec::real(&poles)?;
        let x0: DMatrix<f64> = gaussian_matrix(n, 1, 1.0, &mut rng);
        let cfg = SimulationConfig {
            horizon: t,
            x0: DVector::from_column_slice(x0.as_slice()),
            input: InputKind::Gaussian { variance: 1.0 },
            noise_variance: sigma,
            seed: seed.wrapping_add(1),
        };
        let dm = extract_data_matrices(&simulate(&sys, &cfg)?)?;
        Ok((sys, spec, dm))
    };
    let (sys, spec, dm) = match setup() {
        Ok(v) => v,
        Err(e) => return fail_both(e),
    };
    let opts = PlaceOptions {
        seed,
        ..PlaceOptions::default()
    };
    let (data_driven, t_dd) = timed(|| {
        place_poles_with(&dm, &spec, tol, &opts).and_then(|r| true_error(&sys, &r.gain, &spec))
    });
    let (model_based, t_mb) = timed(|| {
        identify_least_squares(&dm, tol)
            .and_then(|model| model.system())
            .and_then(|model| model_based_place(&model, &spec, tol))
            .and_then(|gain| true_error(&sys, &gain, &spec))
    });
    vec![
        TrialRecord::from_outcome(trial_id, n, t, sigma, Method::DataDriven, data_driven, t_dd),
        TrialRecord::from_outcome(trial_id, n, t, sigma, Method::ModelBased, model_based, t_mb),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma_e2: f64,
    pub method: Method,
    pub trials: usize,
    pub ok: usize,
    pub failed: usize,
    /// Over successful trials; `None` when there are none.
    pub mean_error: Option<f64>,
    pub median_error: Option<f64>,
    /// Median with failed trials counted as infinite error; `None` when infinite.
    pub median_error_failures_infinite: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub records: usize,
    pub cells: Vec<CellSummary>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

fn finite(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite())
}

/// Per-cell aggregates, cells keyed by `(n, T, sigma_e2, method)` in sorted order.
pub fn summarize(records: &[TrialRecord], cfg: &ExperimentConfig) -> Summary {
    let mut cells: BTreeMap<(usize, usize, u64, Method), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.n, r.t, r.sigma_e2.to_bits(), r.method))
            .or_default()
            .push(r);
    }
    let cells = cells
        .into_iter()
        .map(|((n, t, sigma, method), rs)| {
            let mut ok: Vec<f64> = rs.iter().filter_map(|r| r.placement_error).collect();
            let mut all: Vec<f64> = rs
                .iter()
                .map(|r| r.placement_error.unwrap_or(f64::INFINITY))
                .collect();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            CellSummary {
                n,
                t,
                sigma_e2: f64::from_bits(sigma),
                method,
                trials: rs.len(),
                ok: ok.len(),
                failed: rs.len() - ok.len(),
                mean_error: finite(mean),
                median_error: finite(median(&mut ok)),
                median_error_failures_infinite: finite(median(&mut all)),
            }
        })
        .collect();
    Summary {
        experiment: cfg.experiment,
        master_seed: cfg.master_seed,
        config: cfg.clone(),
        records: records.len(),
        cells,
    }
}

#[derive(Serialize)]
struct RecordRow<'a> {
    trial_id: usize,
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    sigma_e2: f64,
    method: Method,
    placement_error: Option<f64>,
    status: &'a str,
}

#[derive(Serialize)]
struct TimingRow {
    trial_id: usize,
    method: Method,
    wall_time: f64,
}

/// Writes `records.csv` and `summary.json` (byte-stable for identical inputs)
/// and `timings.csv` with wall-clock times, into `dir`.
pub fn emit_results(records: &[TrialRecord], cfg: &ExperimentConfig, dir: &Path) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    fs::create_dir_all(dir)?;
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.trial_id, r.method));

    let mut writer = csv::Writer::from_path(dir.join("records.csv"))?;
    let mut timings = csv::Writer::from_path(dir.join("timings.csv"))?;
    for r in &sorted {
        let status = r.status.to_string();
        writer.serialize(RecordRow {
            trial_id: r.trial_id,
            n: r.n,
            t: r.t,
            sigma_e2: r.sigma_e2,
            method: r.method,
            placement_error: r.placement_error,
            status: &status,
        })?;
        timings.serialize(TimingRow {
            trial_id: r.trial_id,
            method: r.method,
            wall_time: r.wall_time,
        })?;
    }
    writer.flush()?;
    timings.flush()?;

    let summary = summarize(records, cfg);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(summary)
}
