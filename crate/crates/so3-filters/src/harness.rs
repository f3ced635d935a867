//! Trial execution, metrics and reproducible reporting.
//!
//! A trial synthesizes one seeded measurement stream (true trajectory, gyro
//! readings, reconstructed attitudes) and drives a filter over it, recording
//! per-sample diagnostics against the *true* attitude. Within one seed every
//! filter consumes the identical stream, so Monte-Carlo comparisons are
//! paired. Seeds run in parallel; aggregation order is fixed, and all float
//! output is printed with 17 significant digits, which makes repeated
//! invocations byte-identical.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::euler::{euler_angles, EulerAngles};
use crate::filters::{
    det_filter_step, ito_filter_step, ito_filter_step_quat, strat_filter_step,
    strat_filter_step_quat, FilterDiagnostics, FilterKind, FilterState, QuatFilterState,
};
use crate::quat::UnitQuat;
use crate::scenario::Scenario;
use crate::sim::{measured_omega, synthesize_body_vectors, true_attitude_step, augmented_inertial};
use crate::so3::RotationMatrix;
use crate::wahba::{svd_reconstruct, VectorPairSet};
use crate::{Error, Result};

/// Threshold defining "converged" for the convergence-time metric.
pub const CONVERGENCE_THRESHOLD: f64 = 0.01;

/// One seeded realization of every measurement a filter consumes.
///
/// `r_true` and `omega_true` have `n_steps + 1` samples; the measurement
/// vectors `omega_m` / `r_y` have `n_steps` entries, one per integration step.
#[derive(Debug, Clone)]
pub struct MeasurementStream {
    pub seed: u64,
    pub r_true: Vec<RotationMatrix>,
    pub omega_true: Vec<Vector3<f64>>,
    pub omega_m: Vec<Vector3<f64>>,
    pub r_y: Vec<RotationMatrix>,
}

/// Builds the measurement stream for one seed: per step, the gyro sample is
/// drawn first, then the vector-sensor noise, then `R_y` is reconstructed
/// from the (normalized, cross-augmented) pairs.
pub fn synthesize_stream(scenario: &Scenario, seed: u64) -> Result<MeasurementStream> {
    let grid = &scenario.grid;
    let n = grid.n_steps();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let inertial = augmented_inertial(&scenario.inertial_vectors)?;

    let mut r_true = Vec::with_capacity(n + 1);
    let mut omega_true = Vec::with_capacity(n + 1);
    let mut omega_m = Vec::with_capacity(n);
    let mut r_y = Vec::with_capacity(n);

    r_true.push(scenario.initial_true_attitude);
    for k in 0..n {
        let t = grid.time(k);
        let omega = scenario.omega_profile.at(t);
        omega_true.push(omega);
        omega_m.push(measured_omega(omega, &scenario.noise, &mut rng, grid.dt));

        let body = synthesize_body_vectors(
            &r_true[k],
            &scenario.inertial_vectors,
            &scenario.noise,
            &mut rng,
        )
        .and_then(|body| {
            let pairs = inertial.iter().copied().zip(body).collect();
            svd_reconstruct(&VectorPairSet::equal_weights(pairs)?)
        })
        .map_err(|e| Error::TrialStep {
            step: k,
            t,
            source: Box::new(e),
        })?;
        r_y.push(body);

        r_true.push(true_attitude_step(&r_true[k], omega, grid.dt));
    }
    omega_true.push(scenario.omega_profile.at(grid.time(n)));

    Ok(MeasurementStream {
        seed,
        r_true,
        omega_true,
        omega_m,
        r_y,
    })
}

/// One recorded sample: diagnostics of the filter state against the true
/// attitude, plus both Euler angle tracks.
#[derive(Debug, Clone, Copy)]
pub struct TrialSample {
    pub t: f64,
    /// `|R^T R^hat|_I` against the true attitude.
    pub err_dist: f64,
    /// `Upsilon_a` of the true error rotation.
    pub upsilon: Vector3<f64>,
    /// Rodriguez vector of the true error; `None` within the 180° chart guard.
    pub rho_err: Option<Vector3<f64>>,
    pub b_hat: Vector3<f64>,
    pub sigma_hat: Vector3<f64>,
    /// Potential function value (deterministic or stochastic form by filter).
    pub lyapunov_v: f64,
    pub euler_true: EulerAngles,
    pub euler_est: EulerAngles,
}

impl TrialSample {
    /// True when the Rodriguez error is chart-valid and neither Euler track
    /// sits at gimbal lock.
    pub fn validity_flag(&self) -> bool {
        self.rho_err.is_some() && self.euler_true.valid && self.euler_est.valid
    }
}

/// Time series produced by one `(filter, seed)` trial.
#[derive(Debug, Clone)]
pub struct TrialSeries {
    pub filter: FilterKind,
    pub seed: u64,
    pub samples: Vec<TrialSample>,
}

fn record_sample(
    scenario: &Scenario,
    filter: FilterKind,
    t: f64,
    r_true: &RotationMatrix,
    r_hat: &RotationMatrix,
    b_hat: Vector3<f64>,
    sigma_hat: Vector3<f64>,
) -> TrialSample {
    let diag = FilterDiagnostics::compute(
        filter,
        r_true,
        r_hat,
        scenario.noise.gyro_bias - b_hat,
        scenario.noise.sigma_bound() - sigma_hat,
        &scenario.gains,
    );
    TrialSample {
        t,
        err_dist: diag.err_dist,
        upsilon: diag.upsilon,
        rho_err: diag.rho_err,
        b_hat,
        sigma_hat,
        lyapunov_v: diag.lyapunov_v,
        euler_true: euler_angles(r_true),
        euler_est: euler_angles(r_hat),
    }
}

/// Drives one filter over a prepared measurement stream.
pub fn run_filter_over_stream(
    scenario: &Scenario,
    stream: &MeasurementStream,
    filter: FilterKind,
) -> Result<TrialSeries> {
    let grid = &scenario.grid;
    let n = grid.n_steps();
    let r0 = scenario.initial_estimate.to_rotation()?;
    let gains = &scenario.gains;
    let mut samples = Vec::with_capacity(n + 1);

    let step_err = |k: usize, e: Error| Error::TrialStep {
        step: k,
        t: grid.time(k),
        source: Box::new(e),
    };

    match filter {
        FilterKind::Det | FilterKind::Ito | FilterKind::Strat => {
            let mut state = FilterState::new(r0);
            for k in 0..n {
                samples.push(record_sample(
                    scenario,
                    filter,
                    grid.time(k),
                    &stream.r_true[k],
                    &state.r_hat,
                    state.b_hat,
                    state.sigma_hat,
                ));
                state = match filter {
                    FilterKind::Det => Ok(det_filter_step(
                        &state,
                        stream.omega_m[k],
                        &stream.r_y[k],
                        gains,
                        grid.dt,
                    )),
                    FilterKind::Ito => {
                        ito_filter_step(&state, stream.omega_m[k], &stream.r_y[k], gains, grid.dt)
                    }
                    _ => strat_filter_step(
                        &state,
                        stream.omega_m[k],
                        &stream.r_y[k],
                        gains,
                        grid.dt,
                    ),
                }
                .map_err(|e| step_err(k, e))?;
            }
            samples.push(record_sample(
                scenario,
                filter,
                grid.time(n),
                &stream.r_true[n],
                &state.r_hat,
                state.b_hat,
                state.sigma_hat,
            ));
        }
        FilterKind::ItoQuat | FilterKind::StratQuat => {
            let mut state = QuatFilterState::new(UnitQuat::from_rotation(&r0));
            for k in 0..n {
                let r_hat = state.q_hat.to_rotation();
                samples.push(record_sample(
                    scenario,
                    filter,
                    grid.time(k),
                    &stream.r_true[k],
                    &r_hat,
                    state.b_hat,
                    state.sigma_hat,
                ));
                let q_y = UnitQuat::from_rotation(&stream.r_y[k]);
                state = if filter == FilterKind::ItoQuat {
                    ito_filter_step_quat(&state, stream.omega_m[k], &q_y, gains, grid.dt)
                } else {
                    strat_filter_step_quat(&state, stream.omega_m[k], &q_y, gains, grid.dt)
                }
                .map_err(|e| step_err(k, e))?;
            }
            let r_hat = state.q_hat.to_rotation();
            samples.push(record_sample(
                scenario,
                filter,
                grid.time(n),
                &stream.r_true[n],
                &r_hat,
                state.b_hat,
                state.sigma_hat,
            ));
        }
    }

    Ok(TrialSeries {
        filter,
        seed: stream.seed,
        samples,
    })
}

/// Synthesizes the stream for `seed` and runs `filter` over it.
pub fn run_trial(scenario: &Scenario, filter: FilterKind, seed: u64) -> Result<TrialSeries> {
    let stream = synthesize_stream(scenario, seed)?;
    run_filter_over_stream(scenario, &stream, filter)
}

/// Runs every configured filter over every configured seed (streams shared
/// per seed), returning series grouped seed-major.
pub fn run_all_trials(scenario: &Scenario) -> Result<Vec<TrialSeries>> {
    let groups: Result<Vec<Vec<TrialSeries>>> = scenario
        .seeds
        .par_iter()
        .map(|&seed| {
            let stream = synthesize_stream(scenario, seed)?;
            scenario
                .filters
                .iter()
                .map(|&f| run_filter_over_stream(scenario, &stream, f))
                .collect()
        })
        .collect();
    Ok(groups?.into_iter().flatten().collect())
}

/// Windowed statistics of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub filter: FilterKind,
    pub seed: u64,
    /// Closed statistics window `[t_start, t_end]`.
    pub window: (f64, f64),
    pub mean_err_dist: f64,
    pub std_err_dist: f64,
    pub final_err_dist: f64,
    /// First time from which `err_dist < 0.01` holds through the end.
    pub convergence_time_to_0p01: Option<f64>,
    /// First time at which `err_dist < 0.01` occurs at all. At noisy steady
    /// state the sustained metric above is dominated by the last noise spike;
    /// this one captures the transient convergence speed.
    pub first_time_below_0p01: Option<f64>,
}

/// Default statistics window: one second after the start (when the horizon
/// allows), through the end of the run.
pub fn default_window(scenario: &Scenario) -> (f64, f64) {
    let g = &scenario.grid;
    if g.t_end - g.t0 > 1.0 {
        (g.t0 + 1.0, g.t_end)
    } else {
        (g.t0, g.t_end)
    }
}

/// Mean / sample-STD of `err_dist` over the closed window, the final error,
/// and the sustained convergence time.
pub fn compute_metrics(series: &TrialSeries, window: (f64, f64)) -> Result<RunMetrics> {
    let (w0, w1) = window;
    if !w0.is_finite() || !w1.is_finite() || w1 < w0 {
        return Err(Error::InvalidArgument(format!(
            "empty metrics window [{w0}, {w1}]"
        )));
    }
    let eps = 1e-12;
    let in_window: Vec<f64> = series
        .samples
        .iter()
        .filter(|s| s.t >= w0 - eps && s.t <= w1 + eps)
        .map(|s| s.err_dist)
        .collect();
    if in_window.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no samples inside window [{w0}, {w1}]"
        )));
    }
    let n = in_window.len() as f64;
    let mean = in_window.iter().sum::<f64>() / n;
    let std = if in_window.len() > 1 {
        (in_window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };

    let first_time_below_0p01 = series
        .samples
        .iter()
        .find(|s| s.err_dist < CONVERGENCE_THRESHOLD)
        .map(|s| s.t);
    let last_above = series
        .samples
        .iter()
        .rposition(|s| s.err_dist >= CONVERGENCE_THRESHOLD);
    let convergence_time_to_0p01 = match last_above {
        None => series.samples.first().map(|s| s.t),
        Some(i) if i + 1 < series.samples.len() => Some(series.samples[i + 1].t),
        Some(_) => None,
    };

    Ok(RunMetrics {
        filter: series.filter,
        seed: series.seed,
        window,
        mean_err_dist: mean,
        std_err_dist: std,
        final_err_dist: series.samples.last().map(|s| s.err_dist).unwrap_or(f64::NAN),
        convergence_time_to_0p01,
        first_time_below_0p01,
    })
}

/// Across-seed aggregate for one filter.
#[derive(Debug, Clone, Copy)]
pub struct FilterSummary {
    pub filter: FilterKind,
    pub n_seeds: usize,
    pub mean_of_means: f64,
    pub median_of_means: f64,
    pub min_mean: f64,
    pub max_mean: f64,
    pub mean_of_stds: f64,
    pub median_of_stds: f64,
    /// Seeds whose error first drops below 0.01 within 5 s of the start.
    pub reached_0p01_by_5s: usize,
    /// Seeds whose sustained convergence time lies within 5 s of the start.
    pub sustained_0p01_by_5s: usize,
}

/// A full Monte-Carlo comparison: per-trial metrics (paired by seed) plus
/// per-filter summaries.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub window: (f64, f64),
    pub seeds: Vec<u64>,
    pub filters: Vec<FilterKind>,
    /// Metrics in seed-major order: `trials[seed_idx][filter_idx]`.
    pub trials: Vec<Vec<RunMetrics>>,
    pub summaries: Vec<FilterSummary>,
}

impl MonteCarloReport {
    /// Metrics of one filter across seeds, in seed order.
    pub fn metrics_for(&self, filter: FilterKind) -> Vec<&RunMetrics> {
        let idx = self
            .filters
            .iter()
            .position(|f| *f == filter)
            .expect("filter present in report");
        self.trials.iter().map(|row| &row[idx]).collect()
    }

    pub fn summary_for(&self, filter: FilterKind) -> &FilterSummary {
        self.summaries
            .iter()
            .find(|s| s.filter == filter)
            .expect("filter present in report")
    }
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Runs the scenario's seeds over `filters` (paired streams per seed) and
/// aggregates windowed metrics.
pub fn run_monte_carlo(scenario: &Scenario, filters: &[FilterKind]) -> Result<MonteCarloReport> {
    if filters.is_empty() {
        return Err(Error::InvalidArgument("no filters selected".into()));
    }
    let window = default_window(scenario);
    let trials: Result<Vec<Vec<RunMetrics>>> = scenario
        .seeds
        .par_iter()
        .map(|&seed| {
            let stream = synthesize_stream(scenario, seed)?;
            filters
                .iter()
                .map(|&f| {
                    let series = run_filter_over_stream(scenario, &stream, f)?;
                    compute_metrics(&series, window)
                })
                .collect()
        })
        .collect();
    Ok(aggregate_metrics(
        scenario.grid.t0,
        window,
        scenario.seeds.clone(),
        filters.to_vec(),
        trials?,
    ))
}

/// Builds the report from pre-computed seed-major trial metrics.
pub fn aggregate_metrics(
    t0: f64,
    window: (f64, f64),
    seeds: Vec<u64>,
    filters: Vec<FilterKind>,
    trials: Vec<Vec<RunMetrics>>,
) -> MonteCarloReport {
    let summaries = filters
        .iter()
        .enumerate()
        .map(|(fi, &filter)| {
            let mut means: Vec<f64> = trials.iter().map(|row| row[fi].mean_err_dist).collect();
            let mut stds: Vec<f64> = trials.iter().map(|row| row[fi].std_err_dist).collect();
            let n = means.len() as f64;
            let mean_of_means = means.iter().sum::<f64>() / n;
            let mean_of_stds = stds.iter().sum::<f64>() / n;
            let min_mean = means.iter().cloned().fold(f64::INFINITY, f64::min);
            let max_mean = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let reached_0p01_by_5s = trials
                .iter()
                .filter(|row| {
                    row[fi]
                        .first_time_below_0p01
                        .map(|t| t <= t0 + 5.0)
                        .unwrap_or(false)
                })
                .count();
            let sustained_0p01_by_5s = trials
                .iter()
                .filter(|row| {
                    row[fi]
                        .convergence_time_to_0p01
                        .map(|t| t <= t0 + 5.0)
                        .unwrap_or(false)
                })
                .count();
            FilterSummary {
                filter,
                n_seeds: trials.len(),
                mean_of_means,
                median_of_means: median(&mut means),
                min_mean,
                max_mean,
                mean_of_stds,
                median_of_stds: median(&mut stds),
                reached_0p01_by_5s,
                sustained_0p01_by_5s,
            }
        })
        .collect();

    MonteCarloReport {
        window,
        seeds,
        filters,
        trials,
        summaries,
    }
}

/// 17-significant-digit float formatting shared by every text output.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders a trial time series in the fixed CSV schema
/// (`t, err_dist, rho_err_*, bhat_*, sigmahat_*, euler_true, euler_est, validity_flag`).
pub fn render_series_csv(series: &TrialSeries) -> String {
    let mut out = String::with_capacity(series.samples.len() * 420 + 256);
    out.push_str(
        "t,err_dist,rho_err_x,rho_err_y,rho_err_z,bhat_x,bhat_y,bhat_z,\
         sigmahat_x,sigmahat_y,sigmahat_z,phi_true,theta_true,psi_true,\
         phi_est,theta_est,psi_est,validity_flag\n",
    );
    for s in &series.samples {
        let rho = s.rho_err.unwrap_or(Vector3::repeat(f64::NAN));
        let cols = [
            s.t,
            s.err_dist,
            rho.x,
            rho.y,
            rho.z,
            s.b_hat.x,
            s.b_hat.y,
            s.b_hat.z,
            s.sigma_hat.x,
            s.sigma_hat.y,
            s.sigma_hat.z,
            s.euler_true.phi,
            s.euler_true.theta,
            s.euler_true.psi,
            s.euler_est.phi,
            s.euler_est.theta,
            s.euler_est.psi,
        ];
        let mut row = cols.iter().map(|v| fmt17(*v)).collect::<Vec<_>>().join(",");
        row.push(',');
        row.push(if s.validity_flag() { '1' } else { '0' });
        row.push('\n');
        out.push_str(&row);
    }
    out
}

/// Renders per-trial metrics of a Monte-Carlo report as CSV (seed-major, the
/// paired-comparison table).
pub fn render_metrics_csv(report: &MonteCarloReport) -> String {
    let mut out = String::new();
    out.push_str(
        "filter,seed,window_start,window_end,mean_err_dist,std_err_dist,final_err_dist,\
         convergence_time_to_0p01,first_time_below_0p01\n",
    );
    for row in &report.trials {
        for m in row {
            let conv = m
                .convergence_time_to_0p01
                .map(fmt17)
                .unwrap_or_default();
            let first = m.first_time_below_0p01.map(fmt17).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                m.filter,
                m.seed,
                fmt17(m.window.0),
                fmt17(m.window.1),
                fmt17(m.mean_err_dist),
                fmt17(m.std_err_dist),
                fmt17(m.final_err_dist),
                conv,
                first
            ));
        }
    }
    out
}

/// Renders the machine-readable summary report (`key = value` lines).
pub fn render_report(report: &MonteCarloReport) -> String {
    let mut out = String::new();
    out.push_str("schema = so3-filters/montecarlo/1\n");
    out.push_str(&format!("window_start = {}\n", fmt17(report.window.0)));
    out.push_str(&format!("window_end = {}\n", fmt17(report.window.1)));
    out.push_str(&format!(
        "seeds = {}\n",
        report
            .seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    out.push_str(&format!(
        "filters = {}\n",
        report
            .filters
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    for s in &report.summaries {
        let p = format!("filter.{}", s.filter);
        out.push_str(&format!("{p}.n_seeds = {}\n", s.n_seeds));
        out.push_str(&format!("{p}.mean_err_dist.mean = {}\n", fmt17(s.mean_of_means)));
        out.push_str(&format!(
            "{p}.mean_err_dist.median = {}\n",
            fmt17(s.median_of_means)
        ));
        out.push_str(&format!("{p}.mean_err_dist.min = {}\n", fmt17(s.min_mean)));
        out.push_str(&format!("{p}.mean_err_dist.max = {}\n", fmt17(s.max_mean)));
        out.push_str(&format!("{p}.std_err_dist.mean = {}\n", fmt17(s.mean_of_stds)));
        out.push_str(&format!(
            "{p}.std_err_dist.median = {}\n",
            fmt17(s.median_of_stds)
        ));
        out.push_str(&format!("{p}.reached_0p01_by_5s = {}\n", s.reached_0p01_by_5s));
        out.push_str(&format!(
            "{p}.sustained_0p01_by_5s = {}\n",
            s.sustained_0p01_by_5s
        ));
    }
    for row in &report.trials {
        for m in row {
            let p = format!("pair.seed{}.{}", m.seed, m.filter);
            out.push_str(&format!("{p}.mean_err_dist = {}\n", fmt17(m.mean_err_dist)));
            out.push_str(&format!("{p}.std_err_dist = {}\n", fmt17(m.std_err_dist)));
            out.push_str(&format!("{p}.final_err_dist = {}\n", fmt17(m.final_err_dist)));
            out.push_str(&format!(
                "{p}.convergence_time = {}\n",
                m.convergence_time_to_0p01
                    .map(fmt17)
                    .unwrap_or_else(|| "none".into())
            ));
            out.push_str(&format!(
                "{p}.first_time_below_0p01 = {}\n",
                m.first_time_below_0p01
                    .map(fmt17)
                    .unwrap_or_else(|| "none".into())
            ));
        }
    }
    out
}
