//! Seeded Monte Carlo sweeps over the solver.
//!
//! A sweep varies one quantity (transmit power cap, element count or
//! interference threshold) and, for every value, architecture and trial,
//! draws a channel from the trial's derived streams and solves the link.
//! Each sweep runs one or more *series*: the interference thresholds in
//! `i_th_list` for power and element sweeps, the power levels in
//! `p_s_dbm_list` for threshold sweeps.
//!
//! The channel of trial `t` depends only on `(master_seed, t)`, so every
//! architecture and sweep value sees the same draws, and growing `trials`
//! leaves earlier rows untouched.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::metrics::{GainMode, LinkBudget, RisArchitecture};
use crate::phase::ManifoldStepConfig;
use crate::power::PowerRule;
use crate::solver::{solve_architecture, SolverOptions};
use crate::units::dbm_to_watts;

/// Environment variable overriding the worker count of parallel sweeps.
pub const WORKERS_ENV: &str = "BDRIS_WORKERS";

pub const CSV_HEADER: [&str; 8] = [
    "sweep_value",
    "architecture",
    "trial",
    "se_bits",
    "ps_w",
    "interference_w",
    "iters",
    "converged",
];

pub const SUMMARY_HEADER: [&str; 6] = [
    "sweep_value",
    "architecture",
    "trials",
    "mean_se_bits",
    "stddev_se_bits",
    "stderr_se_bits",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Sweep the ST power cap, in dBm.
    PowerSweep,
    /// Sweep the number of surface elements.
    ElementSweep,
    /// Sweep the interference threshold, in watts.
    IthSweep,
}

impl SweepKind {
    /// Short tag of the series axis, used in file names.
    pub fn series_tag(self) -> &'static str {
        match self {
            SweepKind::PowerSweep | SweepKind::ElementSweep => "ith",
            SweepKind::IthSweep => "ps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedParams {
    pub p_s_dbm: f64,
    /// Power levels of a threshold sweep; empty means `[p_s_dbm]`.
    pub p_s_dbm_list: Vec<f64>,
    pub q_p_dbm: f64,
    pub m: usize,
    pub mx: usize,
    pub my: usize,
    pub k_factor: f64,
    pub i_th_list: Vec<f64>,
    pub sigma2_w: f64,
    pub gain_mode: GainMode,
    pub power_rule: PowerRule,
    pub architectures: Vec<RisArchitecture>,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self {
            p_s_dbm: 30.0,
            p_s_dbm_list: Vec::new(),
            q_p_dbm: 40.0,
            m: 32,
            mx: 4,
            my: 8,
            k_factor: 10.0,
            i_th_list: vec![0.01, 0.1],
            sigma2_w: 1e-9,
            gain_mode: GainMode::FeedVector,
            power_rule: PowerRule::BoundaryOptimal,
            architectures: vec![RisArchitecture::Bd, RisArchitecture::D],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub sweep: SweepKind,
    pub sweep_values: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub fixed: FixedParams,
    pub step: ManifoldStepConfig,
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::defaults_for(SweepKind::PowerSweep)
    }
}

impl ExperimentConfig {
    /// Standard campaign for each sweep: 1000 trials, `P_s = 30 dBm`,
    /// `Q_p = 40 dBm`, `M = 32`, `K = 10`.
    pub fn defaults_for(sweep: SweepKind) -> Self {
        let mut fixed = FixedParams::default();
        let sweep_values = match sweep {
            SweepKind::PowerSweep => (0..=8).map(|i| 5.0 * i as f64).collect(),
            SweepKind::ElementSweep => vec![8.0, 16.0, 32.0, 64.0],
            SweepKind::IthSweep => {
                fixed.p_s_dbm_list = vec![5.0, 20.0, 30.0];
                vec![1e-3, 1e-2, 1e-1, 1.0]
            }
        };
        let solver = SolverOptions::default();
        Self {
            sweep,
            sweep_values,
            trials: 1000,
            master_seed: 1,
            fixed,
            step: solver.step,
            outer_tol: solver.outer_tol,
            max_outer: solver.max_outer,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            gain_mode: self.fixed.gain_mode,
            power_rule: self.fixed.power_rule,
            step: self.step,
            outer_tol: self.outer_tol,
            max_outer: self.max_outer,
        }
    }

    /// Values of the series axis, in run order.
    pub fn series_values(&self) -> Vec<f64> {
        match self.sweep {
            SweepKind::PowerSweep | SweepKind::ElementSweep => self.fixed.i_th_list.clone(),
            SweepKind::IthSweep if self.fixed.p_s_dbm_list.is_empty() => vec![self.fixed.p_s_dbm],
            SweepKind::IthSweep => self.fixed.p_s_dbm_list.clone(),
        }
    }

    /// Architectures in canonical order, without duplicates.
    pub fn architectures(&self) -> Vec<RisArchitecture> {
        let mut archs = self.fixed.architectures.clone();
        archs.sort();
        archs.dedup();
        archs
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sweep_values.is_empty() {
            return fail("sweep_values must not be empty".into());
        }
        if self.sweep_values.iter().any(|v| !v.is_finite()) {
            return fail("sweep_values must be finite".into());
        }
        if self.sweep_values.windows(2).any(|w| w[1] <= w[0]) {
            return fail("sweep_values must be strictly increasing".into());
        }
        if self.trials == 0 {
            return fail("trials must be positive".into());
        }
        if self.fixed.architectures.is_empty() {
            return fail("at least one architecture is required".into());
        }
        let series = self.series_values();
        if series.is_empty() {
            return fail(match self.sweep {
                SweepKind::IthSweep => "p_s_dbm_list must not be empty".into(),
                _ => "i_th_list must not be empty".into(),
            });
        }
        match self.sweep {
            SweepKind::PowerSweep | SweepKind::ElementSweep => {
                if series.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return fail("i_th_list entries must be non-negative watts".into());
                }
            }
            SweepKind::IthSweep => {
                if series.iter().any(|v| !v.is_finite()) {
                    return fail("p_s_dbm_list entries must be finite".into());
                }
                if self.sweep_values.iter().any(|v| *v < 0.0) {
                    return fail("interference thresholds must be non-negative".into());
                }
            }
        }
        match self.sweep {
            SweepKind::ElementSweep => {
                for &v in &self.sweep_values {
                    if v < 1.0 || v.fract() != 0.0 {
                        return fail(format!("element counts must be positive integers, got {v}"));
                    }
                }
            }
            _ => {
                if self.fixed.mx * self.fixed.my != self.fixed.m || self.fixed.m == 0 {
                    return fail(format!(
                        "mx*my = {}*{} does not equal m = {}",
                        self.fixed.mx, self.fixed.my, self.fixed.m
                    ));
                }
            }
        }
        if !(self.fixed.k_factor >= 0.0) {
            return fail("k_factor must be non-negative".into());
        }
        if !(self.fixed.sigma2_w > 0.0) {
            return fail("sigma2_w must be positive".into());
        }
        if !self.fixed.q_p_dbm.is_finite() || !self.fixed.p_s_dbm.is_finite() {
            return fail("dBm levels must be finite".into());
        }
        self.solver_options()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Budget and channel model of one `(series, sweep value)` point.
    pub fn scenario(&self, series_value: f64, sweep_value: f64) -> (LinkBudget, ChannelModel) {
        let fx = &self.fixed;
        let (p_max_dbm, i_th, (mx, my)) = match self.sweep {
            SweepKind::PowerSweep => (sweep_value, series_value, (fx.mx, fx.my)),
            SweepKind::ElementSweep => (fx.p_s_dbm, series_value, element_shape(sweep_value as usize)),
            SweepKind::IthSweep => (series_value, sweep_value, (fx.mx, fx.my)),
        };
        let budget = LinkBudget {
            p_max: dbm_to_watts(p_max_dbm),
            q_p: dbm_to_watts(fx.q_p_dbm),
            sigma2: fx.sigma2_w,
            i_th,
        };
        (budget, ChannelModel::normalized(mx, my, fx.k_factor))
    }
}

/// Near-square planar shape `(Mx, My)` with `Mx ≤ My` and `Mx·My = M`.
pub fn element_shape(m: usize) -> (usize, usize) {
    let mx = (1..=m)
        .take_while(|d| d * d <= m)
        .filter(|d| m.is_multiple_of(*d))
        .last()
        .unwrap_or(1);
    (mx, m / mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub series_value: f64,
    pub sweep_value: f64,
    pub architecture: RisArchitecture,
    pub trial_index: usize,
    pub se_bits: f64,
    pub ps_w: f64,
    pub interference_w: f64,
    pub i_th_w: f64,
    pub outer_iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Worker pool sized by [`WORKERS_ENV`] when set.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy)]
struct WorkItem {
    series_value: f64,
    sweep_value: f64,
    architecture: RisArchitecture,
    trial: usize,
}

fn run_item(cfg: &ExperimentConfig, opts: &SolverOptions, item: WorkItem) -> Result<TrialResult> {
    let (budget, model) = cfg.scenario(item.series_value, item.sweep_value);
    let chan = model.draw(cfg.master_seed, item.trial as u64)?;
    let report = solve_architecture(item.architecture, &chan, &budget, opts)?;
    Ok(TrialResult {
        series_value: item.series_value,
        sweep_value: item.sweep_value,
        architecture: item.architecture,
        trial_index: item.trial,
        se_bits: report.spectral_efficiency(),
        ps_w: report.p_s_star,
        interference_w: report.interference_final,
        i_th_w: budget.i_th,
        outer_iters: report.outer_iters,
        converged: report.converged,
    })
}

/// Runs the sweep with the default execution mode.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    run_sweep_with(cfg, Execution::default())
}

/// Rows come back ordered by (series, sweep value, architecture, trial)
/// regardless of `exec`.
pub fn run_sweep_with(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let opts = cfg.solver_options();
    let archs = cfg.architectures();
    let mut items = Vec::new();
    for &series_value in &cfg.series_values() {
        for &sweep_value in &cfg.sweep_values {
            for &architecture in &archs {
                items.extend((0..cfg.trials).map(|trial| WorkItem {
                    series_value,
                    sweep_value,
                    architecture,
                    trial,
                }));
            }
        }
    }
    match exec {
        Execution::Serial => items.into_iter().map(|it| run_item(cfg, &opts, it)).collect(),
        Execution::Parallel => run_parallel(cfg, &opts, &items),
    }
}

#[cfg(feature = "parallel")]
fn run_parallel(cfg: &ExperimentConfig, opts: &SolverOptions, items: &[WorkItem]) -> Result<Vec<TrialResult>> {
    use rayon::prelude::*;

    let work = || items.par_iter().map(|&it| run_item(cfg, opts, it)).collect();
    match worker_override()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(work),
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(cfg: &ExperimentConfig, opts: &SolverOptions, items: &[WorkItem]) -> Result<Vec<TrialResult>> {
    items.iter().map(|&it| run_item(cfg, opts, it)).collect()
}

#[cfg(feature = "parallel")]
fn worker_override() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {s:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Mean and spread of `se_bits` for one `(sweep value, architecture)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep_value: f64,
    pub architecture: RisArchitecture,
    pub trials: usize,
    pub mean_se: f64,
    /// Sample standard deviation; zero for a single trial.
    pub stddev_se: f64,
    pub stderr_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per-cell statistics, sorted by sweep value then architecture.
///
/// Values are summed in sorted order so the result does not depend on the
/// order of `results`.
pub fn aggregate(results: &[TrialResult]) -> Result<Vec<SweepSummary>> {
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut cells: BTreeMap<(Key, RisArchitecture), Vec<f64>> = BTreeMap::new();
    for r in results {
        cells
            .entry((Key(r.sweep_value), r.architecture))
            .or_default()
            .push(r.se_bits);
    }
    Ok(cells
        .into_iter()
        .map(|((Key(sweep_value), architecture), mut values)| {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let stddev = if n > 1 {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                (ss / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SweepSummary {
                sweep_value,
                architecture,
                trials: n,
                mean_se: mean,
                stddev_se: stddev,
                stderr_se: stddev / (n as f64).sqrt(),
            }
        })
        .collect())
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        format!("{}e{}", trim_fraction(mantissa), exp)
    } else {
        let decimals = (11 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Trial rows as CSV into any writer.
pub fn write_csv_to<W: Write>(results: &[TrialResult], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.write_record([
            format_real(r.sweep_value),
            r.architecture.label().to_string(),
            r.trial_index.to_string(),
            format_real(r.se_bits),
            format_real(r.ps_w),
            format_real(r.interference_w),
            r.outer_iters.to_string(),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv_to<W: Write>(summary: &[SweepSummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in summary {
        w.write_record([
            format_real(s.sweep_value),
            s.architecture.label().to_string(),
            s.trials.to_string(),
            format_real(s.mean_se),
            format_real(s.stddev_se),
            format_real(s.stderr_se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv(results: &[TrialResult], path: &Path) -> Result<()> {
    write_csv_to(results, create(path)?).map_err(csv_error(path))
}

pub fn write_summary_csv(summary: &[SweepSummary], path: &Path) -> Result<()> {
    write_summary_csv_to(summary, create(path)?).map_err(csv_error(path))
}
