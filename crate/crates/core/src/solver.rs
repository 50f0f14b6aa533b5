//! Outer alternation between the power step and the phase step.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::metrics::{
    effective_gain, sinr, spectral_efficiency, uniform_feed, GainMode, LinkBudget, RisArchitecture, RisState,
};
use crate::phase::{dris_baseline, riemannian_ascend_observed, ManifoldStepConfig, PhaseTrace};
use crate::power::{allocate, PowerRule, PowerSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub gain_mode: GainMode,
    pub power_rule: PowerRule,
    pub step: ManifoldStepConfig,
    /// Stop once `|SE_{t+1} − SE_t|` drops below this (bits/s/Hz).
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gain_mode: GainMode::FeedVector,
            power_rule: PowerRule::BoundaryOptimal,
            step: ManifoldStepConfig::default(),
            outer_tol: 1e-5,
            max_outer: 50,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) {
            return Err(Error::invalid("outer_tol", "must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::invalid("max_outer", "must be at least 1"));
        }
        self.step.validate()
    }
}

/// State after the power step of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterIterate {
    pub index: usize,
    pub power: PowerSolution,
    pub h_gain: f64,
    pub g_gain: f64,
    pub se: f64,
    pub interference: f64,
    /// Inner iterations spent in the phase step that followed, if any.
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub p_s_star: f64,
    pub phi_star: RisState,
    pub se_trace: Vec<f64>,
    pub interference_final: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub iterates: Vec<OuterIterate>,
    /// Inner traces, one per phase step taken.
    pub phase_traces: Vec<PhaseTrace>,
}

impl SolverReport {
    pub fn spectral_efficiency(&self) -> f64 {
        self.se_trace.last().copied().unwrap_or(0.0)
    }
}

fn power_step(
    chan: &ChannelRealization,
    ris: &RisState,
    budget: &LinkBudget,
    opts: &SolverOptions,
    index: usize,
) -> Result<OuterIterate> {
    let h_gain = effective_gain(&chan.h, ris, opts.gain_mode)?;
    let g_gain = effective_gain(&chan.g, ris, opts.gain_mode)?;
    let power = allocate(opts.power_rule, h_gain, g_gain, chan.f, budget);
    Ok(OuterIterate {
        index,
        power,
        h_gain,
        g_gain,
        se: spectral_efficiency(sinr(h_gain, power.p_s, chan.f, budget)),
        interference: g_gain * power.p_s,
        inner_iterations: 0,
        inner_converged: true,
    })
}

fn check_inputs(chan: &ChannelRealization, budget: &LinkBudget, opts: &SolverOptions) -> Result<()> {
    chan.validate()?;
    budget.validate()?;
    opts.validate()
}

fn report(ris: RisState, iterates: Vec<OuterIterate>, phase_traces: Vec<PhaseTrace>, converged: bool) -> SolverReport {
    let last = *iterates.last().expect("at least one power step");
    SolverReport {
        p_s_star: last.power.p_s,
        phi_star: ris,
        se_trace: iterates.iter().map(|it| it.se).collect(),
        interference_final: last.interference,
        outer_iters: iterates.len(),
        converged,
        iterates,
        phase_traces,
    }
}

/// Alternate power and phase steps from `Φ₀ = I` with the uniform feed.
pub fn solve(chan: &ChannelRealization, budget: &LinkBudget, opts: &SolverOptions) -> Result<SolverReport> {
    solve_observed(chan, budget, opts, |_| {})
}

/// [`solve`], calling `observe` on every retracted phase candidate.
pub fn solve_observed(
    chan: &ChannelRealization,
    budget: &LinkBudget,
    opts: &SolverOptions,
    mut observe: impl FnMut(&CMatrix),
) -> Result<SolverReport> {
    check_inputs(chan, budget, opts)?;
    let m = chan.element_count();
    let mut ris = RisState::identity(m);

    if chan.h.iter().all(|z| z.norm_sqr() == 0.0) {
        let mut first = power_step(chan, &ris, budget, opts, 0)?;
        first.power.p_s = 0.0;
        first.interference = 0.0;
        first.se = 0.0;
        return Ok(report(ris, vec![first], Vec::new(), true));
    }

    let mut iterates: Vec<OuterIterate> = Vec::new();
    let mut traces = Vec::new();
    let mut converged = false;
    for t in 0..opts.max_outer {
        let current = power_step(chan, &ris, budget, opts, t)?;
        let previous_se = iterates.last().map(|it| it.se);
        iterates.push(current);
        if let Some(prev) = previous_se {
            if (current.se - prev).abs() < opts.outer_tol {
                converged = true;
                break;
            }
        }
        if t + 1 == opts.max_outer {
            break;
        }
        let (next, trace) = riemannian_ascend_observed(
            chan,
            &ris,
            opts.gain_mode,
            current.power.p_s,
            budget,
            &opts.step,
            &mut observe,
        )?;
        let last = iterates.last_mut().expect("pushed above");
        last.inner_iterations = trace.iterates.len();
        last.inner_converged = trace.converged;
        traces.push(trace);
        ris = next;
    }
    Ok(report(ris, iterates, traces, converged))
}

/// Power step only, with `ris` held fixed.
pub fn solve_fixed(
    chan: &ChannelRealization,
    budget: &LinkBudget,
    opts: &SolverOptions,
    ris: RisState,
) -> Result<SolverReport> {
    check_inputs(chan, budget, opts)?;
    ris.validate()?;
    let first = power_step(chan, &ris, budget, opts, 0)?;
    Ok(report(ris, vec![first], Vec::new(), true))
}

/// Diagonal-RIS baseline: co-phased `Φ`, then one power step.
pub fn solve_dris(chan: &ChannelRealization, budget: &LinkBudget, opts: &SolverOptions) -> Result<SolverReport> {
    chan.validate()?;
    let ris = dris_baseline(&chan.h, &uniform_feed(chan.element_count()))?;
    solve_fixed(chan, budget, opts, ris)
}

pub fn solve_architecture(
    arch: RisArchitecture,
    chan: &ChannelRealization,
    budget: &LinkBudget,
    opts: &SolverOptions,
) -> Result<SolverReport> {
    match arch {
        RisArchitecture::Bd => solve(chan, budget, opts),
        RisArchitecture::D => solve_dris(chan, budget, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use crate::linalg::{CVector, C64};

    fn budget() -> LinkBudget {
        LinkBudget {
            p_max: 1.0,
            q_p: 10.0,
            sigma2: 1e-9,
            i_th: 0.1,
        }
    }

    #[test]
    fn zero_channel_gives_zero_rate() {
        let chan = ChannelRealization {
            h: CVector::zeros(4),
            g: CVector::from_element(4, C64::new(1.0, 0.0)),
            f: C64::new(1.0, 0.0),
        };
        for report in [
            solve(&chan, &budget(), &SolverOptions::default()).unwrap(),
            solve_dris(&chan, &budget(), &SolverOptions::default()).unwrap(),
        ] {
            assert_eq!(report.spectral_efficiency(), 0.0);
            assert!(report.converged);
        }
    }

    #[test]
    fn scalar_closed_form() {
        let model = ChannelModel::normalized(1, 1, 10.0);
        for trial in 0..20 {
            let chan = model.draw(3, trial).unwrap();
            let b = budget();
            let report = solve(&chan, &b, &SolverOptions::default()).unwrap();
            let h = chan.h[0].norm_sqr();
            let g = chan.g[0].norm_sqr();
            let p = b.p_max.min(b.i_th / g);
            let expected = (1.0 + h * p / (b.sigma2 + chan.f.norm_sqr() * b.q_p)).log2();
            assert!((report.spectral_efficiency() - expected).abs() < 1e-6);
            let d = solve_dris(&chan, &b, &SolverOptions::default()).unwrap();
            // Equal up to the rounding of a unit-modulus phase factor.
            let (bd, d) = (report.spectral_efficiency(), d.spectral_efficiency());
            assert!((bd - d).abs() <= 1e-14 * bd.max(1e-300), "{bd} vs {d}");
        }
    }

    #[test]
    fn dris_is_a_single_power_step() {
        let model = ChannelModel::normalized(2, 4, 10.0);
        let chan = model.draw(1, 0).unwrap();
        let b = budget();
        let opts = SolverOptions::default();
        let report = solve_dris(&chan, &b, &opts).unwrap();
        assert_eq!(report.outer_iters, 1);
        let ris = dris_baseline(&chan.h, &uniform_feed(8)).unwrap();
        let h = effective_gain(&chan.h, &ris, opts.gain_mode).unwrap();
        let g = effective_gain(&chan.g, &ris, opts.gain_mode).unwrap();
        let p = allocate(opts.power_rule, h, g, chan.f, &b).p_s;
        let se = spectral_efficiency(sinr(h, p, chan.f, &b));
        assert!((report.spectral_efficiency() - se).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_options() {
        let model = ChannelModel::normalized(2, 2, 10.0);
        let chan = model.draw(1, 0).unwrap();
        let opts = SolverOptions {
            max_outer: 0,
            ..Default::default()
        };
        assert!(solve(&chan, &budget(), &opts).is_err());
        let mut chan = chan;
        chan.g = CVector::zeros(3);
        assert!(solve(&chan, &budget(), &SolverOptions::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let model = ChannelModel::normalized(4, 8, 10.0);
        let chan = model.draw(11, 4).unwrap();
        let a = solve(&chan, &budget(), &SolverOptions::default()).unwrap();
        let b = solve(&chan, &budget(), &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
