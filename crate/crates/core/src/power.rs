//! Secondary transmit power for a fixed surface state.
//!
//! With `Φ` fixed the rate `log₂(1 + h_gain·P_s/(σ² + |f|²Q_p))` is concave
//! and strictly increasing in `P_s`, subject to the interference cap
//! `g_gain·P_s ≤ I_th` and the power cap `0 ≤ P_s ≤ P_max`. Two rules are
//! provided:
//!
//! - [`power_kkt`]: the closed-form water-filling level
//!   `min([1/λ − (σ²+|f|²Q_p)/h_gain]⁺, P_max)` with `λ = g_gain/I_th`.
//! - [`power_boundary`]: `min(P_max, I_th/g_gain)`, the exact maximizer.
//!
//! Both are feasible; the boundary rule is never worse.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::metrics::{sinr, spectral_efficiency, LinkBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerRule {
    KktWaterFilling,
    #[default]
    BoundaryOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    InterferenceBound,
    PowerCap,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSolution {
    pub p_s: f64,
    /// Multiplier of the interference constraint.
    pub lambda: f64,
    /// Multiplier of `P_s ≥ 0`; zero whenever `P_s > 0`.
    pub mu: f64,
    pub binding: Binding,
}

/// `λ = g_gain / I_th`.
pub fn lambda_opt(g_gain: f64, i_th: f64) -> Result<f64> {
    if i_th <= 0.0 {
        return Err(Error::ZeroInterferenceThreshold);
    }
    Ok(g_gain / i_th)
}

/// Rate slope `d/dP log₂(1 + h P / n)` at `P`.
fn rate_slope(h_gain: f64, p_s: f64, noise: f64) -> f64 {
    h_gain / (LN_2 * (h_gain * p_s + noise))
}

/// Closed-form water-filling level with `λ = g_gain / I_th`.
pub fn power_kkt(h_gain: f64, g_gain: f64, f: C64, budget: &LinkBudget) -> PowerSolution {
    let noise = budget.interference_plus_noise(f);
    if h_gain <= 0.0 {
        return PowerSolution {
            p_s: 0.0,
            lambda: 0.0,
            mu: 0.0,
            binding: Binding::Interior,
        };
    }
    let (water_level, lambda) = if g_gain <= 0.0 {
        (budget.p_max, 0.0)
    } else {
        match lambda_opt(g_gain, budget.i_th) {
            Ok(lambda) => (1.0 / lambda, lambda),
            // I_th = 0 with a live PU channel: nothing may be transmitted.
            Err(_) => {
                return PowerSolution {
                    p_s: 0.0,
                    lambda: f64::INFINITY,
                    mu: 0.0,
                    binding: Binding::InterferenceBound,
                }
            }
        }
    };
    let unclipped = (water_level - noise / h_gain).max(0.0);
    let p_s = unclipped.min(budget.p_max);
    let binding = if p_s >= budget.p_max {
        Binding::PowerCap
    } else {
        Binding::Interior
    };
    let mu = if p_s > 0.0 {
        0.0
    } else {
        (rate_slope(h_gain, 0.0, noise) - lambda * g_gain).max(0.0)
    };
    PowerSolution {
        p_s,
        lambda,
        mu,
        binding,
    }
}

/// Exact maximizer: the tighter of the interference and power caps.
pub fn power_boundary(h_gain: f64, g_gain: f64, budget: &LinkBudget) -> PowerSolution {
    power_boundary_with_noise(h_gain, g_gain, budget, None)
}

fn power_boundary_with_noise(h_gain: f64, g_gain: f64, budget: &LinkBudget, noise: Option<f64>) -> PowerSolution {
    let interference_cap = if g_gain > 0.0 {
        budget.i_th / g_gain
    } else {
        f64::INFINITY
    };
    if interference_cap <= budget.p_max {
        let p_s = interference_cap;
        // Stationarity `slope(P) = λ g` with the nonnegativity multiplier inactive.
        let lambda = match noise {
            Some(n) if p_s > 0.0 => rate_slope(h_gain, p_s, n) / g_gain,
            _ => 0.0,
        };
        let mu = match noise {
            Some(n) if p_s == 0.0 => rate_slope(h_gain, 0.0, n),
            _ => 0.0,
        };
        PowerSolution {
            p_s,
            lambda,
            mu: if p_s == 0.0 { mu } else { 0.0 },
            binding: Binding::InterferenceBound,
        }
    } else {
        PowerSolution {
            p_s: budget.p_max,
            lambda: 0.0,
            mu: 0.0,
            binding: Binding::PowerCap,
        }
    }
}

/// Dispatch on `rule`.
pub fn allocate(rule: PowerRule, h_gain: f64, g_gain: f64, f: C64, budget: &LinkBudget) -> PowerSolution {
    match rule {
        PowerRule::KktWaterFilling => power_kkt(h_gain, g_gain, f, budget),
        PowerRule::BoundaryOptimal => {
            power_boundary_with_noise(h_gain, g_gain, budget, Some(budget.interference_plus_noise(f)))
        }
    }
}

/// Brute-force argmax of the rate over a uniform grid on `[0, P_max]`,
/// keeping only points with `g_gain·P ≤ I_th`.
pub fn power_oracle_grid(h_gain: f64, g_gain: f64, f: C64, budget: &LinkBudget, grid_points: usize) -> f64 {
    let n = grid_points.max(2);
    let step = budget.p_max / (n - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n {
        let p = if i == n - 1 { budget.p_max } else { i as f64 * step };
        if g_gain * p > budget.i_th {
            continue;
        }
        let se = spectral_efficiency(sinr(h_gain, p, f, budget));
        if best.is_none_or(|(_, b)| se > b) {
            best = Some((p, se));
        }
    }
    best.map_or(0.0, |(p, _)| p)
}

/// Centered second differences of `P ↦ log₂(1 + sinr(P))` over
/// `probe_points` equally spaced powers in `[0, P_max]` are all `≤ 1e-12`.
pub fn concavity_check(h_gain: f64, f: C64, budget: &LinkBudget, probe_points: usize) -> bool {
    let n = probe_points.max(3);
    let step = budget.p_max / (n - 1) as f64;
    let rate = |p: f64| spectral_efficiency(sinr(h_gain, p, f, budget));
    (1..n - 1).all(|i| {
        let p = i as f64 * step;
        rate(p + step) - 2.0 * rate(p) + rate(p - step) <= 1e-12
    })
}
