//! Phase-shift design on the unitary group.
//!
//! For a fixed transmit power the surface maximizes the SINR surrogate
//! `f(Φ) = gain(h)·P_s / (σ² + |f|²Q_p)` subject to the interference cap
//! `gain(g)·P_s ≤ I_th` and `ΦΦᴴ = I`. The cap is handled with the
//! Lagrangian
//!
//! ```text
//! L(Φ, μ) = f(Φ) − μ (gain(g)·P_s − I_th)
//! ```
//!
//! Each iteration projects the Euclidean gradient of `L` onto the tangent
//! space `{P : ΦᴴP + PᴴΦ = 0}`, takes an Armijo-backtracked ascent step and
//! maps the result back to the group with the polar factor `UVᴴ` of its SVD.
//! For the feed-vector gain the gradient is rank one, so `ΦᴴP` is a rank-two
//! skew-Hermitian `K` and `polar(Φ + ηP) = Φ·polar(I + ηK)` only needs the SVD
//! of a 2×2 block; the dense SVD is used otherwise.
//! The multiplier follows a projected subgradient update and the iteration
//! stops once `‖Φ_{k+1} − Φ_k‖_F < ε`.
//!
//! The diagonal baseline ([`dris_baseline`]) co-phases every element, which
//! is optimal among unit-modulus diagonal matrices.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm, hermitian_dot, polar_factor, unitarity_error, CMatrix, CVector, C64};
use crate::metrics::{beam_gain, literal_norm_gain, GainMode, LinkBudget, RisArchitecture, RisState};

/// Trial steps never grow beyond this.
const MAX_STEP: f64 = 1e12;
/// Backtracking gives up once the step moves `Φ` by less than this.
const MIN_MOVE: f64 = 1e-15;
/// Relative slack on the interference cap.
const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifoldStepConfig {
    /// First trial step of the Armijo search. Steps are measured on the
    /// Lagrangian normalized by `P_s‖h‖²/(σ²+|f|²Q_p)`.
    pub eta0: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub max_inner: usize,
    /// Frobenius threshold on `‖Φ_{k+1} − Φ_k‖_F`.
    pub epsilon: f64,
    pub mu0: f64,
    /// Dimensionless multiplier step. Each iteration applies
    /// `μ ← [μ + ρ·μ_ref·clamp((gain(g)·P_s − I_th)/I_th, −1, 1)]⁺` with
    /// `μ_ref = ‖h‖² / ((σ²+|f|²Q_p)‖g‖²)`.
    pub rho: f64,
    /// Reject steps that increase the interference violation and return the
    /// best feasible iterate. With this off the final iterate is returned as is.
    pub enforce_feasibility: bool,
}

impl Default for ManifoldStepConfig {
    fn default() -> Self {
        Self {
            eta0: 0.1,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            max_inner: 500,
            epsilon: 1e-6,
            mu0: 0.0,
            rho: 1.0,
            enforce_feasibility: true,
        }
    }
}

impl ManifoldStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::invalid("eta0", format!("must be positive, got {}", self.eta0)));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::invalid("armijo_shrink", "must lie in (0, 1)"));
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 1.0) {
            return Err(Error::invalid("armijo_slope", "must lie in (0, 1)"));
        }
        if self.max_inner == 0 {
            return Err(Error::invalid("max_inner", "must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if !(self.mu0 >= 0.0 && self.mu0.is_finite()) {
            return Err(Error::invalid("mu0", "must be non-negative"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid("rho", "must be non-negative"));
        }
        Ok(())
    }
}

/// One inner iteration. Objective values are in natural (unnormalized) units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseIterate {
    pub index: usize,
    /// SINR surrogate `f(Φ)` after the iteration.
    pub objective: f64,
    /// `L(Φ_k, μ_k)` and `L(candidate, μ_k)`.
    pub lagrangian_before: f64,
    pub lagrangian_after: f64,
    /// `gain(g)·P_s − I_th` at the candidate.
    pub violation: f64,
    pub step_size: f64,
    pub delta: f64,
    pub mu: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub iterates: Vec<PhaseIterate>,
    pub converged: bool,
    pub final_delta: f64,
    pub mu_final: f64,
    /// `‖ΦΦᴴ − I‖_F` of the returned iterate.
    pub max_retraction_error: f64,
    pub retractions: usize,
}

/// The phase subproblem at fixed transmit power.
#[derive(Debug, Clone, Copy)]
pub struct PhaseProblem<'a> {
    pub h: &'a CVector,
    pub g: &'a CVector,
    pub gain_mode: GainMode,
    pub p_s: f64,
    /// `σ² + |f|² Q_p`.
    pub noise: f64,
    pub i_th: f64,
}

impl<'a> PhaseProblem<'a> {
    pub fn new(chan: &'a ChannelRealization, budget: &LinkBudget, gain_mode: GainMode, p_s: f64) -> Self {
        Self {
            h: &chan.h,
            g: &chan.g,
            gain_mode,
            p_s,
            noise: budget.interference_plus_noise(chan.f),
            i_th: budget.i_th,
        }
    }

    fn check(&self, phi: &CMatrix, feed: &CVector) -> Result<()> {
        let m = phi.nrows();
        for len in [phi.ncols(), feed.len(), self.h.len(), self.g.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: len,
                });
            }
        }
        Ok(())
    }

    /// `(gain(h), gain(g))`.
    pub fn gains(&self, phi: &CMatrix, feed: &CVector) -> (f64, f64) {
        match self.gain_mode {
            GainMode::FeedVector => {
                let beam = phi * feed;
                (beam_gain(self.h, &beam), beam_gain(self.g, &beam))
            }
            GainMode::LiteralNorm => (literal_norm_gain(self.h, phi), literal_norm_gain(self.g, phi)),
        }
    }

    pub fn objective(&self, phi: &CMatrix, feed: &CVector) -> f64 {
        self.gains(phi, feed).0 * self.p_s / self.noise
    }

    pub fn violation(&self, phi: &CMatrix, feed: &CVector) -> f64 {
        self.gains(phi, feed).1 * self.p_s - self.i_th
    }

    pub fn lagrangian(&self, phi: &CMatrix, feed: &CVector, mu: f64) -> f64 {
        let (h_gain, g_gain) = self.gains(phi, feed);
        h_gain * self.p_s / self.noise - mu * (g_gain * self.p_s - self.i_th)
    }

    /// `w` with `∇L = w aᴴ` in feed-vector mode.
    fn feed_gradient_factor(&self, phi: &CMatrix, feed: &CVector, mu: f64) -> CVector {
        let beam = phi * feed;
        let ch = hermitian_dot(self.h, &beam) * (2.0 * self.p_s / self.noise);
        let cg = hermitian_dot(self.g, &beam) * (2.0 * mu * self.p_s);
        self.h * ch - self.g * cg
    }

    /// Gradient of the Lagrangian for the real inner product `Re tr(AᴴB)`,
    /// i.e. twice the Wirtinger derivative with respect to `conj(Φ)`:
    ///
    /// - `FeedVector`: `2 (P_s/n)(hᴴΦa) h aᴴ − 2 μ P_s (gᴴΦa) g aᴴ`
    /// - `LiteralNorm`: `(2P_s/ln2) h̄ hᵀ Φ − 2 μ P_s ḡ gᵀ Φ`
    pub fn euclidean_gradient(&self, phi: &CMatrix, feed: &CVector, mu: f64) -> CMatrix {
        match self.gain_mode {
            GainMode::FeedVector => self.feed_gradient_factor(phi, feed, mu) * feed.adjoint(),
            GainMode::LiteralNorm => {
                let outer = |v: &CVector, scale: f64| -> CMatrix {
                    let row = v.transpose() * phi;
                    v.conjugate() * row * C64::new(scale, 0.0)
                };
                outer(self.h, 2.0 * self.p_s / LN_2) - outer(self.g, 2.0 * mu * self.p_s)
            }
        }
    }
}

/// `L(Φ, μ)` for a full link.
pub fn lagrangian_value(
    chan: &ChannelRealization,
    ris: &RisState,
    gmode: GainMode,
    p_s: f64,
    mu: f64,
    budget: &LinkBudget,
) -> Result<f64> {
    let problem = PhaseProblem::new(chan, budget, gmode, p_s);
    problem.check(&ris.phi, &ris.feed)?;
    Ok(problem.lagrangian(&ris.phi, &ris.feed, mu))
}

/// Euclidean gradient of [`lagrangian_value`] with respect to `Φ`.
pub fn euclidean_gradient(
    chan: &ChannelRealization,
    ris: &RisState,
    gmode: GainMode,
    p_s: f64,
    mu: f64,
    budget: &LinkBudget,
) -> Result<CMatrix> {
    let problem = PhaseProblem::new(chan, budget, gmode, p_s);
    problem.check(&ris.phi, &ris.feed)?;
    Ok(problem.euclidean_gradient(&ris.phi, &ris.feed, mu))
}

/// `G − Φ(ΦᴴG + GᴴΦ)/2`.
pub fn tangent_project(phi: &CMatrix, grad: &CMatrix) -> CMatrix {
    let inner = phi.adjoint() * grad;
    let sym = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    grad - phi * sym
}

/// Nearest unitary matrix via `X = UΣVᴴ ↦ UVᴴ`.
pub fn retract_svd(x: &CMatrix) -> Result<CMatrix> {
    polar_factor(x)
}

/// Tangent ascent direction `P`, kept factored when possible.
enum Direction {
    Dense(CMatrix),
    /// `P = Φ Q K Qᴴ` with orthonormal `Q` (M×r) and skew-Hermitian `K` (r×r).
    Reduced {
        basis: CMatrix,
        phi_basis: CMatrix,
        k: CMatrix,
    },
}

impl Direction {
    fn new(problem: &PhaseProblem<'_>, phi: &CMatrix, feed: &CVector, mu: f64, scale: f64) -> Self {
        if problem.gain_mode != GainMode::FeedVector {
            let grad = problem.euclidean_gradient(phi, feed, mu) / C64::new(scale, 0.0);
            return Direction::Dense(tangent_project(phi, &grad));
        }
        // ΦᴴG = b aᴴ, so ΦᴴP = (b aᴴ − a bᴴ)/2 lives on span{a, b}.
        let w = problem.feed_gradient_factor(phi, feed, mu) / C64::new(scale, 0.0);
        let b = phi.ad_mul(&w);
        let basis = orthonormal_basis(&[feed, &b]);
        let qa = basis.ad_mul(feed);
        let qb = basis.ad_mul(&b);
        let k = (&qb * qa.adjoint() - &qa * qb.adjoint()) * C64::new(0.5, 0.0);
        let phi_basis = phi * &basis;
        Direction::Reduced { basis, phi_basis, k }
    }

    fn norm_squared(&self) -> f64 {
        match self {
            Direction::Dense(p) => p.norm_squared(),
            Direction::Reduced { k, .. } => k.norm_squared(),
        }
    }

    /// `UVᴴ` of `Φ + ηP`.
    fn retract(&self, phi: &CMatrix, eta: f64) -> Result<CMatrix> {
        match self {
            Direction::Dense(p) => retract_svd(&(phi + p * C64::new(eta, 0.0))),
            Direction::Reduced { basis, phi_basis, k } => {
                let r = k.nrows();
                let w = polar_factor(&(CMatrix::identity(r, r) + k * C64::new(eta, 0.0)))?;
                Ok(phi + phi_basis * (w - CMatrix::identity(r, r)) * basis.adjoint())
            }
        }
    }
}

/// Modified Gram–Schmidt, dropping vectors that are numerically dependent.
fn orthonormal_basis(vectors: &[&CVector]) -> CMatrix {
    let m = vectors.first().map_or(0, |v| v.len());
    let mut columns: Vec<CVector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let norm = v.norm();
        if !(norm > 0.0) {
            continue;
        }
        let mut u = (*v).clone();
        for _ in 0..2 {
            for q in &columns {
                let coeff = q.dotc(&u);
                u -= q * coeff;
            }
        }
        let rest = u.norm();
        if rest > 1e-10 * norm {
            columns.push(u / C64::new(rest, 0.0));
        }
    }
    if columns.is_empty() {
        return CMatrix::zeros(m, 0);
    }
    CMatrix::from_columns(&columns)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
enum Merit {
    Infeasible(f64),
    Feasible(f64),
}

impl Merit {
    fn of(objective: f64, violation: f64, tolerance: f64) -> Self {
        if violation <= tolerance {
            Merit::Feasible(objective)
        } else {
            Merit::Infeasible(-violation)
        }
    }
}

fn relative_violation(violation: f64, i_th: f64) -> f64 {
    if i_th > 0.0 {
        violation / i_th
    } else if violation > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Riemannian gradient ascent on `L(·, μ)` starting from `ris0`.
///
/// Returns the best iterate (feasible before infeasible, then by SINR) when
/// feasibility is enforced, otherwise the last accepted iterate.
pub fn riemannian_ascend(
    chan: &ChannelRealization,
    ris0: &RisState,
    gmode: GainMode,
    p_s: f64,
    budget: &LinkBudget,
    cfg: &ManifoldStepConfig,
) -> Result<(RisState, PhaseTrace)> {
    riemannian_ascend_observed(chan, ris0, gmode, p_s, budget, cfg, |_| {})
}

/// [`riemannian_ascend`], calling `observe` on every retracted candidate.
pub fn riemannian_ascend_observed(
    chan: &ChannelRealization,
    ris0: &RisState,
    gmode: GainMode,
    p_s: f64,
    budget: &LinkBudget,
    cfg: &ManifoldStepConfig,
    mut observe: impl FnMut(&CMatrix),
) -> Result<(RisState, PhaseTrace)> {
    cfg.validate()?;
    let problem = PhaseProblem::new(chan, budget, gmode, p_s);
    problem.check(&ris0.phi, &ris0.feed)?;
    let feed = &ris0.feed;

    let mut trace = PhaseTrace {
        mu_final: cfg.mu0,
        ..PhaseTrace::default()
    };
    let h_norm2 = chan.h.norm_squared();
    let scale = p_s * h_norm2 / problem.noise;
    if !(scale > 0.0) || ris0.element_count() == 1 {
        // Either f ≡ 0 with a constant penalty, or Φ ∈ U(1) where every gain
        // is phase invariant.
        trace.converged = true;
        return Ok((ris0.clone(), trace));
    }
    let g_norm2 = chan.g.norm_squared();
    let mu_ref = if g_norm2 > 0.0 {
        h_norm2 / (problem.noise * g_norm2)
    } else {
        0.0
    };
    let tolerance = FEASIBILITY_SLACK * budget.i_th;

    let mut phi = ris0.phi.clone();
    let mut mu = cfg.mu0;
    let mut violation = problem.violation(&phi, feed);
    let mut best_phi = phi.clone();
    let mut best_merit = Merit::of(problem.objective(&phi, feed), violation, tolerance);
    let mut trial_step = cfg.eta0;

    for index in 0..cfg.max_inner {
        let direction = Direction::new(&problem, &phi, feed, mu, scale);
        let dir_norm2 = direction.norm_squared();
        let l_before = problem.lagrangian(&phi, feed, mu) / scale;
        if !(dir_norm2 > 0.0) {
            trace.converged = true;
            trace.final_delta = 0.0;
            break;
        }

        let mut eta = trial_step;
        let proposal = loop {
            let candidate = direction.retract(&phi, eta)?;
            trace.retractions += 1;
            observe(&candidate);
            let l_after = problem.lagrangian(&candidate, feed, mu) / scale;
            if l_after >= l_before + cfg.armijo_slope * eta * dir_norm2 {
                break Some((candidate, l_after));
            }
            eta *= cfg.armijo_shrink;
            if eta * dir_norm2.sqrt() < MIN_MOVE {
                break None;
            }
        };
        let Some((candidate, l_after)) = proposal else {
            // No ascent step survives at machine precision: stationary.
            trace.converged = true;
            trace.final_delta = 0.0;
            break;
        };

        let delta = frobenius_norm(&(&candidate - &phi));
        let cand_violation = problem.violation(&candidate, feed);
        let accepted = !cfg.enforce_feasibility || cand_violation <= tolerance || cand_violation <= violation;
        let objective = problem.objective(if accepted { &candidate } else { &phi }, feed);
        trace.iterates.push(PhaseIterate {
            index,
            objective,
            lagrangian_before: l_before * scale,
            lagrangian_after: l_after * scale,
            violation: cand_violation,
            step_size: eta,
            delta,
            mu,
            accepted,
        });

        if accepted {
            trace.final_delta = delta;
            if delta < cfg.epsilon {
                trace.converged = true;
                break;
            }
            phi = candidate;
            violation = cand_violation;
            let merit = Merit::of(objective, violation, tolerance);
            if merit > best_merit {
                best_merit = merit;
                best_phi.copy_from(&phi);
            }
            trial_step = (eta * 2.0).min(MAX_STEP);
        } else if cfg.rho == 0.0 {
            // The multiplier is frozen, so the same step would be proposed again.
            break;
        }

        if cfg.rho > 0.0 {
            let step = cfg.rho * mu_ref * relative_violation(cand_violation, budget.i_th).clamp(-1.0, 1.0);
            mu = (mu + step).max(0.0);
        }
    }
    trace.mu_final = mu;

    let phi_out = if cfg.enforce_feasibility { best_phi } else { phi };
    trace.max_retraction_error = unitarity_error(&phi_out);
    Ok((
        RisState {
            mode: RisArchitecture::Bd,
            phi: phi_out,
            feed: feed.clone(),
        },
        trace,
    ))
}

/// Co-phasing diagonal `Φ_mm = exp(−j·arg(conj(h_m)·a_m))`.
pub fn dris_baseline(h: &CVector, feed: &CVector) -> Result<RisState> {
    if h.len() != feed.len() {
        return Err(Error::DimensionMismatch {
            expected: feed.len(),
            actual: h.len(),
        });
    }
    let phases = CVector::from_iterator(
        h.len(),
        h.iter().zip(feed.iter()).map(|(hm, am)| {
            let z = hm.conj() * am;
            if z.norm_sqr() > 0.0 {
                C64::from_polar(1.0, -z.arg())
            } else {
                C64::new(1.0, 0.0)
            }
        }),
    );
    Ok(RisState {
        mode: RisArchitecture::D,
        phi: CMatrix::from_diagonal(&phases),
        feed: feed.clone(),
    })
}
