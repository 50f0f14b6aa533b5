//! Link-level metrics: effective gains through the RIS, SINR, spectral
//! efficiency and the interference seen by the primary user.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_dot, unitarity_error, CMatrix, CVector, C64};

/// Unitarity tolerance for BD-RIS states, `‖ΦΦᴴ − I‖_F`.
pub const UNITARY_TOLERANCE: f64 = 1e-8;
/// Modulus tolerance for D-RIS diagonal entries and the feed norm.
pub const MODULUS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RisArchitecture {
    /// Fully-connected beyond-diagonal RIS, `Φ` unitary.
    #[serde(rename = "BD", alias = "bd")]
    Bd,
    /// Conventional diagonal RIS with unit-modulus entries.
    #[serde(rename = "D", alias = "d")]
    D,
}

impl RisArchitecture {
    pub fn label(self) -> &'static str {
        match self {
            RisArchitecture::Bd => "BD",
            RisArchitecture::D => "D",
        }
    }
}

impl std::fmt::Display for RisArchitecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// How `|hΦ|²` is evaluated.
///
/// `FeedVector` reads it as `|vᴴ Φ a|²`: the surface relays a single feed
/// stream entering through the fixed unit-norm aperture weights `a`.
/// `LiteralNorm` reads it as `‖vᵀ Φ‖²`, which every unitary `Φ` leaves
/// equal to `‖v‖²`, so no phase design can change it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMode {
    #[default]
    FeedVector,
    LiteralNorm,
}

/// Scattering matrix of the surface together with its feed vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RisState {
    pub mode: RisArchitecture,
    pub phi: CMatrix,
    pub feed: CVector,
}

/// `(1/√M)·[1, …, 1]ᵀ`.
pub fn uniform_feed(m: usize) -> CVector {
    CVector::from_element(m, C64::new(1.0 / (m as f64).sqrt(), 0.0))
}

impl RisState {
    /// BD-RIS with `Φ = I` and the uniform feed.
    pub fn identity(m: usize) -> Self {
        Self {
            mode: RisArchitecture::Bd,
            phi: CMatrix::identity(m, m),
            feed: uniform_feed(m),
        }
    }

    pub fn element_count(&self) -> usize {
        self.phi.nrows()
    }

    /// `Φ a`.
    pub fn beam(&self) -> CVector {
        &self.phi * &self.feed
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.phi.nrows();
        if self.phi.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.phi.ncols(),
            });
        }
        if self.feed.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.feed.len(),
            });
        }
        if (self.feed.norm() - 1.0).abs() > MODULUS_TOLERANCE {
            return Err(Error::invalid(
                "feed",
                format!("must have unit norm, got {}", self.feed.norm()),
            ));
        }
        match self.mode {
            RisArchitecture::Bd => {
                let err = unitarity_error(&self.phi);
                if !(err < UNITARY_TOLERANCE) {
                    return Err(Error::invalid("phi", format!("not unitary: ‖ΦΦᴴ−I‖_F = {err:e}")));
                }
            }
            RisArchitecture::D => {
                for i in 0..m {
                    for j in 0..m {
                        let z = self.phi[(i, j)];
                        let ok = if i == j {
                            (z.norm() - 1.0).abs() <= MODULUS_TOLERANCE
                        } else {
                            z == C64::new(0.0, 0.0)
                        };
                        if !ok {
                            return Err(Error::invalid(
                                "phi",
                                format!("diagonal RIS entry ({i},{j}) = {z} violates the D-RIS structure"),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Budget of the secondary link, all in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// ST power cap.
    pub p_max: f64,
    /// PT transmit power.
    pub q_p: f64,
    pub sigma2: f64,
    /// Interference temperature threshold at the PU.
    pub i_th: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("p_max", self.p_max)?;
        positive("q_p", self.q_p)?;
        positive("sigma2", self.sigma2)?;
        if !(self.i_th >= 0.0 && self.i_th.is_finite()) {
            return Err(Error::invalid(
                "i_th",
                format!("must be non-negative, got {}", self.i_th),
            ));
        }
        Ok(())
    }

    /// `σ² + |f|² Q_p`.
    pub fn interference_plus_noise(&self, f: C64) -> f64 {
        self.sigma2 + f.norm_sqr() * self.q_p
    }
}

fn check_len(v: &CVector, m: usize) -> Result<()> {
    if v.len() == m {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: m,
            actual: v.len(),
        })
    }
}

/// `|vᴴ u|²` for a precomputed beam `u = Φa`.
pub(crate) fn beam_gain(v: &CVector, beam: &CVector) -> f64 {
    hermitian_dot(v, beam).norm_sqr()
}

/// `‖vᵀ Φ‖²`.
pub(crate) fn literal_norm_gain(v: &CVector, phi: &CMatrix) -> f64 {
    (v.transpose() * phi).iter().map(|z| z.norm_sqr()).sum()
}

/// Effective power gain of `v` through the surface.
pub fn effective_gain(v: &CVector, ris: &RisState, gmode: GainMode) -> Result<f64> {
    check_len(v, ris.element_count())?;
    Ok(match gmode {
        GainMode::FeedVector => beam_gain(v, &ris.beam()),
        GainMode::LiteralNorm => literal_norm_gain(v, &ris.phi),
    })
}

/// `h_gain · P_s / (σ² + |f|² Q_p)`.
pub fn sinr(h_gain: f64, p_s: f64, f: C64, budget: &LinkBudget) -> f64 {
    h_gain * p_s / budget.interference_plus_noise(f)
}

/// `log₂(1 + γ)` in bits/s/Hz.
pub fn spectral_efficiency(gamma: f64) -> f64 {
    gamma.ln_1p() / std::f64::consts::LN_2
}

/// Interference power at the PU, `gain(g) · P_s`.
pub fn pu_interference(g: &CVector, ris: &RisState, gmode: GainMode, p_s: f64) -> Result<f64> {
    Ok(effective_gain(g, ris, gmode)? * p_s)
}

/// Spectral efficiency of the whole link for a given state and power.
pub fn link_spectral_efficiency(
    chan: &ChannelRealization,
    ris: &RisState,
    gmode: GainMode,
    p_s: f64,
    budget: &LinkBudget,
) -> Result<f64> {
    let h_gain = effective_gain(&chan.h, ris, gmode)?;
    Ok(spectral_efficiency(sinr(h_gain, p_s, chan.f, budget)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_complex_vector, random_unitary};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn basis(m: usize, k: usize) -> CVector {
        let mut e = CVector::zeros(m);
        e[k] = c(1.0, 0.0);
        e
    }

    fn state(phi: CMatrix, feed: CVector) -> RisState {
        RisState {
            mode: RisArchitecture::Bd,
            phi,
            feed,
        }
    }

    fn budget(sigma2: f64, q_p: f64) -> LinkBudget {
        LinkBudget {
            p_max: 10.0,
            q_p,
            sigma2,
            i_th: 0.1,
        }
    }

    #[test]
    fn identity_routing_selects_first_entry() {
        let v = CVector::from_vec(vec![c(0.3, -1.2), c(2.0, 0.5), c(-0.1, 0.0)]);
        let ris = state(CMatrix::identity(3, 3), basis(3, 0));
        let gain = effective_gain(&v, &ris, GainMode::FeedVector).unwrap();
        assert_relative_eq!(gain, v[0].norm_sqr(), max_relative = 1e-15);
    }

    #[test]
    fn swap_matrix_two_by_two() {
        let v = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let phi = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let ris = state(phi, basis(2, 0));
        assert_relative_eq!(
            effective_gain(&v, &ris, GainMode::FeedVector).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn literal_norm_under_unitary_equals_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = random_complex_vector(&mut rng, 6);
        let ris = state(random_unitary(&mut rng, 6), uniform_feed(6));
        let gain = effective_gain(&v, &ris, GainMode::LiteralNorm).unwrap();
        assert_relative_eq!(gain, v.norm_squared(), max_relative = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ris = RisState::identity(4);
        let v = CVector::zeros(3);
        assert!(matches!(
            effective_gain(&v, &ris, GainMode::FeedVector),
            Err(Error::DimensionMismatch { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn sinr_examples() {
        // |f|²Q_p = 0.4 with |f| = 1, Q_p = 0.4.
        assert_relative_eq!(
            sinr(2.0, 1.0, c(1.0, 0.0), &budget(0.1, 0.4)),
            4.0,
            max_relative = 1e-15
        );
        assert_eq!(sinr(2.0, 0.0, c(1.0, 0.0), &budget(0.1, 0.4)), 0.0);
        assert_eq!(sinr(1.0, 1.0, c(0.0, 0.0), &budget(1.0, 10.0)), 1.0);
    }

    #[test]
    fn spectral_efficiency_examples() {
        assert_eq!(spectral_efficiency(0.0), 0.0);
        assert_relative_eq!(spectral_efficiency(1.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(spectral_efficiency(4.0), 5f64.log2(), max_relative = 1e-15);
        assert!((spectral_efficiency(4.0) - 2.321928).abs() < 1e-6);
    }

    #[test]
    fn spectral_efficiency_strictly_increasing() {
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 * 0.05).collect();
        for w in grid.windows(2) {
            assert!(spectral_efficiency(w[1]) > spectral_efficiency(w[0]));
        }
    }

    #[test]
    fn interference_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_complex_vector(&mut rng, 4);
        let ris = RisState::identity(4);
        assert_eq!(pu_interference(&h, &ris, GainMode::FeedVector, 0.0).unwrap(), 0.0);
        assert_eq!(
            pu_interference(&h, &ris, GainMode::FeedVector, 1.0).unwrap(),
            effective_gain(&h, &ris, GainMode::FeedVector).unwrap()
        );
        let g = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let ris = state(CMatrix::identity(2, 2), basis(2, 1));
        assert_eq!(pu_interference(&g, &ris, GainMode::FeedVector, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn ris_state_validation() {
        assert!(RisState::identity(5).validate().is_ok());
        let mut bad = RisState::identity(3);
        bad.phi[(0, 1)] = c(0.1, 0.0);
        assert!(bad.validate().is_err());
        let mut diag = RisState::identity(3);
        diag.mode = RisArchitecture::D;
        diag.phi[(1, 1)] = C64::from_polar(1.0, 0.7);
        assert!(diag.validate().is_ok());
        diag.phi[(2, 2)] = c(0.5, 0.0);
        assert!(diag.validate().is_err());
        let mut unnormed = RisState::identity(3);
        unnormed.feed[0] = c(2.0, 0.0);
        assert!(unnormed.validate().is_err());
    }

    #[test]
    fn budget_validation() {
        assert!(budget(1e-9, 10.0).validate().is_ok());
        assert!(LinkBudget {
            i_th: 0.0,
            ..budget(1e-9, 10.0)
        }
        .validate()
        .is_ok());
        assert!(LinkBudget {
            i_th: -1.0,
            ..budget(1e-9, 10.0)
        }
        .validate()
        .is_err());
        assert!(LinkBudget {
            p_max: 0.0,
            ..budget(1e-9, 10.0)
        }
        .validate()
        .is_err());
        assert!(budget(0.0, 10.0).validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn literal_norm_is_unitary_invariant(seed in any::<u64>(), m in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_complex_vector(&mut rng, m);
            let a = state(random_unitary(&mut rng, m), uniform_feed(m));
            let b = state(random_unitary(&mut rng, m), uniform_feed(m));
            let ga = effective_gain(&v, &a, GainMode::LiteralNorm).unwrap();
            let gb = effective_gain(&v, &b, GainMode::LiteralNorm).unwrap();
            prop_assert!((ga - gb).abs() < 1e-9 * v.norm_squared());
        }

        #[test]
        fn feed_gain_is_cauchy_schwarz_bounded(seed in any::<u64>(), m in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_complex_vector(&mut rng, m);
            let ris = state(random_unitary(&mut rng, m), uniform_feed(m));
            let gain = effective_gain(&v, &ris, GainMode::FeedVector).unwrap();
            prop_assert!(gain <= v.norm_squared() + 1e-9);
        }

        #[test]
        fn interference_is_linear_in_power(seed in any::<u64>(), p in 0.0f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_complex_vector(&mut rng, 4);
            let ris = state(random_unitary(&mut rng, 4), uniform_feed(4));
            let one = pu_interference(&g, &ris, GainMode::FeedVector, p).unwrap();
            let two = pu_interference(&g, &ris, GainMode::FeedVector, 2.0 * p).unwrap();
            prop_assert_eq!(two, 2.0 * one);
        }
    }
}
