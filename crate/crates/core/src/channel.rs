//! Rician channel model.
//!
//! Every link is `sqrt(ĥ/d²) · (sqrt(K/(K+1)) · h_LoS + sqrt(1/(K+1)) · h_NLoS)`
//! where `h_LoS` is the Kronecker product of the x- and y-axis phase ramps of
//! a uniform planar array and `h_NLoS` has i.i.d. `CN(0, 1)` entries.
//!
//! Randomness is drawn from explicit per-trial streams so that trials can be
//! run in any order, on any thread, and still reproduce bit for bit.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, CVector, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default carrier frequency (2 GHz).
pub const DEFAULT_CARRIER_HZ: f64 = 2.0e9;

/// Rician factors at or above this value are treated as pure LoS.
pub const PURE_LOS_K: f64 = 1e12;

/// Phase increment between adjacent elements, `2π f_c q / c`.
pub fn delta_of(carrier_hz: f64, spacing_m: f64) -> Result<f64> {
    if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
        return Err(Error::invalid(
            "carrier_hz",
            format!("must be positive, got {carrier_hz}"),
        ));
    }
    if !(spacing_m > 0.0 && spacing_m.is_finite()) {
        return Err(Error::invalid(
            "spacing_m",
            format!("must be positive, got {spacing_m}"),
        ));
    }
    Ok(2.0 * PI * carrier_hz * spacing_m / SPEED_OF_LIGHT)
}

/// Planar array geometry and the departure angles of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub mx: usize,
    pub my: usize,
    /// Elevation, radians.
    pub theta: f64,
    /// Azimuth, radians.
    pub varphi: f64,
    pub carrier_hz: f64,
    /// Adjacent-element spacing, meters.
    pub spacing_m: f64,
}

impl GeometryParams {
    pub fn new(mx: usize, my: usize, theta: f64, varphi: f64, carrier_hz: f64, spacing_m: f64) -> Result<Self> {
        let geom = Self {
            mx,
            my,
            theta,
            varphi,
            carrier_hz,
            spacing_m,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Half-wavelength spacing at the default carrier, so `δ = π`.
    pub fn half_wavelength(mx: usize, my: usize, theta: f64, varphi: f64) -> Result<Self> {
        let spacing = SPEED_OF_LIGHT / (2.0 * DEFAULT_CARRIER_HZ);
        Self::new(mx, my, theta, varphi, DEFAULT_CARRIER_HZ, spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mx == 0 || self.my == 0 {
            return Err(Error::invalid(
                "mx/my",
                format!("array dimensions must be at least 1, got {}x{}", self.mx, self.my),
            ));
        }
        if !self.theta.is_finite() || !self.varphi.is_finite() {
            return Err(Error::invalid("theta/varphi", "angles must be finite"));
        }
        delta_of(self.carrier_hz, self.spacing_m).map(|_| ())
    }

    pub fn element_count(&self) -> usize {
        self.mx * self.my
    }

    pub fn delta(&self) -> f64 {
        2.0 * PI * self.carrier_hz * self.spacing_m / SPEED_OF_LIGHT
    }
}

/// Large-scale and Rician parameters of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianParams {
    pub k_factor: f64,
    /// Channel power gain `ĥ`.
    pub power_gain: f64,
    pub distance_m: f64,
}

impl RicianParams {
    /// Unit large-scale amplitude (`ĥ = d² = 1`).
    pub fn normalized(k_factor: f64) -> Self {
        Self {
            k_factor,
            power_gain: 1.0,
            distance_m: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor >= 0.0) {
            return Err(Error::invalid(
                "k_factor",
                format!("must be >= 0, got {}", self.k_factor),
            ));
        }
        if !(self.power_gain >= 0.0 && self.power_gain.is_finite()) {
            return Err(Error::invalid(
                "power_gain",
                format!("must be >= 0, got {}", self.power_gain),
            ));
        }
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::invalid(
                "distance_m",
                format!("must be > 0, got {}", self.distance_m),
            ));
        }
        Ok(())
    }

    /// `sqrt(ĥ / d²)`.
    pub fn amplitude(&self) -> f64 {
        (self.power_gain / (self.distance_m * self.distance_m)).sqrt()
    }

    /// `(sqrt(K/(K+1)), sqrt(1/(K+1)))`.
    fn component_weights(&self) -> (f64, f64) {
        if self.k_factor.is_infinite() {
            (1.0, 0.0)
        } else {
            let k = self.k_factor;
            ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
        }
    }
}

/// One draw of the three links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// ST → SU.
    pub h: CVector,
    /// ST → PU.
    pub g: CVector,
    /// PT → SU.
    pub f: C64,
}

impl ChannelRealization {
    pub fn element_count(&self) -> usize {
        self.h.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.g.len() != self.h.len() {
            return Err(Error::DimensionMismatch {
                expected: self.h.len(),
                actual: self.g.len(),
            });
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !(self.h.iter().all(finite) && self.g.iter().all(finite) && finite(&self.f)) {
            return Err(Error::invalid("channel", "entries must be finite"));
        }
        Ok(())
    }
}

fn phase_ramp(len: usize, step: f64) -> impl Iterator<Item = C64> {
    (0..len).map(move |n| C64::from_polar(1.0, -step * n as f64))
}

/// Kronecker LoS steering vector `a_x ⊗ a_y` of length `Mx·My`.
pub fn los_steering(geom: &GeometryParams) -> Result<CVector> {
    geom.validate()?;
    let delta = geom.delta();
    let sin_theta = geom.theta.sin();
    let step_x = delta * sin_theta * geom.varphi.cos();
    let step_y = delta * sin_theta * geom.varphi.sin();
    let ramp_y: Vec<C64> = phase_ramp(geom.my, step_y).collect();
    let entries = phase_ramp(geom.mx, step_x)
        .flat_map(|x| ramp_y.iter().map(move |&y| x * y))
        .collect::<Vec<_>>();
    Ok(CVector::from_vec(entries))
}

/// Rician vector channel for a planar array.
pub fn rician_draw<R: Rng + ?Sized>(geom: &GeometryParams, ric: &RicianParams, rng: &mut R) -> Result<CVector> {
    ric.validate()?;
    let los = los_steering(geom)?;
    let (w_los, w_nlos) = ric.component_weights();
    let scale = ric.amplitude();
    Ok(los.map(|l| {
        // Draw unconditionally so the stream position does not depend on K.
        let n = complex_gaussian(rng);
        (l * w_los + n * w_nlos) * scale
    }))
}

/// Rician scalar channel (single element, LoS component `1`).
pub fn scalar_rician_draw<R: Rng + ?Sized>(ric: &RicianParams, rng: &mut R) -> Result<C64> {
    ric.validate()?;
    let (w_los, w_nlos) = ric.component_weights();
    let n = complex_gaussian(rng);
    Ok((C64::new(w_los, 0.0) + n * w_nlos) * ric.amplitude())
}

/// Which link a random stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkTag {
    H,
    G,
    F,
}

impl LinkTag {
    fn salt(self) -> u64 {
        match self {
            LinkTag::H => 0x68,
            LinkTag::G => 0x67,
            LinkTag::F => 0x66,
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed `mix(mix(mix(master) ^ trial) ^ tag)` with `mix` = SplitMix64.
pub fn derive_seed(master: u64, trial: u64, tag: LinkTag) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ tag.salt())
}

pub fn trial_stream(master: u64, trial: u64, tag: LinkTag) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, trial, tag))
}

/// How departure angles are chosen for each vector link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnglePolicy {
    /// `θ ~ U[0, π/2]`, `φ ~ U[0, 2π)`, drawn per trial and link.
    Random,
    Fixed {
        theta: f64,
        varphi: f64,
    },
}

/// Everything needed to draw a [`ChannelRealization`] for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub mx: usize,
    pub my: usize,
    pub carrier_hz: f64,
    pub spacing_m: f64,
    pub h_link: RicianParams,
    pub g_link: RicianParams,
    pub f_link: RicianParams,
    pub angles: AnglePolicy,
}

impl ChannelModel {
    /// Half-wavelength array, unit large-scale gains and equal `K` on every link.
    pub fn normalized(mx: usize, my: usize, k_factor: f64) -> Self {
        let ric = RicianParams::normalized(k_factor);
        Self {
            mx,
            my,
            carrier_hz: DEFAULT_CARRIER_HZ,
            spacing_m: SPEED_OF_LIGHT / (2.0 * DEFAULT_CARRIER_HZ),
            h_link: ric,
            g_link: ric,
            f_link: ric,
            angles: AnglePolicy::Random,
        }
    }

    pub fn element_count(&self) -> usize {
        self.mx * self.my
    }

    fn geometry<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GeometryParams> {
        let (theta, varphi) = match self.angles {
            AnglePolicy::Random => (rng.random_range(0.0..=FRAC_PI_2), rng.random_range(0.0..2.0 * PI)),
            AnglePolicy::Fixed { theta, varphi } => (theta, varphi),
        };
        GeometryParams::new(self.mx, self.my, theta, varphi, self.carrier_hz, self.spacing_m)
    }

    /// Channel of trial `trial` under `master`; each link uses its own stream.
    pub fn draw(&self, master: u64, trial: u64) -> Result<ChannelRealization> {
        let mut rng_h = trial_stream(master, trial, LinkTag::H);
        let geom_h = self.geometry(&mut rng_h)?;
        let h = rician_draw(&geom_h, &self.h_link, &mut rng_h)?;

        let mut rng_g = trial_stream(master, trial, LinkTag::G);
        let geom_g = self.geometry(&mut rng_g)?;
        let g = rician_draw(&geom_g, &self.g_link, &mut rng_g)?;

        let mut rng_f = trial_stream(master, trial, LinkTag::F);
        let f = scalar_rician_draw(&self.f_link, &mut rng_f)?;
        Ok(ChannelRealization { h, g, f })
    }
}
