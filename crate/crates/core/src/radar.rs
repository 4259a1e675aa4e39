//! Per-UAV radar sensing: SNR-dependent noise variances, noise-free
//! observables and noisy measurement records with LOS gating.
//!
//! The range channel observes `(gamma / 2) * d` and the Doppler channel
//! `gamma * v_rad / (2 * lambda)`, where `v_rad = a . (v_target - v_uav)` is
//! positive for a receding target.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{relative_spherical, TargetState, Vec3};
use crate::world::{los_visible, Obstacle};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wavelength of a 77 GHz carrier, m.
pub const LAMBDA_77GHZ: f64 = SPEED_OF_LIGHT / 77e9;

/// FMCW front-end parameters from which reference variances can be derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalRadar {
    pub bandwidth_hz: f64,
    /// Duration of one chirp sweep.
    pub chirp_duration_s: f64,
    pub n_chirp: u32,
    /// SNR at 1 m against a 1 m² target.
    pub snr0_db: f64,
}

impl PhysicalRadar {
    pub fn snr0(&self) -> f64 {
        10f64.powf(self.snr0_db / 10.0)
    }

    pub fn observation_time(&self) -> f64 {
        self.chirp_duration_s * f64::from(self.n_chirp)
    }
}

/// Noise model of one radar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarProfile {
    /// Range-channel variance at d = 1 m, rho = 1 m², m².
    pub sigma_r0_sq: f64,
    /// Doppler-channel variance at d = 1 m, rho = 1 m², Hz².
    pub sigma_d0_sq: f64,
    /// Bearing standard deviation (half-power beamwidth), rad.
    pub sigma_b0: f64,
    /// Carrier wavelength, m.
    pub wavelength: f64,
    /// Two-way path-loss exponent.
    pub gamma: f64,
}

impl Default for RadarProfile {
    fn default() -> Self {
        Self {
            sigma_r0_sq: 1e-6,
            sigma_d0_sq: 1.0,
            sigma_b0: 5f64.to_radians(),
            wavelength: LAMBDA_77GHZ,
            gamma: 4.0,
        }
    }
}

impl RadarProfile {
    pub fn is_valid(&self) -> bool {
        self.sigma_r0_sq > 0.0
            && self.sigma_d0_sq > 0.0
            && self.sigma_b0 > 0.0
            && self.wavelength > 0.0
            && self.gamma > 0.0
    }

    pub fn range_variance(&self, d: f64, rho: f64) -> f64 {
        range_variance(d, rho, self)
    }

    pub fn doppler_variance(&self, d: f64, rho: f64) -> f64 {
        doppler_variance(d, rho, self)
    }

    pub fn bearing_variance(&self) -> f64 {
        self.sigma_b0 * self.sigma_b0
    }

    /// Scale from radial velocity (m/s) to Doppler shift (Hz).
    pub fn doppler_scale(&self) -> f64 {
        self.gamma / (2.0 * self.wavelength)
    }
}

/// Which observables a radar extracts from its echoes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CapabilitySet {
    pub ranging: bool,
    pub bearing: bool,
    pub doppler: bool,
}

impl CapabilitySet {
    pub const RANGING: Self = Self {
        ranging: true,
        bearing: false,
        doppler: false,
    };
    pub const BEARING: Self = Self {
        ranging: false,
        bearing: true,
        doppler: false,
    };
    pub const RANGING_DOPPLER: Self = Self {
        ranging: true,
        bearing: false,
        doppler: true,
    };
    pub const FULL: Self = Self {
        ranging: true,
        bearing: true,
        doppler: true,
    };

    pub fn any(&self) -> bool {
        self.ranging || self.bearing || self.doppler
    }
}

/// One observed scalar and the variance of its noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub value: f64,
    pub variance: f64,
}

/// Measurement bundle emitted by one UAV at one time step, together with the
/// sender's own kinematic state at emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub sender: usize,
    pub sender_position: Vec3,
    pub sender_velocity: Vec3,
    pub emitted_at: usize,
    pub los: bool,
    pub caps: CapabilitySet,
    pub range: Option<Channel>,
    pub azimuth: Option<Channel>,
    pub elevation: Option<Channel>,
    pub doppler: Option<Channel>,
}

/// Noise-free observables, one entry per enabled capability.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observables {
    pub range: Option<f64>,
    pub azimuth: Option<f64>,
    pub elevation: Option<f64>,
    pub doppler: Option<f64>,
}

pub fn snr(d: f64, rho: f64, snr0: f64, gamma: f64) -> f64 {
    snr0 * rho / d.powf(gamma)
}

pub fn range_variance(d: f64, rho: f64, profile: &RadarProfile) -> f64 {
    profile.sigma_r0_sq * d.powf(profile.gamma) / rho
}

pub fn doppler_variance(d: f64, rho: f64, profile: &RadarProfile) -> f64 {
    profile.sigma_d0_sq * d.powf(profile.gamma) / rho
}

/// Ranging and Doppler CRLBs evaluated at the reference SNR (d = 1 m,
/// rho = 1 m²). Returns `(sigma_r0_sq, sigma_d0_sq)`.
pub fn reference_variances_from_physical(phys: &PhysicalRadar, gamma: f64) -> (f64, f64) {
    let snr0 = phys.snr0();
    let two_pi = 2.0 * PI;
    let range = 1.5 * (2.0 * SPEED_OF_LIGHT / gamma).powi(2)
        / ((two_pi * phys.bandwidth_hz).powi(2) * snr0);
    let t = phys.observation_time();
    let doppler = 6.0 / (two_pi * two_pi * t * t * snr0);
    (range, doppler)
}

pub fn true_observables(
    target: &TargetState,
    uav_position: &Vec3,
    uav_velocity: &Vec3,
    profile: &RadarProfile,
    caps: CapabilitySet,
) -> Result<Observables> {
    let rel = relative_spherical(uav_position, &target.position)?;
    let mut h = Observables::default();
    if caps.ranging {
        h.range = Some(profile.gamma / 2.0 * rel.d);
    }
    if caps.bearing {
        h.azimuth = Some(rel.phi);
        h.elevation = Some(rel.theta);
    }
    if caps.doppler {
        let v_rad = rel.direction().dot(&(target.velocity - uav_velocity));
        h.doppler = Some(profile.doppler_scale() * v_rad);
    }
    Ok(h)
}

/// Support of the uniform outlier term that replaces NLOS readings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierSupport {
    /// Upper bound of the range-channel outlier, in channel units.
    pub max_range: f64,
    pub max_doppler_hz: f64,
}

impl Default for OutlierSupport {
    fn default() -> Self {
        Self {
            max_range: 4000.0,
            max_doppler_hz: 5000.0,
        }
    }
}

/// The sensing UAV.
#[derive(Debug, Clone, Copy)]
pub struct Sensor<'a> {
    pub id: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    pub profile: &'a RadarProfile,
    pub caps: CapabilitySet,
}

/// Produces one measurement record. In LOS every enabled channel is the true
/// observable plus Gaussian noise at the true distance; in NLOS the channels
/// hold uniform outliers and `los` is false.
pub fn sense<R: Rng + ?Sized>(
    target: &TargetState,
    rho: f64,
    sensor: &Sensor<'_>,
    k: usize,
    obstacles: &[Obstacle],
    outliers: &OutlierSupport,
    rng: &mut R,
) -> Result<MeasurementRecord> {
    let rel = relative_spherical(&sensor.position, &target.position)?;
    let los = los_visible(&sensor.position, &target.position, obstacles);
    let h = true_observables(
        target,
        &sensor.position,
        &sensor.velocity,
        sensor.profile,
        sensor.caps,
    )?;
    let profile = sensor.profile;
    let var_r = profile.range_variance(rel.d, rho);
    let var_d = profile.doppler_variance(rel.d, rho);
    let var_b = profile.bearing_variance();

    let mut noisy = |truth: Option<f64>, variance: f64, outlier: (f64, f64)| -> Option<Channel> {
        truth.map(|t| {
            let value = if los {
                let z: f64 = rng.sample(StandardNormal);
                t + variance.sqrt() * z
            } else {
                rng.random_range(outlier.0..=outlier.1)
            };
            Channel { value, variance }
        })
    };

    let range = noisy(h.range, var_r, (0.0, outliers.max_range));
    let azimuth = noisy(h.azimuth, var_b, (-PI, PI));
    let elevation = noisy(h.elevation, var_b, (0.0, PI));
    let doppler = noisy(
        h.doppler,
        var_d,
        (-outliers.max_doppler_hz, outliers.max_doppler_hz),
    );

    Ok(MeasurementRecord {
        sender: sensor.id,
        sender_position: sensor.position,
        sender_velocity: sensor.velocity,
        emitted_at: k,
        los,
        caps: sensor.caps,
        range,
        azimuth,
        elevation,
        doppler,
    })
}
