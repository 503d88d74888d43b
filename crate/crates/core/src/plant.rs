//! Stochastic models of the signals being locked.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{seeded, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("invalid plant parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("time step must be positive and finite, got {0} s")]
    InvalidStep(f64),
}

fn check(name: &'static str, value: f64, ok: bool) -> Result<(), PlantError> {
    if value.is_finite() && ok {
        Ok(())
    } else {
        Err(PlantError::InvalidParameter { name, value })
    }
}

fn check_dt(dt_s: f64) -> Result<(), PlantError> {
    if dt_s.is_finite() && dt_s > 0.0 {
        Ok(())
    } else {
        Err(PlantError::InvalidStep(dt_s))
    }
}

/// Repetition-rate parameters as they appear in a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepRateConfig {
    pub f_rep_hz: f64,
    #[serde(default)]
    pub drift_hz_per_s: f64,
    /// RMS of the white frequency increment added on every step.
    #[serde(default)]
    pub white_fm_rms_hz: f64,
}

/// Mode-locked laser repetition rate: `f_rep(k+1) = f_rep(k) + δ`, with
/// `δ = drift·dt + σ·N(0,1)`.
#[derive(Debug, Clone)]
pub struct RepRatePlant {
    f_rep_hz: f64,
    drift_hz_per_s: f64,
    white_fm_rms_hz: f64,
    rng_seed: u64,
    rng: SimRng,
    last_delta_hz: f64,
    elapsed_s: f64,
    step: Option<(f64, f64)>,
}

impl RepRatePlant {
    pub fn new(config: RepRateConfig, rng_seed: u64) -> Result<Self, PlantError> {
        check("f_rep_hz", config.f_rep_hz, config.f_rep_hz > 0.0)?;
        check("drift_hz_per_s", config.drift_hz_per_s, true)?;
        check(
            "white_fm_rms_hz",
            config.white_fm_rms_hz,
            config.white_fm_rms_hz >= 0.0,
        )?;
        Ok(Self {
            f_rep_hz: config.f_rep_hz,
            drift_hz_per_s: config.drift_hz_per_s,
            white_fm_rms_hz: config.white_fm_rms_hz,
            rng_seed,
            rng: seeded(rng_seed),
            last_delta_hz: 0.0,
            elapsed_s: 0.0,
            step: None,
        })
    }

    /// Noise-free plant held at `f_rep_hz`.
    pub fn fixed(f_rep_hz: f64) -> Result<Self, PlantError> {
        Self::new(
            RepRateConfig {
                f_rep_hz,
                drift_hz_per_s: 0.0,
                white_fm_rms_hz: 0.0,
            },
            0,
        )
    }

    /// Adds a one-off jump of `size_hz` at `at_s`, as when a synthesizer
    /// stands in for the laser during calibration.
    pub fn with_step(mut self, at_s: f64, size_hz: f64) -> Self {
        self.step = Some((at_s, size_hz));
        self
    }

    pub fn f_rep_hz(&self) -> f64 {
        self.f_rep_hz
    }

    pub fn last_delta_hz(&self) -> f64 {
        self.last_delta_hz
    }

    pub fn elapsed_s(&self) -> f64 {
        self.elapsed_s
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn evolve(&mut self, dt_s: f64) -> Result<f64, PlantError> {
        check_dt(dt_s)?;
        let mut delta = self.drift_hz_per_s * dt_s;
        if self.white_fm_rms_hz > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            delta += self.white_fm_rms_hz * z;
        }
        let t_next = self.elapsed_s + dt_s;
        if let Some((at, size)) = self.step {
            if at <= t_next {
                delta += size;
                self.step = None;
            }
        }
        self.f_rep_hz += delta;
        self.elapsed_s = t_next;
        self.last_delta_hz = delta;
        Ok(delta)
    }
}

/// Value-style form of [`RepRatePlant::evolve`].
pub fn rep_rate_evolve(mut plant: RepRatePlant, dt_s: f64) -> Result<RepRatePlant, PlantError> {
    plant.evolve(dt_s)?;
    Ok(plant)
}

/// Master and slave lasers seen by one photodiode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeatNotePlant {
    pub master_hz: f64,
    pub slave_hz: f64,
    pub pd_bandwidth_hz: f64,
}

impl BeatNotePlant {
    pub fn new(master_hz: f64, slave_hz: f64, pd_bandwidth_hz: f64) -> Result<Self, PlantError> {
        check("master_hz", master_hz, true)?;
        check("slave_hz", slave_hz, true)?;
        check("pd_bandwidth_hz", pd_bandwidth_hz, pd_bandwidth_hz > 0.0)?;
        Ok(Self {
            master_hz,
            slave_hz,
            pd_bandwidth_hz,
        })
    }
}

/// `|master - slave|`, or `None` if the photodiode cannot follow it.
pub fn beat_note(plant: &BeatNotePlant) -> Option<f64> {
    let beat = (plant.master_hz - plant.slave_hz).abs();
    (beat <= plant.pd_bandwidth_hz).then_some(beat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityConfig {
    /// Power reaching the pick-off at full actuator drive.
    pub power_watts: f64,
    #[serde(default)]
    pub drift_watts_per_s: f64,
    #[serde(default)]
    pub walk_rms_watts_per_sqrt_s: f64,
    /// Fraction of `power_watts` delivered per unit of normalized amplitude.
    #[serde(default = "unit")]
    pub actuator_gain: f64,
}

fn unit() -> f64 {
    1.0
}

/// Slowly wandering beam power behind an amplitude-controlled modulator.
#[derive(Debug, Clone)]
pub struct IntensityPlant {
    power_watts: f64,
    drift_watts_per_s: f64,
    walk_rms_watts_per_sqrt_s: f64,
    actuator_gain: f64,
    rng: SimRng,
}

impl IntensityPlant {
    pub fn new(config: IntensityConfig, rng_seed: u64) -> Result<Self, PlantError> {
        check("power_watts", config.power_watts, config.power_watts >= 0.0)?;
        check("drift_watts_per_s", config.drift_watts_per_s, true)?;
        check(
            "walk_rms_watts_per_sqrt_s",
            config.walk_rms_watts_per_sqrt_s,
            config.walk_rms_watts_per_sqrt_s >= 0.0,
        )?;
        check(
            "actuator_gain",
            config.actuator_gain,
            config.actuator_gain >= 0.0,
        )?;
        Ok(Self {
            power_watts: config.power_watts,
            drift_watts_per_s: config.drift_watts_per_s,
            walk_rms_watts_per_sqrt_s: config.walk_rms_watts_per_sqrt_s,
            actuator_gain: config.actuator_gain,
            rng: seeded(rng_seed),
        })
    }

    pub fn power_watts(&self) -> f64 {
        self.power_watts
    }

    pub fn actuator_gain(&self) -> f64 {
        self.actuator_gain
    }

    /// Power delivered for an amplitude in `[0, 1]` of full scale.
    pub fn delivered_watts(&self, amplitude_fraction: f64) -> f64 {
        self.actuator_gain * amplitude_fraction * self.power_watts
    }

    pub fn evolve(&mut self, dt_s: f64) -> Result<f64, PlantError> {
        check_dt(dt_s)?;
        let mut p = self.power_watts + self.drift_watts_per_s * dt_s;
        if self.walk_rms_watts_per_sqrt_s > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            p += self.walk_rms_watts_per_sqrt_s * dt_s.sqrt() * z;
        }
        self.power_watts = p.max(0.0);
        Ok(self.power_watts)
    }
}

/// Value-style form of [`IntensityPlant::evolve`].
pub fn intensity_evolve(
    mut plant: IntensityPlant,
    dt_s: f64,
) -> Result<IntensityPlant, PlantError> {
    plant.evolve(dt_s)?;
    Ok(plant)
}
