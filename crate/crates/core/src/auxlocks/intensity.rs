use serde::{Deserialize, Serialize};

use super::AuxError;
use crate::comblock::PiController;
use crate::plant::IntensityPlant;
use crate::rng::seeded;
use crate::sigcore::{adc_quantize, AdcSpec, AMPLITUDE_FULL_SCALE};

/// When the feedback is allowed to act.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSchedule {
    AlwaysOn,
    AlwaysOff,
    /// Alternating windows, starting with the on window when `start_on`.
    Periodic {
        on_s: f64,
        off_s: f64,
        #[serde(default = "yes")]
        start_on: bool,
    },
}

fn yes() -> bool {
    true
}

impl GateSchedule {
    pub fn is_on(&self, t_s: f64) -> bool {
        match *self {
            GateSchedule::AlwaysOn => true,
            GateSchedule::AlwaysOff => false,
            GateSchedule::Periodic {
                on_s,
                off_s,
                start_on,
            } => {
                let period = on_s + off_s;
                let phase = t_s.rem_euclid(period);
                if start_on {
                    phase < on_s
                } else {
                    phase >= off_s
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), AuxError> {
        if let GateSchedule::Periodic { on_s, off_s, .. } = *self {
            if !(on_s.is_finite() && off_s.is_finite() && on_s > 0.0 && off_s > 0.0) {
                return Err(AuxError::Config(format!(
                    "gate windows must be positive, got on {on_s} s / off {off_s} s"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntensityLockConfig {
    pub setpoint_volts: f64,
    /// Photodiode volts per watt at the pick-off.
    pub responsivity_v_per_w: f64,
    /// Amplitude codes per volt of error.
    pub p_gain: f64,
    pub i_gain: f64,
    pub loop_rate_hz: f64,
    pub adc: AdcSpec,
    pub initial_amplitude: u16,
    pub log_every: u32,
}

impl Default for IntensityLockConfig {
    fn default() -> Self {
        Self {
            setpoint_volts: 2.0,
            responsivity_v_per_w: 4000.0,
            p_gain: 1200.0,
            i_gain: 80.0,
            loop_rate_hz: 50e3,
            adc: AdcSpec::ad7671(),
            initial_amplitude: 8192,
            log_every: 50,
        }
    }
}

impl IntensityLockConfig {
    pub fn validate(&self) -> Result<(), AuxError> {
        self.adc.validate()?;
        if !(self.loop_rate_hz.is_finite() && self.loop_rate_hz > 0.0) {
            return Err(AuxError::Config("loop_rate_hz must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(AuxError::Config("log_every must be at least 1".into()));
        }
        if self.initial_amplitude > AMPLITUDE_FULL_SCALE {
            return Err(AuxError::Config(format!(
                "initial_amplitude {} exceeds {}",
                self.initial_amplitude, AMPLITUDE_FULL_SCALE
            )));
        }
        for (name, v) in [
            ("setpoint_volts", self.setpoint_volts),
            ("responsivity_v_per_w", self.responsivity_v_per_w),
            ("p_gain", self.p_gain),
            ("i_gain", self.i_gain),
        ] {
            if !v.is_finite() {
                return Err(AuxError::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Actuator state. While `gate` is false the amplitude equals
/// `held_amplitude` and does not move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntensityLockState {
    pub dds_amplitude: u16,
    pub gate: bool,
    pub held_amplitude: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityRow {
    pub t_s: f64,
    pub adc_v: f64,
    pub dds_amplitude: u16,
    pub gate: bool,
    pub saturated: bool,
}

/// Summary of one contiguous gate window, built from every loop step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateWindow {
    pub start_s: f64,
    pub end_s: f64,
    pub on: bool,
    pub steps: u64,
    pub first_adc_v: f64,
    pub last_adc_v: f64,
    pub first_amplitude: u16,
    pub last_amplitude: u16,
    /// True when the amplitude never changed inside the window.
    pub amplitude_constant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrajectory {
    pub rows: Vec<IntensityRow>,
    pub windows: Vec<GateWindow>,
    pub final_state: IntensityLockState,
    pub saturation_events: u64,
}

/// Runs the gated intensity lock for `duration_s`.
///
/// Each step the plant drifts, the photodiode reading is digitized, and if
/// the gate is open the PI controller moves the 14-bit amplitude toward the
/// setpoint. When the gate closes the last amplitude is held and the
/// controller is left untouched until the next open window.
pub fn intensity_lock_run(
    mut plant: IntensityPlant,
    config: &IntensityLockConfig,
    gate: GateSchedule,
    seed: u64,
    duration_s: f64,
) -> Result<IntensityTrajectory, AuxError> {
    config.validate()?;
    gate.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(AuxError::Config(format!("duration_s = {duration_s}")));
    }
    let dt = 1.0 / config.loop_rate_hz;
    let steps = (duration_s * config.loop_rate_hz).round() as u64;
    let mut rng = seeded(seed);
    let full = f64::from(AMPLITUDE_FULL_SCALE);
    let mut pi = PiController::new(
        config.p_gain,
        config.i_gain,
        f64::from(config.initial_amplitude),
    );
    let mut state = IntensityLockState {
        dds_amplitude: config.initial_amplitude,
        gate: gate.is_on(0.0),
        held_amplitude: config.initial_amplitude,
    };
    let mut rows = Vec::with_capacity((steps / u64::from(config.log_every) + 1) as usize);
    let mut windows: Vec<GateWindow> = Vec::new();
    let mut saturation_events = 0u64;

    for k in 0..steps {
        let t = k as f64 * dt;
        let on = gate.is_on(t);
        plant.evolve(dt)?;
        let amplitude_in = state.dds_amplitude;
        let volts = config.responsivity_v_per_w
            * plant.delivered_watts(f64::from(state.dds_amplitude) / full);
        let sample = adc_quantize(volts, &config.adc, &mut rng, k);
        let mut saturated = false;
        if on {
            pi.step(config.setpoint_volts - sample.volts)
                .map_err(|e| AuxError::Controller(e.to_string()))?;
            saturated = pi.clamp_output(0.0, full);
            state.dds_amplitude = pi.output_hz().round() as u16;
            state.held_amplitude = state.dds_amplitude;
        } else {
            state.dds_amplitude = state.held_amplitude;
        }
        if saturated {
            saturation_events += 1;
        }
        state.gate = on;

        match windows.last_mut() {
            Some(w) if w.on == on => {
                w.end_s = t + dt;
                w.steps += 1;
                w.last_adc_v = sample.volts;
                w.amplitude_constant &= amplitude_in == state.dds_amplitude;
                w.last_amplitude = state.dds_amplitude;
            }
            _ => windows.push(GateWindow {
                start_s: t,
                end_s: t + dt,
                on,
                steps: 1,
                first_adc_v: sample.volts,
                last_adc_v: sample.volts,
                first_amplitude: amplitude_in,
                last_amplitude: state.dds_amplitude,
                amplitude_constant: amplitude_in == state.dds_amplitude,
            }),
        }
        if k % u64::from(config.log_every) == 0 {
            rows.push(IntensityRow {
                t_s: t,
                adc_v: sample.volts,
                dds_amplitude: state.dds_amplitude,
                gate: on,
                saturated,
            });
        }
    }
    Ok(IntensityTrajectory {
        rows,
        windows,
        final_state: state,
        saturation_events,
    })
}
