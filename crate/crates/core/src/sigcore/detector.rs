use serde::{Deserialize, Serialize};

use super::SigError;

/// Wraps a phase difference into `(-1/2, 1/2]` cycle.
pub fn wrap_cycles(d: f64) -> f64 {
    d - (d - 0.5).ceil()
}

/// Ideal phase detector: `gain * wrap(input - ref)`.
pub fn phase_frequency_detect(
    ref_phase: f64,
    input_phase: f64,
    gain_volts_per_cycle: f64,
) -> Result<f64, SigError> {
    if !ref_phase.is_finite() || !input_phase.is_finite() {
        return Err(SigError::NonFinite("phase"));
    }
    if !gain_volts_per_cycle.is_finite() {
        return Err(SigError::NonFinite("detector gain"));
    }
    Ok(gain_volts_per_cycle * wrap_cycles(input_phase - ref_phase))
}

/// Divides a frequency by an integer prescaler ratio.
pub fn prescale(freq_hz: f64, n: u32) -> Result<f64, SigError> {
    if n == 0 {
        return Err(SigError::ZeroDivisor);
    }
    if !freq_hz.is_finite() {
        return Err(SigError::NonFinite("frequency"));
    }
    Ok(freq_hz / f64::from(n))
}

/// Phase-frequency detector with memory.
///
/// Tracks the unwrapped phase difference but pins it at `±range_cycles`.
/// Inside the range the output equals [`phase_frequency_detect`]; outside it
/// the output holds the rail with the sign of the frequency error, and comes
/// back into the linear range as soon as the difference reverses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFrequencyDetector {
    state_cycles: f64,
    range_cycles: f64,
    gain_volts_per_cycle: f64,
}

impl PhaseFrequencyDetector {
    pub fn new(gain_volts_per_cycle: f64) -> Self {
        Self {
            state_cycles: 0.0,
            range_cycles: 0.5,
            gain_volts_per_cycle,
        }
    }

    pub fn with_initial_phase(mut self, cycles: f64) -> Self {
        self.state_cycles = wrap_cycles(cycles);
        self
    }

    /// Adds `delta_cycles` of (input - reference) phase.
    pub fn advance(&mut self, delta_cycles: f64) -> Result<(), SigError> {
        if !delta_cycles.is_finite() {
            return Err(SigError::NonFinite("phase increment"));
        }
        self.state_cycles =
            (self.state_cycles + delta_cycles).clamp(-self.range_cycles, self.range_cycles);
        Ok(())
    }

    pub fn phase_cycles(&self) -> f64 {
        self.state_cycles
    }

    pub fn output_volts(&self) -> f64 {
        self.gain_volts_per_cycle * self.state_cycles
    }

    pub fn gain(&self) -> f64 {
        self.gain_volts_per_cycle
    }

    pub fn is_railed(&self) -> bool {
        self.state_cycles.abs() >= self.range_cycles
    }
}
