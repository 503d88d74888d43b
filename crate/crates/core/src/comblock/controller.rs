use serde::{Deserialize, Serialize};

use super::CombError;

/// Incremental PI controller:
/// `f0(k+1) = f0(k) + P·e_k + I·Σ_{n<=k} e_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiController {
    pub p_gain: f64,
    pub i_gain: f64,
    integral_accumulator: f64,
    output_hz: f64,
    steps: u64,
    faulted: bool,
}

impl PiController {
    pub fn new(p_gain: f64, i_gain: f64, initial_output_hz: f64) -> Self {
        Self {
            p_gain,
            i_gain,
            integral_accumulator: 0.0,
            output_hz: initial_output_hz,
            steps: 0,
            faulted: false,
        }
    }

    pub fn output_hz(&self) -> f64 {
        self.output_hz
    }

    pub fn integral_accumulator(&self) -> f64 {
        self.integral_accumulator
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_faulted(&self) -> bool {
        self.faulted
    }

    /// Pins the output into `[lo, hi]`, returning whether it had to move.
    pub fn clamp_output(&mut self, lo: f64, hi: f64) -> bool {
        let clamped = self.output_hz.clamp(lo, hi);
        let moved = clamped != self.output_hz;
        self.output_hz = clamped;
        moved
    }

    /// Consumes one error sample and returns the correction applied.
    pub fn step(&mut self, e_k: f64) -> Result<f64, CombError> {
        if self.faulted {
            return Err(CombError::Faulted);
        }
        if !e_k.is_finite() {
            self.faulted = true;
            return Err(CombError::ControllerFault(e_k, self.steps));
        }
        self.integral_accumulator += e_k;
        let correction = self.p_gain * e_k + self.i_gain * self.integral_accumulator;
        self.output_hz += correction;
        self.steps += 1;
        Ok(correction)
    }
}

/// Value-style form of [`PiController::step`].
pub fn pi_step(mut ctrl: PiController, e_k: f64) -> Result<PiController, CombError> {
    ctrl.step(e_k)?;
    Ok(ctrl)
}
