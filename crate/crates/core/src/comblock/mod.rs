//! Digital comb lock: a PI phase-locked loop steering DDS0 onto the
//! repetition rate, with feed-forward of the drift to the AOM tone `f2`.

mod calibrate;
mod controller;
mod resonance;
mod run;

pub use calibrate::{calibrate_slew, predicted_slew_hz_per_s, SlewCalibration};
pub use controller::{pi_step, PiController};
pub use resonance::{feed_forward, initial_f2, resonance_residual, Branch};
pub use run::{
    comb_lock_run, unlocked_error_trace, CombLockConfig, LockRow, LockTrajectory, ResidualStats,
};

use thiserror::Error;

use crate::plant::PlantError;
use crate::sigcore::SigError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombError {
    #[error("controller fault: non-finite error {0} at step {1}")]
    ControllerFault(f64, u64),
    #[error("controller is in fault state")]
    Faulted,
    #[error("AOM frequency {f2_hz} Hz outside tunable range [{min_hz}, {max_hz}] Hz at step {k}")]
    AomRange {
        f2_hz: f64,
        min_hz: f64,
        max_hz: f64,
        k: u64,
    },
    #[error("invalid comb-lock configuration: {0}")]
    Config(String),
    #[error("slew calibration did not converge: last slew {last_slew} Hz/s after {iterations} iterations")]
    Calibration { last_slew: f64, iterations: usize },
    #[error(transparent)]
    Signal(#[from] SigError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}
