//! The CW offset frequency lock and the gated intensity lock.

mod intensity;
mod offset;

pub use intensity::{
    intensity_lock_run, GateSchedule, GateWindow, IntensityLockConfig, IntensityLockState,
    IntensityRow, IntensityTrajectory,
};
pub use offset::{
    offset_lock_run, offset_lock_step, MasterSpec, OffsetLock, OffsetLockConfig, OffsetRow,
    OffsetTrajectory, SlaveSide, SlaveSpec,
};

use thiserror::Error;

use crate::plant::PlantError;
use crate::sigcore::SigError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuxError {
    #[error(
        "beat note {beat_hz} Hz out of capture range (photodiode bandwidth {pd_bandwidth_hz} Hz)"
    )]
    OutOfCapture { beat_hz: f64, pd_bandwidth_hz: f64 },
    #[error("target offset {target_hz} Hz exceeds photodiode bandwidth {pd_bandwidth_hz} Hz")]
    TargetBeyondBandwidth {
        target_hz: f64,
        pd_bandwidth_hz: f64,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("controller fault: {0}")]
    Controller(String),
    #[error(transparent)]
    Signal(#[from] SigError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}
