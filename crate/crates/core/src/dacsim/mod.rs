//! The 100-channel DAC sequencer: voltage-set programs, interpolation,
//! synchronous and asynchronous playback, and output filtering.

mod filter;
mod program;
mod sequence;

pub use filter::apply_filter_chain;
pub use program::{
    code_to_voltage, interpolate_sets, load_program, parse_program_text, voltage_to_code,
    MemoryTier, UpdateMode, VoltageProgram, VoltageSet,
};
pub use sequence::{run_sequence, DacEvent, DacTimingSpec, SequenceOutput, SimulationSpec};

use thiserror::Error;

use crate::sigcore::SigError;

pub const DAC_CHANNELS: usize = 100;
pub const MAX_UPDATE_RATE_HZ: f64 = 430e3;
pub const BLOCK_MEMORY_SETS: usize = 32;
pub const RAM_SETS: usize = 8_000_000;
/// One code step: 20 V over 2^16 codes.
pub const LSB_VOLTS: f64 = 20.0 / 65536.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DacError {
    #[error("code {0} exceeds 65535")]
    CodeRange(u32),
    #[error("voltage {0} V outside the ±10 V output range")]
    VoltageRange(f64),
    #[error("update rate {0} Hz exceeds the 430 kHz maximum")]
    UpdateRate(f64),
    #[error("{0} sets exceed the 8 M set RAM limit")]
    TooManySets(usize),
    #[error("program needs at least one set")]
    Empty,
    #[error("set {index}: expected {expected} channels, got {got}")]
    MalformedSet {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("steps_between has {got} entries for {transitions} transitions")]
    StepsLength { got: usize, transitions: usize },
    #[error("transition {0} has zero interpolation steps")]
    ZeroSteps(usize),
    #[error("simulation rate {sim_hz} Hz is below 10x the update rate {update_hz} Hz")]
    SimRateTooLow { sim_hz: f64, update_hz: f64 },
    #[error("sample rate {sample_hz} Hz is below 4x the highest filter cutoff {cutoff_hz} Hz")]
    UnderSampled { sample_hz: f64, cutoff_hz: f64 },
    #[error("channel {0} does not exist")]
    Channel(usize),
    #[error("invalid simulation parameter: {0}")]
    Spec(String),
    #[error(transparent)]
    Signal(#[from] SigError),
}
