//! Fixed-point signal primitives shared by every lock.

mod adc;
mod average;
mod dds;
mod detector;
mod filter;

pub use adc::{adc_quantize, Adc, AdcSpec, ErrorSample};
pub use average::{boxcar_average, Boxcar};
pub use dds::{dds_tick, set_ftw, DdsChannel, AMPLITUDE_FULL_SCALE, PHASE_BITS};
pub use detector::{phase_frequency_detect, prescale, wrap_cycles, PhaseFrequencyDetector};
pub use filter::{rc_cascade_response, FilterChain, OnePoleLowpass, RcStage};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SigError {
    #[error("frequency {target_hz} Hz outside [0, {nyquist_hz}) Hz")]
    FrequencyOutOfRange { target_hz: f64, nyquist_hz: f64 },
    #[error("system clock must be positive and finite, got {0} Hz")]
    InvalidClock(f64),
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("prescaler ratio must be at least 1")]
    ZeroDivisor,
    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("frequency must be non-negative, got {0} Hz")]
    NegativeFrequency(f64),
    #[error("invalid ADC specification: {0}")]
    InvalidAdc(String),
    #[error("DDS amplitude {0} exceeds the 14-bit full scale")]
    AmplitudeOutOfRange(u32),
    #[error("filter stage cutoff must be positive and finite, got {0} Hz")]
    InvalidStage(f64),
}
