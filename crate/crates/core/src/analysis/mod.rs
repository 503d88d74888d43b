//! Statistics and spectra used to judge the locks.

mod allan;
mod fit;
mod linreg;
mod psd;
mod ramsey;
mod step;

pub use allan::{allan_deviation, overlapping_adev, AdevCurve, AdevPoint, FreqSeries};
pub use fit::{fit_gaussian_coherence, CoherenceFit};
pub use linreg::{linreg_residual, LineFit};
pub use psd::{band_power, psd_estimate, Peak, Spectrum};
pub use ramsey::{
    fringe_visibility, ramsey_fringe, ramsey_visibility, DetuningSource, RamseyPoint,
};
pub use step::{step_response_metrics, StepMetrics};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("series needs at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("sample spacing is not uniform at index {0}")]
    NonUniform(usize),
    #[error("sample spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("tau {tau_s} s is not an integer multiple of dt = {dt_s} s")]
    TauNotMultiple { tau_s: f64, dt_s: f64 },
    #[error("tau {tau_s} s exceeds a third of the record span {span_s} s")]
    TauTooLong { tau_s: f64, span_s: f64 },
    #[error("segment length {0} must be a power of two")]
    SegmentLength(usize),
    #[error("overlap fraction {0} must be in [0, 1)")]
    Overlap(f64),
    #[error("band [{f_lo}, {f_hi}] Hz is empty or outside [0, {nyquist}] Hz")]
    Band { f_lo: f64, f_hi: f64, nyquist: f64 },
    #[error("no measurable decay")]
    NoDecay,
    #[error("fit did not converge after {iterations} iterations (residual rms {residual_rms})")]
    NonConvergence {
        iterations: usize,
        residual_rms: f64,
    },
    #[error("fitted amplitude {0} outside [0, 1.05]")]
    AmplitudeOutOfRange(f64),
    #[error("no step found")]
    NoStep,
    #[error("abscissa is degenerate")]
    DegenerateAbscissa,
    #[error("at least {0} trials required")]
    TooFewTrials(usize),
    #[error("non-finite input")]
    NonFinite,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
