//! Eight-channel PID pipeline: ADC frame reader, per-channel oversampler,
//! discrete PID filter, output processor and rate-capped output routes.

mod channel;
mod pipeline;
mod route;

pub use channel::{
    output_process, oversample_accumulate, pid_filter_step, ChannelState, OutputRoute,
    PidChannelConfig, PipelineState,
};
pub use pipeline::{pipeline_run, ChannelLog, LogEntry, PipelineOutput};
pub use route::{RouteLimiter, RouteStats};

use thiserror::Error;

use crate::sigcore::SigError;

/// Channels serviced by one pipeline.
pub const CHANNELS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipeError {
    #[error("channel index {0} out of range (0..8)")]
    ChannelIndex(usize),
    #[error("channel {channel}: non-finite value at t = {t_s} s")]
    ChannelFault { channel: usize, t_s: f64 },
    #[error("channel {channel}: {message}")]
    Config { channel: usize, message: String },
    #[error("time step must be positive, got {0} s")]
    TimeStep(f64),
    #[error(transparent)]
    Signal(#[from] SigError),
}
