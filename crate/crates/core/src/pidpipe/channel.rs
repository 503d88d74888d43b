use serde::{Deserialize, Serialize};

use super::{PipeError, CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRoute {
    DcDac,
    DdsFrequency,
    DdsAmplitude,
}

impl OutputRoute {
    /// Maximum update rate of the device behind the route.
    pub fn rate_cap_hz(self) -> f64 {
        match self {
            OutputRoute::DcDac => 66e3,
            OutputRoute::DdsFrequency | OutputRoute::DdsAmplitude => 100e3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutputRoute::DcDac => "dc_dac",
            OutputRoute::DdsFrequency => "dds_frequency",
            OutputRoute::DdsAmplitude => "dds_amplitude",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PidChannelConfig {
    pub p_gain: f64,
    pub i_gain: f64,
    pub d_gain: f64,
    pub oversample_ratio: u32,
    pub output_route: OutputRoute,
    /// `[min, max]` in output units.
    pub bounds: (f64, f64),
    /// `(a, b)` applied as `a·u + b` before clamping.
    pub linear_transform: (f64, f64),
    pub enabled: bool,
}

impl Default for PidChannelConfig {
    fn default() -> Self {
        Self {
            p_gain: 0.0,
            i_gain: 0.0,
            d_gain: 0.0,
            oversample_ratio: 1,
            output_route: OutputRoute::DcDac,
            bounds: (-10.0, 10.0),
            linear_transform: (1.0, 0.0),
            enabled: false,
        }
    }
}

impl PidChannelConfig {
    pub fn validate(&self, channel: usize) -> Result<(), PipeError> {
        let bad = |message: String| Err(PipeError::Config { channel, message });
        if self.oversample_ratio == 0 {
            return bad("oversample_ratio must be at least 1".into());
        }
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("bounds [{lo}, {hi}] must satisfy min <= max"));
        }
        let gains = [
            self.p_gain,
            self.i_gain,
            self.d_gain,
            self.linear_transform.0,
            self.linear_transform.1,
        ];
        if gains.iter().any(|g| !g.is_finite()) {
            return bad("gains and transform must be finite".into());
        }
        Ok(())
    }

    /// Largest magnitude the integral term may reach: twice the output span
    /// referred back through the transform.
    pub fn integral_term_limit(&self) -> f64 {
        let span = self.bounds.1 - self.bounds.0;
        let a = self.linear_transform.0.abs();
        if a > 0.0 {
            2.0 * span / a
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelState {
    pub running_sum: f64,
    pub count: u32,
    pub integral: f64,
    pub previous_error: Option<f64>,
    pub last_output: Option<f64>,
    pub faulted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PipelineState {
    pub channels: [ChannelState; CHANNELS],
}

/// Adds `sample` to the channel's running sum; returns the mean once every
/// `ratio` samples.
pub fn oversample_accumulate(
    state: &mut PipelineState,
    channel: usize,
    ratio: u32,
    sample: f64,
) -> Result<Option<f64>, PipeError> {
    let ch = state
        .channels
        .get_mut(channel)
        .ok_or(PipeError::ChannelIndex(channel))?;
    let ratio = ratio.max(1);
    ch.running_sum += sample;
    ch.count += 1;
    if ch.count >= ratio {
        let mean = ch.running_sum / f64::from(ratio);
        ch.running_sum = 0.0;
        ch.count = 0;
        Ok(Some(mean))
    } else {
        Ok(None)
    }
}

/// `u = P·e + I·∫e dt + D·de/dt`, with the integral updated first and the
/// derivative omitted on the first sample.
pub fn pid_filter_step(
    state: &mut ChannelState,
    config: &PidChannelConfig,
    e: f64,
    dt: f64,
) -> Result<f64, PipeError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(PipeError::TimeStep(dt));
    }
    if state.faulted {
        return Ok(state.last_output.unwrap_or(0.0));
    }
    if !e.is_finite() {
        state.faulted = true;
        return Err(PipeError::ChannelFault {
            channel: usize::MAX,
            t_s: f64::NAN,
        });
    }
    state.integral += e * dt;
    if config.i_gain != 0.0 {
        let limit = config.integral_term_limit() / config.i_gain.abs();
        state.integral = state.integral.clamp(-limit, limit);
    }
    let derivative = match state.previous_error {
        Some(prev) => config.d_gain * (e - prev) / dt,
        None => 0.0,
    };
    state.previous_error = Some(e);
    Ok(config.p_gain * e + config.i_gain * state.integral + derivative)
}

/// `clamp(a·u + b, bounds)`.
pub fn output_process(u: f64, config: &PidChannelConfig) -> f64 {
    let (a, b) = config.linear_transform;
    (a * u + b).clamp(config.bounds.0, config.bounds.1)
}
