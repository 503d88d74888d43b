use serde::{Deserialize, Serialize};

use super::channel::{output_process, oversample_accumulate, pid_filter_step};
use super::{
    OutputRoute, PidChannelConfig, PipeError, PipelineState, RouteLimiter, RouteStats, CHANNELS,
};
use crate::rng::{substream, SimRng};
use crate::sigcore::{adc_quantize, AdcSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub t_s: f64,
    /// Averaged error handed to the PID stage.
    pub error_v: f64,
    pub output_value: f64,
    pub route: OutputRoute,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelLog {
    /// Every output-processor value.
    pub entries: Vec<LogEntry>,
    /// Values actually written to the device, after the route's rate cap.
    pub routed: Vec<(f64, f64)>,
    pub route_stats: RouteStats,
    pub fault: Option<PipeError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub channels: Vec<ChannelLog>,
    pub frames: u64,
    pub frame_rate_hz: f64,
}

/// Runs the pipeline for `duration_s` of ADC frames.
///
/// A frame converts all eight channels at once at `adc.sample_rate_hz`;
/// channels are then handed to the pipeline one at a time in ascending
/// order. `source(channel, frame)` gives the analog input in volts. It is
/// called for every channel of every frame, enabled or not, and each channel
/// draws ADC noise from its own substream of `seed`, so no channel can
/// influence another.
pub fn pipeline_run<F>(
    configs: &[PidChannelConfig; CHANNELS],
    adc: &AdcSpec,
    seed: u64,
    duration_s: f64,
    mut source: F,
) -> Result<PipelineOutput, PipeError>
where
    F: FnMut(usize, u64) -> f64,
{
    adc.validate()?;
    for (c, cfg) in configs.iter().enumerate() {
        cfg.validate(c)?;
    }
    if !(duration_s.is_finite() && duration_s >= 0.0) {
        return Err(PipeError::TimeStep(duration_s));
    }
    let rate = adc.sample_rate_hz;
    let frames = (duration_s * rate).round() as u64;
    let mut rngs: Vec<SimRng> = (0..CHANNELS).map(|c| substream(seed, c as u64)).collect();
    let mut routes: Vec<RouteLimiter> = configs
        .iter()
        .map(|c| RouteLimiter::new(c.output_route.rate_cap_hz()))
        .collect();
    let mut state = PipelineState::default();
    let mut logs: Vec<ChannelLog> = vec![ChannelLog::default(); CHANNELS];

    for frame in 0..frames {
        let t = frame as f64 / rate;
        for c in 0..CHANNELS {
            let volts = source(c, frame);
            let sample = adc_quantize(volts, adc, &mut rngs[c], frame);
            let cfg = &configs[c];
            if !cfg.enabled || logs[c].fault.is_some() {
                continue;
            }
            let Some(e) = oversample_accumulate(&mut state, c, cfg.oversample_ratio, sample.volts)?
            else {
                continue;
            };
            let dt = f64::from(cfg.oversample_ratio) / rate;
            let u = match pid_filter_step(&mut state.channels[c], cfg, e, dt) {
                Ok(u) => u,
                Err(_) => {
                    logs[c].fault = Some(PipeError::ChannelFault { channel: c, t_s: t });
                    continue;
                }
            };
            let y = output_process(u, cfg);
            state.channels[c].last_output = Some(y);
            logs[c].entries.push(LogEntry {
                t_s: t,
                error_v: e,
                output_value: y,
                route: cfg.output_route,
            });
            if let Some(w) = routes[c].offer(t, y) {
                logs[c].routed.push(w);
            }
        }
    }
    for (log, route) in logs.iter_mut().zip(routes.iter_mut()) {
        if let Some(w) = route.finish() {
            log.routed.push(w);
        }
        log.route_stats = route.stats();
    }
    Ok(PipelineOutput {
        channels: logs,
        frames,
        frame_rate_hz: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enabled(p: f64, i: f64) -> PidChannelConfig {
        PidChannelConfig {
            p_gain: p,
            i_gain: i,
            enabled: true,
            ..PidChannelConfig::default()
        }
    }

    #[test]
    fn all_disabled_gives_empty_logs() {
        let configs: [PidChannelConfig; CHANNELS] = Default::default();
        let out = pipeline_run(&configs, &AdcSpec::ad7608(), 1, 0.01, |_, _| 1.0).unwrap();
        assert!(out
            .channels
            .iter()
            .all(|l| l.entries.is_empty() && l.routed.is_empty()));
    }

    #[test]
    fn identical_channels_identical_logs() {
        let configs: [PidChannelConfig; CHANNELS] = std::array::from_fn(|_| enabled(0.5, 200.0));
        let out = pipeline_run(&configs, &AdcSpec::ad7608(), 3, 0.005, |_, f| {
            (f as f64 * 0.01).sin()
        })
        .unwrap();
        for l in &out.channels[1..] {
            assert_eq!(l.entries, out.channels[0].entries);
        }
        assert_eq!(out.channels[0].entries.len(), 1000);
    }

    #[test]
    fn fault_is_isolated() {
        let configs: [PidChannelConfig; CHANNELS] = std::array::from_fn(|_| enabled(1.0, 0.0));
        let mut adc = AdcSpec::ad7608();
        adc.input_noise_rms_volts = f64::NAN;
        // NaN noise is rejected up front.
        assert!(pipeline_run(&configs, &adc, 0, 0.001, |_, _| 0.0).is_err());
        let bad = PidChannelConfig {
            d_gain: f64::INFINITY,
            ..enabled(1.0, 0.0)
        };
        let mut configs = configs;
        configs[2] = bad;
        assert!(pipeline_run(&configs, &AdcSpec::ad7608(), 0, 0.001, |_, _| 0.0).is_err());
    }

    #[test]
    fn oversampling_sets_pid_rate() {
        let mut configs: [PidChannelConfig; CHANNELS] = Default::default();
        configs[5] = PidChannelConfig {
            oversample_ratio: 4,
            ..enabled(1.0, 0.0)
        };
        let out = pipeline_run(&configs, &AdcSpec::ad7608(), 0, 0.001, |_, _| 0.078_125).unwrap();
        let e = &out.channels[5].entries;
        assert_eq!(e.len(), 50);
        assert!((e[1].t_s - e[0].t_s - 20e-6).abs() < 1e-12);
        // 1024 LSB of the 18-bit converter, so quantization is exact.
        assert_eq!(e[0].output_value, 0.078_125);
    }
}
