use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::program::{UpdateMode, VoltageProgram, VoltageSet};
use super::{DacError, DAC_CHANNELS, LSB_VOLTS};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DacTimingSpec {
    /// Latch to output response.
    pub response_time_ns: f64,
    /// Full-scale step to within one code.
    pub settle_time_us: f64,
    /// Serial transfer of one channel's update word.
    pub update_word_time_ns: f64,
}

impl Default for DacTimingSpec {
    fn default() -> Self {
        Self {
            response_time_ns: 20.0,
            settle_time_us: 8.0,
            update_word_time_ns: 2000.0,
        }
    }
}

impl DacTimingSpec {
    /// First-order time constant that brings a 20 V step to 20/65535 V in
    /// `settle_time_us`.
    pub fn settle_tau_s(&self) -> f64 {
        self.settle_time_us * 1e-6 / 65535f64.ln()
    }

    fn word_s(&self) -> f64 {
        self.update_word_time_ns * 1e-9
    }

    fn validate(&self) -> Result<(), DacError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.response_time_ns) && ok(self.update_word_time_ns))
            || !(self.settle_time_us.is_finite() && self.settle_time_us > 0.0)
        {
            return Err(DacError::Spec(
                "timing values must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    /// Channels whose analog output is synthesized.
    pub observe: Vec<usize>,
    /// Channels rewritten every synchronous tick. `None` selects the
    /// channels that vary plus the observed ones.
    pub sync_channels: Option<Vec<usize>>,
    /// Each word carries a uniform integer offset in `[-d, d]` codes.
    pub dither_lsb: u32,
    /// Charge injected at every latch, in V·s.
    pub glitch_area_v_s: f64,
    /// White noise added to every output sample.
    pub baseline_noise_rms_v: f64,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 32.0 * 430e3,
            duration_s: 0.02,
            observe: vec![0],
            sync_channels: None,
            dither_lsb: 1,
            glitch_area_v_s: 1e-9,
            baseline_noise_rms_v: 10e-6,
            seed: 0,
        }
    }
}

/// One channel update on the serial bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DacEvent {
    pub tick: u64,
    pub channel: usize,
    /// Code actually sent, dither included.
    pub code: u16,
    pub word_start_s: f64,
    /// When the output begins to move.
    pub output_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceOutput {
    pub sample_rate_hz: f64,
    pub observed: Vec<usize>,
    pub waveforms: Vec<Vec<f64>>,
    pub events: Vec<DacEvent>,
    pub ticks: u64,
    /// Set when playback finished and the outbound clocks were switched off.
    pub clocks_stopped_s: Option<f64>,
}

impl SequenceOutput {
    pub fn waveform(&self, channel: usize) -> Option<&[f64]> {
        self.observed
            .iter()
            .position(|&c| c == channel)
            .map(|i| self.waveforms[i].as_slice())
    }
}

fn check_channels(chs: &[usize]) -> Result<(), DacError> {
    match chs.iter().find(|&&c| c >= DAC_CHANNELS) {
        Some(&c) => Err(DacError::Channel(c)),
        None => Ok(()),
    }
}

/// Plays `program` and synthesizes the observed analog outputs.
///
/// Outputs start settled at the first set. Words within a tick go out in
/// channel order; a tick lasts `max(1/rate, words·word_time)`.
pub fn run_sequence(
    program: &VoltageProgram,
    timing: &DacTimingSpec,
    sim: &SimulationSpec,
) -> Result<SequenceOutput, DacError> {
    timing.validate()?;
    let fs = sim.sample_rate_hz;
    if !(fs.is_finite() && fs >= 10.0 * program.update_rate_hz) {
        return Err(DacError::SimRateTooLow {
            sim_hz: fs,
            update_hz: program.update_rate_hz,
        });
    }
    if !(sim.duration_s.is_finite() && sim.duration_s > 0.0) {
        return Err(DacError::Spec(format!("duration {} s", sim.duration_s)));
    }
    if !(sim.glitch_area_v_s.is_finite() && sim.baseline_noise_rms_v.is_finite())
        || sim.baseline_noise_rms_v < 0.0
    {
        return Err(DacError::Spec("glitch and noise must be finite".into()));
    }
    check_channels(&sim.observe)?;
    let sync_channels = match &sim.sync_channels {
        Some(list) => {
            check_channels(list)?;
            let mut l = list.clone();
            l.sort_unstable();
            l.dedup();
            l
        }
        None => {
            let mut l = program.varying_channels();
            l.extend(&sim.observe);
            l.sort_unstable();
            l.dedup();
            l
        }
    };

    let stream = program.expanded();
    let events = schedule(program, &stream, &sync_channels, timing, sim);
    let clocks_stopped_s = match program.mode {
        UpdateMode::Asynchronous if ticks_needed(&events) >= stream.len() as u64 => {
            events.last().map(|e| e.output_s)
        }
        _ => None,
    };
    let ticks = events.last().map_or(0, |e| e.tick + 1);

    let waveforms = sim
        .observe
        .iter()
        .map(|&ch| synthesize(ch, &stream[0], &events, timing, sim))
        .collect::<Result<Vec<_>, _>>()?;

    Ok(SequenceOutput {
        sample_rate_hz: fs,
        observed: sim.observe.clone(),
        waveforms,
        events,
        ticks,
        clocks_stopped_s,
    })
}

fn ticks_needed(events: &[DacEvent]) -> u64 {
    events.last().map_or(0, |e| e.tick + 1)
}

fn schedule(
    program: &VoltageProgram,
    stream: &[VoltageSet],
    sync_channels: &[usize],
    timing: &DacTimingSpec,
    sim: &SimulationSpec,
) -> Vec<DacEvent> {
    let mut rng = substream(sim.seed, 0);
    let d = i64::from(sim.dither_lsb);
    let period = 1.0 / program.update_rate_hz;
    let word = timing.word_s();
    let response = timing.response_time_ns * 1e-9;
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut tick = 0u64;
    while t < sim.duration_s {
        let k = tick as usize;
        let channels: Vec<usize> = match program.mode {
            UpdateMode::Synchronous => sync_channels.to_vec(),
            UpdateMode::Asynchronous => {
                if k >= stream.len() {
                    break;
                }
                if k == 0 {
                    (0..DAC_CHANNELS).collect()
                } else {
                    (0..DAC_CHANNELS)
                        .filter(|&c| stream[k].codes[c] != stream[k - 1].codes[c])
                        .collect()
                }
            }
        };
        let set = &stream[k.min(stream.len() - 1)];
        for (i, &ch) in channels.iter().enumerate() {
            let offset = if d > 0 { rng.random_range(-d..=d) } else { 0 };
            let code = (i64::from(set.codes[ch]) + offset).clamp(0, 65535) as u16;
            let start = t + i as f64 * word;
            events.push(DacEvent {
                tick,
                channel: ch,
                code,
                word_start_s: start,
                output_s: start + word + response,
            });
        }
        tick += 1;
        t = match program.mode {
            // Constant period: avoid accumulating rounding over long runs.
            UpdateMode::Synchronous => tick as f64 * period.max(sync_channels.len() as f64 * word),
            UpdateMode::Asynchronous => t + period.max(channels.len() as f64 * word),
        };
    }
    events
}

fn synthesize(
    channel: usize,
    initial: &VoltageSet,
    events: &[DacEvent],
    timing: &DacTimingSpec,
    sim: &SimulationSpec,
) -> Result<Vec<f64>, DacError> {
    let fs = sim.sample_rate_hz;
    let dt = 1.0 / fs;
    let n = (sim.duration_s * fs).round() as usize;
    let alpha = 1.0 - (-dt / timing.settle_tau_s()).exp();
    let noise =
        Normal::new(0.0, sim.baseline_noise_rms_v).map_err(|e| DacError::Spec(e.to_string()))?;
    let mut rng = substream(sim.seed, 1 + channel as u64);
    let mut mine = events.iter().filter(|e| e.channel == channel).peekable();
    let mut level = initial.volts(channel);
    let mut target = level;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let mut glitch = 0.0;
        while let Some(e) = mine.next_if(|e| e.output_s <= t) {
            target = -10.0 + f64::from(e.code) * LSB_VOLTS;
            glitch += sim.glitch_area_v_s / dt;
        }
        level += (target - level) * alpha;
        out.push(level + glitch + noise.sample(&mut rng));
    }
    Ok(out)
}
