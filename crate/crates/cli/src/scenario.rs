//! Scenario files: schema, parsing and validation.
//!
//! A scenario is a TOML document with a mandatory `name` and `seed` and one
//! or more experiment tables. See `scenarios/README.md` for the schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trapctl_core::analysis::DetuningSource;
use trapctl_core::auxlocks::{GateSchedule, IntensityLockConfig, OffsetLockConfig};
use trapctl_core::comblock::CombLockConfig;
use trapctl_core::dacsim::{
    load_program, parse_program_text, voltage_to_code, DacTimingSpec, SimulationSpec, UpdateMode,
    VoltageProgram, VoltageSet, DAC_CHANNELS, MAX_UPDATE_RATE_HZ,
};
use trapctl_core::pidpipe::{PidChannelConfig, CHANNELS};
use trapctl_core::plant::{IntensityConfig, RepRateConfig};
use trapctl_core::sigcore::{AdcSpec, FilterChain};

/// One problem found while reading a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.path.is_empty()) {
            (Some(l), false) => write!(f, "line {l}: {}: {}", self.path, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.path, self.message),
            (None, true) => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub description: String,
    pub output_dir: Option<PathBuf>,
    pub comb_lock: Option<CombLockSection>,
    pub calibration: Option<CalibrationSection>,
    pub averaging: Option<AveragingSection>,
    pub offset_lock: Option<OffsetLockSection>,
    pub intensity_lock: Option<IntensitySection>,
    pub pipeline: Option<PipelineSection>,
    pub dac: Option<DacSection>,
    pub coherence: Option<CoherenceSection>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
    /// Directory of the file the scenario came from, for relative paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub metric: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub at_s: f64,
    pub size_hz: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombLockSection {
    pub duration_s: f64,
    pub p_gain: f64,
    pub i_gain: f64,
    pub plant: RepRateConfig,
    pub step: Option<StepSpec>,
    pub config: CombLockConfig,
}

impl Default for CombLockSection {
    fn default() -> Self {
        Self {
            duration_s: 6.0,
            p_gain: 1.0,
            i_gain: 5e-6,
            plant: RepRateConfig {
                f_rep_hz: 76e6,
                drift_hz_per_s: 0.0,
                white_fm_rms_hz: 0.0,
            },
            step: Some(StepSpec {
                at_s: 0.1,
                size_hz: 200.0,
            }),
            config: CombLockConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub f_rep_hz: f64,
    pub p_gain: f64,
    pub target_slew_hz_per_s: f64,
    pub step_hz: f64,
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Drift of the follow-up tracking run.
    pub ramp_hz_per_s: f64,
    pub ramp_duration_s: f64,
    /// Tracking statistics start after this long.
    pub ramp_settle_s: f64,
    pub config: CombLockConfig,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            f_rep_hz: 76e6,
            p_gain: 1.0,
            target_slew_hz_per_s: 50.0,
            step_hz: 200.0,
            rel_tol: 0.02,
            max_iterations: 8,
            ramp_hz_per_s: 5.0,
            ramp_duration_s: 3.0,
            ramp_settle_s: 1.0,
            config: CombLockConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingSection {
    pub oversample: Vec<u32>,
    pub samples: usize,
    pub detuning_hz: f64,
    pub initial_phase_cycles: f64,
    pub noise_rms_volts: f64,
    pub config: CombLockConfig,
}

impl Default for AveragingSection {
    fn default() -> Self {
        Self {
            oversample: vec![1, 4, 16],
            samples: 10_000,
            detuning_hz: 2.0,
            initial_phase_cycles: -0.4,
            noise_rms_volts: 0.348,
            config: CombLockConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct MasterSection {
    pub frequency_hz: f64,
    pub drift_hz_per_s: f64,
    pub white_fm_rms_hz: f64,
}

impl Default for MasterSection {
    fn default() -> Self {
        Self {
            frequency_hz: 0.0,
            drift_hz_per_s: 0.0,
            white_fm_rms_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SlaveSection {
    /// Free-running detuning from the locked offset.
    #[serde(default)]
    pub start_offset_hz: f64,
    #[serde(default)]
    pub drift_hz_per_s: f64,
    #[serde(default)]
    pub white_fm_rms_hz: f64,
    #[serde(default)]
    pub detector_noise_rms_hz: f64,
    /// Overrides the lock's prescaler and setpoint for this slave.
    pub prescaler_n: Option<u32>,
    pub f_dds_hz: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OffsetLockSection {
    pub duration_s: f64,
    pub config: OffsetLockConfig,
    pub master: MasterSection,
    pub slaves: Vec<SlaveSection>,
    pub adev_taus_s: Vec<f64>,
    pub slope_range_s: (f64, f64),
}

impl Default for OffsetLockSection {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            config: OffsetLockConfig::default(),
            master: MasterSection::default(),
            slaves: Vec::new(),
            adev_taus_s: vec![1.0, 2.0, 5.0, 10.0],
            slope_range_s: (1.0, 10.0),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntensitySection {
    pub duration_s: f64,
    pub config: IntensityLockConfig,
    pub plant: IntensityConfig,
    pub gate: GateSchedule,
    /// On-windows shorter than this many steps are left out of the summary.
    pub min_window_steps: u64,
}

impl Default for IntensitySection {
    fn default() -> Self {
        Self {
            duration_s: 0.3,
            config: IntensityLockConfig::default(),
            plant: IntensityConfig {
                power_watts: 1e-3,
                drift_watts_per_s: 0.0,
                walk_rms_watts_per_sqrt_s: 0.0,
                actuator_gain: 1.0,
            },
            gate: GateSchedule::AlwaysOn,
            min_window_steps: 10,
        }
    }
}

/// Analog input of one pipeline channel.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant {
        volts: f64,
    },
    Sine {
        amplitude_volts: f64,
        frequency_hz: f64,
        #[serde(default)]
        offset_volts: f64,
    },
    Step {
        at_s: f64,
        before_volts: f64,
        after_volts: f64,
    },
}

impl SourceSpec {
    pub fn volts(&self, t_s: f64) -> f64 {
        match *self {
            SourceSpec::Constant { volts } => volts,
            SourceSpec::Sine {
                amplitude_volts,
                frequency_hz,
                offset_volts,
            } => {
                offset_volts
                    + amplitude_volts * (2.0 * std::f64::consts::PI * frequency_hz * t_s).sin()
            }
            SourceSpec::Step {
                at_s,
                before_volts,
                after_volts,
            } => {
                if t_s < at_s {
                    before_volts
                } else {
                    after_volts
                }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub index: usize,
    pub source: SourceSpec,
    #[serde(default)]
    pub config: PidChannelConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub duration_s: f64,
    pub adc: AdcSpec,
    pub channels: Vec<ChannelSection>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self {
            duration_s: 0.05,
            adc: AdcSpec::ad7608(),
            channels: Vec::new(),
        }
    }
}

/// One voltage set: every channel at `default_volts` except those listed.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    #[serde(default)]
    pub default_volts: f64,
    /// `[channel, volts]` pairs.
    #[serde(default)]
    pub channels: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DacSection {
    pub update_rate_hz: f64,
    pub modes: Vec<UpdateMode>,
    pub sets: Vec<SetSpec>,
    /// Text program, one set of 100 voltages per line. Replaces `sets`.
    pub program_file: Option<PathBuf>,
    pub steps_between: Vec<u32>,
    pub timing: DacTimingSpec,
    pub simulation: SimulationSpec,
    pub filter: FilterChain,
    pub segment_length: usize,
    pub band_hz: (f64, f64),
    pub harmonics: u32,
    /// Leading samples of each waveform written to CSV.
    pub waveform_samples: usize,
}

impl Default for DacSection {
    fn default() -> Self {
        Self {
            update_rate_hz: MAX_UPDATE_RATE_HZ,
            modes: vec![UpdateMode::Synchronous, UpdateMode::Asynchronous],
            sets: Vec::new(),
            program_file: None,
            steps_between: Vec::new(),
            timing: DacTimingSpec::default(),
            simulation: SimulationSpec::default(),
            filter: FilterChain::trap_default(),
            segment_length: 8192,
            band_hz: (1e6, 5e6),
            harmonics: 10,
            waveform_samples: 4096,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceSection {
    pub source: DetuningSource,
    pub taus_s: Vec<f64>,
    pub trials: usize,
}

impl Default for CoherenceSection {
    fn default() -> Self {
        Self {
            source: DetuningSource::StaticGaussian {
                sigma_hz: 0.2776,
                mean_hz: 0.0,
            },
            taus_s: (1..=8).map(|k| 0.15 * f64::from(k)).collect(),
            trials: 2000,
        }
    }
}

/// The experiment tables a scenario can hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    CombLock,
    Calibration,
    Averaging,
    OffsetLock,
    IntensityLock,
    Pipeline,
    Dac,
    Coherence,
}

impl Section {
    pub const ALL: [Section; 8] = [
        Section::CombLock,
        Section::Calibration,
        Section::Averaging,
        Section::OffsetLock,
        Section::IntensityLock,
        Section::Pipeline,
        Section::Dac,
        Section::Coherence,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Section::CombLock => "comb_lock",
            Section::Calibration => "calibration",
            Section::Averaging => "averaging",
            Section::OffsetLock => "offset_lock",
            Section::IntensityLock => "intensity_lock",
            Section::Pipeline => "pipeline",
            Section::Dac => "dac",
            Section::Coherence => "coherence",
        }
    }
}

impl Scenario {
    pub fn has(&self, s: Section) -> bool {
        match s {
            Section::CombLock => self.comb_lock.is_some(),
            Section::Calibration => self.calibration.is_some(),
            Section::Averaging => self.averaging.is_some(),
            Section::OffsetLock => self.offset_lock.is_some(),
            Section::IntensityLock => self.intensity_lock.is_some(),
            Section::Pipeline => self.pipeline.is_some(),
            Section::Dac => self.dac.is_some(),
            Section::Coherence => self.coherence.is_some(),
        }
    }

    /// Drops every experiment table except `keep`.
    pub fn only(mut self, keep: Section) -> Self {
        for s in Section::ALL {
            if s == keep {
                continue;
            }
            match s {
                Section::CombLock => self.comb_lock = None,
                Section::Calibration => self.calibration = None,
                Section::Averaging => self.averaging = None,
                Section::OffsetLock => self.offset_lock = None,
                Section::IntensityLock => self.intensity_lock = None,
                Section::Pipeline => self.pipeline = None,
                Section::Dac => self.dac = None,
                Section::Coherence => self.coherence = None,
            }
        }
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// 1-based line of the byte offset `pos`.
fn line_of(text: &str, pos: usize) -> usize {
    text[..pos.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// Line where the dotted `path` is defined, found by tracking table
/// headers. Falls back to the enclosing table's header line.
pub fn locate(text: &str, path: &str) -> Option<usize> {
    let parts: Vec<&str> = path.split('.').collect();
    let mut table: Vec<String> = Vec::new();
    let mut best: Option<(usize, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let inner = line.trim_start_matches('[').split(']').next().unwrap_or("");
            table = inner.split('.').map(|s| s.trim().to_string()).collect();
            let depth = table.len();
            if depth <= parts.len()
                && table.iter().zip(&parts).all(|(a, b)| a == b)
                && best.is_none_or(|(d, _)| depth > d)
            {
                best = Some((depth, i + 1));
            }
            continue;
        }
        let Some((key, _)) = line.split_once('=') else {
            continue;
        };
        let mut full = table.clone();
        full.extend(key.trim().split('.').map(|s| s.trim().to_string()));
        let depth = full.len();
        if depth <= parts.len() && full.iter().zip(&parts).all(|(a, b)| a == b) {
            if depth == parts.len() {
                return Some(i + 1);
            }
            if best.is_none_or(|(d, _)| depth > d) {
                best = Some((depth, i + 1));
            }
        }
    }
    best.map(|(_, l)| l)
}

fn diag(text: &str, path: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line: locate(text, path),
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parses and validates a scenario without running anything.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario, Vec<Diagnostic>> {
    let mut scenario: Scenario = toml::from_str(text).map_err(|e| {
        vec![Diagnostic {
            line: e.span().map(|s| line_of(text, s.start)),
            path: String::new(),
            message: e.message().trim().to_string(),
        }]
    })?;
    scenario.base_dir = base_dir.map(Path::to_path_buf);
    let problems = validate(&scenario, text);
    if problems.is_empty() {
        Ok(scenario)
    } else {
        Err(problems)
    }
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![Diagnostic {
            line: None,
            path: path.display().to_string(),
            message: e.to_string(),
        }]
    })?;
    parse_scenario(&text, path.parent())
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn validate(s: &Scenario, text: &str) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if s.seed.is_none() {
        out.push(Diagnostic {
            line: Some(1),
            path: "seed".into(),
            message: "seed required".into(),
        });
    }
    if s.name.trim().is_empty() {
        out.push(diag(text, "name", "must not be empty"));
    }
    if !Section::ALL.iter().any(|&sec| s.has(sec)) {
        out.push(Diagnostic {
            line: None,
            path: String::new(),
            message: format!(
                "no experiment table; expected one of {}",
                Section::ALL.map(Section::key).join(", ")
            ),
        });
    }
    for (i, e) in s.expect.iter().enumerate() {
        if e.min.is_none() && e.max.is_none() {
            out.push(diag(
                text,
                "expect",
                format!("expectation {i} on `{}` needs min or max", e.metric),
            ));
        }
    }
    if let Some(c) = &s.comb_lock {
        if !positive(c.duration_s) {
            out.push(diag(text, "comb_lock.duration_s", "must be positive"));
        }
        if let Err(e) = c.config.validate() {
            out.push(diag(text, "comb_lock.config", e.to_string()));
        }
        if !positive(c.plant.f_rep_hz) {
            out.push(diag(text, "comb_lock.plant.f_rep_hz", "must be positive"));
        }
    }
    if let Some(c) = &s.calibration {
        if !positive(c.target_slew_hz_per_s) {
            out.push(diag(
                text,
                "calibration.target_slew_hz_per_s",
                "must be positive",
            ));
        }
        if !(positive(c.ramp_duration_s)
            && c.ramp_settle_s >= 0.0
            && c.ramp_settle_s < c.ramp_duration_s)
        {
            out.push(diag(
                text,
                "calibration.ramp_settle_s",
                "must lie inside the ramp run",
            ));
        }
        if c.max_iterations == 0 {
            out.push(diag(
                text,
                "calibration.max_iterations",
                "must be at least 1",
            ));
        }
        if let Err(e) = c.config.validate() {
            out.push(diag(text, "calibration.config", e.to_string()));
        }
    }
    if let Some(a) = &s.averaging {
        if a.oversample.is_empty() || a.oversample.contains(&0) {
            out.push(diag(
                text,
                "averaging.oversample",
                "needs factors of at least 1",
            ));
        }
        if a.samples < 3 {
            out.push(diag(text, "averaging.samples", "needs at least 3 samples"));
        }
        if !(a.noise_rms_volts.is_finite() && a.noise_rms_volts >= 0.0) {
            out.push(diag(
                text,
                "averaging.noise_rms_volts",
                "must be non-negative",
            ));
        }
    }
    if let Some(o) = &s.offset_lock {
        if !positive(o.duration_s) {
            out.push(diag(text, "offset_lock.duration_s", "must be positive"));
        }
        if o.slaves.is_empty() {
            out.push(diag(
                text,
                "offset_lock",
                "needs at least one [[offset_lock.slaves]]",
            ));
        }
        for (i, sl) in o.slaves.iter().enumerate() {
            let mut cfg = o.config.clone();
            cfg.prescaler_n = sl.prescaler_n.unwrap_or(cfg.prescaler_n);
            cfg.f_dds_hz = sl.f_dds_hz.unwrap_or(cfg.f_dds_hz);
            if let Err(e) = cfg.validate() {
                out.push(diag(text, "offset_lock.slaves", format!("slave {i}: {e}")));
            }
        }
        if o.adev_taus_s.len() < 2 || o.adev_taus_s.iter().any(|&t| !positive(t)) {
            out.push(diag(
                text,
                "offset_lock.adev_taus_s",
                "needs at least two positive taus",
            ));
        }
    }
    if let Some(i) = &s.intensity_lock {
        if !positive(i.duration_s) {
            out.push(diag(text, "intensity_lock.duration_s", "must be positive"));
        }
        if let Err(e) = i.config.validate() {
            out.push(diag(text, "intensity_lock.config", e.to_string()));
        }
        if let Err(e) = i.gate.validate() {
            out.push(diag(text, "intensity_lock.gate", e.to_string()));
        }
    }
    if let Some(p) = &s.pipeline {
        if !positive(p.duration_s) {
            out.push(diag(text, "pipeline.duration_s", "must be positive"));
        }
        if let Err(e) = p.adc.validate() {
            out.push(diag(text, "pipeline.adc", e.to_string()));
        }
        let mut seen = [false; CHANNELS];
        for c in &p.channels {
            if c.index >= CHANNELS {
                out.push(diag(
                    text,
                    "pipeline.channels.index",
                    format!("channel {} does not exist", c.index),
                ));
                continue;
            }
            if std::mem::replace(&mut seen[c.index], true) {
                out.push(diag(
                    text,
                    "pipeline.channels.index",
                    format!("channel {} listed twice", c.index),
                ));
            }
            if let Err(e) = c.config.validate(c.index) {
                out.push(diag(text, "pipeline.channels.config", e.to_string()));
            }
        }
    }
    if let Some(d) = &s.dac {
        if d.update_rate_hz > MAX_UPDATE_RATE_HZ {
            out.push(diag(
                text,
                "dac.update_rate_hz",
                format!(
                    "{} Hz exceeds the 430 kHz maximum DAC update rate",
                    d.update_rate_hz
                ),
            ));
        } else if let Err(e) = dac_program(d, s.base_dir.as_deref(), UpdateMode::Synchronous) {
            out.push(diag(text, e.0, e.1));
        }
        if d.modes.is_empty() {
            out.push(diag(text, "dac.modes", "needs at least one mode"));
        }
        if d.simulation.observe.is_empty() {
            out.push(diag(
                text,
                "dac.simulation.observe",
                "needs at least one channel",
            ));
        }
        if let Some(c) = d.simulation.observe.iter().find(|&&c| c >= DAC_CHANNELS) {
            out.push(diag(
                text,
                "dac.simulation.observe",
                format!("channel {c} does not exist"),
            ));
        }
        if let Some(cut) = d.filter.highest_cutoff_hz() {
            if d.simulation.sample_rate_hz < 4.0 * cut {
                out.push(diag(
                    text,
                    "dac.simulation.sample_rate_hz",
                    "below 4x the highest filter cutoff",
                ));
            }
        }
        if d.simulation.sample_rate_hz < 10.0 * d.update_rate_hz {
            out.push(diag(
                text,
                "dac.simulation.sample_rate_hz",
                "must be at least 10x the update rate",
            ));
        }
        let (lo, hi) = d.band_hz;
        if !(lo >= 0.0 && hi > lo && hi <= d.simulation.sample_rate_hz / 2.0) {
            out.push(diag(
                text,
                "dac.band_hz",
                "band must be increasing and below the simulation Nyquist frequency",
            ));
        }
        if !d.segment_length.is_power_of_two() {
            out.push(diag(text, "dac.segment_length", "must be a power of two"));
        }
        let samples = d.simulation.duration_s * d.simulation.sample_rate_hz;
        if samples < d.segment_length as f64 {
            out.push(diag(
                text,
                "dac.simulation.duration_s",
                "shorter than one spectrum segment",
            ));
        }
    }
    if let Some(c) = &s.coherence {
        if c.taus_s.len() < 4 || c.taus_s.iter().any(|&t| !positive(t)) {
            out.push(diag(
                text,
                "coherence.taus_s",
                "needs at least four positive taus",
            ));
        }
        if c.trials < 100 {
            out.push(diag(text, "coherence.trials", "needs at least 100 trials"));
        }
    }
    out
}

/// Builds the voltage program for `mode`, or names the offending key.
pub fn dac_program(
    d: &DacSection,
    base_dir: Option<&Path>,
    mode: UpdateMode,
) -> Result<VoltageProgram, (&'static str, String)> {
    let sets = match &d.program_file {
        Some(p) => {
            let path = match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.clone(),
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ("dac.program_file", format!("{}: {e}", path.display())))?;
            parse_program_text(&text)
                .map_err(|e| ("dac.program_file", format!("{}: {e}", path.display())))?
        }
        None => {
            let mut sets = Vec::with_capacity(d.sets.len());
            for spec in &d.sets {
                let base =
                    voltage_to_code(spec.default_volts).map_err(|e| ("dac.sets", e.to_string()))?;
                let mut set = VoltageSet::uniform(base);
                for &(ch, v) in &spec.channels {
                    if ch >= DAC_CHANNELS {
                        return Err(("dac.sets", format!("channel {ch} does not exist")));
                    }
                    set = set.with_channel(
                        ch,
                        voltage_to_code(v).map_err(|e| ("dac.sets", e.to_string()))?,
                    );
                }
                sets.push(set);
            }
            sets
        }
    };
    let steps = if d.steps_between.is_empty() && !sets.is_empty() {
        vec![1; sets.len() - 1]
    } else {
        d.steps_between.clone()
    };
    load_program(sets, steps, d.update_rate_hz, mode).map_err(|e| ("dac", e.to_string()))
}
