use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AuxError;
use crate::comblock::PiController;
use crate::plant::{beat_note, BeatNotePlant};
use crate::rng::{seeded, SimRng};
use crate::sigcore::{prescale, wrap_cycles, DdsChannel};

/// Which side of the master the slave is locked on. The beat note alone
/// cannot tell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlaveSide {
    #[default]
    Above,
    Below,
}

impl SlaveSide {
    pub fn sign(self) -> f64 {
        match self {
            SlaveSide::Above => 1.0,
            SlaveSide::Below => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OffsetLockConfig {
    pub prescaler_n: u32,
    pub f_dds_hz: f64,
    pub dds_clock_hz: f64,
    pub pd_bandwidth_hz: f64,
    /// Slave Hz per Hz of prescaled frequency error.
    pub p_gain: f64,
    pub i_gain: f64,
    pub sign: SlaveSide,
    pub loop_rate_hz: f64,
    /// First-order response of the grating piezo.
    pub piezo_bandwidth_hz: f64,
    /// Discriminator output range, in prescaled Hz.
    pub detector_range_hz: f64,
    /// Weight of the wrapped phase difference, in Hz per cycle.
    pub phase_gain_hz_per_cycle: f64,
    /// Counter gate time for the reported beat error.
    pub report_interval_s: f64,
    /// Keep one internal row every this many loop steps.
    pub log_every: u32,
    /// `(time_s, new_f_dds_hz)` setpoint change during the run.
    pub retune: Option<(f64, f64)>,
}

impl Default for OffsetLockConfig {
    fn default() -> Self {
        Self {
            prescaler_n: 10,
            f_dds_hz: 20e6,
            dds_clock_hz: 1e9,
            pd_bandwidth_hz: 2e9,
            p_gain: 0.5,
            i_gain: 0.005,
            sign: SlaveSide::Above,
            loop_rate_hz: 10e3,
            piezo_bandwidth_hz: 1e3,
            detector_range_hz: 10e6,
            phase_gain_hz_per_cycle: 0.0,
            report_interval_s: 1.0,
            log_every: 1000,
            retune: None,
        }
    }
}

impl OffsetLockConfig {
    pub fn target_offset_hz(&self) -> f64 {
        f64::from(self.prescaler_n) * self.f_dds_hz
    }

    pub fn validate(&self) -> Result<(), AuxError> {
        let bad = |m: &str| Err(AuxError::Config(m.to_string()));
        if self.prescaler_n == 0 {
            return bad("prescaler_n must be at least 1");
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        for (name, v) in [
            ("loop_rate_hz", self.loop_rate_hz),
            ("piezo_bandwidth_hz", self.piezo_bandwidth_hz),
            ("detector_range_hz", self.detector_range_hz),
            ("report_interval_s", self.report_interval_s),
            ("pd_bandwidth_hz", self.pd_bandwidth_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(AuxError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let target = self.target_offset_hz();
        if target > self.pd_bandwidth_hz {
            return Err(AuxError::TargetBeyondBandwidth {
                target_hz: target,
                pd_bandwidth_hz: self.pd_bandwidth_hz,
            });
        }
        DdsChannel::tuned(self.f_dds_hz, self.dds_clock_hz)?;
        Ok(())
    }
}

/// Master laser as seen by every slave: a fixed optical offset plus optional
/// drift and white frequency noise from its own seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSpec {
    /// Frequency relative to the optical reference.
    pub frequency_hz: f64,
    #[serde(default)]
    pub drift_hz_per_s: f64,
    #[serde(default)]
    pub white_fm_rms_hz: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaveSpec {
    /// Free-running frequency relative to the optical reference.
    pub free_running_hz: f64,
    #[serde(default)]
    pub drift_hz_per_s: f64,
    /// Per-step white noise of the free-running frequency.
    #[serde(default)]
    pub white_fm_rms_hz: f64,
    /// Per-step white noise of the discriminator reading, in prescaled Hz.
    /// Stands in for the beat-note signal-to-noise ratio.
    #[serde(default)]
    pub detector_noise_rms_hz: f64,
    pub seed: u64,
}

/// One slave's loop state.
#[derive(Debug, Clone)]
pub struct OffsetLock {
    config: OffsetLockConfig,
    pi: PiController,
    dds: DdsChannel,
    phase_cycles: f64,
    piezo_hz: f64,
    piezo_alpha: f64,
    detector_noise_rms_hz: f64,
    rng: SimRng,
}

impl OffsetLock {
    pub fn new(
        config: OffsetLockConfig,
        detector_noise_rms_hz: f64,
        seed: u64,
    ) -> Result<Self, AuxError> {
        config.validate()?;
        let dds = DdsChannel::tuned(config.f_dds_hz, config.dds_clock_hz)?;
        let dt = 1.0 / config.loop_rate_hz;
        let piezo_alpha =
            1.0 - (-2.0 * std::f64::consts::PI * config.piezo_bandwidth_hz * dt).exp();
        Ok(Self {
            pi: PiController::new(config.p_gain, config.i_gain, 0.0),
            dds,
            phase_cycles: 0.0,
            piezo_hz: 0.0,
            piezo_alpha,
            detector_noise_rms_hz,
            rng: seeded(seed),
            config,
        })
    }

    pub fn config(&self) -> &OffsetLockConfig {
        &self.config
    }

    /// Frequency shift currently applied by the piezo.
    pub fn piezo_hz(&self) -> f64 {
        self.piezo_hz
    }

    /// Prescaled setpoint actually produced by the DDS.
    pub fn realized_f_dds_hz(&self) -> f64 {
        self.dds.frequency_hz()
    }

    pub fn retune(&mut self, f_dds_hz: f64) -> Result<(), AuxError> {
        let target = f64::from(self.config.prescaler_n) * f_dds_hz;
        if target > self.config.pd_bandwidth_hz {
            return Err(AuxError::TargetBeyondBandwidth {
                target_hz: target,
                pd_bandwidth_hz: self.config.pd_bandwidth_hz,
            });
        }
        self.dds.set_frequency(f_dds_hz)?;
        self.config.f_dds_hz = f_dds_hz;
        Ok(())
    }
}

/// One loop update: compares the prescaled beat with the DDS setpoint and
/// moves the piezo. Returns the change in slave frequency.
pub fn offset_lock_step(
    lock: &mut OffsetLock,
    master_hz: f64,
    slave_hz: f64,
) -> Result<f64, AuxError> {
    let cfg = &lock.config;
    let plant = BeatNotePlant {
        master_hz,
        slave_hz,
        pd_bandwidth_hz: cfg.pd_bandwidth_hz,
    };
    let beat = beat_note(&plant).ok_or(AuxError::OutOfCapture {
        beat_hz: (master_hz - slave_hz).abs(),
        pd_bandwidth_hz: cfg.pd_bandwidth_hz,
    })?;
    let dt = 1.0 / cfg.loop_rate_hz;
    let mut measured = prescale(beat, cfg.prescaler_n)?;
    if lock.detector_noise_rms_hz > 0.0 {
        let z: f64 = lock.rng.sample(StandardNormal);
        measured += lock.detector_noise_rms_hz * z;
    }
    let freq_err = lock.dds.frequency_hz() - measured;
    lock.phase_cycles = wrap_cycles(lock.phase_cycles + freq_err * dt);
    let e = (freq_err + cfg.phase_gain_hz_per_cycle * lock.phase_cycles)
        .clamp(-cfg.detector_range_hz, cfg.detector_range_hz);
    lock.pi
        .step(e)
        .map_err(|err| AuxError::Controller(err.to_string()))?;
    let command = cfg.sign.sign() * lock.pi.output_hz();
    let before = lock.piezo_hz;
    lock.piezo_hz += lock.piezo_alpha * (command - lock.piezo_hz);
    Ok(lock.piezo_hz - before)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetRow {
    pub t_s: f64,
    pub beat_hz: f64,
    pub beat_error_hz: f64,
    pub piezo_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTrajectory {
    /// Counter readings of `beat - target`, one per report interval.
    pub report: Vec<(f64, f64)>,
    pub internal: Vec<OffsetRow>,
    pub final_beat_hz: f64,
    pub final_target_hz: f64,
    pub fault: Option<AuxError>,
}

struct Walker {
    f: f64,
    drift: f64,
    sigma: f64,
    rng: SimRng,
}

impl Walker {
    fn step(&mut self, base: f64, t: f64) -> f64 {
        let mut v = base + self.drift * t;
        if self.sigma > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            v += self.sigma * z;
        }
        self.f = v;
        v
    }
}

/// Runs every slave against one shared master for `duration_s`.
///
/// The master trajectory depends only on its own seed and each slave only on
/// its own, so the result for a slave is the same whether it runs alone or
/// alongside others.
pub fn offset_lock_run(
    master: &MasterSpec,
    slaves: &[SlaveSpec],
    config: &OffsetLockConfig,
    duration_s: f64,
) -> Result<Vec<OffsetTrajectory>, AuxError> {
    config.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(AuxError::Config(format!("duration_s = {duration_s}")));
    }
    slaves
        .iter()
        .map(|s| run_one(master, s, config, duration_s))
        .collect()
}

fn run_one(
    master: &MasterSpec,
    slave: &SlaveSpec,
    config: &OffsetLockConfig,
    duration_s: f64,
) -> Result<OffsetTrajectory, AuxError> {
    let dt = 1.0 / config.loop_rate_hz;
    let steps = (duration_s * config.loop_rate_hz).round() as u64;
    let per_report = (config.report_interval_s * config.loop_rate_hz)
        .round()
        .max(1.0) as u64;
    let mut lock = OffsetLock::new(config.clone(), slave.detector_noise_rms_hz, slave.seed)?;
    let mut m = Walker {
        f: master.frequency_hz,
        drift: master.drift_hz_per_s,
        sigma: master.white_fm_rms_hz,
        rng: seeded(master.seed),
    };
    let mut s = Walker {
        f: slave.free_running_hz,
        drift: slave.drift_hz_per_s,
        sigma: slave.white_fm_rms_hz,
        rng: crate::rng::substream(slave.seed, 1),
    };
    let mut traj = OffsetTrajectory {
        report: Vec::with_capacity((steps / per_report) as usize),
        internal: Vec::new(),
        final_beat_hz: f64::NAN,
        final_target_hz: config.target_offset_hz(),
        fault: None,
    };
    let mut retune = config.retune;
    let mut acc = 0.0;
    let mut acc_n = 0u64;
    for k in 0..steps {
        let t = k as f64 * dt;
        if let Some((at, f)) = retune {
            if t >= at {
                if let Err(e) = lock.retune(f) {
                    traj.fault = Some(e);
                    break;
                }
                retune = None;
            }
        }
        let master_hz = m.step(master.frequency_hz, t);
        let slave_hz = s.step(slave.free_running_hz, t) + lock.piezo_hz();
        if let Err(e) = offset_lock_step(&mut lock, master_hz, slave_hz) {
            traj.fault = Some(e);
            break;
        }
        let target = f64::from(config.prescaler_n) * lock.realized_f_dds_hz();
        let beat = (m.f - (s.f + lock.piezo_hz())).abs();
        traj.final_beat_hz = beat;
        traj.final_target_hz = target;
        acc += beat - target;
        acc_n += 1;
        if acc_n == per_report {
            traj.report.push(((k + 1) as f64 * dt, acc / acc_n as f64));
            acc = 0.0;
            acc_n = 0;
        }
        if k % u64::from(config.log_every) == 0 {
            traj.internal.push(OffsetRow {
                t_s: (k + 1) as f64 * dt,
                beat_hz: beat,
                beat_error_hz: beat - target,
                piezo_hz: lock.piezo_hz(),
            });
        }
    }
    Ok(traj)
}
