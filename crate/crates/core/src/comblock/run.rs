use serde::{Deserialize, Serialize};

use super::resonance::{feed_forward, initial_f2, resonance_residual, Branch};
use super::{CombError, PiController};
use crate::plant::RepRatePlant;
use crate::rng::substream;
use crate::sigcore::{adc_quantize, AdcSpec, Boxcar, DdsChannel, PhaseFrequencyDetector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombLockConfig {
    pub n_harmonic: u32,
    pub f_qubit_hz: f64,
    pub f1_hz: f64,
    /// Starting AOM tone; derived from the resonance condition when absent.
    pub f2_init_hz: Option<f64>,
    pub oversample_n: u32,
    pub sample_rate_hz: f64,
    pub sign: Branch,
    pub aom_min_hz: f64,
    pub aom_max_hz: f64,
    pub detector_gain_v_per_cycle: f64,
    pub adc: AdcSpec,
    pub dds_clock_hz: f64,
    pub lock_threshold_hz: f64,
    pub lock_dwell_samples: u32,
    /// Keep one trajectory row every this many loop updates.
    pub log_every: u32,
    /// Residual statistics only count loop updates at or after this time.
    pub stats_from_s: f64,
    /// Keep every raw ADC reading and every commanded `f0`.
    pub record_detector: bool,
}

impl Default for CombLockConfig {
    fn default() -> Self {
        Self {
            n_harmonic: 166,
            f_qubit_hz: 12.6e9,
            f1_hz: 200e6,
            f2_init_hz: None,
            oversample_n: 1,
            sample_rate_hz: 1e6,
            sign: Branch::Plus,
            aom_min_hz: 150e6,
            aom_max_hz: 250e6,
            detector_gain_v_per_cycle: 20.0,
            adc: AdcSpec::ad7671().with_noise(0.5e-3),
            dds_clock_hz: 1e9,
            lock_threshold_hz: 1.0,
            lock_dwell_samples: 100,
            log_every: 100,
            stats_from_s: 0.0,
            record_detector: false,
        }
    }
}

impl CombLockConfig {
    pub fn effective_rate_hz(&self) -> f64 {
        self.sample_rate_hz / f64::from(self.oversample_n)
    }

    pub fn validate(&self) -> Result<(), CombError> {
        let bad = |m: String| Err(CombError::Config(m));
        if self.n_harmonic == 0 {
            return bad("n_harmonic must be at least 1".into());
        }
        if self.oversample_n == 0 {
            return bad("oversample_n must be at least 1".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        self.adc.validate()?;
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz <= self.adc.sample_rate_hz) {
            return bad(format!(
                "sample_rate_hz = {} must be in (0, {}] for this ADC",
                self.sample_rate_hz, self.adc.sample_rate_hz
            ));
        }
        if self.aom_min_hz.partial_cmp(&self.aom_max_hz) != Some(std::cmp::Ordering::Less) {
            return bad("aom_min_hz must be below aom_max_hz".into());
        }
        for (name, v) in [
            ("f_qubit_hz", self.f_qubit_hz),
            ("f1_hz", self.f1_hz),
            ("detector_gain_v_per_cycle", self.detector_gain_v_per_cycle),
            ("dds_clock_hz", self.dds_clock_hz),
            ("lock_threshold_hz", self.lock_threshold_hz),
            ("stats_from_s", self.stats_from_s),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    fn starting_f2(&self, f_rep_hz: f64) -> f64 {
        self.f2_init_hz.unwrap_or_else(|| {
            initial_f2(
                f_rep_hz,
                self.f1_hz,
                self.n_harmonic,
                self.f_qubit_hz,
                self.sign,
            )
        })
    }

    fn residual(&self, f_rep_hz: f64, f2_hz: f64) -> f64 {
        resonance_residual(
            f_rep_hz,
            self.f1_hz,
            f2_hz,
            self.n_harmonic,
            self.f_qubit_hz,
            self.sign,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LockRow {
    pub k: u64,
    pub t_s: f64,
    pub f_rep_hz: f64,
    pub f0_hz: f64,
    pub f2_hz: f64,
    /// Averaged detector reading for this update.
    pub error_v: f64,
    pub residual_hz: f64,
    pub locked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualStats {
    pub count: u64,
    pub rms_hz: f64,
    pub max_abs_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockTrajectory {
    pub rows: Vec<LockRow>,
    pub locked: bool,
    pub lock_acquired_s: Option<f64>,
    pub residual_stats: ResidualStats,
    pub effective_rate_hz: f64,
    /// Raw ADC volts, one per conversion, when recording is enabled.
    pub detector_trace: Vec<f64>,
    /// Commanded `f0` after every loop update, when recording is enabled.
    pub commanded_f0_hz: Vec<f64>,
    pub fault: Option<CombError>,
}

/// Runs the comb lock for `duration_s`.
///
/// Each conversion advances the plant by one ADC period and integrates the
/// phase slip between `f_rep` and the DDS0 output into a saturating
/// phase-frequency detector. Every `oversample_n` conversions the mean
/// reading `D_k` is formed and its increment `D_k - D_{k-1}` drives the PI
/// controller, so `f0 = f0_init + P·D_k + I·Σ D`. The realized change of
/// DDS0 is the drift estimate `δ` fed forward to `f2`.
///
/// Runtime faults end the run early; the rows produced so far are kept and
/// the fault is stored on the trajectory.
pub fn comb_lock_run(
    mut plant: RepRatePlant,
    config: &CombLockConfig,
    mut pi: PiController,
    duration_s: f64,
) -> Result<LockTrajectory, CombError> {
    config.validate()?;
    if !(duration_s.is_finite() && duration_s >= 0.0) {
        return Err(CombError::Config(format!("duration_s = {duration_s}")));
    }
    let n_over = config.oversample_n as usize;
    let dt = 1.0 / config.sample_rate_hz;
    let t_eff = f64::from(config.oversample_n) * dt;
    let updates = (duration_s / t_eff).round() as u64;
    let mut rng = substream(plant.rng_seed(), 1);

    let mut dds0 = DdsChannel::tuned(pi.output_hz(), config.dds_clock_hz)?;
    let mut f0 = dds0.frequency_hz();
    let mut f2 = config.starting_f2(plant.f_rep_hz());
    let mut pfd = PhaseFrequencyDetector::new(config.detector_gain_v_per_cycle);
    let mut boxcar = Boxcar::new(n_over)?;
    let mut d_prev = 0.0;
    let mut consecutive = 0u32;
    let mut locked = false;
    let mut lock_acquired_s = None;
    let (mut sq, mut max_abs, mut count) = (0.0f64, 0.0f64, 0u64);

    let mut traj = LockTrajectory {
        rows: Vec::with_capacity((updates / u64::from(config.log_every) + 2) as usize),
        locked: false,
        lock_acquired_s: None,
        residual_stats: ResidualStats::default(),
        effective_rate_hz: config.effective_rate_hz(),
        detector_trace: Vec::new(),
        commanded_f0_hz: Vec::new(),
        fault: None,
    };
    if config.record_detector {
        traj.detector_trace.reserve(updates as usize * n_over);
        traj.commanded_f0_hz.reserve(updates as usize);
    }
    traj.rows.push(LockRow {
        k: 0,
        t_s: 0.0,
        f_rep_hz: plant.f_rep_hz(),
        f0_hz: f0,
        f2_hz: f2,
        error_v: 0.0,
        residual_hz: config.residual(plant.f_rep_hz(), f2),
        locked: false,
    });

    let mut sample_index = 0u64;
    for k in 1..=updates {
        let mut mean = None;
        for _ in 0..n_over {
            plant.evolve(dt)?;
            pfd.advance((plant.f_rep_hz() - f0) * dt)?;
            let s = adc_quantize(pfd.output_volts(), &config.adc, &mut rng, sample_index);
            sample_index += 1;
            if config.record_detector {
                traj.detector_trace.push(s.volts);
            }
            mean = boxcar.push(s.volts);
        }
        let d_k = mean.expect("boxcar emits once per oversample block");
        let e_k = d_k - d_prev;
        d_prev = d_k;
        if let Err(err) = pi.step(e_k) {
            traj.fault = Some(match err {
                CombError::ControllerFault(v, _) => CombError::ControllerFault(v, k),
                other => other,
            });
            break;
        }
        if config.record_detector {
            traj.commanded_f0_hz.push(pi.output_hz());
        }
        if let Err(err) = dds0.set_frequency(pi.output_hz()) {
            traj.fault = Some(err.into());
            break;
        }
        let f0_new = dds0.frequency_hz();
        let delta = f0_new - f0;
        f0 = f0_new;
        f2 = feed_forward(f2, config.n_harmonic, delta, config.sign);
        if !(config.aom_min_hz..=config.aom_max_hz).contains(&f2) {
            traj.fault = Some(CombError::AomRange {
                f2_hz: f2,
                min_hz: config.aom_min_hz,
                max_hz: config.aom_max_hz,
                k,
            });
            break;
        }

        let t = k as f64 * t_eff;
        let residual = config.residual(plant.f_rep_hz(), f2);
        if residual.abs() < config.lock_threshold_hz {
            consecutive = consecutive.saturating_add(1);
        } else {
            consecutive = 0;
        }
        locked = consecutive >= config.lock_dwell_samples;
        if locked && lock_acquired_s.is_none() {
            lock_acquired_s = Some(t);
        }
        if t >= config.stats_from_s {
            sq += residual * residual;
            max_abs = max_abs.max(residual.abs());
            count += 1;
        }
        if k % u64::from(config.log_every) == 0 || k == updates {
            traj.rows.push(LockRow {
                k,
                t_s: t,
                f_rep_hz: plant.f_rep_hz(),
                f0_hz: f0,
                f2_hz: f2,
                error_v: d_k,
                residual_hz: residual,
                locked,
            });
        }
    }

    traj.locked = locked;
    traj.lock_acquired_s = lock_acquired_s;
    traj.residual_stats = ResidualStats {
        count,
        rms_hz: if count > 0 {
            (sq / count as f64).sqrt()
        } else {
            0.0
        },
        max_abs_hz: max_abs,
    };
    Ok(traj)
}

/// Averaged detector readings with the loop open and DDS0 offset from
/// `f_rep` by `detuning_hz`, one `(t_s, D_k)` pair per `oversample_n`
/// conversions.
pub fn unlocked_error_trace(
    config: &CombLockConfig,
    detuning_hz: f64,
    initial_phase_cycles: f64,
    n_updates: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>, CombError> {
    config.validate()?;
    let n_over = config.oversample_n as usize;
    let dt = 1.0 / config.sample_rate_hz;
    let t_eff = f64::from(config.oversample_n) * dt;
    let mut rng = substream(seed, 1);
    let mut pfd = PhaseFrequencyDetector::new(config.detector_gain_v_per_cycle)
        .with_initial_phase(initial_phase_cycles);
    let mut boxcar = Boxcar::new(n_over)?;
    let mut out = Vec::with_capacity(n_updates);
    let mut index = 0u64;
    for k in 1..=n_updates {
        let mut mean = None;
        for _ in 0..n_over {
            pfd.advance(detuning_hz * dt)?;
            let s = adc_quantize(pfd.output_volts(), &config.adc, &mut rng, index);
            index += 1;
            mean = boxcar.push(s.volts);
        }
        out.push((k as f64 * t_eff, mean.expect("one mean per block")));
    }
    Ok(out)
}
