use serde::{Deserialize, Serialize};

use super::{comb_lock_run, CombError, CombLockConfig, PiController};
use crate::analysis::{step_response_metrics, StepMetrics};
use crate::plant::RepRatePlant;

/// Slew rate expected while the detector sits on its rail: each loop update
/// adds `I·D_rail` to `f0`.
pub fn predicted_slew_hz_per_s(config: &CombLockConfig, i_gain: f64) -> f64 {
    let rail = (config.detector_gain_v_per_cycle * 0.5).min(config.adc.max_volts());
    i_gain * rail * config.effective_rate_hz()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlewCalibration {
    pub p_gain: f64,
    pub i_gain: f64,
    pub predicted_slew_hz_per_s: f64,
    pub measured_slew_hz_per_s: f64,
    pub iterations: usize,
    pub metrics: StepMetrics,
}

/// Finds the integral gain giving `target_slew` on a clean synthesizer step
/// of `step_hz`, holding `p_gain` fixed.
///
/// Starts from the rail-limited prediction and rescales `I` by the ratio of
/// target to measured slew until they agree within `rel_tol`.
pub fn calibrate_slew(
    config: &CombLockConfig,
    f_rep_hz: f64,
    p_gain: f64,
    target_slew: f64,
    step_hz: f64,
    rel_tol: f64,
    max_iterations: usize,
) -> Result<SlewCalibration, CombError> {
    if !(target_slew > 0.0 && step_hz != 0.0 && step_hz.is_finite()) {
        return Err(CombError::Config(
            "calibration needs a positive slew and a non-zero step".into(),
        ));
    }
    let step_at = 0.1;
    let duration = step_at + 1.5 * step_hz.abs() / target_slew + 1.0;
    let mut i_gain = target_slew / predicted_slew_hz_per_s(config, 1.0);
    let mut last = f64::NAN;
    for iteration in 1..=max_iterations {
        let plant = RepRatePlant::fixed(f_rep_hz)?.with_step(step_at, step_hz);
        let pi = PiController::new(p_gain, i_gain, f_rep_hz);
        let traj = comb_lock_run(plant, config, pi, duration)?;
        if let Some(fault) = traj.fault {
            return Err(fault);
        }
        let t: Vec<f64> = traj.rows.iter().map(|r| r.t_s).collect();
        let f0: Vec<f64> = traj.rows.iter().map(|r| r.f0_hz).collect();
        let metrics = step_response_metrics(&t, &f0, Some(step_at))
            .map_err(|e| CombError::Config(format!("step metrics: {e}")))?;
        last = metrics.slew_hz_per_s;
        if ((last - target_slew) / target_slew).abs() <= rel_tol {
            return Ok(SlewCalibration {
                p_gain,
                i_gain,
                predicted_slew_hz_per_s: predicted_slew_hz_per_s(config, i_gain),
                measured_slew_hz_per_s: last,
                iterations: iteration,
                metrics,
            });
        }
        i_gain *= target_slew / last;
    }
    Err(CombError::Calibration {
        last_slew: last,
        iterations: max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prediction_at_one_msps() {
        let cfg = CombLockConfig::default();
        let s = predicted_slew_hz_per_s(&cfg, 5e-6);
        assert!((s - 50.0).abs() < 0.01, "{s}");
    }

    #[test]
    fn rejects_zero_step() {
        let cfg = CombLockConfig::default();
        assert!(calibrate_slew(&cfg, 76e6, 1.0, 50.0, 0.0, 0.02, 3).is_err());
    }
}
