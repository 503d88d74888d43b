use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step_time_s: f64,
    pub initial: f64,
    pub final_value: f64,
    /// Mean rate between the 10% and 90% crossings.
    pub slew_hz_per_s: f64,
    pub t10_s: f64,
    pub t90_s: f64,
    /// Time after the step until the response stays within 1% of the step.
    pub settle_time_s: f64,
    /// Peak excursion past the final value, as a fraction of the step.
    pub overshoot: f64,
}

// Interpolated time at which the normalized response first reaches `level`.
fn crossing(t: &[f64], norm: &[f64], from: usize, level: f64) -> Option<f64> {
    for i in from.max(1)..norm.len() {
        if norm[i] >= level {
            let (a, b) = (norm[i - 1], norm[i]);
            if i == from || a >= level || b == a {
                return Some(t[i]);
            }
            return Some(t[i - 1] + (level - a) / (b - a) * (t[i] - t[i - 1]));
        }
    }
    None
}

/// Reacquisition metrics for a response to a single step.
///
/// The pre-step level is the last sample at or before `step_time_s` (the
/// first sample when absent); the final level is the mean of the last 5% of
/// the record.
pub fn step_response_metrics(
    t: &[f64],
    values: &[f64],
    step_time_s: Option<f64>,
) -> Result<StepMetrics, AnalysisError> {
    if t.len() != values.len() {
        return Err(AnalysisError::LengthMismatch(t.len(), values.len()));
    }
    if t.len() < 3 {
        return Err(AnalysisError::TooShort {
            needed: 3,
            got: t.len(),
        });
    }
    if t.iter().chain(values).any(|x| !x.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let start = match step_time_s {
        Some(ts) => t.iter().rposition(|&x| x <= ts).unwrap_or(0),
        None => 0,
    };
    let initial = values[start];
    let tail = (values.len() / 20).max(1);
    let final_value = values[values.len() - tail..].iter().sum::<f64>() / tail as f64;
    let step = final_value - initial;
    let scale = initial.abs().max(final_value.abs()).max(1.0);
    if step.abs() <= 1e-12 * scale {
        return Err(AnalysisError::NoStep);
    }
    let norm: Vec<f64> = values.iter().map(|v| (v - initial) / step).collect();
    let step_time = step_time_s.unwrap_or(t[0]);
    let t10 = crossing(t, &norm, start, 0.1).ok_or(AnalysisError::NoStep)?;
    let t90 = crossing(t, &norm, start, 0.9).ok_or(AnalysisError::NoStep)?;
    let slew = if t90 > t10 {
        0.8 * step.abs() / (t90 - t10)
    } else {
        f64::INFINITY
    };
    let last_out = (start..norm.len())
        .rev()
        .find(|&i| (norm[i] - 1.0).abs() > 0.01);
    let settle_time_s = match last_out {
        Some(i) if i + 1 < t.len() => t[i + 1] - step_time,
        Some(i) => t[i] - step_time,
        None => 0.0,
    };
    let peak = norm[start..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StepMetrics {
        step_time_s: step_time,
        initial,
        final_value,
        slew_hz_per_s: slew,
        t10_s: t10,
        t90_s: t90,
        settle_time_s,
        overshoot: (peak - 1.0).max(0.0),
    })
}
