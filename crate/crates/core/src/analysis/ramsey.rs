use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::AnalysisError;

const MIN_TRIALS: usize = 100;

/// Where each trial's qubit-drive detuning comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetuningSource {
    None,
    /// Constant within a trial, Gaussian across trials.
    StaticGaussian {
        sigma_hz: f64,
        #[serde(default)]
        mean_hz: f64,
    },
    /// Detuning record sampled every `dt_s`; each trial starts at a random
    /// offset into it.
    Recorded {
        trace_hz: Vec<f64>,
        dt_s: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyPoint {
    pub tau_s: f64,
    pub visibility: f64,
    pub stderr: f64,
}

fn phases<R: Rng + ?Sized>(
    source: &DetuningSource,
    tau_s: f64,
    n_trials: usize,
    rng: &mut R,
) -> Result<Vec<f64>, AnalysisError> {
    if n_trials < MIN_TRIALS {
        return Err(AnalysisError::TooFewTrials(MIN_TRIALS));
    }
    if !(tau_s.is_finite() && tau_s >= 0.0) {
        return Err(AnalysisError::NonFinite);
    }
    Ok(match source {
        DetuningSource::None => vec![0.0; n_trials],
        DetuningSource::StaticGaussian { sigma_hz, mean_hz } => (0..n_trials)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                TAU * (mean_hz + sigma_hz * z) * tau_s
            })
            .collect(),
        DetuningSource::Recorded { trace_hz, dt_s } => {
            if !(dt_s.is_finite() && *dt_s > 0.0) {
                return Err(AnalysisError::BadSpacing(*dt_s));
            }
            let m = (tau_s / dt_s).round() as usize;
            if trace_hz.len() <= m {
                return Err(AnalysisError::TooShort {
                    needed: m + 1,
                    got: trace_hz.len(),
                });
            }
            let mut prefix = Vec::with_capacity(trace_hz.len() + 1);
            let mut acc = 0.0;
            prefix.push(0.0);
            for d in trace_hz {
                acc += d * dt_s;
                prefix.push(acc);
            }
            let starts = trace_hz.len() - m + 1;
            (0..n_trials)
                .map(|_| {
                    let i = rng.random_range(0..starts);
                    TAU * (prefix[i + m] - prefix[i])
                })
                .collect()
        }
    })
}

/// Ramsey fringe contrast `|⟨exp(iφ)⟩|` after free evolution `tau_s`, with
/// `φ = 2π∫Δ dt` per trial.
pub fn ramsey_visibility<R: Rng + ?Sized>(
    source: &DetuningSource,
    tau_s: f64,
    n_trials: usize,
    rng: &mut R,
) -> Result<RamseyPoint, AnalysisError> {
    let ph = phases(source, tau_s, n_trials, rng)?;
    let n = ph.len() as f64;
    let (mut c, mut s, mut cc, mut ss, mut cs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in &ph {
        let (sn, cn) = p.sin_cos();
        c += cn;
        s += sn;
        cc += cn * cn;
        ss += sn * sn;
        cs += cn * sn;
    }
    let visibility = (c * c + s * s).sqrt() / n;
    // Spread of the projection onto the mean phasor direction.
    let psi = s.atan2(c);
    let (sp, cp) = psi.sin_cos();
    let second = (cp * cp * cc + sp * sp * ss + 2.0 * cp * sp * cs) / n;
    let var = (second - visibility * visibility).max(0.0);
    Ok(RamseyPoint {
        tau_s,
        visibility: visibility.min(1.0),
        stderr: (var / n).sqrt(),
    })
}

/// Bright-state probability against the analysis phase of the second pulse,
/// averaged over the same set of trials for every phase.
pub fn ramsey_fringe<R: Rng + ?Sized>(
    source: &DetuningSource,
    tau_s: f64,
    analysis_phases: &[f64],
    n_trials: usize,
    rng: &mut R,
) -> Result<Vec<f64>, AnalysisError> {
    let ph = phases(source, tau_s, n_trials, rng)?;
    let n = ph.len() as f64;
    Ok(analysis_phases
        .iter()
        .map(|a| ph.iter().map(|p| 0.5 * (1.0 + (p - a).cos())).sum::<f64>() / n)
        .collect())
}

/// Contrast of a fringe from a linear fit of `c0 + a·cos φ + b·sin φ`.
pub fn fringe_visibility(analysis_phases: &[f64], probs: &[f64]) -> Result<f64, AnalysisError> {
    if analysis_phases.len() != probs.len() {
        return Err(AnalysisError::LengthMismatch(
            analysis_phases.len(),
            probs.len(),
        ));
    }
    if probs.len() < 3 {
        return Err(AnalysisError::TooShort {
            needed: 3,
            got: probs.len(),
        });
    }
    // Normal equations for [1, cos, sin].
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (&phi, &p) in analysis_phases.iter().zip(probs) {
        let basis = [1.0, phi.cos(), phi.sin()];
        for i in 0..3 {
            r[i] += basis[i] * p;
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
        }
    }
    let x = solve3(m, r).ok_or(AnalysisError::DegenerateAbscissa)?;
    Ok(2.0 * (x[1] * x[1] + x[2] * x[2]).sqrt())
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                let pivot_row = m[col];
                for (x, p) in m[row].iter_mut().zip(pivot_row).skip(col) {
                    *x -= f * p;
                }
                r[row] -= f * r[col];
            }
        }
    }
    Some([r[0] / m[0][0], r[1] / m[1][1], r[2] / m[2][2]])
}
