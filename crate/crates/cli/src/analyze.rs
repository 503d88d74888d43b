//! `trapctl analyze`: stand-alone analysis of CSV data.

use std::path::Path;

use serde::Serialize;
use trapctl_core::analysis::{allan_deviation, fit_gaussian_coherence, psd_estimate, FreqSeries};

use crate::artifacts::{num, Artifacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Analysis {
    /// Overlapping Allan deviation of a uniformly sampled column.
    Adev,
    /// Welch power spectral density of a uniformly sampled column.
    Psd,
    /// Gaussian coherence fit to (tau, visibility) pairs.
    Coherence,
}

#[derive(Debug, Serialize)]
struct Summary {
    metric: String,
    value: f64,
    stderr: Option<f64>,
}

/// First column is the abscissa, `column` (default: the second) the data.
fn read_columns(path: &Path, column: Option<&str>) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let idx = match column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("no column `{name}` in {}", path.display()))?,
        None => 1,
    };
    if headers.len() <= idx {
        return Err(format!("{} needs at least two columns", path.display()));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |j: usize| {
            rec.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| format!("row {}: column {j} is not a number", i + 2))
        };
        xs.push(parse(0)?);
        ys.push(parse(idx)?);
    }
    Ok((xs, ys))
}

fn spacing(xs: &[f64]) -> Result<f64, String> {
    if xs.len() < 2 {
        return Err("need at least two rows".into());
    }
    Ok((xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64)
}

pub fn analyze(
    kind: Analysis,
    input: &Path,
    column: Option<&str>,
    out: &Path,
) -> Result<(), String> {
    let (xs, ys) = read_columns(input, column)?;
    let mut art = Artifacts::create(out).map_err(|e| e.to_string())?;
    let mut summary = Vec::new();
    match kind {
        Analysis::Adev => {
            let pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
            let series = FreqSeries::from_samples(&pairs).map_err(|e| e.to_string())?;
            let dt = series.uniform_dt_s;
            let max_m = (ys.len() - 1) / 2;
            let mut taus = Vec::new();
            let mut m = 1usize;
            while m <= max_m {
                taus.push(m as f64 * dt);
                m = ((m as f64 * 10f64.powf(0.1)).ceil() as usize).max(m + 1);
            }
            let curve = allan_deviation(&series, &taus);
            art.csv(
                "adev.csv",
                &["tau_s", "adev", "stderr", "n_differences"],
                curve.points.iter().map(|p| {
                    vec![
                        num(p.tau_s),
                        num(p.adev),
                        num(p.stderr),
                        p.n_differences.to_string(),
                    ]
                }),
            )?;
            if let (Some(first), Some(last)) = (curve.points.first(), curve.points.last()) {
                if let Some(slope) = curve.log_slope(first.tau_s, last.tau_s) {
                    summary.push(Summary {
                        metric: "adev_slope".into(),
                        value: slope,
                        stderr: None,
                    });
                }
                summary.push(Summary {
                    metric: "adev_first_tau".into(),
                    value: first.adev,
                    stderr: Some(first.stderr),
                });
            }
        }
        Analysis::Psd => {
            let fs = 1.0 / spacing(&xs)?;
            let seg = (ys.len() / 8)
                .max(2)
                .next_power_of_two()
                .min(ys.len().next_power_of_two() / 2)
                .max(2);
            let s = psd_estimate(&ys, fs, seg, 0.5).map_err(|e| e.to_string())?;
            art.csv(
                "psd.csv",
                &["freq_hz", "psd"],
                s.freqs_hz
                    .iter()
                    .zip(&s.psd)
                    .map(|(f, p)| vec![num(*f), num(*p)]),
            )?;
            summary.push(Summary {
                metric: "enbw_hz".into(),
                value: s.enbw_hz,
                stderr: None,
            });
            summary.push(Summary {
                metric: "segments".into(),
                value: s.n_segments as f64,
                stderr: None,
            });
        }
        Analysis::Coherence => {
            let pts: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
            let fit = fit_gaussian_coherence(&pts).map_err(|e| e.to_string())?;
            summary.push(Summary {
                metric: "coherence_time_s".into(),
                value: fit.coherence_time_alpha_s,
                stderr: Some(fit.alpha_stderr),
            });
            summary.push(Summary {
                metric: "fringe_amplitude".into(),
                value: fit.amplitude,
                stderr: Some(fit.amplitude_stderr),
            });
        }
    }
    art.json("summary.json", &summary)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?
    );
    Ok(())
}
