use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Uniformly sampled record of frequency (or any other) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqSeries {
    pub t0_s: f64,
    pub uniform_dt_s: f64,
    pub values: Vec<f64>,
}

impl FreqSeries {
    pub fn uniform(t0_s: f64, dt_s: f64, values: Vec<f64>) -> Result<Self, AnalysisError> {
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err(AnalysisError::BadSpacing(dt_s));
        }
        if values.len() < 2 {
            return Err(AnalysisError::TooShort {
                needed: 2,
                got: values.len(),
            });
        }
        Ok(Self {
            t0_s,
            uniform_dt_s: dt_s,
            values,
        })
    }

    /// Builds a series from `(t, value)` pairs, checking the spacing is
    /// uniform to 1e-9 relative.
    pub fn from_samples(samples: &[(f64, f64)]) -> Result<Self, AnalysisError> {
        if samples.len() < 2 {
            return Err(AnalysisError::TooShort {
                needed: 2,
                got: samples.len(),
            });
        }
        let t0 = samples[0].0;
        let dt = (samples[samples.len() - 1].0 - t0) / (samples.len() - 1) as f64;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(AnalysisError::BadSpacing(dt));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt {
                return Err(AnalysisError::NonUniform(i + 1));
            }
        }
        Self::uniform(t0, dt, samples.iter().map(|s| s.1).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn span_s(&self) -> f64 {
        self.values.len() as f64 * self.uniform_dt_s
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0_s + i as f64 * self.uniform_dt_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdevPoint {
    pub tau_s: f64,
    pub adev: f64,
    /// One-sigma standard error from the white-FM equivalent degrees of freedom.
    pub stderr: f64,
    pub n_differences: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdevCurve {
    pub points: Vec<AdevPoint>,
    pub errors: Vec<(f64, AnalysisError)>,
}

impl AdevCurve {
    /// Least-squares slope of log10(adev) against log10(tau) for points with
    /// tau in `[tau_lo, tau_hi]`.
    pub fn log_slope(&self, tau_lo: f64, tau_hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.tau_s >= tau_lo && p.tau_s <= tau_hi && p.adev > 0.0)
            .map(|p| (p.tau_s.log10(), p.adev.log10()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// Overlapping Allan deviation at averaging factor `m` (in samples).
///
/// Returns the deviation and the number of squared differences used.
pub fn overlapping_adev(values: &[f64], m: usize) -> Option<(f64, usize)> {
    let n = values.len();
    if m == 0 || n < 2 * m {
        return None;
    }
    // Removing the mean keeps the prefix sums small.
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in values {
        acc += v - mean;
        prefix.push(acc);
    }
    let terms = n - 2 * m + 1;
    let mut sum = 0.0;
    for i in 0..terms {
        // m·(ȳ_{i+m} - ȳ_i) from second differences of the running sum.
        let d = prefix[i + 2 * m] - 2.0 * prefix[i + m] + prefix[i];
        sum += d * d;
    }
    let mf = m as f64;
    Some(((sum / (2.0 * mf * mf * terms as f64)).sqrt(), terms))
}

// Equivalent degrees of freedom of the overlapping estimator for white FM.
fn white_fm_edf(n_freq: usize, m: usize) -> f64 {
    let n = (n_freq + 1) as f64;
    let m = m as f64;
    ((3.0 * (n - 1.0) / (2.0 * m) - 2.0 * (n - 2.0) / n) * 4.0 * m * m / (4.0 * m * m + 5.0))
        .max(1.0)
}

/// Overlapping Allan deviation at each requested tau. Taus that are not
/// integer multiples of the spacing, or longer than a third of the record,
/// are reported in `errors` instead of `points`.
pub fn allan_deviation(series: &FreqSeries, taus: &[f64]) -> AdevCurve {
    let dt = series.uniform_dt_s;
    let span = series.span_s();
    let mut points = Vec::new();
    let mut errors = Vec::new();
    for &tau in taus {
        let m_real = tau / dt;
        let m = m_real.round();
        if !(tau.is_finite() && m >= 1.0 && (m_real - m).abs() <= 1e-6 * m) {
            errors.push((
                tau,
                AnalysisError::TauNotMultiple {
                    tau_s: tau,
                    dt_s: dt,
                },
            ));
            continue;
        }
        if tau > span / 3.0 + 1e-9 * span {
            errors.push((
                tau,
                AnalysisError::TauTooLong {
                    tau_s: tau,
                    span_s: span,
                },
            ));
            continue;
        }
        let m = m as usize;
        match overlapping_adev(&series.values, m) {
            Some((adev, n_differences)) => {
                let edf = white_fm_edf(series.len(), m);
                points.push(AdevPoint {
                    tau_s: m as f64 * dt,
                    adev,
                    stderr: adev / (2.0 * edf).sqrt(),
                    n_differences,
                });
            }
            None => errors.push((
                tau,
                AnalysisError::TauTooLong {
                    tau_s: tau,
                    span_s: span,
                },
            )),
        }
    }
    points.sort_by(|a, b| a.tau_s.total_cmp(&b.tau_s));
    points.dedup_by(|a, b| a.tau_s == b.tau_s);
    AdevCurve { points, errors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    // Direct form: average blocks, then square differences.
    fn brute_adev(y: &[f64], m: usize) -> f64 {
        let avgs: Vec<f64> = (0..=y.len() - m)
            .map(|i| y[i..i + m].iter().sum::<f64>() / m as f64)
            .collect();
        let diffs: Vec<f64> = (0..avgs.len() - m).map(|i| avgs[i + m] - avgs[i]).collect();
        (diffs.iter().map(|d| d * d).sum::<f64>() / (2.0 * diffs.len() as f64)).sqrt()
    }

    #[test]
    fn constant_series_is_zero() {
        let s = FreqSeries::uniform(0.0, 1.0, vec![3.5; 100]).unwrap();
        let c = allan_deviation(&s, &[1.0, 2.0, 10.0]);
        assert!(c.errors.is_empty());
        assert!(c.points.iter().all(|p| p.adev == 0.0));
    }

    #[test]
    fn alternating_series() {
        let y: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let s = FreqSeries::uniform(0.0, 1.0, y.clone()).unwrap();
        let c = allan_deviation(&s, &[1.0]);
        assert!((c.points[0].adev - 2f64.sqrt()).abs() < 1e-12);
        assert!((brute_adev(&y, 1) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = seeded(5);
        let y: Vec<f64> = (0..900).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect();
        for m in [1usize, 2, 7, 50, 300] {
            let (a, _) = overlapping_adev(&y, m).unwrap();
            assert!((a - brute_adev(&y, m)).abs() < 1e-10 * a.max(1.0), "m={m}");
        }
    }

    #[test]
    fn linear_drift_level() {
        let drift = 0.3;
        let y: Vec<f64> = (0..1000).map(|i| drift * i as f64).collect();
        let s = FreqSeries::uniform(0.0, 1.0, y.clone()).unwrap();
        let c = allan_deviation(&s, &[1.0, 10.0, 100.0]);
        for p in &c.points {
            let expected = drift * p.tau_s / 2f64.sqrt();
            assert!((p.adev - expected).abs() < 1e-9 * expected);
            assert!((p.adev - brute_adev(&y, p.tau_s as usize)).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn white_fm_slope() {
        let mut rng = seeded(8);
        let y: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let s = FreqSeries::uniform(0.0, 1.0, y).unwrap();
        let taus: Vec<f64> = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0].into();
        let c = allan_deviation(&s, &taus);
        let slope = c.log_slope(1.0, 100.0).unwrap();
        assert!((slope + 0.5).abs() < 0.1, "{slope}");
        // Level for unit white FM: 1/sqrt(tau).
        assert!((c.points[0].adev - 1.0).abs() < 0.02);
    }

    #[test]
    fn per_tau_errors() {
        let s = FreqSeries::uniform(0.0, 0.5, vec![0.0; 30]).unwrap();
        let c = allan_deviation(&s, &[0.75, 1.0, 6.0]);
        assert_eq!(c.points.len(), 1);
        assert!(matches!(
            c.errors[0].1,
            AnalysisError::TauNotMultiple { .. }
        ));
        assert!(matches!(c.errors[1].1, AnalysisError::TauTooLong { .. }));
    }

    #[test]
    fn from_samples_checks_spacing() {
        assert!(FreqSeries::from_samples(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_ok());
        assert_eq!(
            FreqSeries::from_samples(&[(0.0, 1.0), (1.0, 2.0), (2.5, 3.0)]),
            Err(AnalysisError::NonUniform(1))
        );
        assert!(FreqSeries::from_samples(&[(0.0, 1.0)]).is_err());
    }
}
