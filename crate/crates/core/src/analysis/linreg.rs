use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Mean squared residual, in units of y².
    pub residual_variance: f64,
}

impl LineFit {
    pub fn fit(points: &[(f64, f64)]) -> Result<Self, AnalysisError> {
        if points.len() < 3 {
            return Err(AnalysisError::TooShort {
                needed: 3,
                got: points.len(),
            });
        }
        if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
            return Err(AnalysisError::NonFinite);
        }
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx <= f64::EPSILON * mx.abs().max(1.0) * n {
            return Err(AnalysisError::DegenerateAbscissa);
        }
        let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
        let intercept = my - slope * mx;
        let ssr: f64 = points
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        Ok(Self {
            slope,
            intercept,
            residual_variance: ssr / n,
        })
    }
}

/// Mean squared residual about the ordinary least-squares line.
pub fn linreg_residual(points: &[(f64, f64)]) -> Result<f64, AnalysisError> {
    LineFit::fit(points).map(|f| f.residual_variance)
}
