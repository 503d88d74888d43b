use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Result of fitting `A·exp(-τ²/α²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceFit {
    pub amplitude: f64,
    pub coherence_time_alpha_s: f64,
    pub amplitude_stderr: f64,
    pub alpha_stderr: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 200;

fn model(a: f64, alpha: f64, tau: f64) -> f64 {
    a * (-(tau * tau) / (alpha * alpha)).exp()
}

fn ssr(points: &[(f64, f64)], a: f64, alpha: f64) -> f64 {
    points
        .iter()
        .map(|&(t, v)| (v - model(a, alpha, t)).powi(2))
        .sum()
}

// J^T J and J^T r for parameters (A, α).
fn normal_equations(points: &[(f64, f64)], a: f64, alpha: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut jtj = [[0.0; 2]; 2];
    let mut jtr = [0.0; 2];
    for &(t, v) in points {
        let e = (-(t * t) / (alpha * alpha)).exp();
        let j = [e, a * e * 2.0 * t * t / alpha.powi(3)];
        let r = v - a * e;
        for i in 0..2 {
            jtr[i] += j[i] * r;
            for k in 0..2 {
                jtj[i][k] += j[i] * j[k];
            }
        }
    }
    (jtj, jtr)
}

fn inverse2(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= f64::MIN_POSITIVE || !det.is_finite() {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

/// Least-squares fit of `A·exp(-τ²/α²)` to `(τ, visibility)` points.
///
/// A straight-line fit of `ln V` against `τ²` seeds a Levenberg-Marquardt
/// refinement. Standard errors come from `s²(JᵀJ)⁻¹` with `s²` the residual
/// variance on `n - 2` degrees of freedom.
pub fn fit_gaussian_coherence(points: &[(f64, f64)]) -> Result<CoherenceFit, AnalysisError> {
    if points.len() < 4 {
        return Err(AnalysisError::TooShort {
            needed: 4,
            got: points.len(),
        });
    }
    if points
        .iter()
        .any(|&(t, v)| !(t.is_finite() && v.is_finite()) || t <= 0.0)
    {
        return Err(AnalysisError::NonFinite);
    }
    let max_tau = points.iter().map(|p| p.0).fold(0.0, f64::max);

    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(t, v)| (t * t, v.ln()))
        .collect();
    if logs.len() < 2 {
        return Err(AnalysisError::NoDecay);
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(AnalysisError::DegenerateAbscissa);
    }
    let slope = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    // A decay slower than e-fold over a thousand times the sampled range is
    // indistinguishable from none.
    if slope >= -1e-6 / (max_tau * max_tau) {
        return Err(AnalysisError::NoDecay);
    }
    let mut a = (my - slope * mx).exp();
    let mut alpha = (-1.0 / slope).sqrt();

    let mut lambda = 1e-3;
    let mut cost = ssr(points, a, alpha);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let (jtj, jtr) = normal_equations(points, a, alpha);
        let damped = [
            [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
            [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
        ];
        let Some(inv) = inverse2(damped) else { break };
        let da = inv[0][0] * jtr[0] + inv[0][1] * jtr[1];
        let dalpha = inv[1][0] * jtr[0] + inv[1][1] * jtr[1];
        let (na, nalpha) = (a + da, alpha + dalpha);
        let new_cost = if nalpha > 0.0 {
            ssr(points, na, nalpha)
        } else {
            f64::INFINITY
        };
        if new_cost <= cost {
            let small = da.abs() <= 1e-13 * a.abs().max(1e-300) && dalpha.abs() <= 1e-13 * alpha;
            a = na;
            alpha = nalpha;
            let improvement = cost - new_cost;
            cost = new_cost;
            lambda = (lambda * 0.3).max(1e-12);
            if small || improvement <= 1e-30 + 1e-15 * cost || cost == 0.0 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    let residual_rms = (cost / points.len() as f64).sqrt();
    if !converged || !(alpha.is_finite() && alpha > 0.0) {
        return Err(AnalysisError::NonConvergence {
            iterations,
            residual_rms,
        });
    }
    if !(0.0..=1.05).contains(&a) {
        return Err(AnalysisError::AmplitudeOutOfRange(a));
    }
    let (jtj, _) = normal_equations(points, a, alpha);
    let dof = (points.len() - 2) as f64;
    let s2 = cost / dof;
    let (amplitude_stderr, alpha_stderr) = match inverse2(jtj) {
        Some(cov) => (
            (s2 * cov[0][0]).max(0.0).sqrt(),
            (s2 * cov[1][1]).max(0.0).sqrt(),
        ),
        None => (f64::NAN, f64::NAN),
    };
    Ok(CoherenceFit {
        amplitude: a,
        coherence_time_alpha_s: alpha,
        amplitude_stderr,
        alpha_stderr,
        residual_rms,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(a: f64, alpha: f64, taus: &[f64]) -> Vec<(f64, f64)> {
        taus.iter().map(|&t| (t, model(a, alpha, t))).collect()
    }

    const TAUS: [f64; 8] = [0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 1.0, 1.2];

    #[test]
    fn noiseless_round_trip() {
        let f = fit_gaussian_coherence(&samples(1.0, 0.8, &TAUS)).unwrap();
        assert!((f.amplitude - 1.0).abs() < 1e-6);
        assert!((f.coherence_time_alpha_s - 0.8).abs() < 1e-6);
    }

    #[test]
    fn flat_curve_has_no_decay() {
        let pts: Vec<(f64, f64)> = TAUS.iter().map(|&t| (t, 1.0)).collect();
        assert_eq!(fit_gaussian_coherence(&pts), Err(AnalysisError::NoDecay));
    }

    #[test]
    fn needs_four_points() {
        assert!(fit_gaussian_coherence(&samples(1.0, 0.8, &TAUS[..3])).is_err());
    }

    #[test]
    fn recovers_from_perturbed_data() {
        // Alternating ±1% multiplicative error.
        let pts: Vec<(f64, f64)> = samples(0.95, 0.811, &TAUS)
            .into_iter()
            .enumerate()
            .map(|(i, (t, v))| (t, v * if i % 2 == 0 { 1.01 } else { 0.99 }))
            .collect();
        let f = fit_gaussian_coherence(&pts).unwrap();
        assert!((f.coherence_time_alpha_s - 0.811).abs() < 0.02);
        assert!(f.alpha_stderr > 0.0 && f.alpha_stderr < 0.05);
    }

    proptest! {
        #[test]
        fn scale_equivariant(c in 0.05f64..20.0, alpha in 0.3f64..1.5, a in 0.6f64..1.0) {
            let base = samples(a, alpha, &TAUS);
            let scaled: Vec<(f64, f64)> = base.iter().map(|&(t, v)| (t * c, v)).collect();
            let f1 = fit_gaussian_coherence(&base).unwrap();
            let f2 = fit_gaussian_coherence(&scaled).unwrap();
            let ratio = f2.coherence_time_alpha_s / f1.coherence_time_alpha_s;
            prop_assert!((ratio - c).abs() <= 1e-9 * c, "{ratio} vs {c}");
        }
    }
}
