use serde::{Deserialize, Serialize};

/// Which branch of `f_qubit = n·f_rep ± (f1 - f2)` is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    #[default]
    #[serde(alias = "+")]
    Plus,
    #[serde(alias = "-")]
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

// Error-free transformations: a + b = s + e and a * b = p + e exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Sum of terms carried in double-double precision.
fn exact_sum(terms: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0, 0.0);
    for &t in terms {
        let (s, e) = two_sum(hi, t);
        hi = s;
        lo += e;
    }
    hi + lo
}

/// `n·f_rep ± (f1 - f2) - f_qubit`, evaluated so that the cancellation of
/// the ~10 GHz terms does not lose the sub-Hz result.
pub fn resonance_residual(
    f_rep_hz: f64,
    f1_hz: f64,
    f2_hz: f64,
    n_harmonic: u32,
    f_qubit_hz: f64,
    branch: Branch,
) -> f64 {
    let (p, pe) = two_prod(f64::from(n_harmonic), f_rep_hz);
    let s = branch.sign();
    exact_sum(&[p, -f_qubit_hz, s * f1_hz, -s * f2_hz, pe])
}

/// Moves `f2` by the n-th harmonic of the drift `δ` so the residual stays put.
pub fn feed_forward(f2_hz: f64, n_harmonic: u32, delta_hz: f64, branch: Branch) -> f64 {
    f2_hz + branch.sign() * f64::from(n_harmonic) * delta_hz
}

/// The `f2` that zeroes the residual for the given `f_rep`.
pub fn initial_f2(
    f_rep_hz: f64,
    f1_hz: f64,
    n_harmonic: u32,
    f_qubit_hz: f64,
    branch: Branch,
) -> f64 {
    let (p, pe) = two_prod(f64::from(n_harmonic), f_rep_hz);
    // f2 = f1 + s·(n·f_rep - f_qubit)
    let s = branch.sign();
    exact_sum(&[f1_hz, s * p, -s * f_qubit_hz, s * pe])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const N: u32 = 166;
    const FQ: f64 = 12.6e9;

    #[test]
    fn resonance_examples() {
        assert_eq!(
            resonance_residual(76e6, 200e6, 216e6, N, FQ, Branch::Plus),
            0.0
        );
        let r = resonance_residual(76e6 + 1.0, 200e6, 216e6, N, FQ, Branch::Plus);
        assert_eq!(r, 166.0);
        let f2 = feed_forward(216e6, N, 1.0, Branch::Plus);
        assert_eq!(
            resonance_residual(76e6 + 1.0, 200e6, f2, N, FQ, Branch::Plus),
            0.0
        );
    }

    #[test]
    fn feed_forward_examples() {
        assert_eq!(feed_forward(216e6, N, 0.0, Branch::Plus), 216e6);
        assert_eq!(feed_forward(216e6, N, 1.0, Branch::Plus), 216e6 + 166.0);
        assert_eq!(feed_forward(216e6, N, -0.5, Branch::Plus), 216e6 - 83.0);
        assert_eq!(feed_forward(216e6, N, 1.0, Branch::Minus), 216e6 - 166.0);
    }

    #[test]
    fn initial_f2_matches_constant() {
        assert_eq!(initial_f2(76e6, 200e6, N, FQ, Branch::Plus), 216e6);
        let f2 = initial_f2(76e6, 200e6, N, FQ, Branch::Minus);
        assert_eq!(
            resonance_residual(76e6, 200e6, f2, N, FQ, Branch::Minus),
            0.0
        );
    }

    proptest! {
        #[test]
        fn residual_linear_in_f_rep(d in -1000.0f64..1000.0) {
            let f_rep = 76e6 + d;
            let r = resonance_residual(f_rep, 200e6, 216e6, N, FQ, Branch::Plus);
            // Oracle: the exact offset from 76 MHz, scaled.
            let exact = 166.0 * (f_rep - 76e6);
            prop_assert!((r - exact).abs() <= 1e-6, "{r} vs {exact}");
        }

        #[test]
        fn either_branch_cancels(k in -100_000i32..100_000, minus in any::<bool>()) {
            // Dyadic drift so every intermediate is exact.
            let d = f64::from(k) / 1024.0;
            let b = if minus { Branch::Minus } else { Branch::Plus };
            let f2 = initial_f2(76e6, 200e6, N, FQ, b);
            let f2 = feed_forward(f2, N, d, b);
            let r = resonance_residual(76e6 + d, 200e6, f2, N, FQ, b);
            prop_assert!(r.abs() <= 1e-6, "{r}");
        }
    }
}
