use super::DacError;
use crate::sigcore::{FilterChain, OnePoleLowpass};

/// Runs `x` through one bilinear low-pass section per stage.
pub fn apply_filter_chain(
    x: &[f64],
    sample_rate_hz: f64,
    chain: &FilterChain,
) -> Result<Vec<f64>, DacError> {
    let Some(cutoff) = chain.highest_cutoff_hz() else {
        return Ok(x.to_vec());
    };
    if !(sample_rate_hz.is_finite() && sample_rate_hz >= 4.0 * cutoff) {
        return Err(DacError::UnderSampled {
            sample_hz: sample_rate_hz,
            cutoff_hz: cutoff,
        });
    }
    let mut y = x.to_vec();
    for stage in &chain.stages {
        y = OnePoleLowpass::bilinear(stage.cutoff_hz(), sample_rate_hz).filter(&y);
    }
    Ok(y)
}
