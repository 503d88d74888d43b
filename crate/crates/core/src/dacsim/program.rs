use serde::{Deserialize, Serialize};

use super::{DacError, BLOCK_MEMORY_SETS, DAC_CHANNELS, LSB_VOLTS, MAX_UPDATE_RATE_HZ, RAM_SETS};

/// `-10 + code·20/65536` volts.
pub fn code_to_voltage(code: u32) -> Result<f64, DacError> {
    if code > 65535 {
        return Err(DacError::CodeRange(code));
    }
    // Exact: code < 2^16 and the scale is a power of two times 20.
    Ok(-10.0 + f64::from(code) * LSB_VOLTS)
}

/// Nearest code to `volts`. Nominal +10 V maps to the top code.
pub fn voltage_to_code(volts: f64) -> Result<u16, DacError> {
    if !(volts.is_finite() && (-10.0..=10.0).contains(&volts)) {
        return Err(DacError::VoltageRange(volts));
    }
    let code = ((volts + 10.0) / LSB_VOLTS).round();
    Ok(code.min(65535.0) as u16)
}

/// One code per DAC channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoltageSet {
    pub codes: Vec<u16>,
}

impl VoltageSet {
    pub fn uniform(code: u16) -> Self {
        Self {
            codes: vec![code; DAC_CHANNELS],
        }
    }

    pub fn from_volts(volts: &[f64]) -> Result<Self, DacError> {
        let codes = volts
            .iter()
            .map(|&v| voltage_to_code(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { codes })
    }

    pub fn with_channel(mut self, channel: usize, code: u16) -> Self {
        self.codes[channel] = code;
        self
    }

    pub fn volts(&self, channel: usize) -> f64 {
        -10.0 + f64::from(self.codes[channel]) * LSB_VOLTS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Every tick rewrites the chosen channels, for the whole run.
    Synchronous,
    /// Each set is written once, only changed channels after the first,
    /// then the clocks stop.
    Asynchronous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryTier {
    Block,
    Ram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageProgram {
    pub sets: Vec<VoltageSet>,
    pub steps_between: Vec<u32>,
    pub update_rate_hz: f64,
    pub mode: UpdateMode,
    pub tier: MemoryTier,
}

impl VoltageProgram {
    /// Sets in playback order, with every interpolated step expanded.
    pub fn expanded(&self) -> Vec<VoltageSet> {
        let mut out = vec![self.sets[0].clone()];
        for (i, w) in self.sets.windows(2).enumerate() {
            out.extend(interpolate_sets(&w[0], &w[1], self.steps_between[i]));
        }
        out
    }

    /// Channels whose code changes anywhere in the program.
    pub fn varying_channels(&self) -> Vec<usize> {
        (0..DAC_CHANNELS)
            .filter(|&c| {
                self.sets
                    .iter()
                    .any(|s| s.codes[c] != self.sets[0].codes[c])
            })
            .collect()
    }
}

/// Validates a program and records which memory holds it.
pub fn load_program(
    sets: Vec<VoltageSet>,
    steps_between: Vec<u32>,
    update_rate_hz: f64,
    mode: UpdateMode,
) -> Result<VoltageProgram, DacError> {
    if !(update_rate_hz.is_finite() && update_rate_hz > 0.0 && update_rate_hz <= MAX_UPDATE_RATE_HZ)
    {
        return Err(DacError::UpdateRate(update_rate_hz));
    }
    if sets.is_empty() {
        return Err(DacError::Empty);
    }
    if sets.len() > RAM_SETS {
        return Err(DacError::TooManySets(sets.len()));
    }
    for (index, s) in sets.iter().enumerate() {
        if s.codes.len() != DAC_CHANNELS {
            return Err(DacError::MalformedSet {
                index,
                expected: DAC_CHANNELS,
                got: s.codes.len(),
            });
        }
    }
    if steps_between.len() != sets.len() - 1 {
        return Err(DacError::StepsLength {
            got: steps_between.len(),
            transitions: sets.len() - 1,
        });
    }
    if let Some(i) = steps_between.iter().position(|&s| s == 0) {
        return Err(DacError::ZeroSteps(i));
    }
    let tier = if sets.len() <= BLOCK_MEMORY_SETS {
        MemoryTier::Block
    } else {
        MemoryTier::Ram
    };
    Ok(VoltageProgram {
        sets,
        steps_between,
        update_rate_hz,
        mode,
        tier,
    })
}

/// `steps` sets from `a` (exclusive) to `b` (inclusive); step `j` has codes
/// `round(a + j·(b - a)/steps)`, rounded half away from zero in exact
/// integer arithmetic.
pub fn interpolate_sets(a: &VoltageSet, b: &VoltageSet, steps: u32) -> Vec<VoltageSet> {
    let steps = i64::from(steps.max(1));
    (1..=steps)
        .map(|j| VoltageSet {
            codes: a
                .codes
                .iter()
                .zip(&b.codes)
                .map(|(&x, &y)| {
                    let num = (i64::from(y) - i64::from(x)) * j;
                    let q = (2 * num.abs() + steps).div_euclid(2 * steps) * num.signum();
                    (i64::from(x) + q) as u16
                })
                .collect(),
        })
        .collect()
}

/// Parses one set per line of whitespace-separated voltages. Blank lines
/// and `#` comments are skipped.
pub fn parse_program_text(text: &str) -> Result<Vec<VoltageSet>, DacError> {
    let mut sets = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let volts = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| DacError::Parse {
                    line: i + 1,
                    message: format!("`{tok}` is not a voltage"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if volts.len() != DAC_CHANNELS {
            return Err(DacError::Parse {
                line: i + 1,
                message: format!("expected {DAC_CHANNELS} voltages, found {}", volts.len()),
            });
        }
        let set = VoltageSet::from_volts(&volts).map_err(|e| DacError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        sets.push(set);
    }
    Ok(sets)
}
