use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SigError;

/// One single-pole low-pass stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RcStage {
    Rc {
        resistance_ohm: f64,
        capacitance_farad: f64,
    },
    Cutoff {
        cutoff_hz: f64,
    },
}

impl RcStage {
    pub fn rc(resistance_ohm: f64, capacitance_farad: f64) -> Self {
        Self::Rc {
            resistance_ohm,
            capacitance_farad,
        }
    }

    pub fn cutoff(cutoff_hz: f64) -> Self {
        Self::Cutoff { cutoff_hz }
    }

    pub fn cutoff_hz(&self) -> f64 {
        match *self {
            Self::Rc {
                resistance_ohm,
                capacitance_farad,
            } => 1.0 / (2.0 * PI * resistance_ohm * capacitance_farad),
            Self::Cutoff { cutoff_hz } => cutoff_hz,
        }
    }

    pub fn validate(&self) -> Result<(), SigError> {
        let fc = self.cutoff_hz();
        if fc.is_finite() && fc > 0.0 {
            Ok(())
        } else {
            Err(SigError::InvalidStage(fc))
        }
    }

    /// `|H(f)| = 1 / sqrt(1 + (f/fc)^2)`.
    pub fn magnitude(&self, f_hz: f64) -> f64 {
        let x = f_hz / self.cutoff_hz();
        1.0 / (1.0 + x * x).sqrt()
    }
}

/// Ordered cascade of stages.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilterChain {
    pub stages: Vec<RcStage>,
}

impl FilterChain {
    pub fn new(stages: Vec<RcStage>) -> Result<Self, SigError> {
        for s in &stages {
            s.validate()?;
        }
        Ok(Self { stages })
    }

    /// On-board 1 kΩ / 470 pF stage followed by an 800 kHz in-line filter.
    pub fn trap_default() -> Self {
        Self {
            stages: vec![RcStage::rc(1e3, 470e-12), RcStage::cutoff(800e3)],
        }
    }

    pub fn highest_cutoff_hz(&self) -> Option<f64> {
        self.stages.iter().map(RcStage::cutoff_hz).reduce(f64::max)
    }

    pub fn magnitude(&self, f_hz: f64) -> Result<f64, SigError> {
        rc_cascade_response(self, f_hz)
    }
}

/// Product of per-stage magnitude responses at `f_hz`.
pub fn rc_cascade_response(chain: &FilterChain, f_hz: f64) -> Result<f64, SigError> {
    if f_hz.is_nan() {
        return Err(SigError::NonFinite("frequency"));
    }
    if f_hz < 0.0 {
        return Err(SigError::NegativeFrequency(f_hz));
    }
    chain.stages.iter().try_fold(1.0, |acc, s| {
        s.validate()?;
        Ok(acc * s.magnitude(f_hz))
    })
}

/// Discrete one-pole low-pass from the bilinear transform, prewarped so the
/// -3 dB point lands exactly on the analog cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePoleLowpass {
    b: f64,
    a1: f64,
    x_prev: f64,
    y_prev: f64,
    primed: bool,
}

impl OnePoleLowpass {
    pub fn bilinear(cutoff_hz: f64, sample_rate_hz: f64) -> Self {
        let k = (PI * cutoff_hz / sample_rate_hz).tan();
        Self {
            b: k / (1.0 + k),
            a1: (k - 1.0) / (k + 1.0),
            x_prev: 0.0,
            y_prev: 0.0,
            primed: false,
        }
    }

    /// Filters one sample. The state starts at the DC steady state of the
    /// first input, so constant signals pass through without a transient.
    pub fn process(&mut self, x: f64) -> f64 {
        if !self.primed {
            self.x_prev = x;
            self.y_prev = x;
            self.primed = true;
        }
        let y = self.b * (x + self.x_prev) - self.a1 * self.y_prev;
        self.x_prev = x;
        self.y_prev = y;
        y
    }

    pub fn filter(&mut self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.process(x)).collect()
    }
}
