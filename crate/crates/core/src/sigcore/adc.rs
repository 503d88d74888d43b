use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SigError;

/// Bipolar offset-binary converter description. `full_scale_volts` is the
/// peak-to-peak span centred on 0 V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcSpec {
    pub resolution_bits: u32,
    pub full_scale_volts: f64,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub input_noise_rms_volts: f64,
}

impl AdcSpec {
    /// 16-bit, ±10 V, 1 MSPS converter of the comb lock.
    pub fn ad7671() -> Self {
        Self {
            resolution_bits: 16,
            full_scale_volts: 20.0,
            sample_rate_hz: 1e6,
            input_noise_rms_volts: 0.0,
        }
    }

    /// 18-bit, ±10 V, 200 ksps converter of the eight-channel PID board.
    pub fn ad7608() -> Self {
        Self {
            resolution_bits: 18,
            full_scale_volts: 20.0,
            sample_rate_hz: 200e3,
            input_noise_rms_volts: 0.0,
        }
    }

    pub fn with_noise(mut self, rms_volts: f64) -> Self {
        self.input_noise_rms_volts = rms_volts;
        self
    }

    pub fn validate(&self) -> Result<(), SigError> {
        if !(1..=31).contains(&self.resolution_bits) {
            return Err(SigError::InvalidAdc(format!(
                "resolution_bits = {} (expected 1..=31)",
                self.resolution_bits
            )));
        }
        if !(self.full_scale_volts.is_finite() && self.full_scale_volts > 0.0) {
            return Err(SigError::InvalidAdc(format!(
                "full_scale_volts = {}",
                self.full_scale_volts
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(SigError::InvalidAdc(format!(
                "sample_rate_hz = {}",
                self.sample_rate_hz
            )));
        }
        if !(self.input_noise_rms_volts.is_finite() && self.input_noise_rms_volts >= 0.0) {
            return Err(SigError::InvalidAdc(format!(
                "input_noise_rms_volts = {}",
                self.input_noise_rms_volts
            )));
        }
        Ok(())
    }

    pub fn lsb_volts(&self) -> f64 {
        self.full_scale_volts / self.code_count()
    }

    fn code_count(&self) -> f64 {
        (1u64 << self.resolution_bits) as f64
    }

    pub fn max_code(&self) -> u32 {
        ((1u64 << self.resolution_bits) - 1) as u32
    }

    pub fn midscale_code(&self) -> u32 {
        1 << (self.resolution_bits - 1)
    }

    pub fn sample_period_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn min_volts(&self) -> f64 {
        self.code_to_volts(0)
    }

    pub fn max_volts(&self) -> f64 {
        self.code_to_volts(self.max_code())
    }

    pub fn code_to_volts(&self, code: u32) -> f64 {
        (f64::from(code) - f64::from(self.midscale_code())) * self.lsb_volts()
    }

    /// Noise-free conversion. Returns the code and whether it was clamped.
    pub fn volts_to_code(&self, volts: f64) -> (u32, bool) {
        let ideal = (volts / self.lsb_volts()).round() + f64::from(self.midscale_code());
        if ideal.is_nan() {
            return (self.midscale_code(), true);
        }
        if ideal < 0.0 {
            (0, true)
        } else if ideal > f64::from(self.max_code()) {
            (self.max_code(), true)
        } else {
            (ideal as u32, false)
        }
    }
}

/// One digitized reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub adc_code: u32,
    pub volts: f64,
    pub timestep_index: u64,
    pub saturated: bool,
}

/// Converts `volts` plus the converter's Gaussian input noise into a sample
/// tagged with `timestep_index`.
pub fn adc_quantize<R: Rng + ?Sized>(
    volts: f64,
    spec: &AdcSpec,
    rng: &mut R,
    timestep_index: u64,
) -> ErrorSample {
    let noisy = if spec.input_noise_rms_volts > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        volts + spec.input_noise_rms_volts * z
    } else {
        volts
    };
    let (adc_code, saturated) = spec.volts_to_code(noisy);
    ErrorSample {
        adc_code,
        volts: spec.code_to_volts(adc_code),
        timestep_index,
        saturated,
    }
}

/// Converter with a running timestep counter.
#[derive(Debug, Clone)]
pub struct Adc {
    spec: AdcSpec,
    next_index: u64,
}

impl Adc {
    pub fn new(spec: AdcSpec) -> Result<Self, SigError> {
        spec.validate()?;
        Ok(Self {
            spec,
            next_index: 0,
        })
    }

    pub fn spec(&self) -> &AdcSpec {
        &self.spec
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, volts: f64, rng: &mut R) -> ErrorSample {
        let s = adc_quantize(volts, &self.spec, rng, self.next_index);
        self.next_index += 1;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn sixteen_bit_examples() {
        let spec = AdcSpec::ad7671();
        let mut rng = seeded(1);
        let mid = adc_quantize(0.0, &spec, &mut rng, 0);
        assert_eq!(mid.adc_code, 32768);
        assert!(!mid.saturated);
        let full = adc_quantize(10.0, &spec, &mut rng, 1);
        assert_eq!(full.adc_code, 65535);
        assert!(full.saturated);
        let one = adc_quantize(1.0, &spec, &mut rng, 2);
        assert_eq!(one.adc_code, 36045);
        assert!((spec.lsb_volts() - 305.175_781_25e-6).abs() < 1e-15);
    }

    #[test]
    fn eighteen_bit_range() {
        let spec = AdcSpec::ad7608();
        assert_eq!(spec.max_code(), 262_143);
        assert_eq!(spec.volts_to_code(-10.0), (0, false));
        assert_eq!(spec.volts_to_code(-10.1), (0, true));
    }

    #[test]
    fn validate_rejects_bad_specs() {
        let mut spec = AdcSpec::ad7671();
        spec.resolution_bits = 0;
        assert!(spec.validate().is_err());
        assert!(Adc::new(AdcSpec::ad7671().with_noise(-1.0)).is_err());
    }

    #[test]
    fn timestep_index_increments() {
        let mut adc = Adc::new(AdcSpec::ad7671().with_noise(1e-3)).unwrap();
        let mut rng = seeded(3);
        let idx: Vec<u64> = (0..5)
            .map(|_| adc.sample(0.5, &mut rng).timestep_index)
            .collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn quantization_is_monotone(a in -12.0f64..12.0, b in -12.0f64..12.0) {
            let spec = AdcSpec::ad7671();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(spec.volts_to_code(lo).0 <= spec.volts_to_code(hi).0);
        }

        #[test]
        fn volts_reconstruct_from_code(v in -10.0f64..10.0) {
            let spec = AdcSpec::ad7608();
            let mut rng = seeded(0);
            let s = adc_quantize(v, &spec, &mut rng, 0);
            prop_assert_eq!(s.volts, spec.code_to_volts(s.adc_code));
            prop_assert!((s.volts - v).abs() <= spec.lsb_volts() / 2.0 + 1e-12);
        }
    }
}
