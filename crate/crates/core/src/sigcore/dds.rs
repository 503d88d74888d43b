use serde::{Deserialize, Serialize};

use super::SigError;

/// Width of the tuning word and phase accumulator.
pub const PHASE_BITS: u32 = 48;
const MODULUS: u64 = 1 << PHASE_BITS;
const MASK: u64 = MODULUS - 1;
const MODULUS_F: f64 = MODULUS as f64;

/// Largest 14-bit amplitude code.
pub const AMPLITUDE_FULL_SCALE: u16 = (1 << 14) - 1;

/// Returns the tuning word closest to `target_hz`.
///
/// The word is the exact nearest integer to `target / clock * 2^48`: the
/// candidate from floating-point division is corrected by comparing fused
/// multiply-add residuals of its neighbours, so rounding never picks the
/// wrong side of a half-LSB boundary.
pub fn set_ftw(target_hz: f64, system_clock_hz: f64) -> Result<u64, SigError> {
    if !(system_clock_hz.is_finite() && system_clock_hz > 0.0) {
        return Err(SigError::InvalidClock(system_clock_hz));
    }
    let nyquist_hz = system_clock_hz / 2.0;
    if !(target_hz.is_finite() && target_hz >= 0.0 && target_hz < nyquist_hz) {
        return Err(SigError::FrequencyOutOfRange {
            target_hz,
            nyquist_hz,
        });
    }
    let scaled = target_hz * MODULUS_F;
    let guess = (scaled / system_clock_hz).round() as u64;
    let residual = |w: u64| (w as f64).mul_add(system_clock_hz, -scaled).abs();
    let best = [guess.saturating_sub(1), guess, guess + 1]
        .into_iter()
        .filter(|&w| w < MODULUS / 2)
        .min_by(|&a, &b| residual(a).total_cmp(&residual(b)))
        .unwrap_or(guess);
    Ok(best)
}

/// A numerically controlled oscillator with a 48-bit phase accumulator and a
/// 14-bit amplitude word.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdsChannel {
    tuning_word: u64,
    phase_accumulator: u64,
    amplitude: u16,
    system_clock_hz: f64,
}

impl DdsChannel {
    pub fn new(system_clock_hz: f64) -> Result<Self, SigError> {
        if !(system_clock_hz.is_finite() && system_clock_hz > 0.0) {
            return Err(SigError::InvalidClock(system_clock_hz));
        }
        Ok(Self {
            tuning_word: 0,
            phase_accumulator: 0,
            amplitude: AMPLITUDE_FULL_SCALE,
            system_clock_hz,
        })
    }

    /// Channel already tuned to the word nearest `target_hz`.
    pub fn tuned(target_hz: f64, system_clock_hz: f64) -> Result<Self, SigError> {
        let mut chan = Self::new(system_clock_hz)?;
        chan.set_frequency(target_hz)?;
        Ok(chan)
    }

    pub fn set_frequency(&mut self, target_hz: f64) -> Result<(), SigError> {
        self.tuning_word = set_ftw(target_hz, self.system_clock_hz)?;
        Ok(())
    }

    pub fn set_tuning_word(&mut self, word: u64) {
        self.tuning_word = word & MASK;
    }

    pub fn set_amplitude(&mut self, code: u16) -> Result<(), SigError> {
        if code > AMPLITUDE_FULL_SCALE {
            return Err(SigError::AmplitudeOutOfRange(code.into()));
        }
        self.amplitude = code;
        Ok(())
    }

    pub fn tuning_word(&self) -> u64 {
        self.tuning_word
    }

    pub fn phase_accumulator(&self) -> u64 {
        self.phase_accumulator
    }

    pub fn amplitude(&self) -> u16 {
        self.amplitude
    }

    pub fn amplitude_fraction(&self) -> f64 {
        f64::from(self.amplitude) / f64::from(AMPLITUDE_FULL_SCALE)
    }

    pub fn system_clock_hz(&self) -> f64 {
        self.system_clock_hz
    }

    /// Realized output frequency `tuning_word / 2^48 * clock`.
    pub fn frequency_hz(&self) -> f64 {
        self.tuning_word as f64 / MODULUS_F * self.system_clock_hz
    }

    /// Frequency step of one tuning-word LSB.
    pub fn resolution_hz(&self) -> f64 {
        self.system_clock_hz / MODULUS_F
    }

    /// Current phase in cycles, in `[0, 1)`.
    pub fn phase_cycles(&self) -> f64 {
        self.phase_accumulator as f64 / MODULUS_F
    }

    /// Advances the accumulator by `n_cycles` system clock cycles and returns
    /// the new phase in cycles.
    pub fn tick(&mut self, n_cycles: u64) -> f64 {
        let advance = (u128::from(n_cycles) * u128::from(self.tuning_word)) as u64 & MASK;
        self.phase_accumulator = (self.phase_accumulator + advance) & MASK;
        self.phase_cycles()
    }
}

/// Value-style form of [`DdsChannel::tick`].
pub fn dds_tick(mut chan: DdsChannel, n_cycles: u64) -> (DdsChannel, f64) {
    let phase = chan.tick(n_cycles);
    (chan, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GHZ: f64 = 1e9;

    #[test]
    fn ftw_examples() {
        assert_eq!(set_ftw(0.0, GHZ).unwrap(), 0);
        assert_eq!(set_ftw(76e6, GHZ).unwrap(), 21_392_098_230_010);
        assert_eq!(set_ftw(GHZ / MODULUS_F, GHZ).unwrap(), 1);
    }

    #[test]
    fn ftw_rejects_nyquist_and_negative() {
        assert!(matches!(
            set_ftw(500e6, GHZ),
            Err(SigError::FrequencyOutOfRange { .. })
        ));
        assert!(set_ftw(-1.0, GHZ).is_err());
        assert!(set_ftw(f64::NAN, GHZ).is_err());
        assert!(matches!(set_ftw(1.0, 0.0), Err(SigError::InvalidClock(_))));
    }

    #[test]
    fn resolution_at_one_gigahertz() {
        let chan = DdsChannel::new(GHZ).unwrap();
        assert!((chan.resolution_hz() - 3.5527e-6).abs() < 1e-9);
    }

    #[test]
    fn half_rate_word_wraps_in_two_ticks() {
        let mut chan = DdsChannel::new(GHZ).unwrap();
        chan.set_tuning_word(1 << 47);
        chan.tick(1);
        assert_eq!(chan.phase_accumulator(), 1 << 47);
        chan.tick(1);
        assert_eq!(chan.phase_accumulator(), 0);
    }

    #[test]
    fn zero_word_holds_phase() {
        let chan = DdsChannel::new(GHZ).unwrap();
        let (after, phase) = dds_tick(chan, 123_456_789);
        assert_eq!(after.phase_accumulator(), 0);
        assert_eq!(phase, 0.0);
    }

    #[test]
    fn one_second_at_76_mhz() {
        let chan = DdsChannel::tuned(76e6, GHZ).unwrap();
        let n = 1_000_000_000u64;
        let (after, _) = dds_tick(chan, n);
        // Exact total advance in units of 2^-48 cycles.
        let total = u128::from(n) * u128::from(chan.tuning_word());
        let whole_cycles = (total >> PHASE_BITS) as f64;
        let frac = (total & u128::from(MASK)) as f64 / MODULUS_F;
        assert!((whole_cycles + frac - 76e6).abs() < 1.0);
        assert_eq!(
            u128::from(after.phase_accumulator()),
            total & u128::from(MASK)
        );
    }

    #[test]
    fn amplitude_is_fourteen_bit() {
        let mut chan = DdsChannel::new(GHZ).unwrap();
        assert!(chan.set_amplitude(AMPLITUDE_FULL_SCALE).is_ok());
        assert!(chan.set_amplitude(AMPLITUDE_FULL_SCALE + 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn realized_error_within_half_lsb(target in 0.0f64..499_999_999.0) {
            let ftw = set_ftw(target, GHZ).unwrap();
            // |ftw * clock - target * 2^48| <= clock / 2, evaluated with one rounding.
            let err = (ftw as f64).mul_add(GHZ, -target * MODULUS_F).abs();
            prop_assert!(err <= GHZ / 2.0, "target {target} word {ftw} err {err}");
        }
    }

    proptest! {
        #[test]
        fn accumulator_is_exact_modular_product(ftw in 0u64..MODULUS, n in 0u64..u64::MAX / 4) {
            let mut chan = DdsChannel::new(GHZ).unwrap();
            chan.set_tuning_word(ftw);
            chan.tick(n);
            let expected = (u128::from(n) * u128::from(ftw)) % u128::from(MODULUS);
            prop_assert_eq!(u128::from(chan.phase_accumulator()), expected);
        }

        #[test]
        fn split_ticks_match_single_tick(ftw in 0u64..MODULUS, a in 0u64..1u64 << 40, b in 0u64..1u64 << 40) {
            let mut split = DdsChannel::new(GHZ).unwrap();
            split.set_tuning_word(ftw);
            let mut whole = split;
            split.tick(a);
            split.tick(b);
            whole.tick(a + b);
            prop_assert_eq!(split.phase_accumulator(), whole.phase_accumulator());
        }
    }
}
