//! Discrete-time simulation of the classical control hardware around a
//! trapped-ion processor.
//!
//! The crate is organised bottom-up:
//!
//! * [`sigcore`]: fixed-point DDS channels, ADC quantization, phase detectors,
//!   prescalers, boxcar averaging and RC filter responses.
//! * [`plant`]: stochastic models of the signals being stabilized.
//! * [`comblock`]: the digital frequency-comb lock with drift feed-forward.
//! * [`auxlocks`]: the CW offset frequency lock and the gated intensity lock.
//! * [`pidpipe`]: the eight-channel oversampling PID pipeline.
//! * [`dacsim`]: the 100-channel DAC sequencer and its output filters.
//! * [`analysis`]: Allan deviation, Welch PSD, Ramsey coherence and fit tools.
//!
//! Every stochastic component draws from an explicitly seeded
//! [`rand_chacha::ChaCha8Rng`], so identical seeds reproduce identical runs.

pub mod analysis;
pub mod auxlocks;
pub mod comblock;
pub mod dacsim;
pub mod pidpipe;
pub mod plant;
pub mod rng;
pub mod sigcore;
