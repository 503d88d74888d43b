use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// One-sided power spectral density in units²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub sample_rate_hz: f64,
    pub segment_length: usize,
    pub n_segments: usize,
    /// Equivalent noise bandwidth of one bin.
    pub enbw_hz: f64,
    pub freqs_hz: Vec<f64>,
    pub psd: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub bin: usize,
    pub psd: f64,
    pub prominence_db: f64,
}

impl Spectrum {
    pub fn bin_width_hz(&self) -> f64 {
        self.sample_rate_hz / self.segment_length as f64
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    pub fn bin_of(&self, f_hz: f64) -> usize {
        ((f_hz / self.bin_width_hz()).round() as usize).min(self.psd.len() - 1)
    }

    /// Median PSD over the bins in `[f_lo, f_hi]`.
    pub fn median_floor(&self, f_lo: f64, f_hi: f64) -> f64 {
        let mut v: Vec<f64> = self
            .freqs_hz
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
            .map(|(_, p)| *p)
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    /// Strongest bin within `±search_bins` of `f_hz`, with its height above
    /// the median floor of the surrounding `±floor_bins`.
    pub fn peak_near(&self, f_hz: f64, search_bins: usize, floor_bins: usize) -> Peak {
        let c = self.bin_of(f_hz);
        let lo = c.saturating_sub(search_bins);
        let hi = (c + search_bins).min(self.psd.len() - 1);
        let bin = (lo..=hi)
            .max_by(|&a, &b| self.psd[a].total_cmp(&self.psd[b]))
            .unwrap_or(c);
        let flo = c.saturating_sub(floor_bins);
        let fhi = (c + floor_bins).min(self.psd.len() - 1);
        let mut around: Vec<f64> = (flo..=fhi)
            .filter(|&i| i + search_bins < lo || i > hi + search_bins)
            .map(|i| self.psd[i])
            .collect();
        around.sort_by(f64::total_cmp);
        let floor = around.get(around.len() / 2).copied().unwrap_or(0.0);
        let prominence_db = if floor > 0.0 && self.psd[bin] > 0.0 {
            10.0 * (self.psd[bin] / floor).log10()
        } else if self.psd[bin] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        Peak {
            freq_hz: self.freqs_hz[bin],
            bin,
            psd: self.psd[bin],
            prominence_db,
        }
    }
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate with a periodic Hann window and per-segment mean removal.
/// `overlap` is the fraction of a segment shared with the next one.
pub fn psd_estimate(
    waveform: &[f64],
    sample_rate_hz: f64,
    segment_length: usize,
    overlap: f64,
) -> Result<Spectrum, AnalysisError> {
    if !segment_length.is_power_of_two() || segment_length < 2 {
        return Err(AnalysisError::SegmentLength(segment_length));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(AnalysisError::Overlap(overlap));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(AnalysisError::BadSpacing(sample_rate_hz));
    }
    if waveform.len() < segment_length {
        return Err(AnalysisError::TooShort {
            needed: segment_length,
            got: waveform.len(),
        });
    }
    let n = segment_length;
    let hop = ((n as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let w = hann(n);
    let s1: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2 + 1;
    let mut acc = vec![0.0; half];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut n_segments = 0;
    let mut start = 0;
    while start + n <= waveform.len() {
        let seg = &waveform[start..start + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, x), wi) in buf.iter_mut().zip(seg).zip(&w) {
            *b = Complex::new((x - mean) * wi, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        n_segments += 1;
        start += hop;
    }
    let scale = 1.0 / (sample_rate_hz * s2 * n_segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let df = sample_rate_hz / n as f64;
    Ok(Spectrum {
        sample_rate_hz,
        segment_length: n,
        n_segments,
        enbw_hz: sample_rate_hz * s2 / (s1 * s1),
        freqs_hz: (0..half).map(|k| k as f64 * df).collect(),
        psd,
    })
}

/// Integral of the PSD over bins whose centres lie in `[f_lo, f_hi]`.
pub fn band_power(spectrum: &Spectrum, f_lo: f64, f_hi: f64) -> Result<f64, AnalysisError> {
    let nyquist = spectrum.nyquist_hz();
    if !(f_lo >= 0.0 && f_lo < f_hi && f_hi <= nyquist) {
        return Err(AnalysisError::Band {
            f_lo,
            f_hi,
            nyquist,
        });
    }
    let df = spectrum.bin_width_hz();
    Ok(spectrum
        .freqs_hz
        .iter()
        .zip(&spectrum.psd)
        .filter(|(f, _)| **f >= f_lo && **f <= f_hi)
        .map(|(_, p)| p * df)
        .sum())
}
