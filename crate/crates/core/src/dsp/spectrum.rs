//! Hamming-windowed averaged periodograms and cross-spectra.
//!
//! Conventions: frames are non-overlapping, each frame has its mean removed
//! before windowing, and the estimate on one-sided bin `k` is
//! `|X_k|² / Σ w²`. White noise of variance σ² therefore reads σ² on every
//! bin, and a band's power is `Σ P_k · 2/N`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::filter::FilterChain;
use crate::error::{Error, Result};
use crate::fft;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Hamming,
}

impl Window {
    /// Periodic (DFT-even) window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hamming => (0..n)
                .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    /// `1 + 2 Σ_j ρ_j`, where ρ_j is the correlation between periodogram
    /// bins `j` apart for white Gaussian input. Dividing a bin count by this
    /// gives the number of effectively independent bins.
    pub fn bin_correlation_factor(self, n: usize) -> f64 {
        let w2: Vec<Complex64> = self
            .coefficients(n)
            .iter()
            .map(|w| Complex64::new(w * w, 0.0))
            .collect();
        let mut spec = w2;
        fft::forward_raw(&mut spec);
        let p0 = spec[0].norm_sqr();
        let tail: f64 = spec[1..n / 2].iter().map(|v| v.norm_sqr() / p0).sum();
        1.0 + 2.0 * tail
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Auto,
    Cross,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumEstimate {
    /// One-sided bin frequencies, 0 … fs/2.
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
    pub n_frames: usize,
    /// Samples per frame.
    pub frame_len: usize,
    pub window: Window,
    pub kind: SpectrumKind,
    pub compensated: bool,
    pub background_subtracted: bool,
}

impl SpectrumEstimate {
    pub fn bin_spacing(&self) -> f64 {
        self.freqs[1] - self.freqs[0]
    }

    /// Divides out the chain's power response. Fails if already compensated.
    pub fn compensate(&self, chain: &FilterChain) -> Result<SpectrumEstimate> {
        let gain = chain.power_response(&self.freqs);
        self.compensate_power(&gain)
    }

    pub fn compensate_power(&self, power_response: &[f64]) -> Result<SpectrumEstimate> {
        if self.compensated {
            return Err(Error::AlreadyCompensated);
        }
        if power_response.len() != self.values.len() {
            return Err(Error::FrequencyMismatch);
        }
        Ok(SpectrumEstimate {
            values: self
                .values
                .iter()
                .zip(power_response)
                .map(|(v, g)| v / g)
                .collect(),
            compensated: true,
            ..self.clone()
        })
    }

    pub fn subtract_background(&self, background: &SpectrumEstimate) -> Result<SpectrumEstimate> {
        if self.background_subtracted || background.background_subtracted {
            return Err(Error::AlreadySubtracted);
        }
        if self.freqs != background.freqs {
            return Err(Error::FrequencyMismatch);
        }
        Ok(SpectrumEstimate {
            values: self
                .values
                .iter()
                .zip(&background.values)
                .map(|(t, b)| t - b)
                .collect(),
            background_subtracted: true,
            ..self.clone()
        })
    }

    /// Power between `lo_hz` and `hi_hz` inclusive.
    pub fn integrated_power(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let w = 2.0 / self.frame_len as f64;
        self.freqs
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo_hz && **f <= hi_hz)
            .map(|(_, v)| v * w)
            .sum()
    }

    /// Values in dB relative to `reference`; nonpositive values map to NaN.
    pub fn to_db_relative(&self, reference: f64) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    10.0 * (v / reference).log10()
                } else {
                    f64::NAN
                }
            })
            .collect()
    }
}

/// Running sum of per-frame periodograms. Frames must be added in a fixed
/// order, and partial accumulators merged in a fixed order, for the result
/// to be bit-reproducible.
#[derive(Clone, Debug)]
pub struct SpectrumAccumulator {
    kind: SpectrumKind,
    sample_rate: f64,
    window: Vec<f64>,
    norm: f64,
    sum: Vec<f64>,
    frames: usize,
}

impl SpectrumAccumulator {
    pub fn new(kind: SpectrumKind, frame_len: usize, sample_rate: f64) -> Self {
        let window = Window::Hamming.coefficients(frame_len);
        let norm = window.iter().map(|w| w * w).sum();
        SpectrumAccumulator {
            kind,
            sample_rate,
            window,
            norm,
            sum: vec![0.0; frame_len / 2 + 1],
            frames: 0,
        }
    }

    pub fn frame_len(&self) -> usize {
        self.window.len()
    }

    pub fn n_frames(&self) -> usize {
        self.frames
    }

    fn transform(&self, frame: &[f64]) -> Result<Vec<Complex64>> {
        if frame.len() != self.window.len() {
            return Err(Error::FrameLength {
                index: self.frames,
                len: frame.len(),
                expected: self.window.len(),
            });
        }
        let mean = frame.iter().sum::<f64>() / frame.len() as f64;
        let mut buf: Vec<Complex64> = frame
            .iter()
            .zip(&self.window)
            .map(|(x, w)| Complex64::new((x - mean) * w, 0.0))
            .collect();
        fft::forward_raw(&mut buf);
        buf.truncate(self.sum.len());
        Ok(buf)
    }

    pub fn add_frame(&mut self, frame: &[f64]) -> Result<()> {
        let x = self.transform(frame)?;
        self.accumulate(&x, &x);
        Ok(())
    }

    /// Adds one frame pair; `Re(V₁ V₂*)` for cross accumulators. For an auto
    /// accumulator both inputs must be the same frame.
    pub fn add_pair(&mut self, v1: &[f64], v2: &[f64]) -> Result<()> {
        let a = self.transform(v1)?;
        let b = self.transform(v2)?;
        self.accumulate(&a, &b);
        Ok(())
    }

    fn accumulate(&mut self, a: &[Complex64], b: &[Complex64]) {
        for ((s, x), y) in self.sum.iter_mut().zip(a).zip(b) {
            *s += (x.re * y.re + x.im * y.im) / self.norm;
        }
        self.frames += 1;
    }

    /// Appends another accumulator's frames (which must come after this
    /// one's in frame order).
    pub fn merge(&mut self, other: &SpectrumAccumulator) -> Result<()> {
        if other.window.len() != self.window.len() {
            return Err(Error::FrameLength {
                index: self.frames,
                len: other.window.len(),
                expected: self.window.len(),
            });
        }
        if other.kind != self.kind || other.sample_rate != self.sample_rate {
            return Err(Error::FrequencyMismatch);
        }
        for (s, o) in self.sum.iter_mut().zip(&other.sum) {
            *s += o;
        }
        self.frames += other.frames;
        Ok(())
    }

    pub fn finish(&self) -> Result<SpectrumEstimate> {
        if self.frames == 0 {
            return Err(Error::NoFrames);
        }
        let n = self.window.len();
        let inv = 1.0 / self.frames as f64;
        Ok(SpectrumEstimate {
            freqs: (0..self.sum.len())
                .map(|k| k as f64 * self.sample_rate / n as f64)
                .collect(),
            values: self.sum.iter().map(|s| s * inv).collect(),
            n_frames: self.frames,
            frame_len: n,
            window: Window::Hamming,
            kind: self.kind,
            compensated: false,
            background_subtracted: false,
        })
    }
}

/// Averaged Hamming-windowed periodogram over `frames`, in order.
pub fn welch_psd<F: AsRef<[f64]>>(frames: &[F], sample_rate: f64) -> Result<SpectrumEstimate> {
    let first = frames.first().ok_or(Error::NoFrames)?;
    let mut acc = SpectrumAccumulator::new(SpectrumKind::Auto, first.as_ref().len(), sample_rate);
    for f in frames {
        acc.add_frame(f.as_ref())?;
    }
    acc.finish()
}

/// Averaged `Re(V₁ V₂*)` over aligned frame pairs.
pub fn cross_spectrum<F: AsRef<[f64]>>(
    v1: &[F],
    v2: &[F],
    sample_rate: f64,
) -> Result<SpectrumEstimate> {
    if v1.len() != v2.len() {
        return Err(Error::FrameLength {
            index: v1.len().min(v2.len()),
            len: v2.len(),
            expected: v1.len(),
        });
    }
    let first = v1.first().ok_or(Error::NoFrames)?;
    let mut acc = SpectrumAccumulator::new(SpectrumKind::Cross, first.as_ref().len(), sample_rate);
    for (a, b) in v1.iter().zip(v2) {
        acc.add_pair(a.as_ref(), b.as_ref())?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand_distr::{Distribution, StandardNormal};

    fn white(seed: u64, n: usize, sigma: f64) -> Vec<f64> {
        let mut r = RngSeed(seed).rng();
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                sigma * z
            })
            .collect()
    }

    #[test]
    fn white_noise_calibration() {
        let frames: Vec<Vec<f64>> = (0..400).map(|i| white(i, 512, 1.7)).collect();
        let s = welch_psd(&frames, 125e6).unwrap();
        let band = &s.values[10..246];
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        // per-bin relative σ is 1/√frames; the band holds ~236/1.8 independent bins
        let se = 2.89 / (400f64).sqrt() / (236.0f64 / 1.8).sqrt();
        assert!((mean - 2.89).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn sinusoid_integrates_to_half_amplitude_squared() {
        let n = 5000;
        let fs = 125e6;
        let a = 0.8;
        let x: Vec<f64> = (0..n)
            .map(|i| a * (2.0 * PI * 3.11e6 * i as f64 / fs + 0.4).cos())
            .collect();
        let s = welch_psd(&[x], fs).unwrap();
        let p = s.integrated_power(2.9e6, 3.3e6);
        assert!((p - a * a / 2.0).abs() < 1e-3 * a * a, "{p}");
    }

    #[test]
    fn cross_of_identical_streams_equals_auto() {
        let frames: Vec<Vec<f64>> = (0..5).map(|i| white(i, 256, 1.0)).collect();
        let auto = welch_psd(&frames, 1.0).unwrap();
        let cross = cross_spectrum(&frames, &frames, 1.0).unwrap();
        assert_eq!(auto.values, cross.values);
    }

    #[test]
    fn merge_in_order_matches_single_pass() {
        let frames: Vec<Vec<f64>> = (0..6).map(|i| white(i, 64, 1.0)).collect();
        let whole = welch_psd(&frames, 1.0).unwrap();
        let mut a = SpectrumAccumulator::new(SpectrumKind::Auto, 64, 1.0);
        let mut b = SpectrumAccumulator::new(SpectrumKind::Auto, 64, 1.0);
        for f in &frames[..3] {
            a.add_frame(f).unwrap();
        }
        for f in &frames[3..] {
            b.add_frame(f).unwrap();
        }
        a.merge(&b).unwrap();
        let merged = a.finish().unwrap();
        assert_eq!(merged.n_frames, 6);
        for (x, y) in merged.values.iter().zip(&whole.values) {
            assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_frames() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(welch_psd(&empty, 1.0), Err(Error::NoFrames)));
        let ragged = vec![vec![0.0; 32], vec![0.0; 30]];
        assert!(matches!(welch_psd(&ragged, 1.0), Err(Error::FrameLength { .. })));
        let a = vec![vec![0.0; 32]];
        let b = vec![vec![0.0; 32], vec![0.0; 32]];
        assert!(cross_spectrum(&a, &b, 1.0).is_err());
    }

    #[test]
    fn compensation_is_flagged_once() {
        let s = welch_psd(&[white(1, 64, 1.0)], 1.0).unwrap();
        let ones = vec![2.0; s.values.len()];
        let c = s.compensate_power(&ones).unwrap();
        assert!(c.compensated);
        assert_eq!(c.values[3], s.values[3] / 2.0);
        assert!(matches!(c.compensate_power(&ones), Err(Error::AlreadyCompensated)));
    }

    #[test]
    fn hamming_bin_correlation() {
        // w² has DFT lines 0.3974, −0.2484, 0.0529 (relative to N)
        let f = Window::Hamming.bin_correlation_factor(1024);
        let expect = 1.0 + 2.0 * ((0.2484f64 / 0.3974).powi(2) + (0.0529f64 / 0.3974).powi(2));
        assert!((f - expect).abs() < 1e-3, "{f} vs {expect}");
    }
}
