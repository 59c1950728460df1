//! Real IQ demodulation: mix with a local oscillator, low-pass, optionally
//! decimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::filter::{apply_bin_response, FilterChain, FilterSpec, Prototype};
use crate::error::{Error, Result};
use crate::field::FrequencyGrid;
use crate::interferometer::PhotocurrentTrace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemodSpec {
    pub lo_freq_hz: f64,
    /// LO is `cos(2π f_LO t + lo_phase)`.
    pub lo_phase: f64,
    /// Post-mixer low-pass corner; `None` means `lo_freq_hz / 2`.
    #[serde(default)]
    pub lpf_corner_hz: Option<f64>,
    #[serde(default = "default_lpf_order")]
    pub lpf_order: usize,
    #[serde(default = "default_decimate")]
    pub decimate: usize,
}

fn default_lpf_order() -> usize {
    8
}

fn default_decimate() -> usize {
    1
}

impl DemodSpec {
    pub fn new(lo_freq_hz: f64, lo_phase: f64) -> Self {
        DemodSpec {
            lo_freq_hz,
            lo_phase,
            lpf_corner_hz: None,
            lpf_order: default_lpf_order(),
            decimate: default_decimate(),
        }
    }

    pub fn lpf_corner(&self) -> f64 {
        self.lpf_corner_hz.unwrap_or(self.lo_freq_hz / 2.0)
    }

    pub fn validate(&self, sample_rate: f64, n_samples: usize) -> Result<()> {
        let nyq = sample_rate / 2.0;
        if !(self.lo_freq_hz.is_finite() && self.lo_freq_hz > 0.0) {
            return Err(Error::param("lo_freq_hz", self.lo_freq_hz, "must be > 0"));
        }
        if self.lo_freq_hz >= nyq / 2.0 {
            return Err(Error::OutOfBand {
                freq_hz: self.lo_freq_hz,
                nyquist_hz: nyq / 2.0,
            });
        }
        if !self.lo_phase.is_finite() {
            return Err(Error::param("lo_phase", self.lo_phase, "must be finite"));
        }
        if self.decimate == 0 || n_samples % self.decimate != 0 {
            return Err(Error::param(
                "decimate",
                self.decimate as f64,
                "must be >= 1 and divide the frame length",
            ));
        }
        let out_n = n_samples / self.decimate;
        if out_n < 16 || out_n % 2 != 0 {
            return Err(Error::param(
                "decimate",
                self.decimate as f64,
                "decimated frame must stay even and >= 16 samples",
            ));
        }
        if self.lpf_corner() >= sample_rate / (2.0 * self.decimate as f64) {
            return Err(Error::param(
                "lpf_corner_hz",
                self.lpf_corner(),
                "must lie below the decimated Nyquist frequency",
            ));
        }
        Ok(())
    }

    pub fn lpf(&self) -> FilterSpec {
        FilterSpec::LowPass {
            corner_hz: self.lpf_corner(),
            order: self.lpf_order,
            prototype: Prototype::Butterworth,
            ripple_db: 0.0,
        }
    }
}

/// A demodulator prepared for one frame length: LO table and low-pass
/// response are computed once and reused across frames.
#[derive(Clone, Debug)]
pub struct Demodulator {
    pub spec: DemodSpec,
    pub sample_rate: f64,
    pub n_samples: usize,
    lo: Vec<f64>,
    lpf_bins: Vec<Complex64>,
}

impl Demodulator {
    pub fn new(spec: DemodSpec, sample_rate: f64, n_samples: usize) -> Result<Self> {
        spec.validate(sample_rate, n_samples)?;
        let chain = FilterChain::design(&[spec.lpf()], sample_rate)?;
        let lo = (0..n_samples)
            .map(|n| {
                let cycles = (spec.lo_freq_hz / sample_rate * n as f64).fract();
                (2.0 * PI * cycles + spec.lo_phase).cos()
            })
            .collect();
        Ok(Demodulator {
            spec,
            sample_rate,
            n_samples,
            lo,
            lpf_bins: chain.bin_response(n_samples),
        })
    }

    pub fn output_sample_rate(&self) -> f64 {
        self.sample_rate / self.spec.decimate as f64
    }

    pub fn process(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.n_samples {
            return Err(Error::FrameLength {
                index: 0,
                len: samples.len(),
                expected: self.n_samples,
            });
        }
        let mixed: Vec<f64> = samples.iter().zip(&self.lo).map(|(x, l)| x * l).collect();
        let filtered = apply_bin_response(&mixed, &self.lpf_bins);
        Ok(filtered.into_iter().step_by(self.spec.decimate).collect())
    }
}

/// Demodulates a raw sample frame.
pub fn demodulate_samples(samples: &[f64], sample_rate: f64, spec: &DemodSpec) -> Result<Vec<f64>> {
    Demodulator::new(*spec, sample_rate, samples.len())?.process(samples)
}

/// Demodulates a photocurrent trace; the result lives on a baseband grid at
/// the (possibly decimated) output rate.
pub fn demodulate(trace: &PhotocurrentTrace, spec: &DemodSpec) -> Result<PhotocurrentTrace> {
    let fs = trace.grid.sample_rate;
    let samples = demodulate_samples(&trace.samples, fs, spec)?;
    let grid = FrequencyGrid::new(fs / spec.decimate as f64, samples.len(), 0.0)?;
    Ok(PhotocurrentTrace {
        samples,
        grid,
        ..trace.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 125e6;

    #[test]
    fn quadrature_lo_rejects_amplitude_beat() {
        let n = 5000;
        let x: Vec<f64> = (0..n)
            .map(|i| 2.0 * (2.0 * PI * 10e6 * i as f64 / FS).cos())
            .collect();
        let y = demodulate_samples(&x, FS, &DemodSpec::new(10e6, PI / 2.0)).unwrap();
        let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // the 2Ω mixing product is left at the LPF stopband level (< −85 dB)
        assert!(peak < 1e-4, "{peak}");
        // in-phase LO keeps it: 2cos² → DC of 1
        let y = demodulate_samples(&x, FS, &DemodSpec::new(10e6, 0.0)).unwrap();
        for v in &y {
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn decimation_and_validation() {
        let x = vec![0.0; 5000];
        let mut spec = DemodSpec::new(10e6, 0.0);
        spec.decimate = 5;
        assert_eq!(demodulate_samples(&x, FS, &spec).unwrap().len(), 1000);
        spec.decimate = 3;
        assert!(demodulate_samples(&x, FS, &spec).is_err());
        assert!(demodulate_samples(&x, FS, &DemodSpec::new(40e6, 0.0)).is_err());
        spec.decimate = 10;
        // 5 MHz corner still sits below the 6.25 MHz decimated Nyquist
        assert!(demodulate_samples(&x, FS, &spec).is_ok());
        spec.decimate = 20;
        assert!(demodulate_samples(&x, FS, &spec).is_err());
    }
}
