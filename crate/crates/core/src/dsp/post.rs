//! Background subtraction, normalization and band-averaged reductions.

use serde::{Deserialize, Serialize};

use super::spectrum::SpectrumEstimate;
use crate::error::{Error, Result};

/// Analysis band `|f − center| ≤ half_width` with `|f − center| ≤ exclusion`
/// removed (the exclusion hides the modulation peak).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub center_hz: f64,
    pub half_width_hz: f64,
    pub exclusion_half_width_hz: f64,
}

impl BandSpec {
    pub fn new(center_hz: f64, half_width_hz: f64, exclusion_half_width_hz: f64) -> Result<Self> {
        let b = BandSpec {
            center_hz,
            half_width_hz,
            exclusion_half_width_hz,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_hz.is_finite() && self.center_hz >= 0.0) {
            return Err(Error::param("center_hz", self.center_hz, "must be >= 0"));
        }
        if !(self.half_width_hz.is_finite() && self.half_width_hz > 0.0) {
            return Err(Error::param("half_width_hz", self.half_width_hz, "must be > 0"));
        }
        if !(self.exclusion_half_width_hz >= 0.0
            && self.exclusion_half_width_hz < self.half_width_hz)
        {
            return Err(Error::param(
                "exclusion_half_width_hz",
                self.exclusion_half_width_hz,
                "must lie in [0, half_width_hz)",
            ));
        }
        Ok(())
    }

    pub fn contains(&self, freq_hz: f64) -> bool {
        let d = (freq_hz - self.center_hz).abs();
        d <= self.half_width_hz && d > self.exclusion_half_width_hz
    }

    pub fn bin_indices(&self, freqs: &[f64]) -> Vec<usize> {
        freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| self.contains(f))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn band_freqs(&self, freqs: &[f64]) -> Vec<f64> {
        self.bin_indices(freqs).into_iter().map(|i| freqs[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    /// Positive when the target sits below the reference.
    pub reduction_db: f64,
    pub stderr_db: f64,
    pub n_bins: usize,
    /// Band means after background subtraction.
    pub target_mean: f64,
    pub reference_mean: f64,
}

fn mean_and_se(x: &[f64], n_eff: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, f64::NAN);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n_eff).sqrt())
}

/// `−10 log₁₀( mean_band(T − B) / mean_band(R − B) )` with its standard
/// error. The error treats band bins as samples, discounted for the
/// correlation the window introduces between neighbouring bins.
pub fn postprocess(
    target: &SpectrumEstimate,
    reference: &SpectrumEstimate,
    background: &SpectrumEstimate,
    band: &BandSpec,
) -> Result<Reduction> {
    band.validate()?;
    for s in [target, reference, background] {
        if s.background_subtracted {
            return Err(Error::AlreadySubtracted);
        }
        if s.freqs != target.freqs {
            return Err(Error::FrequencyMismatch);
        }
    }
    let idx = band.bin_indices(&target.freqs);
    if idx.is_empty() {
        return Err(Error::EmptyBand {
            center_hz: band.center_hz,
            half_width_hz: band.half_width_hz,
        });
    }
    let t: Vec<f64> = idx
        .iter()
        .map(|&i| target.values[i] - background.values[i])
        .collect();
    let r: Vec<f64> = idx
        .iter()
        .map(|&i| reference.values[i] - background.values[i])
        .collect();
    let corr = target.window.bin_correlation_factor(target.frame_len);
    let n_eff = (idx.len() as f64 / corr).max(1.0);
    let (mt, set) = mean_and_se(&t, n_eff);
    let (mr, ser) = mean_and_se(&r, n_eff);
    if !(mt > 0.0) {
        return Err(Error::DegenerateSubtraction {
            what: "target",
            value: mt,
        });
    }
    if !(mr > 0.0) {
        return Err(Error::DegenerateSubtraction {
            what: "reference",
            value: mr,
        });
    }
    let rel = ((set / mt).powi(2) + (ser / mr).powi(2)).sqrt();
    Ok(Reduction {
        reduction_db: -10.0 * (mt / mr).log10(),
        stderr_db: 10.0 / std::f64::consts::LN_10 * rel,
        n_bins: idx.len(),
        target_mean: mt,
        reference_mean: mr,
    })
}
