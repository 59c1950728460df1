//! Quantum noise of one optical band as a stationary complex Gaussian process.
//!
//! A [`FieldRealization`] holds the unitary-DFT amplitudes of the complex
//! envelope of one beam path on a uniform baseband grid. Optical frequencies
//! are represented as baseband offsets from an arbitrary reference; the grid's
//! `center_offset` is where the lower carrier (ω₀) sits. Time-domain samples
//! are `a(t_n) = N^{-1/2} Σ_k α_k e^{+2πikn/N}`.
//!
//! Units: vacuum has `E|α_k|² = 2`, which makes any quadrature extracted from
//! it a white real series of unit variance, i.e. unit PSD in the shot-noise
//! convention used throughout the crate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytic;
use crate::error::{Error, Result};
use crate::fft;
use crate::rng::RngSeed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub sample_rate: f64,
    pub n_samples: usize,
    /// Baseband frequency that the lower optical carrier ω₀ is mapped to.
    pub center_offset: f64,
}

impl FrequencyGrid {
    pub fn new(sample_rate: f64, n_samples: usize, center_offset: f64) -> Result<Self> {
        let grid = FrequencyGrid {
            sample_rate,
            n_samples,
            center_offset,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// 125 MS/s, 5000-sample frames, ω₀ anchored at 40 MHz.
    pub fn acquisition_default() -> Self {
        FrequencyGrid {
            sample_rate: 125e6,
            n_samples: 5000,
            center_offset: 40e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if self.n_samples < 16 || self.n_samples % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "sample count must be even and >= 16, got {}",
                self.n_samples
            )));
        }
        self.check_in_band(self.center_offset)
    }

    pub fn bin_spacing(&self) -> f64 {
        self.sample_rate / self.n_samples as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate / 2.0
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn check_in_band(&self, freq_hz: f64) -> Result<()> {
        if freq_hz.is_finite() && freq_hz.abs() < self.nyquist() {
            Ok(())
        } else {
            Err(Error::OutOfBand {
                freq_hz,
                nyquist_hz: self.nyquist(),
            })
        }
    }

    /// DFT bin index holding `freq_hz`; the frequency must sit on a bin.
    pub fn bin_of(&self, freq_hz: f64) -> Result<usize> {
        self.check_in_band(freq_hz)?;
        let k = freq_hz / self.bin_spacing();
        let kr = k.round();
        if (k - kr).abs() > 1e-6 {
            return Err(Error::OffGrid {
                freq_hz,
                bin_hz: self.bin_spacing(),
            });
        }
        Ok((kr as i64).rem_euclid(self.n_samples as i64) as usize)
    }

    /// Phase `2π f t_n` of a tone at `freq_hz` at sample `n`.
    pub fn phase_at(&self, freq_hz: f64, n: usize) -> f64 {
        2.0 * PI * (freq_hz / self.sample_rate * n as f64).fract()
    }

    pub fn same_as(&self, other: &FrequencyGrid) -> bool {
        self.sample_rate == other.sample_rate && self.n_samples == other.n_samples
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldRealization {
    pub grid: FrequencyGrid,
    pub amplitudes: Vec<Complex64>,
    /// Total power of the classical carriers injected into this field
    /// (sum of E² over carriers).
    pub carrier_power: f64,
    pub label: String,
}

impl FieldRealization {
    pub fn zeros(grid: FrequencyGrid, label: impl Into<String>) -> Self {
        FieldRealization {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.n_samples],
            carrier_power: 0.0,
            label: label.into(),
        }
    }

    pub fn from_time_series(
        grid: FrequencyGrid,
        mut samples: Vec<Complex64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if samples.len() != grid.n_samples {
            return Err(Error::FrameLength {
                index: 0,
                len: samples.len(),
                expected: grid.n_samples,
            });
        }
        fft::forward(&mut samples);
        Ok(FieldRealization {
            grid,
            amplitudes: samples,
            carrier_power: 0.0,
            label: label.into(),
        })
    }

    pub fn time_series(&self) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        fft::inverse(&mut buf);
        buf
    }

    pub fn add(&self, other: &FieldRealization) -> Result<FieldRealization> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(FieldRealization {
            grid: self.grid,
            amplitudes: self
                .amplitudes
                .iter()
                .zip(&other.amplitudes)
                .map(|(a, b)| a + b)
                .collect(),
            carrier_power: self.carrier_power + other.carrier_power,
            label: format!("{}+{}", self.label, other.label),
        })
    }

    pub fn scale(&self, factor: Complex64) -> FieldRealization {
        FieldRealization {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
            carrier_power: self.carrier_power * factor.norm_sqr(),
            label: self.label.clone(),
        }
    }
}

/// Below-threshold degenerate OPO emitting squeezed vacuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezerSpec {
    /// x = √(P/P_th).
    pub pump_ratio: f64,
    /// Cavity half width at half maximum, Hz.
    pub hwhm: f64,
    pub escape_efficiency: f64,
    /// Angle φ of the squeezed quadrature `Re(ã e^{-iφ})`, rad.
    pub squeeze_angle: f64,
    /// Baseband-anchored center frequency of the squeezed band, Hz.
    pub center_freq: f64,
}

impl SqueezerSpec {
    pub fn from_pump_power(
        pump_mw: f64,
        threshold_mw: f64,
        hwhm: f64,
        escape_efficiency: f64,
        squeeze_angle: f64,
        center_freq: f64,
    ) -> Self {
        SqueezerSpec {
            pump_ratio: (pump_mw / threshold_mw).sqrt(),
            hwhm,
            escape_efficiency,
            squeeze_angle,
            center_freq,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pump_ratio.is_finite() && self.pump_ratio >= 0.0) {
            return Err(Error::param("pump_ratio", self.pump_ratio, "must be >= 0"));
        }
        if self.pump_ratio >= 1.0 {
            return Err(Error::AboveThreshold(self.pump_ratio));
        }
        if !(self.hwhm.is_finite() && self.hwhm > 0.0) {
            return Err(Error::param("hwhm", self.hwhm, "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.escape_efficiency) {
            return Err(Error::param(
                "escape_efficiency",
                self.escape_efficiency,
                "must lie in [0, 1]",
            ));
        }
        if !self.squeeze_angle.is_finite() {
            return Err(Error::param("squeeze_angle", self.squeeze_angle, "must be finite"));
        }
        Ok(())
    }

    /// (S₋, S₊) at sideband frequency `eps_hz`.
    pub fn spectrum(&self, eps_hz: f64) -> Result<(f64, f64)> {
        analytic::opo_squeezing_spectrum(self, eps_hz)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraturePair {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub center_freq: f64,
    pub grid: FrequencyGrid,
}

fn standard_complex<R: rand::Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

pub fn make_vacuum_field(grid: FrequencyGrid, seed: RngSeed) -> Result<FieldRealization> {
    grid.validate()?;
    let mut rng = seed.rng();
    let amplitudes = (0..grid.n_samples)
        .map(|_| standard_complex(&mut rng))
        .collect();
    Ok(FieldRealization {
        grid,
        amplitudes,
        carrier_power: 0.0,
        label: "vacuum".into(),
    })
}

/// Joint Bogoliubov transform of the bin pairs `center ± ε`, followed by the
/// escape-efficiency loss (which draws fresh vacuum from `seed`).
pub fn apply_squeezer(
    field: &FieldRealization,
    spec: &SqueezerSpec,
    seed: RngSeed,
) -> Result<FieldRealization> {
    spec.validate()?;
    let grid = field.grid;
    let center = grid.bin_of(spec.center_freq)?;
    if spec.pump_ratio == 0.0 {
        return Ok(field.clone());
    }
    let pure = SqueezerSpec {
        escape_efficiency: 1.0,
        ..*spec
    };
    let n = grid.n_samples;
    let rot = Complex64::from_polar(1.0, 2.0 * spec.squeeze_angle);
    let mut out = field.amplitudes.clone();
    let src = &field.amplitudes;
    for k in 0..=n / 2 {
        let (s_minus, _) = pure.spectrum(k as f64 * grid.bin_spacing())?;
        // e^{-2r} = S₋ for the pure state
        let r = -0.5 * s_minus.ln();
        let (c, s) = (r.cosh(), r.sinh());
        let jp = (center + k) % n;
        let jm = (center + n - k) % n;
        if jp == jm {
            out[jp] = c * src[jp] - rot * s * src[jp].conj();
        } else {
            out[jp] = c * src[jp] - rot * s * src[jm].conj();
            out[jm] = c * src[jm] - rot * s * src[jp].conj();
        }
    }
    let squeezed = FieldRealization {
        grid,
        amplitudes: out,
        carrier_power: field.carrier_power,
        label: format!("squeezed({})", field.label),
    };
    if spec.escape_efficiency < 1.0 {
        apply_loss(&squeezed, spec.escape_efficiency, seed)
    } else {
        Ok(squeezed)
    }
}

/// Beam-splitter loss: `√η·field + √(1−η)·vacuum`.
pub fn apply_loss(
    field: &FieldRealization,
    efficiency: f64,
    seed: RngSeed,
) -> Result<FieldRealization> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::param("efficiency", efficiency, "must lie in [0, 1]"));
    }
    if efficiency == 1.0 {
        return Ok(field.clone());
    }
    let keep = efficiency.sqrt();
    let admit = (1.0 - efficiency).sqrt();
    let mut rng = seed.rng();
    let amplitudes = field
        .amplitudes
        .iter()
        .map(|a| keep * a + admit * standard_complex(&mut rng))
        .collect();
    Ok(FieldRealization {
        grid: field.grid,
        amplitudes,
        carrier_power: field.carrier_power * efficiency,
        label: format!("loss({})", field.label),
    })
}

/// Two-photon quadratures about `center_freq`: writing the envelope as
/// `(a₁(t) − i a₂(t)) e^{iω t}`, returns `a₁ = Re(a e^{-iωt})` and
/// `a₂ = −Im(a e^{-iωt})`.
pub fn quadrature_series(field: &FieldRealization, center_freq: f64) -> Result<QuadraturePair> {
    let grid = field.grid;
    grid.check_in_band(center_freq)?;
    let samples = field.time_series();
    Ok(demod_quadratures(&samples, grid, center_freq))
}

pub(crate) fn demod_quadratures(
    samples: &[Complex64],
    grid: FrequencyGrid,
    center_freq: f64,
) -> QuadraturePair {
    let (a1, a2) = samples
        .iter()
        .enumerate()
        .map(|(n, a)| {
            let z = a * Complex64::from_polar(1.0, -grid.phase_at(center_freq, n));
            (z.re, -z.im)
        })
        .unzip();
    QuadraturePair {
        a1,
        a2,
        center_freq,
        grid,
    }
}

/// The two grouped terms on the right-hand side of the sideband identity
/// `2a₁^{ω₀+Ω} = (a₂^{ω₀+2Ω} − a₂^{ω₀}) sin Ωt + (a₁^{ω₀+2Ω} + a₁^{ω₀}) cos Ωt`:
/// returns `(a₂^{ω₀+2Ω} − a₂^{ω₀}, a₁^{ω₀+2Ω} + a₁^{ω₀})`.
pub fn epr_grouped_terms(
    field: &FieldRealization,
    omega0_hz: f64,
    big_omega_hz: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, low, high) = epr_quadratures(field, omega0_hz, big_omega_hz)?;
    let diff = high.a2.iter().zip(&low.a2).map(|(h, l)| h - l).collect();
    let sum = high.a1.iter().zip(&low.a1).map(|(h, l)| h + l).collect();
    Ok((diff, sum))
}

fn epr_quadratures(
    field: &FieldRealization,
    omega0_hz: f64,
    big_omega_hz: f64,
) -> Result<(QuadraturePair, QuadraturePair, QuadraturePair)> {
    let grid = field.grid;
    if !(big_omega_hz.is_finite() && big_omega_hz > 0.0) {
        return Err(Error::param("omega", big_omega_hz, "must be > 0"));
    }
    for f in [
        omega0_hz - big_omega_hz,
        omega0_hz,
        omega0_hz + big_omega_hz,
        omega0_hz + 2.0 * big_omega_hz,
    ] {
        grid.check_in_band(f)?;
    }
    let samples = field.time_series();
    Ok((
        demod_quadratures(&samples, grid, omega0_hz + big_omega_hz),
        demod_quadratures(&samples, grid, omega0_hz),
        demod_quadratures(&samples, grid, omega0_hz + 2.0 * big_omega_hz),
    ))
}

/// Max-norm of (LHS − RHS) of the sideband identity relative to max-norm of LHS.
pub fn epr_identity_residual(
    field: &FieldRealization,
    omega0_hz: f64,
    big_omega_hz: f64,
) -> Result<f64> {
    let grid = field.grid;
    let (mid, low, high) = epr_quadratures(field, omega0_hz, big_omega_hz)?;
    let mut max_lhs = 0.0f64;
    let mut max_err = 0.0f64;
    for n in 0..grid.n_samples {
        let phase = grid.phase_at(big_omega_hz, n);
        let lhs = 2.0 * mid.a1[n];
        let rhs = (high.a2[n] - low.a2[n]) * phase.sin() + (high.a1[n] + low.a1[n]) * phase.cos();
        max_lhs = max_lhs.max(lhs.abs());
        max_err = max_err.max((lhs - rhs).abs());
    }
    if max_lhs == 0.0 {
        return Ok(if max_err == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(max_err / max_lhs)
}
