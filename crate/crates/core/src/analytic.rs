//! Closed-form noise budgets.
//!
//! Everything here is a pure function of its arguments. Linear powers are
//! relative to the unsqueezed shot-noise floor (vacuum = 1) unless noted, and
//! reductions are reported in dB with positive values meaning "below".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SqueezerSpec;

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Reduction in dB for a linear noise factor (positive below vacuum).
pub fn reduction_db(linear: f64) -> f64 {
    -to_db(linear)
}

/// Below-threshold OPO quadrature spectra `(S₋, S₊)` at sideband frequency `eps_hz`:
///
/// `S∓(ε) = 1 ∓ η·4x / ((1 ± x)² + (ε/γ)²)` with γ the cavity HWHM.
pub fn opo_squeezing_spectrum(spec: &SqueezerSpec, eps_hz: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    let x = spec.pump_ratio;
    let eta = spec.escape_efficiency;
    let u = (eps_hz / spec.hwhm).powi(2);
    let s = 1.0 - eta * 4.0 * x / ((1.0 + x).powi(2) + u);
    let a = 1.0 + eta * 4.0 * x / ((1.0 - x).powi(2) + u);
    Ok((s, a))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceLevels {
    pub s_lower_db: f64,
    pub s_upper_db: f64,
    pub a_lower_db: f64,
    pub a_upper_db: f64,
}

/// Measured squeezing of the two sources. `weights` are `[E₂², E₁²]`: source 1
/// enters the photocurrent multiplied by E₂ and source 2 by E₁.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingLevels {
    pub sources: [SourceLevels; 2],
    pub weights: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisBand {
    Lower,
    Upper,
    Demod,
}

/// Expected reduction of the proposed scheme from the squeezing each source
/// shows at the analysis sidebands.
pub fn predicted_reduction(levels: &SqueezingLevels, band: AnalysisBand) -> f64 {
    debug_assert!(levels.weights.iter().all(|&w| w > 0.0));
    let [w1, w2] = levels.weights;
    let lin = |db: f64| from_db(-db);
    let [p, q] = levels.sources;
    let factor = match band {
        AnalysisBand::Lower => (w1 * lin(p.s_lower_db) + w2 * lin(q.s_lower_db)) / (w1 + w2),
        AnalysisBand::Upper => (w1 * lin(p.s_upper_db) + w2 * lin(q.s_upper_db)) / (w1 + w2),
        AnalysisBand::Demod => {
            (w1 * (lin(p.s_lower_db) + lin(p.s_upper_db))
                + w2 * (lin(q.s_lower_db) + lin(q.s_upper_db)))
                / (2.0 * (w1 + w2))
        }
    };
    reduction_db(factor)
}

/// Reduction achievable when a fraction `f` of the unsqueezed floor is
/// classical noise the squeezing cannot touch.
pub fn classical_noise_limit(classical_fraction: f64, s_linear: f64) -> f64 {
    reduction_db(classical_fraction + (1.0 - classical_fraction) * s_linear)
}

/// Effective squeezed-quadrature noise under quasi-static Gaussian angle
/// jitter (small-angle form).
pub fn phase_jitter_penalty(s_linear: f64, a_linear: f64, theta_rms: f64) -> f64 {
    let c = theta_rms.cos();
    let s = theta_rms.sin();
    s_linear * c * c + a_linear * s * s
}

/// Demodulated phase-noise floor of the same-frequency (carrier-centered)
/// squeezing scheme with flat squeezing `s` and anti-squeezing `a`:
/// the squeezed quadrature contributes `3s/4` and anti-squeezed components
/// folded down from ±2Ω contribute `a/4`.
pub fn straightforward_phase_floor(s_linear: f64, a_linear: f64) -> f64 {
    (3.0 * s_linear + a_linear) / 4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Squeezers centered on the *other* beam's carrier (sideband-entangled).
    Proposed,
    /// Squeezers centered on each beam's own carrier.
    Straightforward,
    /// No squeezing.
    Unsqueezed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    /// Photocurrent spectrum itself (amplitude + phase noise).
    Raw,
    /// Phase quadrature after demodulation at the beat frequency.
    Demodulated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceBudget {
    pub squeezer: Option<SqueezerSpec>,
    /// Photocurrent weight of the source (E² of the beam it beats against).
    pub weight: f64,
    /// Transmission from squeezer to detector before the detector itself
    /// (pickoff reflectivity).
    pub transmission: f64,
    /// RMS angle error between the squeezed quadrature and the measured one.
    pub angle_rms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    pub scheme: Scheme,
    pub readout: Readout,
    pub beat_hz: f64,
    pub sources: [SourceBudget; 2],
    pub detector_efficiency: f64,
    /// Fraction of the unsqueezed (shot + classical) floor that is classical.
    pub classical_fraction: f64,
    /// Electronic noise left after background subtraction, relative to shot.
    pub residual_electronic: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseItems {
    pub squeezed_quadrature: f64,
    pub anti_squeezed_leakage: f64,
    pub classical: f64,
    pub electronic: f64,
}

impl NoiseItems {
    pub fn total(&self) -> f64 {
        self.squeezed_quadrature + self.anti_squeezed_leakage + self.classical + self.electronic
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub scheme: Scheme,
    /// Band-averaged target floor relative to vacuum; equals `items.total()`.
    pub floor: f64,
    pub items: NoiseItems,
    /// Band-averaged unsqueezed floor (shot + classical + residual electronic).
    pub reference_floor: f64,
}

impl NoiseBudget {
    pub fn reduction_db(&self) -> f64 {
        reduction_db(self.floor / self.reference_floor)
    }
}

/// Squeezed/anti-squeezed split of one source's contribution at `eps_hz`,
/// after angle error and transmission losses.
fn source_split(src: &SourceBudget, eta_total: f64, eps_hz: f64) -> Result<(f64, f64, f64)> {
    let (s, a) = match &src.squeezer {
        Some(sq) => opo_squeezing_spectrum(sq, eps_hz)?,
        None => (1.0, 1.0),
    };
    let t = src.transmission * eta_total;
    let c2 = src.angle_rms.cos().powi(2);
    let s2 = src.angle_rms.sin().powi(2);
    // (squeezed part, leakage part, admitted vacuum)
    Ok((t * s * c2, t * a * s2, 1.0 - t))
}

/// Budget for the proposed/straightforward/unsqueezed schemes evaluated on
/// the analysis-band bin frequencies (photocurrent frequencies for raw
/// readout, baseband frequencies for demodulated readout) and averaged
/// linearly over them.
pub fn heterodyne_budget(inputs: &BudgetInputs, band_freqs: &[f64]) -> Result<NoiseBudget> {
    if band_freqs.is_empty() {
        return Err(Error::param("band_freqs", 0.0, "must not be empty"));
    }
    if !(0.0..1.0).contains(&inputs.classical_fraction) {
        return Err(Error::param(
            "classical_fraction",
            inputs.classical_fraction,
            "must lie in [0, 1)",
        ));
    }
    let wsum: f64 = inputs.sources.iter().map(|s| s.weight).sum();
    if !(wsum > 0.0) {
        return Err(Error::param("weight", wsum, "source weights must sum to > 0"));
    }
    let eta = inputs.detector_efficiency;
    let omega = inputs.beat_hz;

    let mut squeezed = 0.0;
    let mut leak = 0.0;
    for &f in band_freqs {
        for src in &inputs.sources {
            let w = src.weight / wsum;
            let (sq, lk) = match (inputs.scheme, inputs.readout) {
                (Scheme::Unsqueezed, _) => (1.0, 0.0),
                (Scheme::Proposed, Readout::Raw) => {
                    let (s, l, v) = source_split(src, eta, f)?;
                    (s + v, l)
                }
                (Scheme::Proposed, Readout::Demodulated) => {
                    let (s1, l1, v1) = source_split(src, eta, omega - f)?;
                    let (s2, l2, v2) = source_split(src, eta, omega + f)?;
                    ((s1 + v1 + s2 + v2) / 2.0, (l1 + l2) / 2.0)
                }
                (Scheme::Straightforward, Readout::Raw) => {
                    // amplitude and phase quadratures of the own-carrier squeezer
                    // land at f ∓ Ω with equal weight
                    let mut s_acc = 0.0;
                    let mut l_acc = 0.0;
                    for eps in [f - omega, f + omega] {
                        let (s, l, v) = source_split(src, eta, eps)?;
                        let (sa, la, va) = anti(src, eta, eps)?;
                        s_acc += (s + l + v) / 4.0;
                        l_acc += (sa + la + va) / 4.0;
                    }
                    (s_acc, l_acc)
                }
                (Scheme::Straightforward, Readout::Demodulated) => {
                    let (s0, l0, v0) = source_split(src, eta, f)?;
                    let mut sq = (s0 + l0 + v0) / 2.0;
                    let mut lk = 0.0;
                    for eps in [f - 2.0 * omega, f + 2.0 * omega] {
                        let (s, l, v) = source_split(src, eta, eps)?;
                        let (sa, la, va) = anti(src, eta, eps)?;
                        sq += (s + l + v) / 8.0;
                        lk += (sa + la + va) / 8.0;
                    }
                    (sq, lk)
                }
            };
            squeezed += w * sq;
            leak += w * lk;
        }
    }
    let n = band_freqs.len() as f64;
    let f = inputs.classical_fraction;
    let items = NoiseItems {
        squeezed_quadrature: squeezed / n,
        anti_squeezed_leakage: leak / n,
        classical: f / (1.0 - f),
        electronic: inputs.residual_electronic,
    };
    Ok(NoiseBudget {
        scheme: inputs.scheme,
        floor: items.total(),
        items,
        reference_floor: 1.0 + f / (1.0 - f) + inputs.residual_electronic,
    })
}

/// Same as [`source_split`] but for the orthogonal (anti-squeezed) quadrature.
fn anti(src: &SourceBudget, eta_total: f64, eps_hz: f64) -> Result<(f64, f64, f64)> {
    let (s, a) = match &src.squeezer {
        Some(sq) => opo_squeezing_spectrum(sq, eps_hz)?,
        None => (1.0, 1.0),
    };
    let t = src.transmission * eta_total;
    let c2 = src.angle_rms.cos().powi(2);
    let s2 = src.angle_rms.sin().powi(2);
    Ok((t * s * s2, t * a * c2, 1.0 - t))
}
