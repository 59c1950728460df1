//! Two-beam heterodyne interferometer with pickoff-injected squeezed vacua.
//!
//! Beam 1 (carrier at ω₀) and beam 2 (carrier at ω₀ + Ω) each pass a
//! high-reflectivity pickoff whose weak port admits a squeezed vacuum. In the
//! proposed scheme the vacuum entering beam 1 is squeezed about beam 2's
//! carrier and vice versa, so each beam's noise is read by the other beam's
//! carrier exactly at the squeezer center.
//!
//! Photocurrent units follow the field convention: with carriers `E₁`, `E₂`
//! and vacuum noise, the differential photocurrent has a white shot-noise PSD
//! of `4(E₁² + E₂²)` around the beat.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analytic::{Readout, Scheme};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::{
    apply_loss, apply_squeezer, make_vacuum_field, quadrature_series, FieldRealization,
    FrequencyGrid, SqueezerSpec,
};
use crate::rng::RngSeed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub freq_hz: f64,
    pub depth_rad: f64,
}

/// Time-dependent optical phase θ(t) of one beam: an optional sinusoidal
/// modulation plus white classical phase noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSignalSpec {
    #[serde(default)]
    pub modulation: Option<Modulation>,
    /// Per-sample RMS of the white phase noise, rad.
    #[serde(default)]
    pub classical_rms: f64,
}

impl PhaseSignalSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self, grid: &FrequencyGrid) -> Result<()> {
        if let Some(m) = self.modulation {
            grid.check_in_band(m.freq_hz)?;
            if !m.depth_rad.is_finite() {
                return Err(Error::param("depth_rad", m.depth_rad, "must be finite"));
            }
        }
        if !(self.classical_rms.is_finite() && self.classical_rms >= 0.0) {
            return Err(Error::param("classical_rms", self.classical_rms, "must be >= 0"));
        }
        Ok(())
    }

    /// θ(t_n) over one frame, with `t_n = n / sample_rate`.
    pub fn samples(&self, grid: &FrequencyGrid, seed: RngSeed) -> Vec<f64> {
        let mut theta = vec![0.0; grid.n_samples];
        if let Some(m) = self.modulation {
            for (n, t) in theta.iter_mut().enumerate() {
                *t += m.depth_rad * grid.phase_at(m.freq_hz, n).sin();
            }
        }
        if self.classical_rms > 0.0 {
            let mut rng = seed.rng();
            for t in theta.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *t += self.classical_rms * z;
            }
        }
        theta
    }
}

/// Per-sample RMS of white phase noise on one beam that makes a fraction
/// `fraction` of the unsqueezed (shot + classical) floor classical in the
/// given readout, for carriers `e1`, `e2` seen through detector efficiency `qe`.
///
/// Raw: phase noise 2η²E₁²E₂²σ² against shot 4η(E₁² + E₂²).
/// Demodulated: the in-phase product keeps (ηE₁E₂)²σ² from δθ near DC and
/// half as much again from δθ near 2Ω folded down by the 2Ω mixing term,
/// against shot 2η(E₁² + E₂²).
pub fn classical_phase_rms(
    fraction: f64,
    e1: f64,
    e2: f64,
    qe: f64,
    readout: Readout,
) -> Result<f64> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::param("classical_fraction", fraction, "must lie in [0, 1)"));
    }
    if !(e1 > 0.0 && e2 > 0.0) {
        return Err(Error::param("amplitude", e1.min(e2), "must be > 0"));
    }
    if !(qe > 0.0 && qe <= 1.0) {
        return Err(Error::param("quantum_efficiency", qe, "must lie in (0, 1]"));
    }
    let fold = match readout {
        Readout::Raw => 1.0,
        Readout::Demodulated => 1.5,
    };
    let ratio = fraction / (1.0 - fraction);
    Ok((ratio * 2.0 * (e1 * e1 + e2 * e2) / (fold * qe * e1 * e1 * e2 * e2)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSpec {
    pub amplitude: f64,
    pub carrier_freq_hz: f64,
    #[serde(default)]
    pub phase_signal: PhaseSignalSpec,
    #[serde(default)]
    pub static_phase: f64,
}

impl BeamSpec {
    pub fn validate(&self, grid: &FrequencyGrid) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::param("amplitude", self.amplitude, "must be >= 0"));
        }
        grid.check_in_band(self.carrier_freq_hz)?;
        self.phase_signal.validate(grid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickoffSpec {
    pub reflectivity: f64,
    /// `None` injects plain vacuum.
    #[serde(default)]
    pub squeezer: Option<SqueezerSpec>,
    /// Extra rotation of the squeezed quadrature, added to the squeezer's
    /// own angle.
    #[serde(default)]
    pub injection_phase: f64,
    /// RMS of a quasi-static Gaussian angle error, redrawn every frame.
    #[serde(default)]
    pub phase_jitter_rms: f64,
}

impl PickoffSpec {
    pub fn vacuum(reflectivity: f64) -> Self {
        PickoffSpec {
            reflectivity,
            squeezer: None,
            injection_phase: 0.0,
            phase_jitter_rms: 0.0,
        }
    }

    pub fn validate(&self, grid: &FrequencyGrid) -> Result<()> {
        if !(self.reflectivity > 0.0 && self.reflectivity <= 1.0) {
            return Err(Error::param("reflectivity", self.reflectivity, "must lie in (0, 1]"));
        }
        if !(self.phase_jitter_rms.is_finite() && self.phase_jitter_rms >= 0.0) {
            return Err(Error::param(
                "phase_jitter_rms",
                self.phase_jitter_rms,
                "must be >= 0",
            ));
        }
        if let Some(sq) = &self.squeezer {
            sq.validate()?;
            grid.bin_of(sq.center_freq)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub quantum_efficiency: f64,
    /// Electronic noise PSD relative to `reference_shot_psd`; `None` for a
    /// noiseless detector.
    #[serde(default)]
    pub electronic_noise_rel_db: Option<f64>,
    /// Absolute shot-noise PSD the electronic level is quoted against.
    #[serde(default)]
    pub reference_shot_psd: f64,
    #[serde(default)]
    pub clip_level: Option<f64>,
    #[serde(default)]
    pub gain_ripple_db: f64,
}

impl DetectorSpec {
    pub fn ideal() -> Self {
        DetectorSpec {
            quantum_efficiency: 1.0,
            electronic_noise_rel_db: None,
            reference_shot_psd: 0.0,
            clip_level: None,
            gain_ripple_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0) {
            return Err(Error::param(
                "quantum_efficiency",
                self.quantum_efficiency,
                "must lie in (0, 1]",
            ));
        }
        if let Some(db) = self.electronic_noise_rel_db {
            if !db.is_finite() {
                return Err(Error::param("electronic_noise_rel_db", db, "must be finite"));
            }
            if !(self.reference_shot_psd.is_finite() && self.reference_shot_psd > 0.0) {
                return Err(Error::param(
                    "reference_shot_psd",
                    self.reference_shot_psd,
                    "must be > 0 when electronic noise is enabled",
                ));
            }
        }
        if let Some(c) = self.clip_level {
            if !(c > 0.0) {
                return Err(Error::param("clip_level", c, "must be > 0"));
            }
        }
        if !self.gain_ripple_db.is_finite() {
            return Err(Error::param("gain_ripple_db", self.gain_ripple_db, "must be finite"));
        }
        Ok(())
    }

    /// White electronic-noise PSD in photocurrent units.
    pub fn electronic_psd(&self) -> f64 {
        match self.electronic_noise_rel_db {
            Some(db) => self.reference_shot_psd * 10f64.powf(db / 10.0),
            None => 0.0,
        }
    }

    /// Power gain of the detector at `freq_hz`: a cosine tilt of
    /// `±gain_ripple_db/2` across 5–15 MHz, flat outside.
    pub fn power_gain(&self, freq_hz: f64) -> f64 {
        let f = freq_hz.abs().clamp(5e6, 15e6);
        let db = 0.5 * self.gain_ripple_db * (PI * (f - 5e6) / 10e6).cos();
        10f64.powf(db / 10.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhotocurrentTrace {
    pub samples: Vec<f64>,
    pub grid: FrequencyGrid,
    pub scheme: Scheme,
    pub seed: RngSeed,
    pub frame_index: u64,
}

impl PhotocurrentTrace {
    pub fn tagged(mut self, scheme: Scheme, frame_index: u64) -> Self {
        self.scheme = scheme;
        self.frame_index = frame_index;
        self
    }
}

/// Squeezed (or plain) vacuum entering one beam through its pickoff:
/// `√R·squeezed + √(1−R)·vacuum`.
pub fn pickoff_noise(
    pickoff: &PickoffSpec,
    grid: FrequencyGrid,
    seed: RngSeed,
) -> Result<FieldRealization> {
    pickoff.validate(&grid)?;
    let vac = make_vacuum_field(grid, seed.derive("squeezer-input"))?;
    let squeezed = match &pickoff.squeezer {
        Some(sq) => {
            let mut angle = sq.squeeze_angle + pickoff.injection_phase;
            if pickoff.phase_jitter_rms > 0.0 {
                let z: f64 = StandardNormal.sample(&mut seed.derive("jitter").rng());
                angle += pickoff.phase_jitter_rms * z;
            }
            let spec = SqueezerSpec {
                squeeze_angle: angle,
                ..*sq
            };
            apply_squeezer(&vac, &spec, seed.derive("escape"))?
        }
        None => vac,
    };
    apply_loss(&squeezed, pickoff.reflectivity, seed.derive("pickoff"))
}

/// Carrier `E e^{i(2π f_c t + φ + θ(t))}` on top of the pickoff noise.
pub fn compose_beam(
    beam: &BeamSpec,
    pickoff: &PickoffSpec,
    grid: FrequencyGrid,
    seed: RngSeed,
) -> Result<FieldRealization> {
    beam.validate(&grid)?;
    let noise = pickoff_noise(pickoff, grid, seed)?;
    if beam.amplitude == 0.0 {
        return Ok(noise);
    }
    let theta = beam.phase_signal.samples(&grid, seed.derive("phase"));
    let mut samples = noise.time_series();
    for (n, (s, th)) in samples.iter_mut().zip(&theta).enumerate() {
        let phase = grid.phase_at(beam.carrier_freq_hz, n) + beam.static_phase + th;
        *s += Complex64::from_polar(beam.amplitude, phase);
    }
    fft::forward(&mut samples);
    Ok(FieldRealization {
        grid,
        amplitudes: samples,
        carrier_power: beam.amplitude * beam.amplitude,
        label: format!("beam@{}Hz", beam.carrier_freq_hz),
    })
}

/// Seeds used for beam 1 and beam 2 of one frame.
pub fn beam_seeds(frame_seed: RngSeed) -> [RngSeed; 2] {
    [frame_seed.derive("beam-1"), frame_seed.derive("beam-2")]
}

/// Builds both beams of one frame.
pub fn heterodyne_fields(
    beams: [&BeamSpec; 2],
    pickoffs: [&PickoffSpec; 2],
    grid: FrequencyGrid,
    frame_seed: RngSeed,
) -> Result<[FieldRealization; 2]> {
    let [s1, s2] = beam_seeds(frame_seed);
    Ok([
        compose_beam(beams[0], pickoffs[0], grid, s1)?,
        compose_beam(beams[1], pickoffs[1], grid, s2)?,
    ])
}

/// Exact differential photocurrent `E₁*E₂ + E₂*E₁`, followed by the
/// detector: efficiency loss on both fields, gain ripple, electronic noise,
/// clipping and DC removal.
pub fn balanced_detect(
    e1: &FieldRealization,
    e2: &FieldRealization,
    det: &DetectorSpec,
    seed: RngSeed,
) -> Result<PhotocurrentTrace> {
    if !e1.grid.same_as(&e2.grid) {
        return Err(Error::GridMismatch);
    }
    det.validate()?;
    let grid = e1.grid;
    let f1 = apply_loss(e1, det.quantum_efficiency, seed.derive("qe-1"))?;
    let f2 = apply_loss(e2, det.quantum_efficiency, seed.derive("qe-2"))?;
    let t1 = f1.time_series();
    let t2 = f2.time_series();
    let raw: Vec<f64> = t1
        .iter()
        .zip(&t2)
        .map(|(a, b)| 2.0 * (a.conj() * b).re)
        .collect();
    let samples = detector_stage(raw, &grid, det, seed.derive("electronic"))?;
    Ok(PhotocurrentTrace {
        samples,
        grid,
        scheme: Scheme::Unsqueezed,
        seed,
        frame_index: 0,
    })
}

/// Everything the detector does after photodetection: gain ripple,
/// electronic noise, clipping, DC removal. Efficiency is not applied here.
pub fn detector_stage(
    mut samples: Vec<f64>,
    grid: &FrequencyGrid,
    det: &DetectorSpec,
    seed: RngSeed,
) -> Result<Vec<f64>> {
    det.validate()?;
    if samples.len() != grid.n_samples {
        return Err(Error::FrameLength {
            index: 0,
            len: samples.len(),
            expected: grid.n_samples,
        });
    }
    if det.gain_ripple_db != 0.0 {
        let n = samples.len();
        let mut buf = fft::real_to_complex(&samples);
        fft::forward(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= det.power_gain(fft::bin_freq(k, n, grid.sample_rate)).sqrt();
        }
        fft::inverse(&mut buf);
        samples = buf.iter().map(|v| v.re).collect();
    }
    let psd = det.electronic_psd();
    if psd > 0.0 {
        let sigma = psd.sqrt();
        let mut rng = seed.rng();
        for s in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += sigma * z;
        }
    }
    if let Some(c) = det.clip_level {
        for s in samples.iter_mut() {
            *s = s.clamp(-c, c);
        }
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    for s in samples.iter_mut() {
        *s -= mean;
    }
    Ok(samples)
}

/// Detector output with no light: electronic noise through the same stage.
pub fn dark_trace(grid: FrequencyGrid, det: &DetectorSpec, seed: RngSeed) -> Result<PhotocurrentTrace> {
    let samples = detector_stage(vec![0.0; grid.n_samples], &grid, det, seed.derive("electronic"))?;
    Ok(PhotocurrentTrace {
        samples,
        grid,
        scheme: Scheme::Unsqueezed,
        seed,
        frame_index: 0,
    })
}

/// Detector efficiency applied after a linearized photocurrent: the signal
/// scales by η and the admitted vacuum adds white noise of PSD
/// `4η(1−η)(E₁² + E₂²)`.
pub fn apply_efficiency_linear(
    samples: &mut [f64],
    efficiency: f64,
    e1: f64,
    e2: f64,
    seed: RngSeed,
) -> Result<()> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::param("quantum_efficiency", efficiency, "must lie in (0, 1]"));
    }
    if efficiency == 1.0 {
        return Ok(());
    }
    let sigma = (4.0 * efficiency * (1.0 - efficiency) * (e1 * e1 + e2 * e2)).sqrt();
    let mut rng = seed.rng();
    for s in samples.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *s = efficiency * *s + sigma * z;
    }
    Ok(())
}

/// First-order photocurrent
/// `2[E₁E₂ cos(Ωt + θ₂(t) − θ₁(t)) + E₂(a₁ cos φ₂ − a₂ sin φ₂) + E₁(b₁ cos φ₁ − b₂ sin φ₁)]`,
/// where `a` is the noise entering beam 1 read at beam 2's carrier, `b` the
/// noise entering beam 2 read at beam 1's carrier, and `φᵢ` the static beam
/// phases. Uses the same noise realizations as [`heterodyne_fields`] for the
/// same seed.
pub fn linearized_output(
    beams: [&BeamSpec; 2],
    pickoffs: [&PickoffSpec; 2],
    grid: FrequencyGrid,
    frame_seed: RngSeed,
) -> Result<PhotocurrentTrace> {
    for b in beams {
        b.validate(&grid)?;
    }
    let seeds = beam_seeds(frame_seed);
    let a = pickoff_noise(pickoffs[0], grid, seeds[0])?;
    let b = pickoff_noise(pickoffs[1], grid, seeds[1])?;
    let (b1, b2) = (beams[0], beams[1]);
    let qa = quadrature_series(&a, b2.carrier_freq_hz)?;
    let qb = quadrature_series(&b, b1.carrier_freq_hz)?;
    let th1 = b1.phase_signal.samples(&grid, seeds[0].derive("phase"));
    let th2 = b2.phase_signal.samples(&grid, seeds[1].derive("phase"));
    let beat = b2.carrier_freq_hz - b1.carrier_freq_hz;
    let (e1, e2) = (b1.amplitude, b2.amplitude);
    let (c2, s2) = (b2.static_phase.cos(), b2.static_phase.sin());
    let (c1, s1) = (b1.static_phase.cos(), b1.static_phase.sin());
    let samples = (0..grid.n_samples)
        .map(|n| {
            let psi = grid.phase_at(beat, n) + th2[n] - th1[n] + b2.static_phase - b1.static_phase;
            2.0 * (e1 * e2 * psi.cos()
                + e2 * (qa.a1[n] * c2 - qa.a2[n] * s2)
                + e1 * (qb.a1[n] * c1 - qb.a2[n] * s1))
        })
        .collect();
    let squeezed = pickoffs.iter().any(|p| p.squeezer.is_some());
    Ok(PhotocurrentTrace {
        samples,
        grid,
        scheme: if squeezed {
            Scheme::Proposed
        } else {
            Scheme::Unsqueezed
        },
        seed: frame_seed,
        frame_index: 0,
    })
}

/// Same-frequency squeezing: each pickoff's squeezer is moved onto its own
/// beam's carrier, then the photocurrent is formed as in
/// [`linearized_output`].
pub fn straightforward_variant(
    beams: [&BeamSpec; 2],
    pickoffs: [&PickoffSpec; 2],
    grid: FrequencyGrid,
    frame_seed: RngSeed,
) -> Result<PhotocurrentTrace> {
    let own = |beam: &BeamSpec, p: &PickoffSpec| PickoffSpec {
        squeezer: p.squeezer.map(|sq| SqueezerSpec {
            center_freq: beam.carrier_freq_hz,
            ..sq
        }),
        ..*p
    };
    let p1 = own(beams[0], pickoffs[0]);
    let p2 = own(beams[1], pickoffs[1]);
    let trace = linearized_output(beams, [&p1, &p2], grid, frame_seed)?;
    let scheme = if p1.squeezer.is_some() || p2.squeezer.is_some() {
        Scheme::Straightforward
    } else {
        Scheme::Unsqueezed
    };
    Ok(trace.tagged(scheme, 0))
}

/// Squeeze angle that puts the squeezing in the phase quadrature of a beam
/// with static phase `static_phase`.
pub fn phase_quadrature_angle(static_phase: f64) -> f64 {
    static_phase + FRAC_PI_2
}
