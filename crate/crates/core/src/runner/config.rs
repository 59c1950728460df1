//! Experiment configuration, TOML loading with preset inheritance, and
//! validation with field-path error messages.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytic::{Readout, Scheme};
use crate::dsp::{BandSpec, DemodSpec, FilterChain, FilterSpec};
use crate::error::{Error, Result};
use crate::field::{FrequencyGrid, SqueezerSpec};
use crate::interferometer::{
    classical_phase_rms, BeamSpec, DetectorSpec, Modulation, PhaseSignalSpec, PickoffSpec,
};

use super::presets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Background / reference / target heterodyne runs.
    Heterodyne,
    /// Homodyne squeezing spectra of one OPO at several pump powers.
    PumpSweep,
    /// Sideband identity residuals on random states.
    EprIdentity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measurement {
    Raw,
    Demod,
    DemodNoCross,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamsConfig {
    pub amplitude_1: f64,
    pub amplitude_2: f64,
    /// Beam 2 carrier sits this far above beam 1.
    pub beat_hz: f64,
    /// Phase modulation on beam 1.
    #[serde(default)]
    pub modulation: Option<Modulation>,
    /// Fraction of the unsqueezed floor that is classical phase noise
    /// (applied to beam 2).
    #[serde(default)]
    pub classical_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickoffsConfig {
    pub reflectivity: f64,
    pub threshold_mw: f64,
    pub hwhm_hz: f64,
    pub escape_efficiency: f64,
    /// Pump power of OPO-1 (into beam 1) and OPO-2 (into beam 2); zero
    /// leaves that port unsqueezed.
    pub pump_mw: [f64; 2],
    #[serde(default)]
    pub squeeze_angles: [f64; 2],
    #[serde(default)]
    pub phase_jitter_rms_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub quantum_efficiency: f64,
    /// Electronic noise relative to the unsqueezed shot-noise PSD.
    #[serde(default)]
    pub electronic_noise_rel_db: Option<f64>,
    #[serde(default)]
    pub clip_level: Option<f64>,
    #[serde(default)]
    pub gain_ripple_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DspConfig {
    /// Chain applied to the raw photocurrent before the spectrum.
    #[serde(default)]
    pub raw_chain: Vec<FilterSpec>,
    pub demod: DemodSpec,
    /// Chain applied after each demodulator.
    #[serde(default)]
    pub demod_chain: Vec<FilterSpec>,
    /// Independent noise added to each splitter output, relative to the
    /// shot-noise PSD in that output.
    #[serde(default)]
    pub splitter_noise_rel_db: Option<f64>,
    /// Divide spectra by the designed chain response.
    #[serde(default = "yes")]
    pub compensate: bool,
    /// Frames per work unit; fixed so results do not depend on worker count.
    #[serde(default = "default_chunk")]
    pub chunk_frames: usize,
}

fn yes() -> bool {
    true
}

fn default_chunk() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedBand {
    pub name: String,
    pub center_hz: f64,
    pub half_width_hz: f64,
    pub exclusion_half_width_hz: f64,
}

impl NamedBand {
    pub fn spec(&self) -> BandSpec {
        BandSpec {
            center_hz: self.center_hz,
            half_width_hz: self.half_width_hz,
            exclusion_half_width_hz: self.exclusion_half_width_hz,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub pumps_mw: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EprConfig {
    /// Pump ratios at which the grouped-term variances are reported.
    pub pump_ratios: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset this config was derived from, if any.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub description: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub frames: usize,
    pub grid: FrequencyGrid,
    pub beams: BeamsConfig,
    pub pickoffs: PickoffsConfig,
    pub detector: DetectorConfig,
    pub scheme: Scheme,
    pub measurement: Measurement,
    pub dsp: DspConfig,
    pub bands: Vec<NamedBand>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub epr: Option<EprConfig>,
    /// Not part of the config hash.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn at<T>(path: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        Error::InvalidParameter { name, value, reason } => {
            Error::config(format!("{path}.{name}"), format!("{value} is invalid: {reason}"))
        }
        other => Error::config(path, other.to_string()),
    })
}

impl ExperimentConfig {
    /// Parses a TOML document. A top-level `preset = "<name>"` key pulls in
    /// that preset and the document's keys override it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: toml::Table =
            toml::from_str(text).map_err(|e| Error::config("<toml>", e.to_string()))?;
        let merged = match doc.get("preset") {
            Some(toml::Value::String(name)) => {
                let base = presets::preset(name)?;
                let mut base_value = to_table(&base)?;
                deep_merge(&mut base_value, doc);
                base_value
            }
            Some(_) => return Err(Error::config("preset", "must be a string")),
            None => doc,
        };
        from_table(merged)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Applies `overrides` (a TOML document) on top of this config.
    pub fn with_overrides(&self, overrides: &str) -> Result<Self> {
        let doc: toml::Table =
            toml::from_str(overrides).map_err(|e| Error::config("<toml>", e.to_string()))?;
        let mut base = to_table(self)?;
        deep_merge(&mut base, doc);
        from_table(base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<config>", e.to_string()))
    }

    /// SHA-256 of the canonical TOML form, ignoring the output directory.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        let text = c.to_toml()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        at("grid", self.grid.validate())?;
        if self.frames == 0 {
            return Err(Error::config("frames", "must be >= 1"));
        }
        let b = &self.beams;
        if !(b.amplitude_1 > 0.0 && b.amplitude_1.is_finite()) {
            return Err(Error::config("beams.amplitude_1", "must be > 0"));
        }
        if !(b.amplitude_2 > 0.0 && b.amplitude_2.is_finite()) {
            return Err(Error::config("beams.amplitude_2", "must be > 0"));
        }
        if !(b.beat_hz > 0.0) {
            return Err(Error::config("beams.beat_hz", "must be > 0"));
        }
        at("beams.beat_hz", self.grid.bin_of(self.grid.center_offset + b.beat_hz).map(|_| ()))?;
        at("grid.center_offset", self.grid.bin_of(self.grid.center_offset).map(|_| ()))?;
        if !(0.0..1.0).contains(&b.classical_fraction) {
            return Err(Error::config("beams.classical_fraction", "must lie in [0, 1)"));
        }
        if let Some(m) = b.modulation {
            if !(m.freq_hz > 0.0 && m.freq_hz < self.grid.nyquist()) {
                return Err(Error::config("beams.modulation.freq_hz", "must lie in (0, Nyquist)"));
            }
        }
        let p = &self.pickoffs;
        if !(p.reflectivity > 0.0 && p.reflectivity <= 1.0) {
            return Err(Error::config("pickoffs.reflectivity", "must lie in (0, 1]"));
        }
        if !(p.threshold_mw > 0.0) {
            return Err(Error::config("pickoffs.threshold_mw", "must be > 0"));
        }
        for (i, &pump) in p.pump_mw.iter().enumerate() {
            if !(pump >= 0.0 && pump < p.threshold_mw) {
                return Err(Error::config(
                    format!("pickoffs.pump_mw[{i}]"),
                    "must lie in [0, threshold_mw)",
                ));
            }
        }
        if let Some(s) = &self.sweep {
            for (i, &pump) in s.pumps_mw.iter().enumerate() {
                if !(pump > 0.0 && pump < p.threshold_mw) {
                    return Err(Error::config(
                        format!("sweep.pumps_mw[{i}]"),
                        "must lie in (0, threshold_mw)",
                    ));
                }
            }
        }
        for i in 0..2 {
            if let Some(sq) = self.squeezer(i) {
                at(&format!("pickoffs[{i}]"), sq.validate())?;
            }
        }
        if !(p.phase_jitter_rms_deg >= 0.0) {
            return Err(Error::config("pickoffs.phase_jitter_rms_deg", "must be >= 0"));
        }
        at("detector", self.detector_spec().validate())?;
        let fs = self.grid.sample_rate;
        at("dsp.raw_chain", FilterChain::design(&self.dsp.raw_chain, fs).map(|_| ()))?;
        at("dsp.demod", self.dsp.demod.validate(fs, self.grid.n_samples))?;
        let out_fs = fs / self.dsp.demod.decimate as f64;
        at("dsp.demod_chain", FilterChain::design(&self.dsp.demod_chain, out_fs).map(|_| ()))?;
        if self.dsp.chunk_frames == 0 {
            return Err(Error::config("dsp.chunk_frames", "must be >= 1"));
        }
        if self.measurement == Measurement::Demod || self.measurement == Measurement::DemodNoCross {
            if (self.dsp.demod.lo_freq_hz - b.beat_hz).abs() > 1e-6 * b.beat_hz {
                return Err(Error::config("dsp.demod.lo_freq_hz", "must equal beams.beat_hz"));
            }
        }
        if self.bands.is_empty() && self.experiment != ExperimentKind::EprIdentity {
            return Err(Error::config("bands", "at least one band is required"));
        }
        for (i, band) in self.bands.iter().enumerate() {
            at(&format!("bands[{i}]"), band.spec().validate())?;
        }
        match self.experiment {
            ExperimentKind::PumpSweep if self.sweep.is_none() => {
                return Err(Error::config("sweep", "required for pump-sweep experiments"));
            }
            ExperimentKind::EprIdentity if self.epr.is_none() => {
                return Err(Error::config("epr", "required for epr-identity experiments"));
            }
            _ => {}
        }
        if let Some(e) = &self.epr {
            for (i, &x) in e.pump_ratios.iter().enumerate() {
                if !(0.0..1.0).contains(&x) {
                    return Err(Error::config(format!("epr.pump_ratios[{i}]"), "must lie in [0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        self.grid.center_offset
    }

    pub fn carriers(&self) -> [f64; 2] {
        [self.omega0(), self.omega0() + self.beams.beat_hz]
    }

    /// Squeezer feeding pickoff `i` (0: into beam 1, 1: into beam 2), centered
    /// per the configured scheme; `None` when unpumped.
    pub fn squeezer(&self, i: usize) -> Option<SqueezerSpec> {
        let p = &self.pickoffs;
        if p.pump_mw[i] == 0.0 {
            return None;
        }
        let [c1, c2] = self.carriers();
        let center = match (self.scheme, i) {
            (Scheme::Straightforward, 0) => c1,
            (Scheme::Straightforward, _) => c2,
            (_, 0) => c2,
            (_, _) => c1,
        };
        Some(SqueezerSpec::from_pump_power(
            p.pump_mw[i],
            p.threshold_mw,
            p.hwhm_hz,
            p.escape_efficiency,
            p.squeeze_angles[i],
            center,
        ))
    }

    pub fn pickoff(&self, i: usize, squeezed: bool) -> PickoffSpec {
        PickoffSpec {
            reflectivity: self.pickoffs.reflectivity,
            squeezer: if squeezed { self.squeezer(i) } else { None },
            injection_phase: 0.0,
            phase_jitter_rms: self.pickoffs.phase_jitter_rms_deg * PI / 180.0,
        }
    }

    pub fn beam_specs(&self) -> Result<[BeamSpec; 2]> {
        let b = &self.beams;
        let classical = if b.classical_fraction > 0.0 {
            classical_phase_rms(
                b.classical_fraction,
                b.amplitude_1,
                b.amplitude_2,
                self.detector.quantum_efficiency,
                match self.measurement {
                    Measurement::Raw => Readout::Raw,
                    _ => Readout::Demodulated,
                },
            )?
        } else {
            0.0
        };
        let [c1, c2] = self.carriers();
        Ok([
            BeamSpec {
                amplitude: b.amplitude_1,
                carrier_freq_hz: c1,
                phase_signal: PhaseSignalSpec {
                    modulation: b.modulation,
                    classical_rms: 0.0,
                },
                static_phase: 0.0,
            },
            BeamSpec {
                amplitude: b.amplitude_2,
                carrier_freq_hz: c2,
                phase_signal: PhaseSignalSpec {
                    modulation: None,
                    classical_rms: classical,
                },
                static_phase: 0.0,
            },
        ])
    }

    /// Unsqueezed shot-noise PSD of the raw photocurrent after the detector.
    pub fn raw_shot_psd(&self) -> f64 {
        let b = &self.beams;
        4.0 * self.detector.quantum_efficiency * (b.amplitude_1.powi(2) + b.amplitude_2.powi(2))
    }

    pub fn detector_spec(&self) -> DetectorSpec {
        DetectorSpec {
            quantum_efficiency: self.detector.quantum_efficiency,
            electronic_noise_rel_db: self.detector.electronic_noise_rel_db,
            reference_shot_psd: self.raw_shot_psd(),
            clip_level: self.detector.clip_level,
            gain_ripple_db: self.detector.gain_ripple_db,
        }
    }
}

fn to_table<T: Serialize>(value: &T) -> Result<toml::Table> {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => Ok(t),
        Ok(_) => Err(Error::config("<config>", "expected a table")),
        Err(e) => Err(Error::config("<config>", e.to_string())),
    }
}

/// Deserializes with the failing field's dotted path in the error.
fn from_table(table: toml::Table) -> Result<ExperimentConfig> {
    serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().message().to_string();
        Error::config(path, message)
    })
}

/// Recursively overlays `over` onto `base`; tables merge, everything else
/// replaces.
pub fn deep_merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
