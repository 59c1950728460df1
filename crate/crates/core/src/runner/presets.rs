//! Built-in experiment presets.

use std::f64::consts::FRAC_PI_2;

use crate::analytic::Scheme;
use crate::dsp::{DemodSpec, FilterSpec, Prototype};
use crate::error::{Error, Result};
use crate::field::FrequencyGrid;
use crate::interferometer::Modulation;

use super::config::{
    BeamsConfig, DetectorConfig, DspConfig, EprConfig, ExperimentConfig, ExperimentKind,
    Measurement, NamedBand, PickoffsConfig, SweepConfig,
};

pub const PRESETS: &[(&str, &str)] = &[
    (
        "fig3-raw",
        "raw beat-note spectrum, proposed squeezing, lower/upper sidebands at 6.89/13.11 MHz",
    ),
    (
        "fig4-demod",
        "phase quadrature after demodulation at the beat, cross-spectrum of two splitter arms",
    ),
    (
        "appendixD-no-cross",
        "demodulated spectrum from one splitter arm only (no cross-spectrum)",
    ),
    (
        "appendixG-straightforward",
        "squeezing centered on each beam's own carrier; demodulated phase noise vs vacuum",
    ),
    (
        "epr-identity",
        "sideband identity residuals on random squeezed states, grouped-term variances",
    ),
    (
        "appendixE-pump-sweep",
        "homodyne squeezing/anti-squeezing spectra of OPO-1 at 50/100/200/300 mW pump",
    ),
    ("vacuum-selftest", "raw measurement with both squeezers off"),
];

pub fn list_presets() -> Vec<(&'static str, &'static str)> {
    PRESETS.to_vec()
}

pub const DEFAULT_FRAMES: usize = 12500;
const BEAT_HZ: f64 = 10e6;
const MOD_HZ: f64 = 3.11e6;
const QE: f64 = 0.99;
const REFLECTIVITY: f64 = 0.97;
/// Total squeezing efficiency (escape × pickoff × detector) of 0.8.
const TOTAL_EFFICIENCY: f64 = 0.8;

fn bw(kind: &str, corner_hz: f64) -> FilterSpec {
    let (order, prototype, ripple_db) = (5, Prototype::Butterworth, 0.0);
    match kind {
        "lp" => FilterSpec::LowPass {
            corner_hz,
            order,
            prototype,
            ripple_db,
        },
        _ => FilterSpec::HighPass {
            corner_hz,
            order,
            prototype,
            ripple_db,
        },
    }
}

fn raw_chain() -> Vec<FilterSpec> {
    vec![
        FilterSpec::BandStop {
            low_hz: 8e6,
            high_hz: 12.5e6,
            order: 5,
            prototype: Prototype::Chebyshev1,
            ripple_db: 0.5,
        },
        bw("lp", 15e6),
        bw("hp", 1.2e6),
        FilterSpec::Gain { gain_db: 20.0 },
    ]
}

fn demod_chain() -> Vec<FilterSpec> {
    vec![bw("hp", 1.2e6), FilterSpec::Gain { gain_db: 20.0 }]
}

fn raw_bands() -> Vec<NamedBand> {
    vec![
        NamedBand {
            name: "lower".into(),
            center_hz: BEAT_HZ - MOD_HZ,
            half_width_hz: 0.5e6,
            exclusion_half_width_hz: 0.04e6,
        },
        NamedBand {
            name: "upper".into(),
            center_hz: BEAT_HZ + MOD_HZ,
            half_width_hz: 0.5e6,
            exclusion_half_width_hz: 0.04e6,
        },
    ]
}

fn demod_bands() -> Vec<NamedBand> {
    vec![NamedBand {
        name: "demod".into(),
        center_hz: MOD_HZ,
        half_width_hz: 0.5e6,
        exclusion_half_width_hz: 0.05e6,
    }]
}

fn base() -> ExperimentConfig {
    ExperimentConfig {
        preset: None,
        description: String::new(),
        experiment: ExperimentKind::Heterodyne,
        seed: 1,
        frames: DEFAULT_FRAMES,
        grid: FrequencyGrid::acquisition_default(),
        beams: BeamsConfig {
            amplitude_1: 1000.0,
            amplitude_2: 1000.0,
            beat_hz: BEAT_HZ,
            modulation: Some(Modulation {
                freq_hz: MOD_HZ,
                depth_rad: 2e-4,
            }),
            classical_fraction: 0.1,
        },
        pickoffs: PickoffsConfig {
            reflectivity: REFLECTIVITY,
            threshold_mw: 600.0,
            hwhm_hz: 30e6,
            escape_efficiency: TOTAL_EFFICIENCY / (REFLECTIVITY * QE),
            pump_mw: [90.0, 80.0],
            squeeze_angles: [0.0, 0.0],
            phase_jitter_rms_deg: 0.0,
        },
        detector: DetectorConfig {
            quantum_efficiency: QE,
            electronic_noise_rel_db: Some(-2.0),
            clip_level: None,
            gain_ripple_db: 0.0,
        },
        scheme: Scheme::Proposed,
        measurement: Measurement::Raw,
        dsp: DspConfig {
            raw_chain: raw_chain(),
            demod: DemodSpec::new(BEAT_HZ, FRAC_PI_2),
            demod_chain: demod_chain(),
            splitter_noise_rel_db: Some(-2.0),
            compensate: true,
            chunk_frames: 64,
        },
        bands: raw_bands(),
        sweep: None,
        epr: None,
        output_dir: None,
    }
}

/// Fully expanded config for a named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut c = base();
    match name {
        "fig3-raw" => {}
        "fig4-demod" => {
            c.measurement = Measurement::Demod;
            c.bands = demod_bands();
        }
        "appendixD-no-cross" => {
            c.measurement = Measurement::DemodNoCross;
            c.bands = demod_bands();
        }
        "appendixG-straightforward" => {
            c.scheme = Scheme::Straightforward;
            c.measurement = Measurement::Demod;
            c.bands = demod_bands();
            c.beams.modulation = None;
            c.beams.classical_fraction = 0.0;
            c.pickoffs.reflectivity = 1.0;
            c.pickoffs.escape_efficiency = TOTAL_EFFICIENCY;
            // flat squeezing over the whole grid
            c.pickoffs.hwhm_hz = 1e12;
            c.pickoffs.pump_mw = [90.0, 90.0];
            c.pickoffs.squeeze_angles = [FRAC_PI_2, FRAC_PI_2];
            c.detector.quantum_efficiency = 1.0;
            c.detector.electronic_noise_rel_db = None;
            c.dsp.splitter_noise_rel_db = None;
        }
        "epr-identity" => {
            c.experiment = ExperimentKind::EprIdentity;
            c.frames = 100;
            c.bands = vec![];
            c.epr = Some(EprConfig {
                pump_ratios: vec![0.0, 0.2, 0.4, 0.6, 0.8],
            });
        }
        "appendixE-pump-sweep" => {
            c.experiment = ExperimentKind::PumpSweep;
            c.frames = 1000;
            c.sweep = Some(SweepConfig {
                pumps_mw: vec![50.0, 100.0, 200.0, 300.0],
            });
            c.bands = vec![
                NamedBand {
                    name: "lower".into(),
                    center_hz: BEAT_HZ - MOD_HZ,
                    half_width_hz: 0.5e6,
                    exclusion_half_width_hz: 0.0,
                },
                NamedBand {
                    name: "upper".into(),
                    center_hz: BEAT_HZ + MOD_HZ,
                    half_width_hz: 0.5e6,
                    exclusion_half_width_hz: 0.0,
                },
            ];
        }
        "vacuum-selftest" => {
            c.pickoffs.pump_mw = [0.0, 0.0];
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    }
    c.preset = Some(name.to_string());
    c.description = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, d)| d.to_string())
        .unwrap_or_default();
    Ok(c)
}
