//! End-to-end execution of an [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{self, BudgetInputs, NoiseBudget, Readout, Scheme, SourceBudget};
use crate::dsp::demod::Demodulator;
use crate::dsp::{
    postprocess, BandSpec, FilterChain, SpectrumAccumulator, SpectrumEstimate, SpectrumKind,
    Window,
};
use crate::error::{Error, Result};
use crate::field::{
    apply_loss, apply_squeezer, epr_grouped_terms, epr_identity_residual, make_vacuum_field,
    quadrature_series, FrequencyGrid, SqueezerSpec,
};
use crate::interferometer::{
    apply_efficiency_linear, balanced_detect, dark_trace, detector_stage, heterodyne_fields,
    straightforward_variant, BeamSpec, DetectorSpec,
};
use crate::rng::RngSeed;

use super::config::{ExperimentConfig, ExperimentKind, Measurement, NamedBand};
use super::output;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "SQUEEZEBEAT_WORKERS";

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; falls back to the environment, then to all cores.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn resolved_workers(&self) -> Result<usize> {
        if let Some(w) = self.workers {
            return Ok(w);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::config(WORKERS_ENV, format!("not a worker count: {v:?}"))),
            Err(_) => Ok(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BandResult {
    pub name: String,
    pub center_hz: f64,
    pub half_width_hz: f64,
    pub exclusion_half_width_hz: f64,
    pub n_bins: usize,
    /// Measured reduction (positive: below the reference).
    pub reduction_db: f64,
    pub stderr_db: f64,
    pub predicted_db: f64,
    /// Closed-form floor items behind `predicted_db`, when applicable.
    pub budget: Option<NoiseBudget>,
}

/// One plot-ready spectrum: frequencies and dB values relative to the
/// normalization level.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSeries {
    pub name: String,
    pub freqs: Vec<f64>,
    pub db: Vec<f64>,
    pub normalization: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub preset: Option<String>,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub frames: usize,
    pub config_hash: String,
    pub bands: Vec<BandResult>,
    /// Experiment-specific scalar results.
    pub metrics: BTreeMap<String, f64>,
    pub spectra: Vec<SpectrumSeries>,
    /// Not written to files, so reruns stay byte-identical.
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn band(&self, name: &str) -> Option<&BandResult> {
        self.bands.iter().find(|b| b.name == name)
    }
}

/// Runs the experiment and, if the config names an output directory,
/// writes `config.toml`, `summary.toml` and the spectrum CSVs there.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    config.validate()?;
    let start = Instant::now();
    let workers = opts.resolved_workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(WORKERS_ENV, e.to_string()))?;
    let hash = config.hash()?;
    let mut summary = pool.install(|| match config.experiment {
        ExperimentKind::Heterodyne => run_heterodyne(config),
        ExperimentKind::PumpSweep => run_pump_sweep(config),
        ExperimentKind::EprIdentity => run_epr(config),
    })?;
    summary.config_hash = hash;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(dir) = &config.output_dir {
        output::write_run(dir, config, &summary)?;
    }
    Ok(summary)
}

fn empty_summary(config: &ExperimentConfig) -> RunSummary {
    RunSummary {
        preset: config.preset.clone(),
        experiment: config.experiment,
        seed: config.seed,
        frames: config.frames,
        config_hash: String::new(),
        bands: vec![],
        metrics: BTreeMap::new(),
        spectra: vec![],
        wall_time_s: 0.0,
    }
}

/// Processes frames `0..frames` in fixed-size chunks on the current pool and
/// merges the per-chunk accumulators in chunk order.
fn accumulate<M, F>(frames: usize, chunk: usize, make: M, step: F) -> Result<Vec<SpectrumAccumulator>>
where
    M: Fn() -> Vec<SpectrumAccumulator> + Sync,
    F: Fn(u64, &mut [SpectrumAccumulator]) -> Result<()> + Sync,
{
    let n_chunks = frames.div_ceil(chunk);
    let parts: Vec<Result<Vec<SpectrumAccumulator>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut accs = make();
            for i in c * chunk..((c + 1) * chunk).min(frames) {
                step(i as u64, &mut accs)?;
            }
            Ok(accs)
        })
        .collect();
    let mut total = make();
    for part in parts {
        let part = part?;
        for (t, p) in total.iter_mut().zip(&part) {
            t.merge(p)?;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RunKind {
    Background,
    Reference,
    Target,
}

impl RunKind {
    fn label(self) -> &'static str {
        match self {
            RunKind::Background => "background",
            RunKind::Reference => "reference",
            RunKind::Target => "target",
        }
    }
}

struct Heterodyne<'a> {
    cfg: &'a ExperimentConfig,
    grid: FrequencyGrid,
    beams: [BeamSpec; 2],
    det: DetectorSpec,
    raw_chain: FilterChain,
    demod: Demodulator,
    demod_chain_bins: Vec<num_complex::Complex64>,
    splitter_sigma: f64,
}

impl<'a> Heterodyne<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let grid = cfg.grid;
        let demod = Demodulator::new(cfg.dsp.demod, grid.sample_rate, grid.n_samples)?;
        let out_n = grid.n_samples / cfg.dsp.demod.decimate;
        let demod_chain = FilterChain::design(&cfg.dsp.demod_chain, demod.output_sample_rate())?;
        let splitter_sigma = match cfg.dsp.splitter_noise_rel_db {
            Some(db) => (0.5 * cfg.raw_shot_psd() * 10f64.powf(db / 10.0)).sqrt(),
            None => 0.0,
        };
        Ok(Heterodyne {
            cfg,
            grid,
            beams: cfg.beam_specs()?,
            det: cfg.detector_spec(),
            raw_chain: FilterChain::design(&cfg.dsp.raw_chain, grid.sample_rate)?,
            demod,
            demod_chain_bins: demod_chain.bin_response(out_n),
            splitter_sigma,
        })
    }

    fn photocurrent(&self, kind: RunKind, seed: RngSeed) -> Result<Vec<f64>> {
        let grid = self.grid;
        if kind == RunKind::Background {
            return Ok(dark_trace(grid, &self.det, seed)?.samples);
        }
        let squeezed = kind == RunKind::Target;
        let p = [self.cfg.pickoff(0, squeezed), self.cfg.pickoff(1, squeezed)];
        let beams = [&self.beams[0], &self.beams[1]];
        if self.cfg.scheme == Scheme::Straightforward {
            let mut s = straightforward_variant(beams, [&p[0], &p[1]], grid, seed)?.samples;
            apply_efficiency_linear(
                &mut s,
                self.det.quantum_efficiency,
                self.beams[0].amplitude,
                self.beams[1].amplitude,
                seed.derive("qe"),
            )?;
            detector_stage(s, &grid, &self.det, seed.derive("electronic"))
        } else {
            let [e1, e2] = heterodyne_fields(beams, [&p[0], &p[1]], grid, seed)?;
            Ok(balanced_detect(&e1, &e2, &self.det, seed.derive("detector"))?.samples)
        }
    }

    fn splitter_arm(&self, samples: &[f64], seed: RngSeed) -> Result<Vec<f64>> {
        let mut rng = seed.rng();
        let arm: Vec<f64> = samples
            .iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x * std::f64::consts::FRAC_1_SQRT_2 + self.splitter_sigma * z
            })
            .collect();
        let base = self.demod.process(&arm)?;
        Ok(crate::dsp::apply_bin_response(&base, &self.demod_chain_bins))
    }

    fn spectrum_kind(&self, kind: RunKind) -> SpectrumKind {
        match (self.cfg.measurement, kind) {
            (Measurement::Raw, _) => SpectrumKind::Auto,
            (Measurement::Demod, _) => SpectrumKind::Cross,
            // the dark run only characterizes the detector: its cross-spectrum
            // excludes the independent splitter-arm noise
            (Measurement::DemodNoCross, RunKind::Background) => SpectrumKind::Cross,
            (Measurement::DemodNoCross, _) => SpectrumKind::Auto,
        }
    }

    fn out_len_rate(&self) -> (usize, f64) {
        match self.cfg.measurement {
            Measurement::Raw => (self.grid.n_samples, self.grid.sample_rate),
            _ => (
                self.grid.n_samples / self.cfg.dsp.demod.decimate,
                self.demod.output_sample_rate(),
            ),
        }
    }

    fn spectrum(&self, kind: RunKind) -> Result<SpectrumEstimate> {
        let master = RngSeed::new(self.cfg.seed).derive(kind.label());
        let (n, fs) = self.out_len_rate();
        let sk = self.spectrum_kind(kind);
        let accs = accumulate(
            self.cfg.frames,
            self.cfg.dsp.chunk_frames,
            || vec![SpectrumAccumulator::new(sk, n, fs)],
            |i, accs| {
                let seed = master.derive_index(i);
                let current = self.photocurrent(kind, seed)?;
                match self.cfg.measurement {
                    Measurement::Raw => accs[0].add_frame(&self.raw_chain.apply(&current)),
                    _ => {
                        let v1 = self.splitter_arm(&current, seed.derive("splitter-1"))?;
                        match sk {
                            SpectrumKind::Auto => accs[0].add_frame(&v1),
                            SpectrumKind::Cross => {
                                let v2 = self.splitter_arm(&current, seed.derive("splitter-2"))?;
                                accs[0].add_pair(&v1, &v2)
                            }
                        }
                    }
                }
            },
        )?;
        let est = accs[0].finish()?;
        if !self.cfg.dsp.compensate {
            return Ok(est);
        }
        let power: Vec<f64> = match self.cfg.measurement {
            Measurement::Raw => self.raw_chain.power_response(&est.freqs),
            _ => {
                let lpf = FilterChain::design(&[self.cfg.dsp.demod.lpf()], self.grid.sample_rate)?;
                let post = FilterChain::design(&self.cfg.dsp.demod_chain, fs)?;
                est.freqs
                    .iter()
                    .map(|&f| lpf.response(f).norm_sqr() * post.response(f).norm_sqr())
                    .collect()
            }
        };
        est.compensate_power(&power)
    }

    fn budget(&self, band_freqs: &[f64]) -> Result<NoiseBudget> {
        let cfg = self.cfg;
        let (e1, e2) = (cfg.beams.amplitude_1, cfg.beams.amplitude_2);
        let source = |i: usize, weight: f64| SourceBudget {
            squeezer: cfg.squeezer(i),
            weight,
            transmission: cfg.pickoffs.reflectivity,
            angle_rms: cfg.pickoffs.phase_jitter_rms_deg * PI / 180.0,
        };
        let readout = match cfg.measurement {
            Measurement::Raw => Readout::Raw,
            _ => Readout::Demodulated,
        };
        let residual = match (cfg.measurement, cfg.dsp.splitter_noise_rel_db) {
            (Measurement::DemodNoCross, Some(db)) => 10f64.powf(db / 10.0),
            _ => 0.0,
        };
        let inputs = BudgetInputs {
            scheme: cfg.scheme,
            readout,
            beat_hz: cfg.beams.beat_hz,
            sources: [source(0, e2 * e2), source(1, e1 * e1)],
            detector_efficiency: cfg.detector.quantum_efficiency,
            classical_fraction: cfg.beams.classical_fraction,
            residual_electronic: residual,
        };
        analytic::heterodyne_budget(&inputs, band_freqs)
    }
}

fn band_label(b: &NamedBand) -> String {
    format!(
        "{}: |f - {} Hz| <= {} Hz excluding |f - {} Hz| <= {} Hz",
        b.name, b.center_hz, b.half_width_hz, b.center_hz, b.exclusion_half_width_hz
    )
}

fn run_heterodyne(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let h = Heterodyne::new(cfg)?;
    let background = h.spectrum(RunKind::Background)?;
    let reference = h.spectrum(RunKind::Reference)?;
    let target = h.spectrum(RunKind::Target)?;

    let mut summary = empty_summary(cfg);
    for band in &cfg.bands {
        let spec = band.spec();
        let red = postprocess(&target, &reference, &background, &spec)?;
        let budget = h.budget(&spec.band_freqs(&target.freqs))?;
        summary.bands.push(BandResult {
            name: band.name.clone(),
            center_hz: band.center_hz,
            half_width_hz: band.half_width_hz,
            exclusion_half_width_hz: band.exclusion_half_width_hz,
            n_bins: red.n_bins,
            reduction_db: red.reduction_db,
            stderr_db: red.stderr_db,
            predicted_db: budget.reduction_db(),
            budget: Some(budget),
        });
    }

    let norm_band = &cfg.bands[0];
    let norm = postprocess(&reference, &reference, &background, &norm_band.spec())?.reference_mean;
    let label = band_label(norm_band);
    let t = target.subtract_background(&background)?;
    let r = reference.subtract_background(&background)?;
    for (name, s) in [("target", &t), ("reference", &r), ("background", &background)] {
        summary.spectra.push(SpectrumSeries {
            name: name.into(),
            freqs: s.freqs.clone(),
            db: s.to_db_relative(norm),
            normalization: label.clone(),
        });
    }
    Ok(summary)
}

/// Band mean and its standard error for a spectrum that is already in
/// vacuum units.
fn band_level(s: &SpectrumEstimate, band: &BandSpec) -> Result<(f64, f64, usize)> {
    let idx = band.bin_indices(&s.freqs);
    if idx.len() < 2 {
        return Err(Error::EmptyBand {
            center_hz: band.center_hz,
            half_width_hz: band.half_width_hz,
        });
    }
    let v: Vec<f64> = idx.iter().map(|&i| s.values[i]).collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let n_eff = (n / Window::Hamming.bin_correlation_factor(s.frame_len)).max(1.0);
    Ok((m, (var / n_eff).sqrt(), idx.len()))
}

fn run_pump_sweep(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::config("sweep", "missing"))?;
    let grid = cfg.grid;
    let p = &cfg.pickoffs;
    // homodyne readout of OPO-1 with beam 1 as local oscillator
    let transmission = p.reflectivity * cfg.detector.quantum_efficiency;
    let center = cfg.omega0();
    let mut summary = empty_summary(cfg);
    for &pump in &sweep.pumps_mw {
        let spec = SqueezerSpec::from_pump_power(
            pump,
            p.threshold_mw,
            p.hwhm_hz,
            p.escape_efficiency,
            0.0,
            center,
        );
        let tag = format!("pump-{:03}mW", pump.round() as i64);
        let master = RngSeed::new(cfg.seed).derive(&tag);
        let accs = accumulate(
            cfg.frames,
            cfg.dsp.chunk_frames,
            || {
                vec![
                    SpectrumAccumulator::new(SpectrumKind::Auto, grid.n_samples, grid.sample_rate),
                    SpectrumAccumulator::new(SpectrumKind::Auto, grid.n_samples, grid.sample_rate),
                ]
            },
            |i, accs| {
                let seed = master.derive_index(i);
                let vac = make_vacuum_field(grid, seed.derive("squeezer-input"))?;
                let sq = apply_squeezer(&vac, &spec, seed.derive("escape"))?;
                let out = apply_loss(&sq, transmission, seed.derive("loss"))?;
                let q = quadrature_series(&out, center)?;
                accs[0].add_frame(&q.a1)?;
                accs[1].add_frame(&q.a2)
            },
        )?;
        let squeezed = accs[0].finish()?;
        let anti = accs[1].finish()?;
        for band in &cfg.bands {
            let spec_band = band.spec();
            let freqs = spec_band.band_freqs(&squeezed.freqs);
            let mut pred_s = 0.0;
            let mut pred_a = 0.0;
            for &f in &freqs {
                let (s, a) = spec.spectrum(f)?;
                pred_s += transmission * s + 1.0 - transmission;
                pred_a += transmission * a + 1.0 - transmission;
            }
            pred_s /= freqs.len() as f64;
            pred_a /= freqs.len() as f64;
            for (quad, est, pred) in [("squeezed", &squeezed, pred_s), ("anti-squeezed", &anti, pred_a)] {
                let (m, se, n) = band_level(est, &spec_band)?;
                summary.bands.push(BandResult {
                    name: format!("{tag}.{}.{quad}", band.name),
                    center_hz: band.center_hz,
                    half_width_hz: band.half_width_hz,
                    exclusion_half_width_hz: band.exclusion_half_width_hz,
                    n_bins: n,
                    reduction_db: analytic::reduction_db(m),
                    stderr_db: 10.0 / std::f64::consts::LN_10 * se / m,
                    predicted_db: analytic::reduction_db(pred),
                    budget: None,
                });
            }
        }
        for (quad, est) in [("squeezed", &squeezed), ("anti-squeezed", &anti)] {
            summary.spectra.push(SpectrumSeries {
                name: format!("{tag}-{quad}"),
                freqs: est.freqs.clone(),
                db: est.to_db_relative(1.0),
                normalization: "vacuum quadrature PSD = 1".into(),
            });
        }
    }
    Ok(summary)
}

fn run_epr(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let epr = cfg.epr.as_ref().ok_or_else(|| Error::config("epr", "missing"))?;
    let grid = cfg.grid;
    let master = RngSeed::new(cfg.seed);
    let n = grid.n_samples as i64;
    let df = grid.bin_spacing();

    let residuals: Vec<Result<f64>> = (0..cfg.frames as u64)
        .into_par_iter()
        .map(|i| {
            let seed = master.derive("draw").derive_index(i);
            let mut rng = seed.derive("params").rng();
            let k_omega = rng.random_range(1..=n / 8);
            let lo = -n / 2 + k_omega + 1;
            let hi = n / 2 - 2 * k_omega - 1;
            let k0 = rng.random_range(lo..=hi);
            let center = rng.random_range(-n / 2 + 1..n / 2) as f64 * df;
            let spec = SqueezerSpec {
                pump_ratio: rng.random_range(0.0..0.95),
                hwhm: rng.random_range(1e6..50e6),
                escape_efficiency: rng.random_range(0.3..=1.0),
                squeeze_angle: rng.random_range(0.0..PI),
                center_freq: center,
            };
            let vac = make_vacuum_field(grid, seed.derive("vacuum"))?;
            let field = apply_squeezer(&vac, &spec, seed.derive("escape"))?;
            epr_identity_residual(&field, k0 as f64 * df, k_omega as f64 * df)
        })
        .collect();
    let mut max_res = 0.0f64;
    for r in residuals {
        max_res = max_res.max(r?);
    }

    let mut summary = empty_summary(cfg);
    summary.metrics.insert("identity.draws".into(), cfg.frames as f64);
    summary.metrics.insert("identity.max_residual".into(), max_res);

    // grouped terms with the squeezer on ω₀ + Ω at the optimal angle
    let omega0 = cfg.omega0();
    let big_omega = cfg.beams.beat_hz;
    let frames = cfg.frames.min(200);
    for &x in &epr.pump_ratios {
        let spec = SqueezerSpec {
            pump_ratio: x,
            hwhm: cfg.pickoffs.hwhm_hz,
            escape_efficiency: cfg.pickoffs.escape_efficiency.min(1.0),
            squeeze_angle: 0.0,
            center_freq: omega0 + big_omega,
        };
        let tag = format!("grouped.x{x:.2}");
        let gmaster = master.derive(&tag);
        let stats: Vec<Result<(f64, f64)>> = (0..frames as u64)
            .into_par_iter()
            .map(|i| {
                let seed = gmaster.derive_index(i);
                let vac = make_vacuum_field(grid, seed.derive("vacuum"))?;
                let field = apply_squeezer(&vac, &spec, seed.derive("escape"))?;
                let (diff, sum) = epr_grouped_terms(&field, omega0, big_omega)?;
                let ms = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
                Ok((ms(&diff), ms(&sum)))
            })
            .collect();
        let (mut vd, mut vs) = (0.0, 0.0);
        for s in stats {
            let (d, m) = s?;
            vd += d;
            vs += m;
        }
        // vacuum value of each grouped term is 2 (two unit-variance quadratures)
        vd /= 2.0 * frames as f64;
        vs /= 2.0 * frames as f64;
        let mut predicted = 0.0;
        for k in 0..grid.n_samples {
            predicted += spec.spectrum(crate::fft::bin_freq(k, grid.n_samples, grid.sample_rate))?.0;
        }
        predicted /= grid.n_samples as f64;
        summary.metrics.insert(format!("{tag}.difference_ratio"), vd);
        summary.metrics.insert(format!("{tag}.sum_ratio"), vs);
        summary.metrics.insert(format!("{tag}.predicted_ratio"), predicted);
    }
    Ok(summary)
}
