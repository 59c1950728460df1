//! Files written by a run. Nothing machine-dependent (timings, paths)
//! goes into them, so equal configs give byte-identical directories.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::run::{RunSummary, SpectrumSeries};

pub const SUMMARY_FILE: &str = "summary.toml";
pub const CONFIG_FILE: &str = "config.toml";

pub fn write_run(dir: &Path, config: &ExperimentConfig, summary: &RunSummary) -> Result<()> {
    fs::create_dir_all(dir)?;
    // the directory itself is not part of the experiment
    let mut recorded = config.clone();
    recorded.output_dir = None;
    fs::write(dir.join(CONFIG_FILE), recorded.to_toml()?)?;
    fs::write(dir.join(SUMMARY_FILE), summary_toml(summary)?)?;
    for s in &summary.spectra {
        fs::write(
            dir.join(format!("{}.csv", s.name)),
            spectrum_csv(s, &summary.config_hash, summary.frames),
        )?;
    }
    Ok(())
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.6}")
    }
}

pub fn spectrum_csv(s: &SpectrumSeries, config_hash: &str, frames: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash = {config_hash}");
    let _ = writeln!(out, "# frames = {frames}");
    let _ = writeln!(out, "# series = {}", s.name);
    let _ = writeln!(out, "# normalization = {}", s.normalization);
    out.push_str("freq_hz,psd_db_rel_vacuum\n");
    for (f, v) in s.freqs.iter().zip(&s.db) {
        let _ = writeln!(out, "{f},{}", fmt_value(*v));
    }
    out
}

/// Flat `key = value` table with dotted keys, sorted.
pub fn summary_toml(s: &RunSummary) -> Result<String> {
    let mut t = toml::Table::new();
    let mut put = |k: String, v: toml::Value| {
        t.insert(k, v);
    };
    if let Some(p) = &s.preset {
        put("preset".into(), p.clone().into());
    }
    put(
        "experiment".into(),
        toml::Value::try_from(s.experiment)
            .map_err(|e| Error::config("experiment", e.to_string()))?,
    );
    put("seed".into(), (s.seed as i64).into());
    put("frames".into(), (s.frames as i64).into());
    put("config_hash".into(), s.config_hash.clone().into());
    for b in &s.bands {
        let k = |suffix: &str| format!("band.{}.{suffix}", b.name);
        put(k("center_hz"), b.center_hz.into());
        put(k("half_width_hz"), b.half_width_hz.into());
        put(k("exclusion_half_width_hz"), b.exclusion_half_width_hz.into());
        put(k("n_bins"), (b.n_bins as i64).into());
        put(k("reduction_db"), b.reduction_db.into());
        put(k("stderr_db"), b.stderr_db.into());
        put(k("predicted_db"), b.predicted_db.into());
        if let Some(bud) = &b.budget {
            put(k("predicted_floor"), bud.floor.into());
            put(k("predicted_reference_floor"), bud.reference_floor.into());
            put(k("items.squeezed_quadrature"), bud.items.squeezed_quadrature.into());
            put(k("items.anti_squeezed_leakage"), bud.items.anti_squeezed_leakage.into());
            put(k("items.classical"), bud.items.classical.into());
            put(k("items.electronic"), bud.items.electronic.into());
        }
    }
    for (k, v) in &s.metrics {
        put(format!("metric.{k}"), (*v).into());
    }
    // quote dotted names so they stay flat
    let mut out = String::new();
    for (k, v) in &t {
        let _ = writeln!(out, "{} = {}", toml::Value::String(k.clone()), v);
    }
    Ok(out)
}
