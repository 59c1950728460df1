use std::fs;

use squeezebeat::runner::{list_presets, preset, run, ExperimentConfig, RunOptions};
use squeezebeat::Error;

fn quick(name: &str, frames: usize) -> ExperimentConfig {
    let mut c = preset(name).unwrap();
    c.frames = frames;
    c
}

#[test]
fn every_listed_preset_expands() {
    let names: Vec<&str> = list_presets().iter().map(|(n, _)| *n).collect();
    for want in [
        "fig3-raw",
        "fig4-demod",
        "appendixD-no-cross",
        "appendixG-straightforward",
        "epr-identity",
        "appendixE-pump-sweep",
        "vacuum-selftest",
    ] {
        assert!(names.contains(&want), "{want}");
        preset(want).unwrap().validate().unwrap();
    }
}

#[test]
fn reruns_are_byte_identical_and_reproducible_from_saved_config() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = quick("fig3-raw", 70);
    c.dsp.chunk_frames = 32;
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    c.output_dir = Some(a.clone());
    let s1 = run(&c, &RunOptions { workers: Some(2) }).unwrap();
    // rerun from the written config
    let mut saved = ExperimentConfig::from_file(&a.join("config.toml")).unwrap();
    assert_eq!(saved.hash().unwrap(), s1.config_hash);
    saved.output_dir = Some(b.clone());
    let s2 = run(&saved, &RunOptions { workers: Some(3) }).unwrap();
    assert_eq!(s1.bands, s2.bands);
    for name in ["summary.toml", "config.toml", "target.csv", "reference.csv", "background.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("target.csv")).unwrap();
    assert!(csv.contains(&format!("# config_hash = {}", s1.config_hash)));
    assert!(csv.contains("# normalization = lower"));
    assert!(csv.lines().any(|l| l == "freq_hz,psd_db_rel_vacuum"));
    let summary: toml::Table = fs::read_to_string(a.join("summary.toml")).unwrap().parse().unwrap();
    assert_eq!(summary["config_hash"].as_str(), Some(s1.config_hash.as_str()));
    assert!(summary.contains_key("band.lower.reduction_db"));
    assert!(summary.contains_key("band.lower.predicted_db"));
}

#[test]
fn reduced_frame_runs_agree_with_longer_runs() {
    let short = run(&quick("fig3-raw", 500), &RunOptions::default()).unwrap();
    let long = run(&quick("fig3-raw", 2000), &RunOptions::default()).unwrap();
    for name in ["lower", "upper"] {
        let (a, b) = (short.band(name).unwrap(), long.band(name).unwrap());
        let se = (a.stderr_db.powi(2) + b.stderr_db.powi(2)).sqrt();
        assert!((a.reduction_db - b.reduction_db).abs() < 3.0 * se, "{name}");
    }
}

#[test]
fn amplitude_independence_with_equal_squeezing() {
    let base = r#"
beams.classical_fraction = 0.0
pickoffs.pump_mw = [90.0, 90.0]
"#;
    let mk = |e1: f64, e2: f64| {
        let c = quick("fig3-raw", 600)
            .with_overrides(&format!("{base}\nbeams.amplitude_1 = {e1}\nbeams.amplitude_2 = {e2}\ndetector.electronic_noise_rel_db = -10.0"))
            .unwrap();
        run(&c, &RunOptions::default()).unwrap()
    };
    let a = mk(1000.0, 1000.0);
    let b = mk(2000.0, 700.0);
    for name in ["lower", "upper"] {
        let (x, y) = (a.band(name).unwrap(), b.band(name).unwrap());
        let se = (x.stderr_db.powi(2) + y.stderr_db.powi(2)).sqrt();
        assert!((x.reduction_db - y.reduction_db).abs() < 3.0 * se, "{name}");
        assert!((x.predicted_db - y.predicted_db).abs() < 1e-9);
    }
}

#[test]
fn pump_sweep_improves_with_pump_and_closes() {
    let s = run(&quick("appendixE-pump-sweep", 150), &RunOptions::default()).unwrap();
    let mut last = 0.0;
    for p in ["050", "100", "200", "300"] {
        let b = s.band(&format!("pump-{p}mW.lower.squeezed")).unwrap();
        assert!(b.reduction_db > last);
        last = b.reduction_db;
        for quad in ["squeezed", "anti-squeezed"] {
            let b = s.band(&format!("pump-{p}mW.lower.{quad}")).unwrap();
            assert!((b.reduction_db - b.predicted_db).abs() < 4.0 * b.stderr_db, "{p} {quad}");
        }
    }
    assert_eq!(s.spectra.len(), 8);
}

#[test]
fn grouped_terms_shrink_with_pump() {
    let c = quick("epr-identity", 40);
    let s = run(&c, &RunOptions::default()).unwrap();
    assert!(s.metrics["identity.max_residual"] < 1e-9);
    let mut prev = f64::INFINITY;
    for x in ["0.20", "0.40", "0.60", "0.80"] {
        let d = s.metrics[&format!("grouped.x{x}.difference_ratio")];
        let m = s.metrics[&format!("grouped.x{x}.sum_ratio")];
        assert!(d < 1.0 && m < 1.0);
        assert!(d < prev);
        prev = d;
    }
}

#[test]
fn config_errors_carry_field_paths() {
    let zero = ExperimentConfig::from_toml_str("preset = \"fig3-raw\"\nframes = 0").unwrap();
    let err = zero.validate().unwrap_err();
    assert!(err.is_config_error() && err.to_string().contains("frames"), "{err}");
    let err = ExperimentConfig::from_toml_str("preset = \"fig3-raw\"\n[beams]\nbogus = 1").unwrap_err();
    assert!(matches!(err, Error::Config { ref path, .. } if path.starts_with("beams")), "{err}");
    let c = quick("fig3-raw", 10)
        .with_overrides("pickoffs.pump_mw = [90.0, 700.0]")
        .unwrap();
    let err = c.validate().unwrap_err();
    assert!(err.to_string().contains("pickoffs.pump_mw[1]"), "{err}");
}
