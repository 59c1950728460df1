//! Acceptance checks. Runs as a plain binary (no libtest harness) so each
//! criterion prints exactly one PASS/FAIL line.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use squeezebeat::analytic::{
    classical_noise_limit, phase_jitter_penalty, predicted_reduction, straightforward_phase_floor,
    AnalysisBand, SourceLevels, SqueezingLevels,
};
use squeezebeat::dsp::{SpectrumAccumulator, SpectrumKind};
use squeezebeat::runner::{preset, run, ExperimentConfig, RunOptions, RunSummary};
use squeezebeat::RngSeed;

type Check = Result<String, String>;

fn run_preset(name: &str, frames: usize, overrides: &str) -> Result<RunSummary, String> {
    let mut c = preset(name).map_err(|e| e.to_string())?;
    if !overrides.is_empty() {
        c = c.with_overrides(overrides).map_err(|e| e.to_string())?;
    }
    c.frames = frames;
    run(&c, &RunOptions::default()).map_err(|e| e.to_string())
}

fn band(s: &RunSummary, name: &str) -> Result<(f64, f64, f64), String> {
    let b = s.band(name).ok_or(format!("missing band {name}"))?;
    Ok((b.reduction_db, b.stderr_db, b.predicted_db))
}

fn criterion_1() -> Check {
    let t0 = Instant::now();
    let s = run_preset("epr-identity", 100, "epr.pump_ratios = []")?;
    let dt = t0.elapsed().as_secs_f64();
    let res = s.metrics["identity.max_residual"];
    let msg = format!("max residual {res:.2e} over 100 draws in {dt:.2} s");
    if res <= 1e-9 && dt < 10.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Check {
    let lv = |l, u| SourceLevels {
        s_lower_db: l,
        s_upper_db: u,
        a_lower_db: 0.0,
        a_upper_db: 0.0,
    };
    let levels = SqueezingLevels {
        sources: [lv(4.5, 3.7), lv(4.16, 4.0)],
        weights: [1.0, 1.0],
    };
    let got = [
        predicted_reduction(&levels, AnalysisBand::Lower),
        predicted_reduction(&levels, AnalysisBand::Upper),
        predicted_reduction(&levels, AnalysisBand::Demod),
    ];
    let want = [4.33, 3.85, 4.08];
    let msg = format!("lower {:.3} upper {:.3} demod {:.3} dB", got[0], got[1], got[2]);
    if got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 0.05) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Check {
    let raw = run_preset("fig3-raw", 2000, "")?;
    let demod = run_preset("fig4-demod", 2000, "")?;
    let mut parts = vec![];
    let mut ok = true;
    for (s, name) in [(&raw, "lower"), (&raw, "upper"), (&demod, "demod")] {
        let (r, se, p) = band(s, name)?;
        ok &= (r - p).abs() <= 3.0 * se;
        parts.push(format!("{name} {r:.3}±{se:.3} vs {p:.3}"));
    }
    let (d, _, _) = band(&demod, "demod")?;
    ok &= (3.1..=3.7).contains(&d);
    let msg = parts.join(", ") + " dB";
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Check {
    let c = classical_noise_limit(0.1, 0.0);
    let msg = format!("ceiling {c:.4} dB");
    if (c - 10.0).abs() <= 0.01 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Check {
    let eff = phase_jitter_penalty(10f64.powf(-1.5), 10f64.powf(1.5), 1.5 * PI / 180.0);
    let db = -10.0 * eff.log10();
    let msg = format!("reduction with 1.5 deg jitter {db:.2} dB");
    if db >= 12.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Variance of the demodulated phase output at one baseband bin of the
/// same-frequency scheme, by explicit linear algebra over every time-domain
/// noise sample: `y = F_j · LPF · (sin Ωt × noise)` with independent white
/// amplitude (variance `a`) and phase (variance `s`) quadratures.
fn brute_force_floor(s: f64, a: f64) -> f64 {
    let n = 64usize;
    let k_beat = 8usize;
    let j = 2usize;
    let cutoff = 12usize;
    let tau = 2.0 * PI / n as f64;
    // photocurrent noise from one beam: 2E(X cos Ωt − Y sin Ωt), E = 1
    let var_of = |s: f64, a: f64| -> f64 {
        let mut total = 0.0;
        for (quad, var) in [(0, a), (1, s)] {
            for m in 0..n {
                let t = m as f64;
                let ph = tau * (k_beat as f64) * t;
                let current = if quad == 0 { 2.0 * ph.cos() } else { -2.0 * ph.sin() };
                let mixed = current * ph.sin();
                // unitary DFT of the impulse, ideal low-pass, then bin j
                let mut coeff = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let signed = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
                    if signed.unsigned_abs() as usize > cutoff {
                        continue;
                    }
                    if k == j {
                        coeff += Complex64::from_polar(mixed / (n as f64).sqrt(), -tau * (k * m) as f64);
                    }
                }
                total += coeff.norm_sqr() * var;
            }
        }
        total
    };
    var_of(s, a) / var_of(1.0, 1.0)
}

fn criterion_6() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let s = 0.05 + 0.1 * i as f64;
        let a = 1.0 / s + 0.3 * i as f64;
        let closed = straightforward_phase_floor(s, a);
        let oracle = brute_force_floor(s, a);
        worst = worst.max((closed - oracle).abs() / oracle);
    }
    let mut ok = worst <= 1e-6;
    let mut parts = vec![format!("oracle rel err {worst:.1e}")];
    for pump in [30.0, 90.0] {
        let o = format!("pickoffs.pump_mw = [{pump}, {pump}]");
        let sf = run_preset("appendixG-straightforward", 400, &o)?;
        let pr = run_preset(
            "appendixG-straightforward",
            400,
            &format!("{o}\nscheme = \"proposed\"\npickoffs.squeeze_angles = [0.0, 0.0]"),
        )?;
        let (rs, _, _) = band(&sf, "demod")?;
        let (rp, _, _) = band(&pr, "demod")?;
        ok &= rs < rp;
        parts.push(format!("{pump} mW straightforward {rs:.2} < proposed {rp:.2} dB"));
    }
    let g = run_preset("appendixG-straightforward", 2000, "")?;
    let (r, se, p) = band(&g, "demod")?;
    let excess = -r;
    ok &= (excess - 1.3).abs() <= 0.2;
    parts.push(format!("floor above vacuum {excess:.2}±{se:.2} dB (closed form {:.2})", -p));
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn residual_slope() -> f64 {
    let n = 64;
    let counts = [100usize, 300, 1000, 3000, 10000];
    let mut acc = SpectrumAccumulator::new(SpectrumKind::Cross, n, 1.0);
    let mut rng = RngSeed::new(17).derive("independent-noise").rng();
    let mut pts = vec![];
    let mut done = 0;
    for &target in &counts {
        while done < target {
            let mut draw = || -> Vec<f64> {
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    })
                    .collect()
            };
            let v1 = draw();
            let v2 = draw();
            acc.add_pair(&v1, &v2).unwrap();
            done += 1;
        }
        let est = acc.finish().unwrap();
        let v = &est.values[1..];
        let rms = (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
        pts.push(((target as f64).ln(), rms.ln()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_7() -> Check {
    let cross = run_preset("fig4-demod", 2000, "")?;
    let single = run_preset("appendixD-no-cross", 2000, "")?;
    let (rc, _, _) = band(&cross, "demod")?;
    let (rn, _, _) = band(&single, "demod")?;
    let slope = residual_slope();
    let msg = format!("no-cross {rn:.2} < cross {rc:.2} dB, residual slope {slope:.3}");
    if rn < rc && (slope + 0.5).abs() <= 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

fn criterion_8() -> Check {
    let vac = run_preset("vacuum-selftest", 2000, "")?;
    let mut ok = true;
    let mut parts = vec![];
    for name in ["lower", "upper"] {
        let (r, se, _) = band(&vac, name)?;
        ok &= r.abs() <= 3.0 * se;
        parts.push(format!("{name} {r:.3}±{se:.3} dB"));
    }
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dirs = vec![];
    for workers in [1usize, 4] {
        let mut c: ExperimentConfig = preset("fig4-demod").map_err(|e| e.to_string())?;
        c.frames = 150;
        c.dsp.chunk_frames = 16;
        let dir = tmp.path().join(format!("w{workers}"));
        c.output_dir = Some(dir.clone());
        run(&c, &RunOptions { workers: Some(workers) }).map_err(|e| e.to_string())?;
        dirs.push(read_dir_sorted(&dir));
    }
    let identical = dirs[0] == dirs[1] && !dirs[0].is_empty();
    ok &= identical;
    parts.push(format!("outputs identical across 1/4 workers: {identical}"));
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let checks: [(u32, &str, fn() -> Check); 8] = [
        (1, "sideband identity", criterion_1),
        (2, "analytic predictions", criterion_2),
        (3, "Monte Carlo closure", criterion_3),
        (4, "classical ceiling", criterion_4),
        (5, "phase jitter", criterion_5),
        (6, "same-frequency scheme leakage", criterion_6),
        (7, "cross-spectrum benefit", criterion_7),
        (8, "self-tests", criterion_8),
    ];
    let mut failed = 0;
    for (n, name, f) in checks {
        match f() {
            Ok(msg) => println!("criterion {n} ({name}): PASS  {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL  {msg}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
