use num_complex::Complex64;
use proptest::prelude::*;
use squeezebeat::analytic::opo_squeezing_spectrum;
use squeezebeat::dsp::welch_psd;
use squeezebeat::field::{
    apply_loss, apply_squeezer, epr_grouped_terms, epr_identity_residual, make_vacuum_field,
    quadrature_series, FrequencyGrid, SqueezerSpec,
};
use squeezebeat::RngSeed;

fn grid() -> FrequencyGrid {
    FrequencyGrid::new(125e6, 500, 40e6).unwrap()
}

fn squeezer(x: f64, eta: f64, angle: f64, center: f64) -> SqueezerSpec {
    SqueezerSpec {
        pump_ratio: x,
        hwhm: 30e6,
        escape_efficiency: eta,
        squeeze_angle: angle,
        center_freq: center,
    }
}

fn band_mean(values: &[f64], freqs: &[f64], lo: f64, hi: f64) -> (f64, usize) {
    let v: Vec<f64> = freqs
        .iter()
        .zip(values)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, v)| *v)
        .collect();
    (v.iter().sum::<f64>() / v.len() as f64, v.len())
}

#[test]
fn vacuum_through_loss_stays_at_unit_psd() {
    let g = grid();
    let mut a1 = vec![];
    for i in 0..1000u64 {
        let seed = RngSeed::new(5).derive_index(i);
        let v = make_vacuum_field(g, seed).unwrap();
        let l = apply_loss(&v, 0.6, seed.derive("loss")).unwrap();
        a1.push(quadrature_series(&l, 40e6).unwrap().a1);
    }
    let psd = welch_psd(&a1, g.sample_rate).unwrap();
    // one-sigma per bin is 1/√frames; averaging a wide band shrinks it further
    let (m, n) = band_mean(&psd.values, &psd.freqs, 1e6, 30e6);
    let sigma = 1.0 / (1000.0 * n as f64 / 1.82).sqrt();
    assert!((m - 1.0).abs() < 3.0 * sigma, "mean {m}, sigma {sigma}");
}

#[test]
fn squeezed_quadrature_mixes_with_loss() {
    let g = grid();
    let sq = squeezer(0.387, 0.8, 0.0, 40e6);
    let frames: Vec<_> = (0..600u64)
        .map(|i| {
            let seed = RngSeed::new(8).derive_index(i);
            let v = make_vacuum_field(g, seed).unwrap();
            let s = apply_squeezer(&v, &sq, seed.derive("esc")).unwrap();
            let l = apply_loss(&s, 0.97, seed.derive("loss")).unwrap();
            quadrature_series(&l, 40e6).unwrap().a1
        })
        .collect();
    let psd = welch_psd(&frames, g.sample_rate).unwrap();
    let (m, _) = band_mean(&psd.values, &psd.freqs, 2e6, 6e6);
    let idx: Vec<f64> = psd
        .freqs
        .iter()
        .copied()
        .filter(|f| *f >= 2e6 && *f <= 6e6)
        .collect();
    let expect = idx
        .iter()
        .map(|f| 0.97 * opo_squeezing_spectrum(&sq, *f).unwrap().0 + 0.03)
        .sum::<f64>()
        / idx.len() as f64;
    assert!((m / expect - 1.0).abs() < 0.05, "{m} vs {expect}");
}

#[test]
fn grouped_terms_are_squeezed_at_the_optimal_angle() {
    let g = grid();
    let ratio = |x: f64| {
        let sq = squeezer(x, 1.0, 0.0, 50e6);
        let mut acc = 0.0;
        for i in 0..100u64 {
            let seed = RngSeed::new(2).derive_index(i);
            let v = make_vacuum_field(g, seed).unwrap();
            let s = apply_squeezer(&v, &sq, seed.derive("esc")).unwrap();
            let (d, _) = epr_grouped_terms(&s, 40e6, 10e6).unwrap();
            acc += d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64;
        }
        acc / 100.0 / 2.0
    };
    let r0 = ratio(0.0);
    let r1 = ratio(0.3);
    let r2 = ratio(0.6);
    assert!((r0 - 1.0).abs() < 0.05, "{r0}");
    assert!(r1 < 1.0 && r2 < r1, "{r1} {r2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn purity_bound_holds(x in 0.0..0.99f64, eta in 0.0..=1.0f64, eps in -1e9..1e9f64) {
        let sq = squeezer(x, eta, 0.0, 0.0);
        let (s, a) = opo_squeezing_spectrum(&sq, eps).unwrap();
        prop_assert!(s * a >= 1.0 - 1e-12);
        prop_assert!(s > 0.0 && s <= 1.0 && a >= 1.0);
    }

    #[test]
    fn identity_holds_for_random_states(
        seed in any::<u64>(),
        x in 0.0..0.95f64,
        eta in 0.2..=1.0f64,
        angle in 0.0..std::f64::consts::PI,
        k_center in -200i64..200,
        k0 in -200i64..100,
        k_omega in 1i64..40,
    ) {
        let g = grid();
        let df = g.bin_spacing();
        prop_assume!(k0 - k_omega > -249 && k0 + 2 * k_omega < 249);
        let sq = squeezer(x, eta, angle, k_center as f64 * df);
        let v = make_vacuum_field(g, RngSeed(seed)).unwrap();
        let s = apply_squeezer(&v, &sq, RngSeed(seed).derive("esc")).unwrap();
        let r = epr_identity_residual(&s, k0 as f64 * df, k_omega as f64 * df).unwrap();
        prop_assert!(r <= 1e-9, "residual {}", r);
    }

    #[test]
    fn quadratures_are_linear(s1 in any::<u64>(), s2 in any::<u64>(), c in -3.0..3.0f64) {
        let g = grid();
        let f1 = make_vacuum_field(g, RngSeed(s1)).unwrap();
        let f2 = make_vacuum_field(g, RngSeed(s2)).unwrap();
        let sum = f1.add(&f2).unwrap().scale(Complex64::new(c, 0.0));
        let q1 = quadrature_series(&f1, 30e6).unwrap();
        let q2 = quadrature_series(&f2, 30e6).unwrap();
        let qs = quadrature_series(&sum, 30e6).unwrap();
        for n in 0..g.n_samples {
            prop_assert!((qs.a1[n] - c * (q1.a1[n] + q2.a1[n])).abs() < 1e-9);
            prop_assert!((qs.a2[n] - c * (q1.a2[n] + q2.a2[n])).abs() < 1e-9);
        }
    }
}
