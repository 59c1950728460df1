//! IIR filter design (Butterworth, Chebyshev type I) via the bilinear
//! transform, and cascaded filter chains.
//!
//! Designs are carried in zero/pole/gain form. The chain applies its exact
//! digital frequency response to a frame in the DFT domain, which is the
//! steady-state output of the cascade for a frame treated as periodic; the
//! same designs also run sample-by-sample as biquad sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prototype {
    Butterworth,
    Chebyshev1,
}

/// One stage of an analog-style filter chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FilterSpec {
    LowPass {
        corner_hz: f64,
        order: usize,
        #[serde(default = "default_prototype")]
        prototype: Prototype,
        #[serde(default)]
        ripple_db: f64,
    },
    HighPass {
        corner_hz: f64,
        order: usize,
        #[serde(default = "default_prototype")]
        prototype: Prototype,
        #[serde(default)]
        ripple_db: f64,
    },
    /// Band-stop with passband edges `low_hz`/`high_hz`; `order` is the
    /// lowpass prototype order (the digital filter has twice as many poles).
    BandStop {
        low_hz: f64,
        high_hz: f64,
        order: usize,
        #[serde(default = "default_prototype")]
        prototype: Prototype,
        #[serde(default)]
        ripple_db: f64,
    },
    Gain { gain_db: f64 },
}

fn default_prototype() -> Prototype {
    Prototype::Butterworth
}

impl FilterSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        let nyq = sample_rate / 2.0;
        let check_corner = |f: f64| -> Result<()> {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::param("corner_hz", f, "must be > 0"));
            }
            if f >= nyq {
                return Err(Error::OutOfBand {
                    freq_hz: f,
                    nyquist_hz: nyq,
                });
            }
            Ok(())
        };
        let check_shape = |order: usize, proto: Prototype, ripple: f64| -> Result<()> {
            if order == 0 {
                return Err(Error::param("order", 0.0, "must be >= 1"));
            }
            if proto == Prototype::Chebyshev1 && !(ripple.is_finite() && ripple > 0.0) {
                return Err(Error::param("ripple_db", ripple, "must be > 0 for Chebyshev"));
            }
            Ok(())
        };
        match *self {
            FilterSpec::LowPass {
                corner_hz,
                order,
                prototype,
                ripple_db,
            }
            | FilterSpec::HighPass {
                corner_hz,
                order,
                prototype,
                ripple_db,
            } => {
                check_corner(corner_hz)?;
                check_shape(order, prototype, ripple_db)
            }
            FilterSpec::BandStop {
                low_hz,
                high_hz,
                order,
                prototype,
                ripple_db,
            } => {
                check_corner(low_hz)?;
                check_corner(high_hz)?;
                if low_hz >= high_hz {
                    return Err(Error::param("low_hz", low_hz, "must be below high_hz"));
                }
                check_shape(order, prototype, ripple_db)
            }
            FilterSpec::Gain { gain_db } => {
                if gain_db.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("gain_db", gain_db, "must be finite"))
                }
            }
        }
    }

    pub fn design(&self, sample_rate: f64) -> Result<Zpk> {
        self.validate(sample_rate)?;
        let fs2 = 2.0 * sample_rate;
        let warp = |f: f64| fs2 * (PI * f / sample_rate).tan();
        let analog = match *self {
            FilterSpec::LowPass {
                corner_hz,
                order,
                prototype,
                ripple_db,
            } => analog_prototype(prototype, order, ripple_db).lowpass(warp(corner_hz)),
            FilterSpec::HighPass {
                corner_hz,
                order,
                prototype,
                ripple_db,
            } => analog_prototype(prototype, order, ripple_db).highpass(warp(corner_hz)),
            FilterSpec::BandStop {
                low_hz,
                high_hz,
                order,
                prototype,
                ripple_db,
            } => {
                let (w1, w2) = (warp(low_hz), warp(high_hz));
                analog_prototype(prototype, order, ripple_db).bandstop((w1 * w2).sqrt(), w2 - w1)
            }
            FilterSpec::Gain { gain_db } => {
                return Ok(Zpk {
                    zeros: vec![],
                    poles: vec![],
                    gain: 10f64.powf(gain_db / 20.0),
                })
            }
        };
        Ok(analog.bilinear(sample_rate))
    }
}

/// Zero/pole/gain description. For digital filters the variable is z; for
/// analog ones it is s.
#[derive(Clone, Debug, PartialEq)]
pub struct Zpk {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub gain: f64,
}

fn analog_prototype(proto: Prototype, order: usize, ripple_db: f64) -> Zpk {
    let n = order as f64;
    match proto {
        Prototype::Butterworth => {
            let poles = (1..=order)
                .map(|k| Complex64::from_polar(1.0, PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n)))
                .collect();
            Zpk {
                zeros: vec![],
                poles,
                gain: 1.0,
            }
        }
        Prototype::Chebyshev1 => {
            let eps = (10f64.powf(ripple_db / 10.0) - 1.0).sqrt();
            let mu = (1.0 / eps).asinh() / n;
            let poles: Vec<Complex64> = (1..=order)
                .map(|k| {
                    let theta = PI * (2.0 * k as f64 - 1.0) / (2.0 * n);
                    Complex64::new(-mu.sinh() * theta.sin(), mu.cosh() * theta.cos())
                })
                .collect();
            let mut gain = poles.iter().fold(Complex64::new(1.0, 0.0), |acc, p| acc * -p).re;
            if order % 2 == 0 {
                gain /= (1.0 + eps * eps).sqrt();
            }
            Zpk {
                zeros: vec![],
                poles,
                gain,
            }
        }
    }
}

fn prod_neg(v: &[Complex64]) -> Complex64 {
    v.iter().fold(Complex64::new(1.0, 0.0), |acc, p| acc * -p)
}

impl Zpk {
    fn lowpass(&self, wc: f64) -> Zpk {
        let degree = self.poles.len() - self.zeros.len();
        Zpk {
            zeros: self.zeros.iter().map(|z| z * wc).collect(),
            poles: self.poles.iter().map(|p| p * wc).collect(),
            gain: self.gain * wc.powi(degree as i32),
        }
    }

    fn highpass(&self, wc: f64) -> Zpk {
        let degree = self.poles.len() - self.zeros.len();
        let mut zeros: Vec<Complex64> = self.zeros.iter().map(|z| wc / z).collect();
        zeros.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), degree));
        Zpk {
            zeros,
            poles: self.poles.iter().map(|p| wc / p).collect(),
            gain: self.gain * (prod_neg(&self.zeros) / prod_neg(&self.poles)).re,
        }
    }

    fn bandstop(&self, w0: f64, bw: f64) -> Zpk {
        let degree = self.poles.len() - self.zeros.len();
        let split = |r: &Complex64| -> [Complex64; 2] {
            // roots of s² − (bw/r) s + w0² = 0
            let b = bw / r;
            let disc = (b * b - 4.0 * w0 * w0).sqrt();
            [(b + disc) / 2.0, (b - disc) / 2.0]
        };
        let mut zeros: Vec<Complex64> = self.zeros.iter().flat_map(split).collect();
        for _ in 0..degree {
            zeros.push(Complex64::new(0.0, w0));
            zeros.push(Complex64::new(0.0, -w0));
        }
        Zpk {
            zeros,
            poles: self.poles.iter().flat_map(split).collect(),
            gain: self.gain * (prod_neg(&self.zeros) / prod_neg(&self.poles)).re,
        }
    }

    fn bilinear(&self, sample_rate: f64) -> Zpk {
        let fs2 = 2.0 * sample_rate;
        let degree = self.poles.len() - self.zeros.len();
        let map = |s: &Complex64| (fs2 + s) / (fs2 - s);
        let mut zeros: Vec<Complex64> = self.zeros.iter().map(map).collect();
        zeros.extend(std::iter::repeat_n(Complex64::new(-1.0, 0.0), degree));
        let num = self
            .zeros
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * (fs2 - z));
        let den = self
            .poles
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (fs2 - p));
        Zpk {
            zeros,
            poles: self.poles.iter().map(map).collect(),
            gain: self.gain * (num / den).re,
        }
    }

    /// Digital frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * freq_hz / sample_rate);
        let num = self.zeros.iter().fold(Complex64::new(1.0, 0.0), |acc, q| acc * (z - q));
        let den = self.poles.iter().fold(Complex64::new(1.0, 0.0), |acc, p| acc * (z - p));
        num / den * self.gain
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.norm() < 1.0)
    }

    /// Second-order sections for time-domain filtering.
    pub fn to_biquads(&self) -> Vec<Biquad> {
        let zs = pair_roots(&self.zeros);
        let mut ps = pair_roots(&self.poles);
        let mut zs = zs.into_iter();
        let mut sections = Vec::with_capacity(ps.len());
        for (i, p) in ps.drain(..).enumerate() {
            let z = zs.next().unwrap_or([0.0, 0.0]);
            let g = if i == 0 { self.gain } else { 1.0 };
            sections.push(Biquad::new([g, g * z[0], g * z[1]], p));
        }
        // numerator-only leftovers (not produced by our designs, but keep it total)
        for z in zs {
            sections.push(Biquad::new([1.0, z[0], z[1]], [0.0, 0.0]));
        }
        if sections.is_empty() {
            sections.push(Biquad::new([self.gain, 0.0, 0.0], [0.0, 0.0]));
        }
        sections
    }
}

/// Groups roots into real quadratics `1 + c1 z⁻¹ + c2 z⁻²`.
fn pair_roots(roots: &[Complex64]) -> Vec<[f64; 2]> {
    let tol = 1e-9;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > tol).collect();
    let mut real: Vec<f64> = roots
        .iter()
        .filter(|r| r.im.abs() <= tol)
        .map(|r| r.re)
        .collect();
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<[f64; 2]> = complex
        .iter()
        .map(|r| [-2.0 * r.re, r.norm_sqr()])
        .collect();
    for pair in real.chunks(2) {
        match *pair {
            [a, b] => out.push([-(a + b), a * b]),
            [a] => out.push([-a, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

/// Direct form II transposed second-order section.
#[derive(Clone, Debug)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    state: [f64; 2],
}

impl Biquad {
    pub fn new(b: [f64; 3], a: [f64; 2]) -> Self {
        Biquad {
            b,
            a,
            state: [0.0; 2],
        }
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.state[0];
        self.state[0] = self.b[1] * x - self.a[0] * y + self.state[1];
        self.state[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    pub fn reset(&mut self) {
        self.state = [0.0; 2];
    }
}

/// Runs `input` through a biquad cascade starting from rest.
pub fn filter_time_domain(sections: &mut [Biquad], input: &[f64]) -> Vec<f64> {
    input
        .iter()
        .map(|&x| sections.iter_mut().fold(x, |acc, s| s.process(acc)))
        .collect()
}

/// A designed cascade of [`FilterSpec`] stages on a fixed sample rate.
#[derive(Clone, Debug)]
pub struct FilterChain {
    pub specs: Vec<FilterSpec>,
    pub stages: Vec<Zpk>,
    pub sample_rate: f64,
}

impl FilterChain {
    pub fn design(specs: &[FilterSpec], sample_rate: f64) -> Result<Self> {
        let stages = specs
            .iter()
            .map(|s| s.design(sample_rate))
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterChain {
            specs: specs.to_vec(),
            stages,
            sample_rate,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn response(&self, freq_hz: f64) -> Complex64 {
        self.stages
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * z.response(freq_hz, self.sample_rate))
    }

    /// Power response |H(f)|² at each of the given frequencies.
    pub fn power_response(&self, freqs: &[f64]) -> Vec<f64> {
        freqs.iter().map(|&f| self.response(f).norm_sqr()).collect()
    }

    /// Complex response on every DFT bin of an `n`-point frame.
    pub fn bin_response(&self, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| self.response(fft::bin_freq(k, n, self.sample_rate)))
            .collect()
    }

    /// Steady-state (circular) filtering of one frame.
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        if self.is_empty() {
            return samples.to_vec();
        }
        let h = self.bin_response(samples.len());
        apply_bin_response(samples, &h)
    }
}

/// Multiplies the frame's DFT by `h` (Hermitian-symmetric for real output).
pub fn apply_bin_response(samples: &[f64], h: &[Complex64]) -> Vec<f64> {
    let mut buf = fft::real_to_complex(samples);
    fft::forward(&mut buf);
    for (v, g) in buf.iter_mut().zip(h) {
        *v *= g;
    }
    fft::inverse(&mut buf);
    buf.iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 125e6;

    fn db(h: Complex64) -> f64 {
        20.0 * h.norm().log10()
    }

    #[test]
    fn butterworth_lowpass_3db_at_corner() {
        let z = FilterSpec::LowPass {
            corner_hz: 15e6,
            order: 5,
            prototype: Prototype::Butterworth,
            ripple_db: 0.0,
        }
        .design(FS)
        .unwrap();
        assert!(z.is_stable());
        assert!((db(z.response(0.0, FS))).abs() < 1e-9);
        assert!((db(z.response(15e6, FS)) + 3.0103).abs() < 1e-3);
        assert!(db(z.response(40e6, FS)) < -40.0);
    }

    #[test]
    fn butterworth_highpass_3db_at_corner() {
        let z = FilterSpec::HighPass {
            corner_hz: 1.2e6,
            order: 5,
            prototype: Prototype::Butterworth,
            ripple_db: 0.0,
        }
        .design(FS)
        .unwrap();
        assert!(z.is_stable());
        assert!((db(z.response(1.2e6, FS)) + 3.0103).abs() < 1e-3);
        assert!(db(z.response(20e6, FS)).abs() < 1e-3);
        assert!(db(z.response(0.3e6, FS)) < -55.0);
    }

    #[test]
    fn chebyshev_bandstop_notch_and_ripple() {
        let spec = FilterSpec::BandStop {
            low_hz: 8e6,
            high_hz: 12.5e6,
            order: 5,
            prototype: Prototype::Chebyshev1,
            ripple_db: 0.5,
        };
        let z = spec.design(FS).unwrap();
        assert!(z.is_stable());
        assert!(db(z.response(10e6, FS)) < -30.0);
        // equiripple passband: never above 0 dB, never below −ripple
        for f in (1..=75).map(|i| i as f64 * 0.1e6).chain((126..=400).map(|i| i as f64 * 0.1e6)) {
            let g = db(z.response(f, FS));
            assert!(g <= 1e-9 && g >= -0.5 - 1e-6, "f={f} g={g}");
        }
        assert!((db(z.response(8e6, FS)) + 0.5).abs() < 1e-6);
        assert!((db(z.response(12.5e6, FS)) + 0.5).abs() < 1e-6);
    }

    #[test]
    fn even_order_chebyshev_gain_normalization() {
        let z = FilterSpec::LowPass {
            corner_hz: 5e6,
            order: 4,
            prototype: Prototype::Chebyshev1,
            ripple_db: 1.0,
        }
        .design(FS)
        .unwrap();
        assert!((db(z.response(0.0, FS)) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_specs() {
        let lp = |c| FilterSpec::LowPass {
            corner_hz: c,
            order: 5,
            prototype: Prototype::Butterworth,
            ripple_db: 0.0,
        };
        assert!(matches!(lp(300e6).design(FS), Err(Error::OutOfBand { .. })));
        assert!(lp(62.5e6).design(FS).is_err());
        let zero_order = FilterSpec::HighPass {
            corner_hz: 1e6,
            order: 0,
            prototype: Prototype::Butterworth,
            ripple_db: 0.0,
        };
        assert!(zero_order.design(FS).is_err());
        let cheb_no_ripple = FilterSpec::LowPass {
            corner_hz: 1e6,
            order: 3,
            prototype: Prototype::Chebyshev1,
            ripple_db: 0.0,
        };
        assert!(cheb_no_ripple.design(FS).is_err());
    }

    #[test]
    fn biquads_match_zpk_response() {
        // Drive the time-domain cascade with a tone long enough to settle and
        // compare its steady-state amplitude to |H|.
        let spec = FilterSpec::BandStop {
            low_hz: 8e6,
            high_hz: 12.5e6,
            order: 5,
            prototype: Prototype::Chebyshev1,
            ripple_db: 0.5,
        };
        let z = spec.design(FS).unwrap();
        for f in [3e6, 7e6, 13e6, 20e6] {
            let mut sections = z.to_biquads();
            let n = 20000;
            let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).cos()).collect();
            let y = filter_time_domain(&mut sections, &x);
            let tail = &y[n - 2000..];
            let amp = tail.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let expect = z.response(f, FS).norm();
            assert!((amp - expect).abs() < 2e-3 * expect.max(1e-3), "f={f} {amp} vs {expect}");
        }
    }

    #[test]
    fn empty_chain_is_identity() {
        let chain = FilterChain::design(&[], FS).unwrap();
        let x: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        assert_eq!(chain.apply(&x), x);
    }

    #[test]
    fn chain_is_linear() {
        let chain = FilterChain::design(
            &[
                FilterSpec::HighPass {
                    corner_hz: 1.2e6,
                    order: 5,
                    prototype: Prototype::Butterworth,
                    ripple_db: 0.0,
                },
                FilterSpec::Gain { gain_db: 20.0 },
            ],
            FS,
        )
        .unwrap();
        let x: Vec<f64> = (0..256).map(|i| (0.37 * i as f64).sin()).collect();
        let y: Vec<f64> = (0..256).map(|i| (0.011 * (i * i) as f64).cos()).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let fx = chain.apply(&x);
        let fy = chain.apply(&y);
        let fs = chain.apply(&sum);
        for i in 0..256 {
            assert!((fs[i] - (2.0 * fx[i] - 3.0 * fy[i])).abs() < 1e-10);
        }
    }
}
