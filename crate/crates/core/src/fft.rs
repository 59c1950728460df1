//! Unitary DFT helpers on top of `rustfft`, with a per-thread plan cache.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// `X_k = N^{-1/2} Σ x_n e^{-2πikn/N}` in place.
pub fn forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
    scale(buf);
}

/// `x_n = N^{-1/2} Σ X_k e^{+2πikn/N}` in place.
pub fn inverse(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
    scale(buf);
}

/// Unnormalized forward transform (`Σ x_n e^{-2πikn/N}`).
pub fn forward_raw(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

fn scale(buf: &mut [Complex64]) {
    let s = 1.0 / (buf.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= s;
    }
}

pub fn real_to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Signed frequency (Hz) of DFT bin `k` for an `n`-point transform.
pub fn bin_freq(k: usize, n: usize, sample_rate: f64) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k * sample_rate / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_identity() {
        let x: Vec<Complex64> = (0..48)
            .map(|i| Complex64::new((i as f64).sin(), (0.3 * i as f64).cos()))
            .collect();
        let mut y = x.clone();
        forward(&mut y);
        inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_preserves_energy() {
        let x: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut y = x.clone();
        forward(&mut y);
        let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        assert!((ex - ey).abs() < 1e-9 * ex);
    }

    #[test]
    fn bin_frequencies_are_signed() {
        assert_eq!(bin_freq(0, 8, 8.0), 0.0);
        assert_eq!(bin_freq(4, 8, 8.0), 4.0);
        assert_eq!(bin_freq(5, 8, 8.0), -3.0);
    }
}
