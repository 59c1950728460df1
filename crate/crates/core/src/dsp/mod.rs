//! Measurement chain: filters, demodulation, spectral estimation and
//! band-averaged noise-reduction metrics.

pub mod demod;
pub mod filter;
pub mod post;
pub mod spectrum;

pub use demod::{demodulate, demodulate_samples, DemodSpec};
pub use filter::{apply_bin_response, Biquad, FilterChain, FilterSpec, Prototype, Zpk};
pub use post::{postprocess, BandSpec, Reduction};
pub use spectrum::{
    cross_spectrum, welch_psd, SpectrumAccumulator, SpectrumEstimate, SpectrumKind, Window,
};

use crate::error::Result;
use crate::interferometer::PhotocurrentTrace;

/// Runs a trace through a designed filter cascade.
pub fn apply_filter_chain(trace: &PhotocurrentTrace, chain: &FilterChain) -> Result<PhotocurrentTrace> {
    if chain.sample_rate != trace.grid.sample_rate {
        return Err(crate::error::Error::param(
            "sample_rate",
            chain.sample_rate,
            "filter chain was designed for a different sample rate",
        ));
    }
    Ok(PhotocurrentTrace {
        samples: chain.apply(&trace.samples),
        ..trace.clone()
    })
}
