//! Simulation and closed-form budgets for squeezed-light-enhanced
//! phase-insensitive heterodyne detection.
//!
//! * [`field`]: quantum noise of one optical band, squeezing, loss and
//!   two-photon quadratures.
//! * [`interferometer`]: pickoff injection, balanced detection and detector
//!   imperfections.
//! * [`dsp`]: filter chains, demodulation, averaged (cross-)spectra and
//!   band-averaged reductions.
//! * [`analytic`]: noise budgets that predict the simulated numbers.
//! * [`runner`]: experiment configs, presets and file output.

pub mod analytic;
pub mod dsp;
pub mod error;
pub mod fft;
pub mod field;
pub mod interferometer;
pub mod rng;
pub mod runner;

pub use error::{Error, Result};
pub use rng::RngSeed;
