//! Config-driven experiment runs: presets, the frame engine and file output.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind, Measurement};
pub use presets::{list_presets, preset};
pub use run::{run, BandResult, RunOptions, RunSummary, SpectrumSeries};
