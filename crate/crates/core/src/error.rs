use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("frequency {freq_hz} Hz is outside the grid band (|f| < {nyquist_hz} Hz)")]
    OutOfBand { freq_hz: f64, nyquist_hz: f64 },

    #[error("frequency {freq_hz} Hz does not fall on a grid bin (spacing {bin_hz} Hz)")]
    OffGrid { freq_hz: f64, bin_hz: f64 },

    #[error("squeezer pump ratio {0} is at or above threshold (must be < 1)")]
    AboveThreshold(f64),

    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("grid mismatch between inputs")]
    GridMismatch,

    #[error("frame {index} has length {len}, expected {expected}")]
    FrameLength {
        index: usize,
        len: usize,
        expected: usize,
    },

    #[error("no frames supplied")]
    NoFrames,

    #[error("spectrum is already compensated")]
    AlreadyCompensated,

    #[error("spectrum is already background subtracted")]
    AlreadySubtracted,

    #[error("spectra do not share the same frequency axis")]
    FrequencyMismatch,

    #[error("band {center_hz} Hz ± {half_width_hz} Hz contains no usable bins")]
    EmptyBand { center_hz: f64, half_width_hz: f64 },

    #[error(
        "band mean after background subtraction is not positive ({what} = {value}); \
         electronic noise dominates"
    )]
    DegenerateSubtraction { what: &'static str, value: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter {
            name,
            value,
            reason,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by the experiment description rather than the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. }
                | Error::UnknownPreset(_)
                | Error::InvalidGrid(_)
                | Error::OutOfBand { .. }
                | Error::OffGrid { .. }
                | Error::AboveThreshold(_)
                | Error::InvalidParameter { .. }
        )
    }
}
