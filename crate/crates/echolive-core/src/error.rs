//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Requested tone or band lies at or above the Nyquist frequency.
    #[error("frequency {f0_hz} Hz would alias at sample rate {sample_rate} Hz (Nyquist {nyquist} Hz)")]
    Aliasing {
        f0_hz: f64,
        sample_rate: f64,
        nyquist: f64,
    },

    #[error("invalid audio buffer: {0}")]
    InvalidAudio(String),

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("invalid filter specification: {0}")]
    Filter(String),

    #[error("alignment parse error: {0}")]
    AlignmentParse(String),

    #[error("segment out of range: {0}")]
    SegmentRange(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("contour length {len} below minimum {min} for {levels}-level decomposition")]
    ContourTooShort { len: usize, min: usize, levels: usize },

    #[error("enrollment error: {0}")]
    Enrollment(String),

    #[error("matching error: {0}")]
    Matching(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("beamforming error: {0}")]
    Beamform(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("profile error: {0}")]
    Profile(String),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
