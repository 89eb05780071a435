//! Voice liveness detection from ultrasonic Doppler probes.
//!
//! A device speaker emits a near-ultrasonic probe tone (20 kHz by default)
//! while the user speaks. Moving articulators (lips, jaw, tongue) reflect the
//! probe and imprint Doppler shifts on it; a loudspeaker replaying a recording
//! moves only its diaphragm and produces a much simpler shift pattern. This
//! crate extracts contour features from the shifts, matches them against
//! enrolled templates, and decides live-user vs. replay attack.
//!
//! Pipeline stages, each in its own module:
//!
//! - [`audio`]: PCM buffers, probe-tone generation, WAV I/O.
//! - [`filter`]: Butterworth band separation and zero-phase filtering.
//! - [`spectrum`]: STFT and the demodulated probe-band spectrogram.
//! - [`segment`]: phoneme intervals from alignment files or energy gating.
//! - [`features`]: Doppler slices and the 11 contour features per utterance.
//! - [`wavelet`]: DWT-based contour denoising.
//! - [`matching`]: templates, correlation scoring, threshold decisions.
//! - [`profile`]: persisted user enrollment artifacts.
//! - [`beamform`]: delay-and-sum beamforming for microphone arrays.
//! - [`sim`]: physics-based live/replay scene synthesis and corpus generation.
//! - [`pipeline`]: end-to-end enrollment and verification glue.

pub mod audio;
pub mod beamform;
pub mod config;
pub mod error;
pub mod features;
pub mod filter;
pub mod matching;
pub mod pipeline;
pub mod profile;
pub mod segment;
pub mod sim;
pub mod spectrum;
pub mod wavelet;

pub use audio::AudioBuffer;
pub use config::{FeatureMode, RunConfig};
pub use error::{Error, Result};
pub use features::{ContourSet, DopplerSlice};
pub use matching::{LivenessDecision, PassphraseTemplate, PhonemeTemplate, Verdict};
pub use profile::UserProfile;
pub use segment::{PhonemeSegment, SegmentedUtterance};
pub use spectrum::Spectrogram;
