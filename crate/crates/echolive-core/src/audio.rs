//! PCM audio buffers, probe-tone generation, and WAV file I/O.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Common sample rates the system is tuned for. Other positive rates are
/// accepted everywhere; WAV ingestion emits a warning for them.
pub const STANDARD_RATES: [u32; 3] = [48_000, 96_000, 192_000];

/// Multichannel PCM samples plus their sample rate.
///
/// Samples are stored per channel as `f64` in nominal range `[-1, 1]`.
/// All channels always hold the same number of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    channels: Vec<Vec<f64>>,
    sample_rate: f64,
}

impl AudioBuffer {
    /// Build a buffer from per-channel sample vectors.
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        if sample_rate <= 0.0 || !sample_rate.is_finite() {
            return Err(Error::InvalidAudio(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvalidAudio("buffer needs at least one channel".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidAudio("channels differ in length".into()));
        }
        Ok(Self { channels, sample_rate })
    }

    /// Single-channel convenience constructor.
    pub fn mono(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    /// Borrow the only channel; errors on multichannel buffers.
    pub fn mono_samples(&self) -> Result<&[f64]> {
        if self.channel_count() != 1 {
            return Err(Error::InvalidAudio(format!(
                "expected mono, got {} channels",
                self.channel_count()
            )));
        }
        Ok(&self.channels[0])
    }

    /// Extract a single channel as a new mono buffer.
    pub fn take_channel(&self, idx: usize) -> Result<AudioBuffer> {
        if idx >= self.channel_count() {
            return Err(Error::InvalidAudio(format!(
                "channel {idx} out of range ({} channels)",
                self.channel_count()
            )));
        }
        AudioBuffer::mono(self.channels[idx].clone(), self.sample_rate)
    }
}

/// Generate a single-channel pure sinusoid: `amplitude * sin(2*pi*f0*t)`,
/// phase 0 at sample 0.
pub fn generate_probe(sample_rate: f64, f0: f64, duration_s: f64, amplitude: f64) -> Result<AudioBuffer> {
    if f0 >= sample_rate / 2.0 {
        return Err(Error::Aliasing {
            f0_hz: f0,
            sample_rate,
            nyquist: sample_rate / 2.0,
        });
    }
    if duration_s < 0.0 {
        return Err(Error::InvalidAudio(format!("negative duration {duration_s}")));
    }
    let n = (duration_s * sample_rate).round() as usize;
    let samples = (0..n)
        .map(|k| amplitude * (2.0 * PI * f0 * k as f64 / sample_rate).sin())
        .collect();
    AudioBuffer::mono(samples, sample_rate)
}

/// Supported WAV sample encodings for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    /// 16-bit integer PCM.
    Pcm16,
    /// 32-bit IEEE float.
    Float32,
}

/// Read a WAV file (16-bit PCM or 32-bit float, little-endian) into an
/// [`AudioBuffer`]. Returns the buffer and an optional warning for
/// non-standard sample rates.
pub fn read_wav(path: &Path) -> Result<(AudioBuffer, Option<String>)> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    if n_channels == 0 {
        return Err(Error::InvalidAudio("wav has zero channels".into()));
    }
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); n_channels];
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => {
            for (i, s) in reader.samples::<f32>().enumerate() {
                channels[i % n_channels].push(s? as f64);
            }
        }
        (hound::SampleFormat::Int, 16) => {
            for (i, s) in reader.samples::<i16>().enumerate() {
                channels[i % n_channels].push(s? as f64 / 32768.0);
            }
        }
        (hound::SampleFormat::Int, 32) => {
            for (i, s) in reader.samples::<i32>().enumerate() {
                channels[i % n_channels].push(s? as f64 / 2147483648.0);
            }
        }
        (fmt, bits) => {
            return Err(Error::InvalidAudio(format!(
                "unsupported wav format: {fmt:?} {bits}-bit"
            )));
        }
    }
    let warning = if STANDARD_RATES.contains(&spec.sample_rate) {
        None
    } else {
        Some(format!(
            "non-standard sample rate {} Hz (expected one of 48000/96000/192000)",
            spec.sample_rate
        ))
    };
    let buffer = AudioBuffer::new(channels, spec.sample_rate as f64)?;
    Ok((buffer, warning))
}

/// Write an [`AudioBuffer`] to a WAV file with the given encoding.
/// Channels are interleaved in order.
pub fn write_wav(path: &Path, buffer: &AudioBuffer, encoding: WavEncoding) -> Result<()> {
    let rate = buffer.sample_rate();
    if rate.fract() != 0.0 || rate <= 0.0 || rate > u32::MAX as f64 {
        return Err(Error::InvalidAudio(format!(
            "wav output needs an integral sample rate, got {rate}"
        )));
    }
    let spec = hound::WavSpec {
        channels: buffer.channel_count() as u16,
        sample_rate: rate as u32,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for i in 0..buffer.len() {
        for ch in buffer.channels() {
            match encoding {
                WavEncoding::Pcm16 => {
                    let v = (ch[i].clamp(-1.0, 1.0) * 32767.0).round() as i16;
                    writer.write_sample(v)?;
                }
                WavEncoding::Float32 => writer.write_sample(ch[i] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}
