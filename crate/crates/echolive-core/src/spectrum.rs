//! Short-time Fourier analysis.
//!
//! Two routes produce [`Spectrogram`]s:
//!
//! - [`stft`]: direct Hann-windowed transform of the full band, zero-padded
//!   until the bin spacing reaches the requested width.
//! - [`probe_band_spectrogram`]: complex demodulation at the probe frequency,
//!   anti-alias filtering, decimation, and a small FFT. Produces only the
//!   bins around the probe but costs orders of magnitude less at high sample
//!   rates; the two routes agree inside the band (see tests).

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Time-frequency magnitude grid.
///
/// Frame `k` covers `[k*frame_hop_s, k*frame_hop_s + window_len_s)`. Bin `i`
/// is centered at `freq_origin_hz + i * bin_width_hz`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// Magnitudes indexed `[frame][bin]`.
    pub magnitudes: Vec<Vec<f64>>,
    pub frame_hop_s: f64,
    pub window_len_s: f64,
    pub bin_width_hz: f64,
    /// Frequency of bin 0.
    pub freq_origin_hz: f64,
}

impl Spectrogram {
    pub fn frame_count(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bin_count(&self) -> usize {
        self.magnitudes.first().map_or(0, Vec::len)
    }

    /// Time of the center of frame `k`'s window.
    pub fn frame_center_s(&self, k: usize) -> f64 {
        k as f64 * self.frame_hop_s + self.window_len_s / 2.0
    }

    pub fn bin_freq_hz(&self, i: usize) -> f64 {
        self.freq_origin_hz + i as f64 * self.bin_width_hz
    }

    /// Index of the bin whose center is nearest to `freq_hz`, if in range.
    pub fn bin_index(&self, freq_hz: f64) -> Option<usize> {
        let idx = ((freq_hz - self.freq_origin_hz) / self.bin_width_hz).round();
        if idx < 0.0 || idx >= self.bin_count() as f64 {
            None
        } else {
            Some(idx as usize)
        }
    }

    /// True when every bin of `[lo_hz, hi_hz]` falls inside this spectrogram.
    pub fn covers(&self, lo_hz: f64, hi_hz: f64) -> bool {
        let last = self.freq_origin_hz + (self.bin_count().saturating_sub(1)) as f64 * self.bin_width_hz;
        self.freq_origin_hz <= lo_hz && last >= hi_hz
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    (len - window) / hop + 1
}

/// Hann-windowed STFT with zero padding.
///
/// The FFT size is raised above the window length until
/// `sample_rate / fft_size <= target_bin_width_hz`. Padding interpolates the
/// spectrum; it does not add true resolution. Magnitudes are one-sided
/// (bins 0..=fft_size/2), `freq_origin_hz = 0`.
pub fn stft(
    buffer: &AudioBuffer,
    window_len_s: f64,
    hop_s: f64,
    target_bin_width_hz: f64,
) -> Result<Spectrogram> {
    let samples = buffer.mono_samples()?;
    let fs = buffer.sample_rate();
    if hop_s <= 0.0 {
        return Err(Error::InvalidAudio(format!("hop must be positive, got {hop_s}")));
    }
    if target_bin_width_hz <= 0.0 {
        return Err(Error::InvalidAudio(format!(
            "target bin width must be positive, got {target_bin_width_hz}"
        )));
    }
    let window = (window_len_s * fs).round() as usize;
    let hop = ((hop_s * fs).round() as usize).max(1);
    if window < 2 {
        return Err(Error::InvalidAudio(format!("window of {window} samples is too short")));
    }
    if samples.len() < window {
        return Err(Error::InsufficientSignal(format!(
            "buffer has {} samples but one {window_len_s} s window needs {window}",
            samples.len()
        )));
    }

    let fft_size = window.max((fs / target_bin_width_hz).ceil() as usize);
    let bin_width = fs / fft_size as f64;
    let n_frames = frame_count(samples.len(), window, hop);
    let win = hann_window(window);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_size);
    let n_bins = fft_size / 2 + 1;

    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for k in 0..n_frames {
        let start = k * hop;
        for b in buf.iter_mut() {
            *b = Complex64::new(0.0, 0.0);
        }
        for (i, (&s, &w)) in samples[start..start + window].iter().zip(&win).enumerate() {
            buf[i] = Complex64::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..n_bins].iter().map(|c| c.norm()).collect());
    }

    Ok(Spectrogram {
        magnitudes: frames,
        frame_hop_s: hop as f64 / fs,
        window_len_s: window as f64 / fs,
        bin_width_hz: bin_width,
        freq_origin_hz: 0.0,
    })
}

/// Remove the stationary direct-path tone at `f0` by least-squares fitting
/// a single sinusoid over the whole buffer and subtracting it.
///
/// Doppler lines sit at `f0 + delta` and decorrelate from the fit over the
/// full duration, so they pass through nearly untouched while the static
/// carrier (which otherwise dominates every energy band) drops by orders of
/// magnitude. Returns the cleaned buffer and the removed amplitude.
pub fn cancel_carrier(buffer: &AudioBuffer, f0: f64) -> Result<(AudioBuffer, f64)> {
    let samples = buffer.mono_samples()?;
    let fs = buffer.sample_rate();
    if f0 >= fs / 2.0 {
        return Err(Error::Aliasing {
            f0_hz: f0,
            sample_rate: fs,
            nyquist: fs / 2.0,
        });
    }
    let n = samples.len();
    if n == 0 {
        return Ok((buffer.clone(), 0.0));
    }
    let w = 2.0 * PI * f0 / fs;
    let (mut cs, mut ss) = (0.0f64, 0.0f64);
    for (i, &x) in samples.iter().enumerate() {
        let ph = w * i as f64;
        cs += x * ph.cos();
        ss += x * ph.sin();
    }
    let scale = 2.0 / n as f64;
    let (a_cos, a_sin) = (cs * scale, ss * scale);
    let cleaned: Vec<f64> = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let ph = w * i as f64;
            x - a_cos * ph.cos() - a_sin * ph.sin()
        })
        .collect();
    let amplitude = (a_cos * a_cos + a_sin * a_sin).sqrt();
    Ok((AudioBuffer::mono(cleaned, fs)?, amplitude))
}

/// Blackman-Harris windowed-sinc low-pass prototype, DC gain 1.
fn lowpass_fir(taps: usize, cutoff_norm: f64) -> Vec<f64> {
    debug_assert!(taps % 2 == 1);
    let mid = (taps - 1) as f64 / 2.0;
    let nm1 = (taps - 1) as f64;
    let (a0, a1, a2, a3) = (0.35875, 0.48829, 0.14128, 0.01168);
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let m = n as f64 - mid;
            let x = 2.0 * cutoff_norm * m;
            let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
            let t = 2.0 * PI * n as f64 / nm1;
            let w = a0 - a1 * t.cos() + a2 * (2.0 * t).cos() - a3 * (3.0 * t).cos();
            2.0 * cutoff_norm * sinc * w
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    h
}

/// Spectrogram of the band `[f0 - half_band_hz, f0 + half_band_hz]` computed
/// by complex demodulation at `f0`, decimation to roughly 1 kHz, and a short
/// FFT per frame.
///
/// Frame timing matches [`stft`] run with the same `window_len_s`/`hop_s`:
/// frame `k` is centered at `k*hop + window/2` and the frame count follows
/// the same formula on the original sample count.
pub fn probe_band_spectrogram(
    buffer: &AudioBuffer,
    f0: f64,
    window_len_s: f64,
    hop_s: f64,
    target_bin_width_hz: f64,
    half_band_hz: f64,
) -> Result<Spectrogram> {
    let samples = buffer.mono_samples()?;
    let fs = buffer.sample_rate();
    if f0 + half_band_hz >= fs / 2.0 {
        return Err(Error::Aliasing {
            f0_hz: f0 + half_band_hz,
            sample_rate: fs,
            nyquist: fs / 2.0,
        });
    }
    if hop_s <= 0.0 || target_bin_width_hz <= 0.0 || half_band_hz <= 0.0 {
        return Err(Error::InvalidAudio("hop, bin width and band must be positive".into()));
    }

    // Decimated rate near 1 kHz keeps the +/-200 Hz band with margin.
    let decim = ((fs / 1000.0).floor() as usize).max(1);
    let fs2 = fs / decim as f64;
    if fs2 < 2.5 * half_band_hz {
        return Err(Error::InvalidAudio(format!(
            "band +/-{half_band_hz} Hz too wide for decimated rate {fs2} Hz"
        )));
    }

    let window = (window_len_s * fs).round() as usize;
    if samples.len() < window || window < 2 {
        return Err(Error::InsufficientSignal(format!(
            "buffer has {} samples but one {window_len_s} s window needs {window}",
            samples.len()
        )));
    }
    let hop = ((hop_s * fs).round() as usize).max(1);
    let n_frames = frame_count(samples.len(), window, hop);

    // Demodulate: content at f0 + d moves to baseband frequency d.
    let w0 = 2.0 * PI * f0 / fs;
    let base: Vec<Complex64> = samples
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let ph = w0 * n as f64;
            Complex64::new(x * ph.cos(), -x * ph.sin())
        })
        .collect();

    // Anti-alias FIR. Passband flat to ~0.25*fs2, stopband from ~0.65*fs2,
    // so nothing folds into the measured band.
    let taps = 20 * decim + 1;
    let fir = lowpass_fir(taps, 0.45 / decim as f64);
    let half = (taps - 1) / 2;
    let out_len = (samples.len() - 1) / decim + 1;
    let filtered: Vec<Complex64> = (0..out_len)
        .map(|m| {
            let center = m * decim;
            let mut acc = Complex64::new(0.0, 0.0);
            let k_lo = half.saturating_sub(center);
            let k_hi = (half + samples.len() - center).min(taps);
            for k in k_lo..k_hi {
                acc += base[center + k - half] * fir[taps - 1 - k];
            }
            acc
        })
        .collect();

    // Short FFT on the decimated complex baseband.
    let window2 = (window_len_s * fs2).round() as usize;
    let hop2 = ((hop_s * fs2).round() as usize).max(1);
    let fft_size = window2.max((fs2 / target_bin_width_hz).ceil() as usize);
    let bin_width = fs2 / fft_size as f64;
    let n_half_bins = (half_band_hz / bin_width).floor() as usize;
    let n_bins = 2 * n_half_bins + 1;
    let win = hann_window(window2);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_size);

    let mut frames = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    for k in 0..n_frames {
        let start = k * hop2;
        for b in buf.iter_mut() {
            *b = Complex64::new(0.0, 0.0);
        }
        for i in 0..window2 {
            // The decimated signal can run out a sample early at awkward
            // rate ratios; missing tail samples stay zero.
            if let Some(&v) = filtered.get(start + i) {
                buf[i] = v * win[i];
            }
        }
        fft.process(&mut buf);
        let mut row = Vec::with_capacity(n_bins);
        for j in 0..n_bins {
            let offset = j as isize - n_half_bins as isize;
            let idx = offset.rem_euclid(fft_size as isize) as usize;
            row.push(buf[idx].norm());
        }
        frames.push(row);
    }

    Ok(Spectrogram {
        magnitudes: frames,
        frame_hop_s: hop as f64 / fs,
        window_len_s: window as f64 / fs,
        bin_width_hz: bin_width,
        freq_origin_hz: f0 - n_half_bins as f64 * bin_width,
    })
}
