//! Butterworth filters and band separation.
//!
//! Filters are designed as second-order sections (analog prototype, band
//! transform, bilinear mapping) and applied forward-backward for zero phase.
//! The design edges are pre-widened so the *double* pass hits -3 dB at the
//! stated cutoffs.

use rustfft::num_complex::Complex64;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Voice band upper edge in Hz.
pub const VOICE_CUTOFF_HZ: f64 = 10_000.0;
/// Probe band edges in Hz.
pub const PROBE_BAND_HZ: (f64, f64) = (19_800.0, 20_200.0);

/// One second-order section, coefficients normalized so `a0 = 1`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// A cascade of biquads plus the slowest pole radius (sets transient length).
#[derive(Debug, Clone)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
    max_pole_radius: f64,
}

impl SosFilter {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate;
        let z1 = Complex64::new(w.cos(), -w.sin());
        let z2 = z1 * z1;
        let mut h = Complex64::new(1.0, 0.0);
        for s in &self.sections {
            let num = Complex64::new(s.b[0], 0.0) + z1 * s.b[1] + z2 * s.b[2];
            let den = Complex64::new(s.a[0], 0.0) + z1 * s.a[1] + z2 * s.a[2];
            h *= num / den;
        }
        h
    }

    /// Single forward pass (direct form II transposed).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let (mut s1, mut s2) = (0.0f64, 0.0f64);
            for v in y.iter_mut() {
                let xin = *v;
                let out = s.b[0] * xin + s1;
                s1 = s.b[1] * xin - s.a[1] * out + s2;
                s2 = s.b[2] * xin - s.a[2] * out;
                *v = out;
            }
        }
        y
    }

    /// Zero-phase forward-backward pass with odd-reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let n = x.len();
        // Enough padding for the slowest pole to ring down.
        let tau = if self.max_pole_radius < 1.0 {
            (15.0 / (1.0 - self.max_pole_radius)).ceil() as usize
        } else {
            6 * self.sections.len()
        };
        let pad = (3 * (2 * self.sections.len() + 1)).max(tau).min(n - 1);

        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in (n - 1 - pad..n - 1).rev() {
            ext.push(2.0 * x[n - 1] - x[i]);
        }

        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

/// Analog Butterworth prototype poles (unit cutoff), order `n`.
fn butter_prototype_poles(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            Complex64::new(theta.cos(), theta.sin())
        })
        .collect()
}

fn prewarp(freq_hz: f64, fs: f64) -> f64 {
    2.0 * fs * (std::f64::consts::PI * freq_hz / fs).tan()
}

/// Prototype frequency at which a squared Butterworth response of order `n`
/// is 3 dB down. Designing with edges widened by `1/gamma` makes the
/// forward-backward pass hit -3 dB at the requested edges.
fn double_pass_edge_factor(n: usize) -> f64 {
    (std::f64::consts::SQRT_2 - 1.0).powf(1.0 / (2.0 * n as f64))
}

fn bilinear_pole(p: Complex64, fs: f64) -> Complex64 {
    let fs2 = 2.0 * fs;
    (Complex64::new(fs2, 0.0) + p) / (Complex64::new(fs2, 0.0) - p)
}

/// Collapse complex poles into conjugate-pair biquad denominators.
/// Poles must come in conjugate pairs; pairs are matched by sorting on the
/// imaginary part's absolute value.
fn pole_pairs(mut poles: Vec<Complex64>) -> Result<Vec<(f64, f64)>> {
    if poles.len() % 2 != 0 {
        return Err(Error::Filter("odd pole count".into()));
    }
    poles.sort_by(|a, b| a.im.abs().total_cmp(&b.im.abs()).then(a.re.total_cmp(&b.re)));
    let mut pairs = Vec::with_capacity(poles.len() / 2);
    for chunk in poles.chunks(2) {
        let (p, q) = (chunk[0], chunk[1]);
        if (p - q.conj()).norm() > 1e-6 * (1.0 + p.norm()) {
            return Err(Error::Filter(format!("poles {p} and {q} are not conjugates")));
        }
        // (z - p)(z - p*) = z^2 - 2 Re(p) z + |p|^2
        pairs.push((-2.0 * p.re, (p * q).re));
    }
    Ok(pairs)
}

/// Low-pass Butterworth, `order` poles, cutoff compensated for double-pass
/// use via [`SosFilter::filtfilt`].
pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<SosFilter> {
    if cutoff_hz <= 0.0 || cutoff_hz >= fs / 2.0 {
        return Err(Error::Filter(format!(
            "low-pass cutoff {cutoff_hz} Hz outside (0, {})",
            fs / 2.0
        )));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::Filter("order must be even and positive".into()));
    }
    let wc = prewarp(cutoff_hz, fs) / double_pass_edge_factor(order);
    let analog_poles: Vec<Complex64> = butter_prototype_poles(order).iter().map(|p| p * wc).collect();

    // Gain: k_analog = wc^order; bilinear adds `order` zeros at z = -1 and
    // scales by 1 / prod(2fs - p).
    let fs2 = 2.0 * fs;
    let mut k = Complex64::new(1.0, 0.0);
    for p in &analog_poles {
        k *= Complex64::new(wc, 0.0) / (Complex64::new(fs2, 0.0) - p);
    }
    let k = k.re;

    let digital: Vec<Complex64> = analog_poles.iter().map(|&p| bilinear_pole(p, fs)).collect();
    let max_r = digital.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let pairs = pole_pairs(digital)?;
    let g = k.powf(1.0 / pairs.len() as f64);
    let sections = pairs
        .into_iter()
        .map(|(a1, a2)| Biquad {
            b: [g, 2.0 * g, g],
            a: [1.0, a1, a2],
        })
        .collect();
    Ok(SosFilter { sections, max_pole_radius: max_r })
}

/// Band-pass Butterworth from an order-`order` prototype (so `2*order`
/// poles), edges compensated for double-pass use.
pub fn butter_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<SosFilter> {
    if !(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < fs / 2.0) {
        return Err(Error::Filter(format!(
            "band [{lo_hz}, {hi_hz}] Hz invalid at sample rate {fs} Hz"
        )));
    }
    let wl = prewarp(lo_hz, fs);
    let wh = prewarp(hi_hz, fs);
    let wo = (wl * wh).sqrt();
    let bw = (wh - wl) / double_pass_edge_factor(order);

    // Low-pass prototype -> band-pass: each pole p maps to a pair
    // p' = (bw/2) p +/- sqrt((bw/2 p)^2 - wo^2). Adds `order` zeros at s=0.
    let mut analog_poles = Vec::with_capacity(2 * order);
    for p in butter_prototype_poles(order) {
        let half = p * (bw / 2.0);
        let disc = (half * half - Complex64::new(wo * wo, 0.0)).sqrt();
        analog_poles.push(half + disc);
        analog_poles.push(half - disc);
    }

    // k_analog = bw^order. Digital gain after bilinear:
    // k * prod(2fs - zeros) / prod(2fs - poles), zeros at s=0.
    let fs2 = 2.0 * fs;
    let mut k = Complex64::new(1.0, 0.0);
    for _ in 0..order {
        k *= Complex64::new(bw * fs2, 0.0);
    }
    for p in &analog_poles {
        k /= Complex64::new(fs2, 0.0) - p;
    }
    let k = k.re;

    let digital: Vec<Complex64> = analog_poles.iter().map(|&p| bilinear_pole(p, fs)).collect();
    let max_r = digital.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let pairs = pole_pairs(digital)?;
    // order zeros at z=+1 and order at z=-1: one of each per section,
    // numerator (z-1)(z+1) = z^2 - 1.
    let g = k.abs().powf(1.0 / pairs.len() as f64);
    let sign = if k < 0.0 { -1.0 } else { 1.0 };
    let mut sections: Vec<Biquad> = pairs
        .into_iter()
        .map(|(a1, a2)| Biquad {
            b: [g, 0.0, -g],
            a: [1.0, a1, a2],
        })
        .collect();
    sections[0].b = [sign * sections[0].b[0], 0.0, sign * sections[0].b[2]];
    Ok(SosFilter { sections, max_pole_radius: max_r })
}

/// Zero-phase band-pass around the probe (19.8-20.2 kHz Butterworth,
/// prototype order 4, applied forward-backward).
pub fn bandpass_probe(buffer: &AudioBuffer) -> Result<AudioBuffer> {
    let fs = buffer.sample_rate();
    if fs / 2.0 <= PROBE_BAND_HZ.1 {
        return Err(Error::Aliasing {
            f0_hz: PROBE_BAND_HZ.1,
            sample_rate: fs,
            nyquist: fs / 2.0,
        });
    }
    let x = buffer.mono_samples()?;
    let filt = butter_bandpass(4, PROBE_BAND_HZ.0, PROBE_BAND_HZ.1, fs)?;
    AudioBuffer::mono(filt.filtfilt(x), fs)
}

/// Split a recording into the voice band (low-pass at 10 kHz) and the probe
/// band (19.8-20.2 kHz), both zero-phase and sample-aligned with the input.
pub fn split_bands(buffer: &AudioBuffer) -> Result<(AudioBuffer, AudioBuffer)> {
    let fs = buffer.sample_rate();
    if fs < 44_100.0 {
        return Err(Error::InvalidAudio(format!(
            "split_bands needs sample rate >= 44100 Hz, got {fs}"
        )));
    }
    let x = buffer.mono_samples()?;
    let lp = butter_lowpass(8, VOICE_CUTOFF_HZ, fs)?;
    let voice = AudioBuffer::mono(lp.filtfilt(x), fs)?;
    let probe = bandpass_probe(buffer)?;
    Ok((voice, probe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::generate_probe;
    use std::f64::consts::PI;

    fn tone(fs: f64, f: f64, dur: f64, amp: f64) -> Vec<f64> {
        let n = (fs * dur) as usize;
        (0..n).map(|k| amp * (2.0 * PI * f * k as f64 / fs).sin()).collect()
    }

    /// RMS over the middle half of a signal (edges hold transients).
    fn mid_rms(x: &[f64]) -> f64 {
        let n = x.len();
        let mid = &x[n / 4..3 * n / 4];
        (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt()
    }

    #[test]
    fn bandpass_passes_center_within_one_percent() {
        for &fs in &[48_000.0, 96_000.0, 192_000.0] {
            let input = generate_probe(fs, 20_000.0, 0.5, 1.0).unwrap();
            let out = bandpass_probe(&input).unwrap();
            let ratio = mid_rms(out.mono_samples().unwrap()) / mid_rms(input.mono_samples().unwrap());
            assert!(ratio >= 0.99, "fs={fs}: center-band gain {ratio}");
            assert!(ratio <= 1.01, "fs={fs}: center-band gain {ratio}");
        }
    }

    #[test]
    fn bandpass_edges_are_3db_after_double_pass() {
        let fs = 48_000.0;
        for &edge in &[19_800.0, 20_200.0] {
            let input = AudioBuffer::mono(tone(fs, edge, 1.0, 1.0), fs).unwrap();
            let out = bandpass_probe(&input).unwrap();
            let db = 20.0
                * (mid_rms(out.mono_samples().unwrap()) / mid_rms(input.mono_samples().unwrap()))
                    .log10();
            assert!((db + 3.0).abs() <= 0.5, "{edge} Hz: {db} dB");
        }
    }

    #[test]
    fn bandpass_rejects_dc() {
        let fs = 48_000.0;
        let input = AudioBuffer::mono(vec![1.0; 24_000], fs).unwrap();
        let out = bandpass_probe(&input).unwrap();
        let peak = out.mono_samples().unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(20.0 * peak.log10() <= -80.0, "DC leak {peak}");
    }

    #[test]
    fn bandpass_attenuates_out_of_band_tone() {
        let fs = 48_000.0;
        let in_band = AudioBuffer::mono(tone(fs, 20_000.0, 0.5, 1.0), fs).unwrap();
        let off_band = AudioBuffer::mono(tone(fs, 20_500.0, 0.5, 1.0), fs).unwrap();
        let a = mid_rms(bandpass_probe(&in_band).unwrap().mono_samples().unwrap());
        let b = mid_rms(bandpass_probe(&off_band).unwrap().mono_samples().unwrap());
        let db = 20.0 * (b / a).log10();
        assert!(db <= -20.0, "20.5 kHz only {db} dB below 20.0 kHz");
    }

    #[test]
    fn bandpass_rejects_low_sample_rate() {
        let buf = AudioBuffer::mono(vec![0.0; 1000], 40_000.0).unwrap();
        assert!(bandpass_probe(&buf).is_err());
    }

    #[test]
    fn split_bands_two_tone_separation() {
        let fs = 48_000.0;
        let n = 24_000;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                0.5 * (2.0 * PI * 1_000.0 * t).sin() + 0.5 * (2.0 * PI * 20_000.0 * t).sin()
            })
            .collect();
        let buf = AudioBuffer::mono(x, fs).unwrap();
        let (voice, probe) = split_bands(&buf).unwrap();
        assert_eq!(voice.len(), buf.len());
        assert_eq!(probe.len(), buf.len());

        // Band power via single-bin correlation at each tone frequency.
        let band_power = |sig: &AudioBuffer, f: f64| -> f64 {
            let s = sig.mono_samples().unwrap();
            let mid = &s[n / 4..3 * n / 4];
            let (mut c, mut q) = (0.0, 0.0);
            for (k, &v) in mid.iter().enumerate() {
                let ph = 2.0 * PI * f * k as f64 / fs;
                c += v * ph.cos();
                q += v * ph.sin();
            }
            (c * c + q * q) / mid.len() as f64
        };
        let v_low = band_power(&voice, 1_000.0);
        let v_high = band_power(&voice, 20_000.0);
        let p_high = band_power(&probe, 20_000.0);
        let p_low = band_power(&probe, 1_000.0);
        assert!(10.0 * (v_low / v_high).log10() >= 60.0, "voice rejection");
        assert!(10.0 * (p_high / p_low).log10() >= 60.0, "probe rejection");
    }

    #[test]
    fn split_bands_zero_in_zero_out() {
        let buf = AudioBuffer::mono(vec![0.0; 48_000], 48_000.0).unwrap();
        let (voice, probe) = split_bands(&buf).unwrap();
        assert!(voice.mono_samples().unwrap().iter().all(|&v| v.abs() < 1e-12));
        assert!(probe.mono_samples().unwrap().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn split_bands_idempotent_on_bandlimited_input() {
        let fs = 48_000.0;
        let buf = AudioBuffer::mono(tone(fs, 2_000.0, 0.5, 0.8), fs).unwrap();
        let (voice1, _) = split_bands(&buf).unwrap();
        let (voice2, _) = split_bands(&voice1).unwrap();
        let a = voice1.mono_samples().unwrap();
        let b = voice2.mono_samples().unwrap();
        let n = a.len();
        let num: f64 = a[n / 4..3 * n / 4]
            .iter()
            .zip(&b[n / 4..3 * n / 4])
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        let den: f64 = a[n / 4..3 * n / 4].iter().map(|x| x * x).sum();
        assert!((num / den).sqrt() < 1e-3, "relative drift {}", (num / den).sqrt());
    }

    #[test]
    fn zero_phase_keeps_symmetric_pulse_symmetric() {
        let fs = 48_000.0;
        let n = 8001usize;
        // Hann bump centered exactly in the buffer.
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 - (n as f64 - 1.0) / 2.0) / 400.0;
                if u.abs() <= 1.0 { 0.5 * (1.0 + (PI * u).cos()) } else { 0.0 }
            })
            .collect();
        let filt = butter_lowpass(8, VOICE_CUTOFF_HZ, fs).unwrap();
        let y = filt.filtfilt(&x);
        for i in 0..n {
            assert!(
                (y[i] - y[n - 1 - i]).abs() < 1e-6,
                "asymmetry at {i}: {}",
                (y[i] - y[n - 1 - i]).abs()
            );
        }
    }

    #[test]
    fn response_magnitude_matches_measurement() {
        // Frequency-response helper vs. steady-state tone measurement.
        let fs = 48_000.0;
        let filt = butter_bandpass(4, PROBE_BAND_HZ.0, PROBE_BAND_HZ.1, fs).unwrap();
        for &f in &[19_900.0, 20_000.0, 20_100.0] {
            let gain = filt.response(f, fs).norm();
            let input = tone(fs, f, 0.5, 1.0);
            let out = filt.filter(&input);
            let measured = mid_rms(&out) / mid_rms(&input);
            assert!((gain - measured).abs() < 0.01, "{f} Hz: {gain} vs {measured}");
        }
    }
}
