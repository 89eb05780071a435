//! Delay-and-sum beamforming for circular microphone arrays.
//!
//! Channels are aligned with frequency-domain phase ramps (exact fractional
//! delays; at 48 kHz a 20 kHz wavelength spans only 2.4 samples, so integer
//! shifts would destroy coherence) and averaged.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub const SPEED_OF_SOUND_M_S: f64 = 343.0;
/// Ring radius of the default 7-mic array, meters.
pub const DEFAULT_RADIUS_M: f64 = 0.043;

/// Microphone coordinates in meters; channel order matches position order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub mic_positions_m: Vec<[f64; 3]>,
    pub speed_of_sound: f64,
}

impl ArrayGeometry {
    /// One center microphone plus six spaced uniformly on a circle of
    /// `radius_m` in the array plane.
    pub fn circular(radius_m: f64) -> Self {
        let mut mics = vec![[0.0, 0.0, 0.0]];
        for k in 0..6 {
            let a = 2.0 * PI * k as f64 / 6.0;
            mics.push([radius_m * a.cos(), radius_m * a.sin(), 0.0]);
        }
        Self {
            mic_positions_m: mics,
            speed_of_sound: SPEED_OF_SOUND_M_S,
        }
    }

    pub fn mic_count(&self) -> usize {
        self.mic_positions_m.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mic_count() < 2 {
            return Err(Error::Beamform("need at least 2 microphones".into()));
        }
        if self.speed_of_sound <= 0.0 {
            return Err(Error::Beamform("speed of sound must be positive".into()));
        }
        for i in 0..self.mic_count() {
            for j in i + 1..self.mic_count() {
                let d: f64 = (0..3)
                    .map(|k| (self.mic_positions_m[i][k] - self.mic_positions_m[j][k]).powi(2))
                    .sum();
                if d == 0.0 {
                    return Err(Error::Beamform(format!("microphones {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ArrayGeometry> {
        let g: ArrayGeometry = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        g.validate()?;
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::circular(DEFAULT_RADIUS_M)
    }
}

/// Far-field plane-wave steering direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteeringDirection {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl SteeringDirection {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        if !(0.0..360.0).contains(&azimuth_deg) {
            return Err(Error::Beamform(format!("azimuth {azimuth_deg} outside [0, 360)")));
        }
        if !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(Error::Beamform(format!("elevation {elevation_deg} outside [-90, 90]")));
        }
        Ok(Self { azimuth_deg, elevation_deg })
    }

    /// Unit vector pointing toward the source.
    pub fn unit_vector(&self) -> [f64; 3] {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }
}

/// Arrival delay of each microphone relative to the array origin, seconds.
/// Negative means the wavefront reaches that microphone before the origin.
pub fn tdoa(geometry: &ArrayGeometry, direction: &SteeringDirection) -> Vec<f64> {
    let d = direction.unit_vector();
    geometry
        .mic_positions_m
        .iter()
        .map(|p| -(d[0] * p[0] + d[1] * p[1] + d[2] * p[2]) / geometry.speed_of_sound)
        .collect()
}

/// Advance every channel by its arrival delay and average.
pub fn delay_and_sum(
    channels: &AudioBuffer,
    geometry: &ArrayGeometry,
    direction: &SteeringDirection,
) -> Result<AudioBuffer> {
    geometry.validate()?;
    if channels.channel_count() != geometry.mic_count() {
        return Err(Error::Beamform(format!(
            "{} channels but {} microphones",
            channels.channel_count(),
            geometry.mic_count()
        )));
    }
    let n = channels.len();
    if n == 0 {
        return AudioBuffer::mono(Vec::new(), channels.sample_rate());
    }
    let fs = channels.sample_rate();
    let delays = tdoa(geometry, direction);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (ch, &tau) in channels.channels().iter().zip(&delays) {
        for (b, &s) in buf.iter_mut().zip(ch) {
            *b = Complex64::new(s, 0.0);
        }
        fft.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let f = if 2 * k <= n {
                k as f64 * fs / n as f64
            } else {
                (k as f64 - n as f64) * fs / n as f64
            };
            let mut ramp = Complex64::from_polar(1.0, 2.0 * PI * f * tau);
            if n % 2 == 0 && k == n / 2 {
                // Nyquist bin: keep the spectrum Hermitian.
                ramp = Complex64::new(ramp.re, 0.0);
            }
            *v *= ramp;
        }
        for (a, &v) in acc.iter_mut().zip(buf.iter()) {
            *a += v;
        }
    }
    ifft.process(&mut acc);
    let scale = 1.0 / (n as f64 * channels.channel_count() as f64);
    AudioBuffer::mono(acc.iter().map(|c| c.re * scale).collect(), fs)
}

/// Mean output power of the beam steered at `direction`, computed in the
/// frequency domain from precomputed channel spectra.
fn steered_power(
    spectra: &[Vec<Complex64>],
    delays: &[f64],
    fs: f64,
    n: usize,
    n_channels: usize,
) -> f64 {
    let mut power = 0.0;
    for k in 0..n {
        let f = if 2 * k <= n {
            k as f64 * fs / n as f64
        } else {
            (k as f64 - n as f64) * fs / n as f64
        };
        let mut sum = Complex64::new(0.0, 0.0);
        for (spec, &tau) in spectra.iter().zip(delays) {
            sum += spec[k] * Complex64::from_polar(1.0, 2.0 * PI * f * tau);
        }
        power += sum.norm_sqr();
    }
    power / (n as f64 * n as f64 * (n_channels * n_channels) as f64)
}

/// Grid-search steering directions by beam output power.
///
/// Scans azimuth in `step_deg` increments for each elevation in
/// `elevations_deg`; returns the best direction and its mean power.
pub fn scan_directions(
    channels: &AudioBuffer,
    geometry: &ArrayGeometry,
    step_deg: f64,
    elevations_deg: &[f64],
) -> Result<(SteeringDirection, f64)> {
    geometry.validate()?;
    if channels.channel_count() != geometry.mic_count() {
        return Err(Error::Beamform("channel/microphone count mismatch".into()));
    }
    if step_deg <= 0.0 {
        return Err(Error::Beamform("grid step must be positive".into()));
    }
    let n = channels.len();
    let fs = channels.sample_rate();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let spectra: Vec<Vec<Complex64>> = channels
        .channels()
        .iter()
        .map(|ch| {
            let mut buf: Vec<Complex64> = ch.iter().map(|&s| Complex64::new(s, 0.0)).collect();
            fft.process(&mut buf);
            buf
        })
        .collect();

    let mut best: Option<(SteeringDirection, f64)> = None;
    for &el in elevations_deg {
        let mut az = 0.0;
        while az < 360.0 {
            let dir = SteeringDirection::new(az, el)?;
            let delays = tdoa(geometry, &dir);
            let p = steered_power(&spectra, &delays, fs, n, channels.channel_count());
            if best.map_or(true, |(_, bp)| p > bp) {
                best = Some((dir, p));
            }
            az += step_deg;
        }
    }
    best.ok_or_else(|| Error::Beamform("empty scan grid".into()))
}
