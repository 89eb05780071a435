//! Physics-grounded synthesis of live-speaker and loudspeaker-replay scenes.
//!
//! A scene is a direct-path probe carrier plus one reflector per moving
//! articulator. Each reflector is a phase-modulated copy of the probe whose
//! instantaneous frequency offset is `k * v(t) * cos(angle) * f0 / c` and
//! whose amplitude falls off as `reflectivity / distance(t)`. Live scenes
//! drive three articulator analogs (lips, jaw, tongue); playback scenes
//! drive a single one-dimensional diaphragm. Generated corpora carry WAV
//! audio, alignment files, analytic truth records, and a manifest.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{write_wav, AudioBuffer, WavEncoding};
use crate::error::{Error, Result};
use crate::segment::{save_alignment, PhonemeSegment, SegmentationSource, SegmentedUtterance};

pub const SPEED_OF_SOUND_M_S: f64 = 343.0;
/// Closest range a reflector may attenuate to, meters.
const MIN_RANGE_M: f64 = 0.01;
/// Truth records sample analytic offsets on this (window, hop) grid.
pub const DEFAULT_TRUTH_GRID: (f64, f64) = (0.25, 0.01);

/// Largest within-stroke speed ramp fraction: a gesture with chirp `c`
/// sweeps from `(1 - c/2)` to `(1 + c/2)` times its nominal speed, smearing
/// the Doppler line into a band like a real accelerating articulator.
pub const STROKE_CHIRP_MAX: f64 = 0.5;

/// Doppler offset of a reflector moving at `v` m/s toward the microphone at
/// `angle_deg`, for probe `f0` and proportionality factor `k`.
pub fn analytic_offset_hz(v: f64, angle_deg: f64, f0: f64, k: f64) -> f64 {
    k * v * angle_deg.to_radians().cos() * f0 / SPEED_OF_SOUND_M_S
}

/// One piece of a speed profile. Positive speed moves toward the
/// microphone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpeedSegment {
    /// Linear ramp from `start_m_s` to `end_m_s`.
    Ramp {
        duration_s: f64,
        start_m_s: f64,
        end_m_s: f64,
    },
    /// An articulatory stroke spanning one phoneme: speed ramps from
    /// `(1 - chirp/2)` to `(1 + chirp/2)` times `stroke_m_s` (positive
    /// toward the microphone), plus a constant `bias_m_s`. Consecutive
    /// phonemes alternate stroke direction, so the articulator swings
    /// around its rest position.
    Gesture {
        duration_s: f64,
        stroke_m_s: f64,
        bias_m_s: f64,
        chirp: f64,
    },
}

impl SpeedSegment {
    pub fn duration_s(&self) -> f64 {
        match *self {
            SpeedSegment::Ramp { duration_s, .. } | SpeedSegment::Gesture { duration_s, .. } => {
                duration_s
            }
        }
    }

    fn max_abs_speed(&self) -> f64 {
        match *self {
            SpeedSegment::Ramp { start_m_s, end_m_s, .. } => start_m_s.abs().max(end_m_s.abs()),
            SpeedSegment::Gesture { stroke_m_s, bias_m_s, chirp, .. } => {
                stroke_m_s.abs() * (1.0 + chirp.abs() / 2.0) + bias_m_s.abs()
            }
        }
    }

    fn is_gesture(&self) -> bool {
        matches!(self, SpeedSegment::Gesture { .. })
    }

    /// Speed at `offset` seconds into the segment.
    fn speed_at(&self, offset: f64) -> f64 {
        match *self {
            SpeedSegment::Ramp { duration_s, start_m_s, end_m_s } => {
                start_m_s + (offset / duration_s) * (end_m_s - start_m_s)
            }
            SpeedSegment::Gesture { duration_s, stroke_m_s, bias_m_s, chirp } => {
                let u = offset / duration_s;
                bias_m_s + stroke_m_s * (1.0 + chirp * (u - 0.5))
            }
        }
    }
}

/// One moving reflector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectorSpec {
    pub speed_profile: Vec<SpeedSegment>,
    /// Angle between the motion and the microphone axis, degrees.
    pub angle_deg: f64,
    /// Initial range, meters.
    pub distance_m: f64,
    /// Relative reflection amplitude in (0, 1].
    pub reflectivity: f64,
    /// Scale reflection amplitude by the articulation envelope: full while
    /// gestures run, zero at rest (a resting articulator merges into the
    /// static field), with short raised-cosine transitions.
    pub envelope_gated: bool,
}

impl ReflectorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.distance_m <= 0.0 {
            return Err(Error::Simulation(format!("distance {} m not positive", self.distance_m)));
        }
        if !(0.0 < self.reflectivity && self.reflectivity <= 1.0) {
            return Err(Error::Simulation(format!(
                "reflectivity {} outside (0, 1]",
                self.reflectivity
            )));
        }
        for seg in &self.speed_profile {
            if seg.duration_s() < 0.0 {
                return Err(Error::Simulation("negative segment duration".into()));
            }
            if seg.max_abs_speed() > 1.0 {
                return Err(Error::Simulation(format!(
                    "speed beyond articulator scale (|v| <= 1 m/s): {seg:?}"
                )));
            }
        }
        Ok(())
    }

    /// Speed at time `t`; zero outside the profile.
    pub fn speed_at(&self, t: f64) -> f64 {
        let mut start = 0.0;
        for seg in &self.speed_profile {
            if t < start + seg.duration_s() {
                return seg.speed_at(t - start);
            }
            start += seg.duration_s();
        }
        0.0
    }

    /// Amplitude envelope at time `t`: 1 inside contiguous gesture spans
    /// (with raised-cosine ramps over the span's first and last 40 ms),
    /// 0 at rest. Ungated reflectors always return 1.
    pub fn envelope_at(&self, t: f64) -> f64 {
        if !self.envelope_gated {
            return 1.0;
        }
        const RAMP_S: f64 = 0.04;
        let mut start = 0.0;
        let mut span: Option<(f64, f64)> = None;
        for seg in &self.speed_profile {
            let end = start + seg.duration_s();
            if seg.is_gesture() {
                span = match span {
                    Some((s0, e0)) if (start - e0).abs() < 1e-12 => Some((s0, end)),
                    _ => Some((start, end)),
                };
                if t < end {
                    break;
                }
            } else if t < end {
                return 0.0;
            } else {
                span = None;
            }
            start = end;
        }
        let Some((s0, e0)) = span else { return 0.0 };
        if t < s0 || t >= e0 {
            return 0.0;
        }
        let edge = (t - s0).min(e0 - t);
        let ramp = RAMP_S.min((e0 - s0) / 2.0);
        if edge >= ramp {
            1.0
        } else {
            0.5 * (1.0 - (PI * edge / ramp).cos())
        }
    }
}

/// Render one reflector as a phase-modulated, range-attenuated probe copy.
pub fn render_reflector(
    spec: &ReflectorSpec,
    f0: f64,
    duration_s: f64,
    sample_rate: f64,
    k: f64,
) -> Result<AudioBuffer> {
    if f0 >= sample_rate / 2.0 {
        return Err(Error::Aliasing {
            f0_hz: f0,
            sample_rate,
            nyquist: sample_rate / 2.0,
        });
    }
    if duration_s <= 0.0 {
        return Err(Error::Simulation(format!("duration {duration_s} s not positive")));
    }
    spec.validate()?;
    let n = (duration_s * sample_rate).round() as usize;
    let dt = 1.0 / sample_rate;
    let cos_a = spec.angle_deg.to_radians().cos();
    let mut range_delta = 0.0; // integral of -v(t) cos(angle)
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let v = spec.speed_at(t);
        let distance = (spec.distance_m + range_delta).max(MIN_RANGE_M);
        let amp = spec.reflectivity / distance * spec.envelope_at(t);
        let phase = 2.0 * PI * f0 * (t - k * range_delta / SPEED_OF_SOUND_M_S);
        samples.push(amp * phase.sin());
        range_delta -= v * cos_a * dt;
    }
    AudioBuffer::mono(samples, sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneKind {
    Live,
    Playback,
}

/// One reflector's motion during one phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GesturePulse {
    /// Stroke speed across the phoneme, m/s; positive toward the
    /// microphone.
    pub stroke_m_s: f64,
    /// Constant speed offset across the phoneme, m/s.
    pub bias_m_s: f64,
    /// Within-stroke speed ramp fraction (see [`SpeedSegment::Gesture`]).
    pub chirp: f64,
}

/// Per-phoneme motion: one gesture per reflector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhonemeMotion {
    pub label: String,
    pub duration_s: f64,
    pub gestures: Vec<GesturePulse>,
}

/// A complete renderable scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Reflector geometry; speed profiles are compiled from the script.
    pub reflectors: Vec<ReflectorSpec>,
    pub phoneme_script: Vec<PhonemeMotion>,
    pub probe_f0: f64,
    pub doppler_factor_k: f64,
    /// White-noise level as SNR against the clean mix, or none.
    pub noise_snr_db: Option<f64>,
    pub kind: SceneKind,
    /// Direct-path probe amplitude.
    pub carrier_amplitude: f64,
    /// Amplitude of the voice-band surrogate bursts (0 disables them).
    pub voice_amplitude: f64,
    /// Silent gap between phonemes, seconds.
    pub inter_phoneme_gap_s: f64,
    /// Carrier-only lead-in and tail, seconds.
    pub lead_s: f64,
    pub tail_s: f64,
    pub noise_seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SceneKind::Live => {
                if self.reflectors.len() < 3 {
                    return Err(Error::Simulation(format!(
                        "live scene needs >= 3 reflectors, got {}",
                        self.reflectors.len()
                    )));
                }
            }
            SceneKind::Playback => {
                if self.reflectors.len() != 1 {
                    return Err(Error::Simulation(format!(
                        "playback scene needs exactly 1 reflector, got {}",
                        self.reflectors.len()
                    )));
                }
                if self.reflectors[0].angle_deg != 0.0 {
                    return Err(Error::Simulation(
                        "playback diaphragm motion is one-dimensional (angle 0)".into(),
                    ));
                }
            }
        }
        for r in &self.reflectors {
            r.validate()?;
        }
        for p in &self.phoneme_script {
            if p.duration_s <= 0.0 {
                return Err(Error::Simulation(format!("phoneme '{}' has no duration", p.label)));
            }
            if p.gestures.len() != self.reflectors.len() {
                return Err(Error::Simulation(format!(
                    "phoneme '{}' drives {} reflectors, scene has {}",
                    p.label,
                    p.gestures.len(),
                    self.reflectors.len()
                )));
            }
            for g in &p.gestures {
                let peak = g.stroke_m_s.abs() * (1.0 + g.chirp.abs() / 2.0) + g.bias_m_s.abs();
                if peak > 1.0 {
                    return Err(Error::Simulation(format!(
                        "phoneme '{}' speed beyond articulator scale",
                        p.label
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        let phonemes: f64 = self.phoneme_script.iter().map(|p| p.duration_s).sum();
        let gaps = self.inter_phoneme_gap_s * self.phoneme_script.len().saturating_sub(1) as f64;
        self.lead_s + phonemes + gaps + self.tail_s
    }

    /// Phoneme intervals on the scene timeline.
    pub fn alignment(&self) -> SegmentedUtterance {
        let mut segments = Vec::with_capacity(self.phoneme_script.len());
        let mut t = self.lead_s;
        for (i, p) in self.phoneme_script.iter().enumerate() {
            segments.push(PhonemeSegment {
                label: p.label.clone(),
                start_s: t,
                end_s: t + p.duration_s,
            });
            t += p.duration_s;
            if i + 1 < self.phoneme_script.len() {
                t += self.inter_phoneme_gap_s;
            }
        }
        SegmentedUtterance {
            segments,
            source: SegmentationSource::ExternalAlignment,
            total_duration_s: self.duration_s(),
        }
    }

    /// Reflectors with their speed profiles compiled from the script
    /// (zero speed in the lead, gaps, and tail).
    pub fn compiled_reflectors(&self) -> Vec<ReflectorSpec> {
        self.reflectors
            .iter()
            .enumerate()
            .map(|(r, base)| {
                let rest = |duration_s: f64| SpeedSegment::Ramp {
                    duration_s,
                    start_m_s: 0.0,
                    end_m_s: 0.0,
                };
                let mut profile = vec![rest(self.lead_s)];
                for (i, p) in self.phoneme_script.iter().enumerate() {
                    let g = p.gestures[r];
                    profile.push(SpeedSegment::Gesture {
                        duration_s: p.duration_s,
                        stroke_m_s: g.stroke_m_s,
                        bias_m_s: g.bias_m_s,
                        chirp: g.chirp,
                    });
                    if i + 1 < self.phoneme_script.len() && self.inter_phoneme_gap_s > 0.0 {
                        profile.push(rest(self.inter_phoneme_gap_s));
                    }
                }
                ReflectorSpec {
                    speed_profile: profile,
                    ..base.clone()
                }
            })
            .collect()
    }
}

/// Analytic ground truth for a rendered scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneTruth {
    pub f0_hz: f64,
    pub doppler_factor_k: f64,
    pub frame_centers_s: Vec<f64>,
    /// Per reflector, the analytic offset at each frame center, Hz.
    pub reflector_offsets_hz: Vec<Vec<f64>>,
    /// Per phoneme, the scripted gesture per reflector.
    pub phoneme_gestures: Vec<Vec<GesturePulse>>,
}

/// Sample the analytic per-reflector offsets on an STFT frame grid.
pub fn scene_truth(scene: &SceneSpec, window_s: f64, hop_s: f64) -> SceneTruth {
    let duration = scene.duration_s();
    let n_frames = if duration >= window_s {
        ((duration - window_s) / hop_s).floor() as usize + 1
    } else {
        0
    };
    let compiled = scene.compiled_reflectors();
    let frame_centers_s: Vec<f64> = (0..n_frames).map(|k| k as f64 * hop_s + window_s / 2.0).collect();
    let reflector_offsets_hz = compiled
        .iter()
        .map(|r| {
            frame_centers_s
                .iter()
                .map(|&t| analytic_offset_hz(r.speed_at(t), r.angle_deg, scene.probe_f0, scene.doppler_factor_k))
                .collect()
        })
        .collect();
    SceneTruth {
        f0_hz: scene.probe_f0,
        doppler_factor_k: scene.doppler_factor_k,
        frame_centers_s,
        reflector_offsets_hz,
        phoneme_gestures: scene.phoneme_script.iter().map(|p| p.gestures.clone()).collect(),
    }
}

/// Band-limited surrogate for the audible voice: one tone burst per phoneme
/// below 10 kHz, frequency derived from the label.
fn voice_burst_freq(label: &str) -> f64 {
    let mut acc: u64 = 5381;
    for b in label.bytes() {
        acc = acc.wrapping_mul(33).wrapping_add(b as u64);
    }
    300.0 + (acc % 3_100) as f64
}

/// Render the full scene: reflectors, direct-path carrier, voice surrogate,
/// optional noise. Also returns the alignment and the analytic truth
/// sampled on the default frame grid.
pub fn render_scene(
    scene: &SceneSpec,
    sample_rate: f64,
) -> Result<(AudioBuffer, SegmentedUtterance, SceneTruth)> {
    scene.validate()?;
    let duration = scene.duration_s();
    let n = (duration * sample_rate).round() as usize;
    let mut mix = vec![0.0f64; n];

    // Direct-path carrier.
    let w0 = 2.0 * PI * scene.probe_f0 / sample_rate;
    if scene.carrier_amplitude != 0.0 {
        for (i, v) in mix.iter_mut().enumerate() {
            *v = scene.carrier_amplitude * (w0 * i as f64).sin();
        }
    }

    // Reflectors.
    for spec in scene.compiled_reflectors() {
        let r = render_reflector(&spec, scene.probe_f0, duration, sample_rate, scene.doppler_factor_k)?;
        for (v, s) in mix.iter_mut().zip(r.mono_samples()?) {
            *v += s;
        }
    }

    // Voice surrogate bursts with a raised-cosine envelope.
    if scene.voice_amplitude != 0.0 {
        for seg in &scene.alignment().segments {
            let f = voice_burst_freq(&seg.label);
            let i0 = (seg.start_s * sample_rate).round() as usize;
            let i1 = ((seg.end_s * sample_rate).round() as usize).min(n);
            let span = (i1 - i0) as f64;
            for i in i0..i1 {
                let u = (i - i0) as f64 / span;
                let env = 0.5 * (1.0 - (2.0 * PI * u).cos());
                mix[i] += scene.voice_amplitude * env * (2.0 * PI * f * i as f64 / sample_rate).sin();
            }
        }
    }

    // Additive white noise at the requested SNR, seeded.
    if let Some(snr_db) = scene.noise_snr_db {
        let signal_power = mix.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let noise_rms = signal_power.sqrt() * 10f64.powf(-snr_db / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(scene.noise_seed);
        let mut pending: Option<f64> = None;
        for v in mix.iter_mut() {
            // Box-Muller pairs keep the draw count deterministic.
            let z = match pending.take() {
                Some(z) => z,
                None => {
                    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    let r = (-2.0 * u1.ln()).sqrt();
                    pending = Some(r * (2.0 * PI * u2).sin());
                    r * (2.0 * PI * u2).cos()
                }
            };
            *v += noise_rms * z;
        }
    }

    let audio = AudioBuffer::mono(mix, sample_rate)?;
    let alignment = scene.alignment();
    let truth = scene_truth(scene, DEFAULT_TRUTH_GRID.0, DEFAULT_TRUTH_GRID.1);
    Ok((audio, alignment, truth))
}

fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut acc = master ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        acc ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(acc << 6).wrapping_add(acc >> 2);
        acc = acc.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        acc ^= acc >> 27;
    }
    acc
}

/// Deterministic per-reflector, per-phoneme speed offsets of magnitude
/// `speed_jitter` (seeded signs) applied as gesture biases, clamped to the
/// articulator-scale cap. Models same-user trial variation (small jitter)
/// or mimicry residue.
pub fn perturb_scene(scene: &SceneSpec, speed_jitter: f64, seed: u64) -> Result<SceneSpec> {
    if speed_jitter < 0.0 {
        return Err(Error::Simulation(format!("negative jitter {speed_jitter}")));
    }
    if speed_jitter == 0.0 {
        return Ok(scene.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    // Keep chirped stroke peaks inside the articulator-scale cap.
    let cap = 1.0 / (1.0 + STROKE_CHIRP_MAX / 2.0)
        - scene.phoneme_script.iter().flat_map(|p| &p.gestures).fold(0.0f64, |m, g| {
            m.max(g.bias_m_s.abs())
        });
    for p in out.phoneme_script.iter_mut() {
        for g in p.gestures.iter_mut() {
            let delta: f64 = if rng.gen::<bool>() { speed_jitter } else { -speed_jitter };
            g.stroke_m_s = (g.stroke_m_s + delta).clamp(-cap, cap);
        }
    }
    Ok(out)
}

/// Deterministic per-gesture chirp offsets of magnitude `chirp_jitter`
/// (seeded signs), clamped to the chirp cap: errors in the within-stroke
/// acceleration pattern, which an imitator cannot observe precisely.
pub fn perturb_dynamics(scene: &SceneSpec, chirp_jitter: f64, seed: u64) -> Result<SceneSpec> {
    if chirp_jitter < 0.0 {
        return Err(Error::Simulation(format!("negative chirp jitter {chirp_jitter}")));
    }
    if chirp_jitter == 0.0 {
        return Ok(scene.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    for p in out.phoneme_script.iter_mut() {
        for g in p.gestures.iter_mut() {
            let delta: f64 = if rng.gen::<bool>() { chirp_jitter } else { -chirp_jitter };
            g.chirp = (g.chirp + delta).clamp(-STROKE_CHIRP_MAX, STROKE_CHIRP_MAX);
        }
    }
    Ok(out)
}

/// Deterministic per-phoneme duration scaling within `±frac` (seeded),
/// modeling tempo variation: small for a user's own repetitions, larger for
/// an attacker imitating someone else's speech rhythm. Playback attacks
/// replay a recording and keep timing exactly.
pub fn perturb_timing(scene: &SceneSpec, frac: f64, seed: u64) -> Result<SceneSpec> {
    if frac < 0.0 || frac >= 1.0 {
        return Err(Error::Simulation(format!("timing jitter {frac} outside [0, 1)")));
    }
    if frac == 0.0 {
        return Ok(scene.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = scene.clone();
    for p in out.phoneme_script.iter_mut() {
        p.duration_s *= 1.0 + rng.gen_range(-frac..frac);
    }
    Ok(out)
}

/// Articulator analogs for live scenes: (angle deg, range m, target relative
/// amplitude, gesture peak-speed range m/s).
///
/// The amplitude tiers put each articulator's line into its own normalized
/// energy level once the static carrier is cancelled (lips strongest and
/// nearest, tongue weakest and farthest), and the speed tiers keep the
/// three Doppler lines apart by more than the 250 ms window's mainlobe so
/// their interference stays mild.
const ARTICULATORS: [(f64, f64, f64, (f64, f64)); 3] = [
    (0.0, 2.50, 0.200, (0.66, 0.92)),  // lips: nearest, strongest, fastest
    (30.0, 2.80, 0.160, (0.36, 0.61)), // jaw
    (45.0, 3.10, 0.110, (0.20, 0.31)), // tongue analog
];

const CARRIER_AMPLITUDE: f64 = 0.2;
const VOICE_AMPLITUDE: f64 = 0.1;
const PHONEME_POOL: [&str; 12] =
    ["aa", "iy", "uw", "eh", "s", "t", "k", "m", "n", "l", "r", "d"];

/// Seeded base live scene for one synthetic user.
pub fn base_live_scene(master_seed: u64, user_idx: usize) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, &[1, user_idx as u64]));
    let n_phonemes = 6;
    let mut pool: Vec<&str> = PHONEME_POOL.to_vec();
    let mut script = Vec::with_capacity(n_phonemes);
    // Alternating stroke direction swings each articulator around its rest
    // position; the starting direction is part of the user's signature.
    let mut signs: Vec<f64> = (0..ARTICULATORS.len())
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    for _ in 0..n_phonemes {
        let label = pool.remove(rng.gen_range(0..pool.len())).to_string();
        let duration_s = rng.gen_range(0.28..0.36);
        let gestures = ARTICULATORS
            .iter()
            .enumerate()
            .map(|(r, &(_, _, _, (lo, hi)))| GesturePulse {
                stroke_m_s: signs[r] * rng.gen_range(lo..hi),
                bias_m_s: 0.0,
                chirp: rng.gen_range(-STROKE_CHIRP_MAX..STROKE_CHIRP_MAX),
            })
            .collect();
        for s in signs.iter_mut() {
            *s = -*s;
        }
        script.push(PhonemeMotion { label, duration_s, gestures });
    }
    SceneSpec {
        reflectors: ARTICULATORS
            .iter()
            .map(|&(angle_deg, distance_m, amp, _)| ReflectorSpec {
                speed_profile: Vec::new(),
                angle_deg,
                distance_m,
                reflectivity: amp * distance_m,
                envelope_gated: true,
            })
            .collect(),
        phoneme_script: script,
        probe_f0: 20_000.0,
        // Monostatic reflection: the probe travels to the articulator and
        // back, so the shift is twice the one-way value.
        doppler_factor_k: 2.0,
        noise_snr_db: Some(50.0),
        kind: SceneKind::Live,
        carrier_amplitude: CARRIER_AMPLITUDE,
        voice_amplitude: VOICE_AMPLITUDE,
        inter_phoneme_gap_s: 0.0,
        lead_s: 0.30,
        tail_s: 0.25,
        noise_seed: 0,
    }
}

/// Single-diaphragm playback of a live scene: one reflector at angle 0
/// driven by the aggregate articulator motion.
pub fn playback_of(live: &SceneSpec) -> SceneSpec {
    let n = live.reflectors.len() as f64;
    let script = live
        .phoneme_script
        .iter()
        .map(|p| {
            let agg = p.gestures.iter().fold(
                GesturePulse { stroke_m_s: 0.0, bias_m_s: 0.0, chirp: 0.0 },
                |acc, g| GesturePulse {
                    stroke_m_s: acc.stroke_m_s + g.stroke_m_s / n,
                    bias_m_s: acc.bias_m_s + g.bias_m_s / n,
                    chirp: acc.chirp + g.chirp / n,
                },
            );
            PhonemeMotion {
                label: p.label.clone(),
                duration_s: p.duration_s,
                gestures: vec![agg],
            }
        })
        .collect();
    SceneSpec {
        reflectors: vec![ReflectorSpec {
            speed_profile: Vec::new(),
            angle_deg: 0.0,
            distance_m: 2.60,
            reflectivity: 0.17 * 2.60,
            envelope_gated: true,
        }],
        phoneme_script: script,
        kind: SceneKind::Playback,
        ..live.clone()
    }
}

/// Ground-truth roles in a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusKind {
    Enroll,
    Genuine,
    Playback,
    Mimicry,
}

impl CorpusKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorpusKind::Enroll => "enroll",
            CorpusKind::Genuine => "genuine",
            CorpusKind::Playback => "playback",
            CorpusKind::Mimicry => "mimicry",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "enroll" => Ok(CorpusKind::Enroll),
            "genuine" => Ok(CorpusKind::Genuine),
            "playback" => Ok(CorpusKind::Playback),
            "mimicry" => Ok(CorpusKind::Mimicry),
            other => Err(Error::Simulation(format!("unknown corpus kind '{other}'"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CorpusKind::Enroll | CorpusKind::Genuine => "live",
            CorpusKind::Playback | CorpusKind::Mimicry => "attack",
        }
    }
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    /// WAV path relative to the corpus root.
    pub path: String,
    pub user: String,
    pub kind: CorpusKind,
}

#[derive(Debug, Clone)]
pub struct CorpusParams {
    pub n_users: usize,
    /// Enrollment renderings and genuine verification renderings per user.
    pub n_trials: usize,
    /// Playback attacks and mimicry attacks per user.
    pub n_attacks: usize,
    pub seed: u64,
    pub sample_rate: f64,
    /// Jitter for same-user trial variation, m/s.
    pub trial_jitter: f64,
    /// Residual jitter of a mimicking attacker, m/s.
    pub mimicry_jitter: f64,
    /// Tempo variation of a user's own repetitions (duration fraction).
    pub trial_timing_jitter: f64,
    /// Tempo error of a mimicking attacker (duration fraction).
    pub mimicry_timing_jitter: f64,
    /// Within-stroke acceleration variation of a user's own repetitions.
    pub trial_chirp_jitter: f64,
    /// Acceleration-pattern error of a mimicking attacker.
    pub mimicry_chirp_jitter: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            n_users: 2,
            n_trials: 3,
            n_attacks: 1,
            seed: 0,
            sample_rate: 48_000.0,
            trial_jitter: 0.01,
            mimicry_jitter: 0.04,
            trial_timing_jitter: 0.005,
            mimicry_timing_jitter: 0.06,
            trial_chirp_jitter: 0.02,
            mimicry_chirp_jitter: 0.15,
        }
    }
}

/// Generate a labeled corpus under `root`: per scene a WAV, an alignment
/// CSV, and a truth JSON, plus `manifest.csv` rows `path,user,kind,label`.
/// Fully deterministic given the parameters.
pub fn generate_corpus(root: &Path, params: &CorpusParams) -> Result<Vec<CorpusEntry>> {
    if params.n_users < 2 {
        return Err(Error::Simulation(format!("need >= 2 users, got {}", params.n_users)));
    }
    if params.n_trials < 3 {
        return Err(Error::Simulation(format!("need >= 3 trials, got {}", params.n_trials)));
    }
    if params.n_attacks < 1 {
        return Err(Error::Simulation(format!("need >= 1 attack, got {}", params.n_attacks)));
    }
    std::fs::create_dir_all(root)?;

    let mut jobs: Vec<(String, CorpusKind, usize, SceneSpec)> = Vec::new();
    for u in 0..params.n_users {
        let user = format!("user{u:02}");
        let base = base_live_scene(params.seed, u);
        let trial_variant = |kind_tag: u64, i: usize| -> Result<SceneSpec> {
            let seed = derive_seed(params.seed, &[kind_tag, u as u64, i as u64]);
            let s = perturb_scene(&base, params.trial_jitter, seed)?;
            let s = perturb_dynamics(&s, params.trial_chirp_jitter, derive_seed(seed, &[13]))?;
            perturb_timing(&s, params.trial_timing_jitter, derive_seed(seed, &[11]))
        };
        for i in 0..params.n_trials {
            jobs.push((user.clone(), CorpusKind::Enroll, i, trial_variant(2, i)?));
            jobs.push((user.clone(), CorpusKind::Genuine, i, trial_variant(3, i)?));
        }
        for i in 0..params.n_attacks {
            // A replayed recording keeps the victim's timing exactly.
            let p = perturb_scene(
                &playback_of(&base),
                params.trial_jitter,
                derive_seed(params.seed, &[4, u as u64, i as u64]),
            )?;
            jobs.push((user.clone(), CorpusKind::Playback, i, p));
            let seed = derive_seed(params.seed, &[5, u as u64, i as u64]);
            let m = perturb_scene(&base, params.mimicry_jitter, seed)?;
            let m = perturb_dynamics(&m, params.mimicry_chirp_jitter, derive_seed(seed, &[13]))?;
            let m = perturb_timing(&m, params.mimicry_timing_jitter, derive_seed(seed, &[11]))?;
            jobs.push((user.clone(), CorpusKind::Mimicry, i, m));
        }
    }

    let entries: Vec<CorpusEntry> = jobs
        .into_par_iter()
        .map(|(user, kind, idx, mut scene)| -> Result<CorpusEntry> {
            scene.noise_seed = derive_seed(params.seed, &[7, kind as u64, idx as u64, hash_str(&user)]);
            let dir = root.join(&user);
            std::fs::create_dir_all(&dir)?;
            let stem = format!("{}_{idx}", kind.as_str());
            let (audio, alignment, truth) = render_scene(&scene, params.sample_rate)?;
            write_wav(&dir.join(format!("{stem}.wav")), &audio, WavEncoding::Float32)?;
            save_alignment(&dir.join(format!("{stem}.align.csv")), &alignment)?;
            std::fs::write(
                dir.join(format!("{stem}.truth.json")),
                serde_json::to_string_pretty(&truth)?,
            )?;
            Ok(CorpusEntry {
                path: format!("{user}/{stem}.wav"),
                user,
                kind,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut manifest = String::from("path,user,kind,label\n");
    for e in &entries {
        writeln!(manifest, "{},{},{},{}", e.path, e.user, e.kind.as_str(), e.kind.label())
            .expect("string write cannot fail");
    }
    std::fs::write(root.join("manifest.csv"), manifest)?;
    Ok(entries)
}

fn hash_str(s: &str) -> u64 {
    s.bytes().fold(1469598103934665603u64, |acc, b| {
        (acc ^ b as u64).wrapping_mul(1099511628211)
    })
}

/// Parse a corpus manifest written by [`generate_corpus`].
pub fn read_manifest(root: &Path) -> Result<Vec<CorpusEntry>> {
    let text = std::fs::read_to_string(root.join("manifest.csv"))?;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Simulation(format!("manifest line {} malformed", i + 1)));
        }
        entries.push(CorpusEntry {
            path: fields[0].to_string(),
            user: fields[1].to_string(),
            kind: CorpusKind::from_str(fields[2])?,
        });
    }
    Ok(entries)
}

/// Multichannel plane wave across a microphone array, with optional
/// independent per-channel noise: the beamforming test scene.
pub fn render_plane_wave(
    geometry: &crate::beamform::ArrayGeometry,
    direction: &crate::beamform::SteeringDirection,
    freq_hz: f64,
    sample_rate: f64,
    duration_s: f64,
    amplitude: f64,
    noise: Option<(f64, u64)>,
) -> Result<AudioBuffer> {
    geometry.validate()?;
    let n = (duration_s * sample_rate).round() as usize;
    let d = direction.unit_vector();
    let mut channels: Vec<Vec<f64>> = geometry
        .mic_positions_m
        .iter()
        .map(|p| {
            let advance = (d[0] * p[0] + d[1] * p[1] + d[2] * p[2]) / geometry.speed_of_sound;
            (0..n)
                .map(|i| amplitude * (2.0 * PI * freq_hz * (i as f64 / sample_rate + advance)).sin())
                .collect()
        })
        .collect();
    if let Some((noise_amp, seed)) = noise {
        for (c, ch) in channels.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[c as u64]));
            for v in ch.iter_mut() {
                *v += noise_amp * rng.gen_range(-1.0..1.0);
            }
        }
    }
    AudioBuffer::new(channels, sample_rate)
}
