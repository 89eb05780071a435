//! Acceptance suite: every release gate runs here, one pass/fail line per
//! criterion (run with `--nocapture` to see them).
//!
//! The gates rest on analytic oracles and the synthetic corpus:
//!
//! 1. Doppler physics: measured dominant offsets match `k*v*cos(a)*f0/c`
//!    within one bin across speeds, angles, and sample rates.
//! 2. Formula oracles: correlation and weighting match brute-force
//!    transcriptions of their defining formulas.
//! 3. DWT round trip: decompose/reconstruct is the identity.
//! 4. End-to-end EER on the synthetic corpus, combined-feature best.
//! 5. Playback attacks separate completely per user.
//! 6. Delay-and-sum SNR gain near 10*log10(7) and steering maximization.
//! 7. EER robustness between 48 kHz and 192 kHz.
//! 8. Bit-exact simulation and stable verification output.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use echolive_core::beamform::{delay_and_sum, scan_directions, ArrayGeometry, SteeringDirection};
use echolive_core::config::{FeatureMode, RunConfig};
use echolive_core::features::{ContourBlock, CONTOUR_COUNT};
use echolive_core::matching::{
    calibrate_threshold, pearson, phoneme_weight, weighted_similarity, PhonemeTemplate,
    WEIGHT_EPSILON, WEIGHT_MAX,
};
use echolive_core::pipeline::{score_corpus, split_scores, ScoredTrial};
use echolive_core::sim::{
    analytic_offset_hz, generate_corpus, render_plane_wave, render_reflector, CorpusKind,
    CorpusParams, ReflectorSpec, SpeedSegment,
};
use echolive_core::spectrum::probe_band_spectrogram;
use echolive_core::wavelet::{denoise_contour_set, dwt_decompose, dwt_reconstruct, WaveletKind};

const CORPUS_SEED: u64 = 20_260_811;

fn pass(name: &str, details: &str) {
    println!("ACCEPTANCE {name}: PASS ({details})");
}

// ---------------------------------------------------------------------------
// 1. Doppler physics oracle
// ---------------------------------------------------------------------------

#[test]
fn doppler_physics_oracle() {
    let start = Instant::now();
    let f0 = 20_000.0;
    let k = 1.0;
    let duration = 0.8;
    let mut checked = 0;
    for &fs in &[48_000.0, 96_000.0, 192_000.0] {
        for &v in &[0.02, 0.05, 0.1, 0.2] {
            for &angle in &[0.0, 30.0, 60.0] {
                let spec = ReflectorSpec {
                    speed_profile: vec![SpeedSegment::Ramp {
                        duration_s: duration,
                        start_m_s: v,
                        end_m_s: v,
                    }],
                    angle_deg: angle,
                    distance_m: 0.4,
                    reflectivity: 0.05,
                    envelope_gated: false,
                };
                let buffer = render_reflector(&spec, f0, duration, fs, k).unwrap();
                let spectrum =
                    probe_band_spectrogram(&buffer, f0, 0.25, 0.01, 1.0, 200.0).unwrap();
                let expected = analytic_offset_hz(v, angle, f0, k);
                // Interior frame, away from render edges.
                let frame = &spectrum.magnitudes[spectrum.frame_count() / 2];
                let peak = frame
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .unwrap()
                    .0;
                let measured = spectrum.bin_freq_hz(peak) - f0;
                assert!(
                    (measured - expected).abs() <= spectrum.bin_width_hz,
                    "fs={fs} v={v} angle={angle}: measured {measured:.3} Hz vs {expected:.3} Hz"
                );
                checked += 1;
            }
        }
    }
    // Anchor: 1 Hz of shift corresponds to 0.017 m/s at a 20 kHz probe.
    let anchor = analytic_offset_hz(0.017, 0.0, f0, k);
    assert!((anchor - 1.0).abs() < 0.01, "sensitivity anchor {anchor}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "oracle took {elapsed:?}, budget 2 min");
    pass(
        "doppler-physics-oracle",
        &format!("{checked} speed/angle/rate combinations within one bin, {elapsed:.2?}"),
    );
}

// ---------------------------------------------------------------------------
// 2. Formula oracles
// ---------------------------------------------------------------------------

#[test]
fn formula_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);

    // Pearson vs. brute-force transcription, 1000 random pairs.
    for i in 0..1000 {
        let n = rng.gen_range(2..64);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let Ok(r) = pearson(&a, &b) else { continue };
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let mut num = 0.0;
        for j in 0..n {
            num += (a[j] - ma) * (b[j] - mb);
        }
        let std = |x: &[f64], m: f64| {
            (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        };
        let oracle = num / ((n as f64 - 1.0) * std(&a, ma) * std(&b, mb));
        assert!((r - oracle).abs() < 1e-12, "pair {i}: {r} vs {oracle}");
    }

    // Weighted similarity vs. brute-force evaluation, 1000 random cases.
    for case in 0..1000 {
        let phonemes = rng.gen_range(1..4usize);
        let mut templates = std::collections::BTreeMap::new();
        let mut test = Vec::new();
        let mut specs = Vec::new();
        for p in 0..phonemes {
            let len = rng.gen_range(4..16usize);
            let weight = rng.gen_range(0.1..5.0);
            let mut mk = || -> ContourBlock {
                ContourBlock {
                    contours: (0..CONTOUR_COUNT)
                        .map(|_| (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect())
                        .collect(),
                }
            };
            let a = mk();
            let b = mk();
            let label = format!("p{p}");
            templates.insert(
                label.clone(),
                PhonemeTemplate {
                    label: label.clone(),
                    block: b.clone(),
                    weight,
                    trial_count: 2,
                },
            );
            test.push((label, a.clone()));
            specs.push((a, b, weight));
        }
        let (per_contour, _) = weighted_similarity(&test, &templates).unwrap();
        for c in 0..CONTOUR_COUNT {
            let (mut num, mut da, mut db) = (0.0f64, 0.0f64, 0.0f64);
            for (a, b, w) in &specs {
                let (x, y) = (&a.contours[c], &b.contours[c]);
                let mx = x.iter().sum::<f64>() / x.len() as f64;
                let my = y.iter().sum::<f64>() / y.len() as f64;
                for t in 0..x.len() {
                    num += w * (x[t] - mx) * w * (y[t] - my);
                    da += (w * (x[t] - mx)).powi(2);
                    db += (w * (y[t] - my)).powi(2);
                }
            }
            let oracle = num / (da.sqrt() * db.sqrt());
            let got = per_contour[c].unwrap();
            assert!((got - oracle).abs() < 1e-12, "case {case} contour {c}: {got} vs {oracle}");
        }
    }

    // Phoneme weight vs. hand enumeration.
    let block = |v: f64, len: usize| ContourBlock {
        contours: vec![vec![v; len]; CONTOUR_COUNT],
    };
    // Two 10-frame trials differing by 0.1 on all 11 contours:
    // area = 10 * 0.1 * 11 = 11, w = 20 / (eps + 11).
    let w = phoneme_weight(&[block(0.5, 10), block(0.6, 10)], &[10, 10]).unwrap();
    assert!((w - 20.0 / (WEIGHT_EPSILON + 11.0)).abs() < 1e-9);
    // Identical trials cap at the maximum weight.
    let w = phoneme_weight(&[block(0.5, 10), block(0.5, 10)], &[10, 10]).unwrap();
    assert!((w - WEIGHT_MAX).abs() < 1e-9);
    // Three 6-frame trials at 0.0 / 0.3 / 0.5: pairwise gaps 0.3, 0.5,
    // 0.2 summed over 6 frames and 11 contours -> area = 66; w = 18/66+eps.
    let w = phoneme_weight(
        &[block(0.0, 6), block(0.3, 6), block(0.5, 6)],
        &[6, 6, 6],
    )
    .unwrap();
    assert!((w - 18.0 / (WEIGHT_EPSILON + 66.0)).abs() < 1e-9, "{w}");

    pass("formula-oracles", "pearson, weighted similarity, and weights match brute force");
}

// ---------------------------------------------------------------------------
// 3. DWT round trip
// ---------------------------------------------------------------------------

#[test]
fn dwt_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for n in 8..=512usize {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = dwt_decompose(&x, 3, WaveletKind::Db4).unwrap();
        let back = dwt_reconstruct(&d);
        assert_eq!(back.len(), n);
        let scale = x.iter().fold(1e-30f64, |m, v| m.max(v.abs()));
        let err = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
            / scale;
        assert!(err < 1e-9, "length {n}: relative error {err}");
        worst = worst.max(err);
    }

    // Multiplier-0 denoising is the identity on contour sets.
    let set = echolive_core::features::ContourSet {
        energy_band_freq: (0..6)
            .map(|c| (0..50).map(|t| ((t + c) as f64 * 0.37).sin() * 30.0).collect())
            .collect(),
        freq_band_energy: (0..5)
            .map(|c| (0..50).map(|t| ((t * c + 3) as f64 * 0.11).cos() * 0.4 + 0.5).collect())
            .collect(),
        frames_per_phoneme: vec![50],
        f0_hz: 20_000.0,
        bin_width_hz: 1.0,
    };
    let out = denoise_contour_set(&set, 0.0, 3, WaveletKind::Db4).unwrap();
    for c in 0..CONTOUR_COUNT {
        for (a, b) in set.contour(c).iter().zip(out.contour(c)) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
    pass("dwt-round-trip", &format!("lengths 8..512 reconstruct, worst rel err {worst:.2e}"));
}

// ---------------------------------------------------------------------------
// 4/5/7. Corpus EER criteria (shared fixtures)
// ---------------------------------------------------------------------------

struct CorpusEval {
    trials: Vec<ScoredTrial>,
    eer_combined: f64,
    eer_energy: f64,
    eer_frequency: f64,
    elapsed_s: f64,
}

fn eval_corpus(sample_rate: f64) -> CorpusEval {
    let start = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let params = CorpusParams {
        n_users: 10,
        n_trials: 10,
        n_attacks: 10,
        seed: CORPUS_SEED,
        sample_rate,
        ..Default::default()
    };
    assert_eq!(params.mimicry_jitter, 0.04, "mimicry jitter pinned by the gate");
    generate_corpus(dir.path(), &params).expect("corpus generation");
    let mut cfg = RunConfig::default();
    cfg.sample_rate = sample_rate;
    let trials = score_corpus(dir.path(), &cfg).expect("corpus scoring");

    let eer_of = |mode: FeatureMode| -> f64 {
        let (genuine, attack) = split_scores(&trials, mode).unwrap();
        assert_eq!(genuine.len(), 100);
        assert_eq!(attack.len(), 200);
        calibrate_threshold(&genuine, &attack).unwrap().1
    };
    CorpusEval {
        eer_combined: eer_of(FeatureMode::Combined),
        eer_energy: eer_of(FeatureMode::EnergyOnly),
        eer_frequency: eer_of(FeatureMode::FrequencyOnly),
        trials,
        elapsed_s: start.elapsed().as_secs_f64(),
    }
}

fn eval_48k() -> &'static CorpusEval {
    static EVAL: OnceLock<CorpusEval> = OnceLock::new();
    EVAL.get_or_init(|| eval_corpus(48_000.0))
}

fn eval_192k() -> &'static CorpusEval {
    static EVAL: OnceLock<CorpusEval> = OnceLock::new();
    EVAL.get_or_init(|| eval_corpus(192_000.0))
}

#[test]
fn synthetic_end_to_end_eer() {
    let eval = eval_48k();
    assert!(
        eval.elapsed_s < 600.0,
        "corpus pipeline took {:.0} s, budget 10 min",
        eval.elapsed_s
    );
    assert!(
        eval.eer_combined <= 0.05,
        "combined EER {:.4} above 5%",
        eval.eer_combined
    );
    let floor = eval.eer_energy.min(eval.eer_frequency);
    assert!(
        eval.eer_combined <= floor + 1e-12,
        "combined {:.4} worse than best single family {:.4}",
        eval.eer_combined,
        floor
    );
    pass(
        "synthetic-end-to-end-eer",
        &format!(
            "combined {:.3}, energy {:.3}, frequency {:.3}, {:.0} s",
            eval.eer_combined, eval.eer_energy, eval.eer_frequency, eval.elapsed_s
        ),
    );
}

#[test]
fn playback_separability() {
    let eval = eval_48k();
    let mut users: Vec<String> = eval.trials.iter().map(|t| t.user.clone()).collect();
    users.sort();
    users.dedup();
    let mut worst_margin = f64::INFINITY;
    for user in &users {
        let genuine_min = eval
            .trials
            .iter()
            .filter(|t| &t.user == user && t.kind == CorpusKind::Genuine)
            .map(|t| t.score(FeatureMode::Combined).unwrap())
            .fold(f64::INFINITY, f64::min);
        let playback_max = eval
            .trials
            .iter()
            .filter(|t| &t.user == user && t.kind == CorpusKind::Playback)
            .map(|t| t.score(FeatureMode::Combined).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            playback_max < genuine_min,
            "{user}: playback reaches {playback_max:.4}, genuine floor {genuine_min:.4}"
        );
        worst_margin = worst_margin.min(genuine_min - playback_max);
    }
    pass(
        "playback-separability",
        &format!("100% separation for {} users, worst margin {worst_margin:.4}", users.len()),
    );
}

#[test]
fn sampling_rate_robustness() {
    let low = eval_48k();
    let high = eval_192k();
    let gap = low.eer_combined - high.eer_combined;
    assert!(
        gap <= 0.03,
        "48 kHz EER {:.4} exceeds 192 kHz EER {:.4} by more than 3 points",
        low.eer_combined,
        high.eer_combined
    );
    pass(
        "sampling-rate-robustness",
        &format!(
            "EER 48k {:.3} vs 192k {:.3} (gap {:+.3})",
            low.eer_combined, high.eer_combined, gap
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Beamforming gain
// ---------------------------------------------------------------------------

#[test]
fn beamforming_gain() {
    let geometry = ArrayGeometry::default();
    let fs = 48_000.0;
    let n = 48_000;
    let truth = SteeringDirection::new(85.0, 0.0).unwrap();
    let signal =
        render_plane_wave(&geometry, &truth, 20_000.0, fs, n as f64 / fs, 0.5, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let noise = echolive_core::audio::AudioBuffer::new(
        (0..7)
            .map(|_| (0..n).map(|_| rng.gen_range(-0.5f64..0.5)).collect())
            .collect(),
        fs,
    )
    .unwrap();

    let power = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let beam_signal = delay_and_sum(&signal, &geometry, &truth).unwrap();
    let beam_noise = delay_and_sum(&noise, &geometry, &truth).unwrap();
    let snr_single = power(signal.channel(0)) / power(noise.channel(0));
    let snr_beam =
        power(beam_signal.mono_samples().unwrap()) / power(beam_noise.mono_samples().unwrap());
    let gain_db = 10.0 * (snr_beam / snr_single).log10();
    let expected = 10.0 * 7.0f64.log10();
    assert!(
        (gain_db - expected).abs() <= 1.0,
        "SNR gain {gain_db:.2} dB vs expected {expected:.2} dB"
    );

    // Steering-direction power maximization on a 5 degree azimuth grid.
    let mixed = echolive_core::audio::AudioBuffer::new(
        signal
            .channels()
            .iter()
            .zip(noise.channels())
            .map(|(s, w)| s.iter().zip(w).map(|(a, b)| a + 0.2 * b).collect())
            .collect(),
        fs,
    )
    .unwrap();
    let (best, _) = scan_directions(&mixed, &geometry, 5.0, &[0.0]).unwrap();
    assert_eq!(best.azimuth_deg, truth.azimuth_deg, "scan found {best:?}");

    pass(
        "beamforming-gain",
        &format!("SNR gain {gain_db:.2} dB (target {expected:.2} +/- 1), scan hit {} deg", best.azimuth_deg),
    );
}

// ---------------------------------------------------------------------------
// 8. Determinism
// ---------------------------------------------------------------------------

fn walk_files(root: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    files.sort();
    files
}

#[test]
fn determinism_of_simulate_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cli = env!("CARGO_BIN_EXE_echolive");
    let run = |args: &[&str]| {
        let out = Command::new(cli).args(args).current_dir(dir.path()).output().unwrap();
        assert!(
            out.status.success() || out.status.code() == Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };

    for name in ["c1", "c2"] {
        run(&["--seed", "5", "simulate", "--out", name, "--users", "2", "--trials", "3"]);
    }
    let files = walk_files(&dir.path().join("c1"));
    assert_eq!(files, walk_files(&dir.path().join("c2")));
    for rel in &files {
        let a = std::fs::read(dir.path().join("c1").join(rel)).unwrap();
        let b = std::fs::read(dir.path().join("c2").join(rel)).unwrap();
        assert_eq!(a, b, "{} differs between runs", rel.display());
    }

    run(&[
        "enroll",
        "--store",
        "profiles",
        "--user",
        "user00",
        "c1/user00/enroll_0.wav",
        "c1/user00/enroll_1.wav",
        "c1/user00/enroll_2.wav",
    ]);
    let v1 = run(&["verify", "--store", "profiles", "--user", "user00", "c1/user00/genuine_0.wav"]);
    let v2 = run(&["verify", "--store", "profiles", "--user", "user00", "c1/user00/genuine_0.wav"]);
    assert_eq!(v1.stdout, v2.stdout, "verify output must be stable");
    let line = String::from_utf8(v1.stdout).unwrap();
    assert!(
        line.starts_with("score=") && line.contains(" verdict=") && line.contains(" coverage="),
        "verdict line grammar: {line}"
    );

    pass(
        "determinism",
        &format!("{} corpus files byte-identical, verify output stable", files.len()),
    );
}
